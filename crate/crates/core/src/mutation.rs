//! Fault injection for mutation testing of the verification suite.
//!
//! With the `mutation-testing` feature enabled, a thread-local switch lets a
//! test deliberately break one formula and confirm that some check notices.
//! Without the feature [`is_active`] is a constant `false`.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    /// Negate the termination update.
    TerminationSignFlip,
    /// Replace the gate `Π_{i>ℓ} β^i` by 1.
    DropGate,
    /// Drop the "no option terminates" term of the arrival value.
    OmitNoneTerm,
    /// Drop the "every option terminates" term of the arrival value.
    OmitAllTerm,
    /// Drop the "only lower options terminate" terms of the arrival value.
    OmitLowerOnlyTerm,
    /// Drop the "a higher option terminates" terms of the arrival value.
    OmitHigherTerm,
}

impl Mutation {
    pub const ALL: [Mutation; 6] = [
        Mutation::TerminationSignFlip,
        Mutation::DropGate,
        Mutation::OmitNoneTerm,
        Mutation::OmitAllTerm,
        Mutation::OmitLowerOnlyTerm,
        Mutation::OmitHigherTerm,
    ];
}

#[cfg(feature = "mutation-testing")]
mod imp {
    use super::Mutation;
    use std::cell::Cell;

    thread_local! {
        static ACTIVE: Cell<Option<Mutation>> = const { Cell::new(None) };
    }

    pub fn is_active(m: Mutation) -> bool {
        ACTIVE.with(|a| a.get() == Some(m))
    }

    pub fn set(m: Option<Mutation>) {
        ACTIVE.with(|a| a.set(m));
    }
}

#[cfg(not(feature = "mutation-testing"))]
mod imp {
    use super::Mutation;

    #[inline(always)]
    pub fn is_active(_m: Mutation) -> bool {
        false
    }

    pub fn set(m: Option<Mutation>) {
        if m.is_some() {
            panic!("built without the mutation-testing feature");
        }
    }
}

pub use imp::{is_active, set};

/// Activates a mutation on the current thread until the guard drops.
pub struct MutationGuard;

impl MutationGuard {
    pub fn activate(m: Mutation) -> Self {
        set(Some(m));
        MutationGuard
    }
}

impl Drop for MutationGuard {
    fn drop(&mut self) {
        set(None);
    }
}
