//! The bottom-up termination partition.
//!
//! On arrival in `s'` with active options `o^{1:N-1}`, termination is checked
//! from level `N-1` upward and stops at the first level that continues. The
//! outcome is therefore determined by the highest level that did *not*
//! terminate. Relative to a reference level `ℓ` the outcomes fall into four
//! groups, which is how the arrival value `U(s', o^{1:ℓ})` is assembled.

use crate::error::{HocError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationKind {
    /// The lowest option continues, so nothing terminates.
    NoneTerminate,
    /// Every option level terminates.
    AllTerminate,
    /// Levels `q..N-1` terminate and level `q-1 >= ℓ` continues.
    LowerOnlyTerminate(usize),
    /// Levels `i+1..N-1` terminate and level `i < ℓ` continues.
    HigherTerminate(usize),
}

impl TerminationKind {
    /// The highest option level that survives this outcome (0 when all terminate).
    pub fn surviving_level(self, depth: usize) -> usize {
        match self {
            TerminationKind::NoneTerminate => depth - 1,
            TerminationKind::AllTerminate => 0,
            TerminationKind::LowerOnlyTerminate(q) => q - 1,
            TerminationKind::HigherTerminate(i) => i,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminationEvent {
    pub kind: TerminationKind,
    pub weight: f64,
}

/// Product `Π_{j=from..=to} betas[j]` taken from the top index down (1-based levels).
pub(crate) fn product_desc(betas: &[f64], from: usize, to: usize) -> f64 {
    let mut w = 1.0;
    let mut j = to;
    while j >= from && j >= 1 {
        w *= betas[j - 1];
        j -= 1;
    }
    w
}

/// Partitions the termination outcomes relative to reference level `level`.
///
/// `betas[j-1]` is `β^j(s', o^{1:j})` for `j = 1..N-1`, so `N = betas.len() + 1`.
/// Events come out in a fixed order: `NoneTerminate`, `AllTerminate`,
/// `LowerOnlyTerminate(q)` for descending `q`, then `HigherTerminate(i)` for
/// ascending `i`. For `level = 0` there is no level above the root, so the
/// lower-only group stops at `q = 2`. A flat hierarchy (`N = 1`) has the single
/// outcome `AllTerminate` with weight 1.
pub fn termination_partition(betas: &[f64], level: usize) -> Result<Vec<TerminationEvent>> {
    let mut events = Vec::with_capacity(betas.len() + 1);
    termination_partition_into(betas, level, &mut events)?;
    Ok(events)
}

/// [`termination_partition`] into a reusable buffer.
pub fn termination_partition_into(
    betas: &[f64],
    level: usize,
    events: &mut Vec<TerminationEvent>,
) -> Result<()> {
    events.clear();
    let top = betas.len();
    if let Some(&b) = betas.iter().find(|b| !(0.0..=1.0).contains(*b)) {
        return Err(HocError::Domain {
            value: b,
            reason: "termination probability must lie in [0, 1]",
        });
    }
    if level > top {
        return Err(HocError::Level {
            level,
            depth: top + 1,
            allowed: "0..=N-1",
        });
    }
    if top == 0 {
        events.push(TerminationEvent {
            kind: TerminationKind::AllTerminate,
            weight: 1.0,
        });
        return Ok(());
    }
    let beta = |j: usize| betas[j - 1];
    events.push(TerminationEvent {
        kind: TerminationKind::NoneTerminate,
        weight: 1.0 - beta(top),
    });
    events.push(TerminationEvent {
        kind: TerminationKind::AllTerminate,
        weight: product_desc(betas, 1, top),
    });
    let lowest_q = (level + 1).max(2);
    for q in (lowest_q..=top).rev() {
        events.push(TerminationEvent {
            kind: TerminationKind::LowerOnlyTerminate(q),
            weight: (1.0 - beta(q - 1)) * product_desc(betas, q, top),
        });
    }
    for i in 1..level {
        events.push(TerminationEvent {
            kind: TerminationKind::HigherTerminate(i),
            weight: (1.0 - beta(i)) * product_desc(betas, i + 1, top),
        });
    }
    Ok(())
}
