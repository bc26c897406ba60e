use crate::error::{HocError, Result};

/// The active options `o^{1:k}` plus the primitive action slot.
///
/// Options are stored as a prefix, so the "set entries form a prefix" invariant
/// holds by construction: levels beyond `options.len()` are unset.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct OptionStack {
    options: Vec<usize>,
    pub action: Option<usize>,
}

impl OptionStack {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_options(options: Vec<usize>) -> Self {
        OptionStack {
            options,
            action: None,
        }
    }

    pub fn options(&self) -> &[usize] {
        &self.options
    }

    /// Number of set option levels.
    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }

    /// Option at 1-based level `ℓ`, if set.
    pub fn get(&self, level: usize) -> Option<usize> {
        level.checked_sub(1).and_then(|i| self.options.get(i).copied())
    }

    /// Sets the next level down.
    pub fn push(&mut self, option: usize) {
        self.options.push(option);
    }

    /// Keeps levels `1..=level` and unsets everything below, including the action.
    pub fn truncate(&mut self, level: usize) {
        self.options.truncate(level);
        self.action = None;
    }

    pub fn set(&mut self, level: usize, option: usize) -> Result<()> {
        match level {
            0 => Err(HocError::Stack("levels are 1-based".into())),
            l if l <= self.options.len() => {
                self.options[l - 1] = option;
                Ok(())
            }
            l if l == self.options.len() + 1 => {
                self.options.push(option);
                Ok(())
            }
            l => Err(HocError::Stack(format!(
                "cannot set level {l} while only {} levels are set",
                self.options.len()
            ))),
        }
    }

    /// Whether all `N-1` option levels are set.
    pub fn is_full(&self, depth: usize) -> bool {
        self.options.len() + 1 == depth
    }

    /// Errors unless exactly `depth - 1` options are set.
    pub fn require_full(&self, depth: usize) -> Result<()> {
        if self.is_full(depth) {
            Ok(())
        } else {
            Err(HocError::Stack(format!(
                "expected {} active options, found {}",
                depth - 1,
                self.options.len()
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_cannot_skip_levels() {
        let mut s = OptionStack::new();
        assert!(s.set(2, 0).is_err());
        s.set(1, 1).unwrap();
        s.set(2, 0).unwrap();
        s.set(1, 0).unwrap();
        assert_eq!(s.options(), &[0, 0]);
        assert_eq!(s.get(2), Some(0));
        assert_eq!(s.get(3), None);
    }

    #[test]
    fn truncate_clears_action() {
        let mut s = OptionStack::from_options(vec![1, 0]);
        s.action = Some(3);
        s.truncate(1);
        assert_eq!(s.options(), &[1]);
        assert_eq!(s.action, None);
        assert!(s.require_full(3).is_err());
        assert!(s.require_full(2).is_ok());
    }
}
