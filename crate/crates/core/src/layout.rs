use crate::error::{HocError, Result};

/// Mixed-radix indexing of augmented states `(s, o^{1:ℓ})`.
///
/// Every per-level table (policy logits, termination logits, critics) is a flat
/// `Vec<f64>` laid out as `((s * n_1 + o^1) * n_2 + o^2) * ...`, so the entries
/// for one context `(s, o^{1:ℓ-1})` at level `ℓ` are contiguous.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    num_states: usize,
    /// Choices per level `1..N`; the last entry is the action count.
    choices: Vec<usize>,
}

impl Layout {
    pub fn new(num_states: usize, options_per_level: &[usize], num_actions: usize) -> Self {
        let mut choices = options_per_level.to_vec();
        choices.push(num_actions);
        Layout {
            num_states,
            choices,
        }
    }

    pub fn depth(&self) -> usize {
        self.choices.len()
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn choices(&self, level: usize) -> usize {
        self.choices[level - 1]
    }

    /// Number of contexts `(s, o^{1:ℓ-1})` feeding level `ℓ`.
    pub fn context_count(&self, level: usize) -> usize {
        self.num_states * self.choices[..level - 1].iter().product::<usize>()
    }

    /// Number of entries `(s, o^{1:ℓ})` at level `ℓ`.
    pub fn entry_count(&self, level: usize) -> usize {
        self.context_count(level) * self.choices(level)
    }

    /// Number of full option stacks `o^{1:N-1}` (1 for a flat hierarchy).
    pub fn stack_count(&self) -> usize {
        self.choices[..self.depth() - 1].iter().product()
    }

    pub fn check_level(&self, level: usize) -> Result<()> {
        if level == 0 || level > self.depth() {
            return Err(HocError::Level {
                level,
                depth: self.depth(),
                allowed: "1..=N",
            });
        }
        Ok(())
    }

    /// Flat index of context `(state, prefix)` where `prefix = o^{1:ℓ-1}`.
    pub fn context_index(&self, level: usize, state: usize, prefix: &[usize]) -> Result<usize> {
        self.check_level(level)?;
        if prefix.len() != level - 1 {
            return Err(HocError::Stack(format!(
                "level {level} needs a prefix of {} options, got {}",
                level - 1,
                prefix.len()
            )));
        }
        if state >= self.num_states {
            return Err(HocError::index("state", state, self.num_states));
        }
        let mut idx = state;
        for (j, &o) in prefix.iter().enumerate() {
            if o >= self.choices[j] {
                return Err(HocError::index("option", o, self.choices[j]));
            }
            idx = idx * self.choices[j] + o;
        }
        Ok(idx)
    }

    /// Flat index of entry `(state, path)` where `path = o^{1:ℓ}` and `ℓ = path.len()`.
    pub fn entry_index(&self, state: usize, path: &[usize]) -> Result<usize> {
        let level = path.len();
        if level == 0 {
            return Err(HocError::Stack("entry path must be non-empty".into()));
        }
        let ctx = self.context_index(level, state, &path[..level - 1])?;
        let n = self.choices(level);
        let last = path[level - 1];
        if last >= n {
            return Err(HocError::index("choice", last, n));
        }
        Ok(ctx * n + last)
    }

    /// Index of a full option stack `o^{1:N-1}` in `0..stack_count()`.
    pub fn stack_index(&self, options: &[usize]) -> usize {
        options
            .iter()
            .zip(&self.choices)
            .fold(0, |acc, (&o, &n)| acc * n + o)
    }

    /// Inverse of [`Layout::stack_index`].
    pub fn stack_from_index(&self, mut index: usize) -> Vec<usize> {
        let levels = self.depth() - 1;
        let mut out = vec![0; levels];
        for j in (0..levels).rev() {
            out[j] = index % self.choices[j];
            index /= self.choices[j];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indices_are_dense_and_unique() {
        let l = Layout::new(3, &[2, 3], 4);
        assert_eq!(l.entry_count(1), 6);
        assert_eq!(l.entry_count(2), 18);
        assert_eq!(l.entry_count(3), 72);
        let mut seen = vec![false; 72];
        for s in 0..3 {
            for a in 0..2 {
                for b in 0..3 {
                    for c in 0..4 {
                        let i = l.entry_index(s, &[a, b, c]).unwrap();
                        assert!(!seen[i]);
                        seen[i] = true;
                    }
                }
            }
        }
        assert!(seen.iter().all(|&x| x));
    }

    #[test]
    fn stack_index_roundtrip() {
        let l = Layout::new(2, &[2, 3, 2], 2);
        for i in 0..l.stack_count() {
            assert_eq!(l.stack_index(&l.stack_from_index(i)), i);
        }
    }

    #[test]
    fn out_of_range_is_index_error() {
        let l = Layout::new(2, &[2], 3);
        assert!(matches!(l.context_index(2, 2, &[0]), Err(HocError::Index { .. })));
        assert!(matches!(l.entry_index(0, &[2]), Err(HocError::Index { .. })));
        assert!(matches!(l.context_index(3, 0, &[0, 0]), Err(HocError::Level { .. })));
    }
}
