use crate::config::HierarchyConfig;
use crate::error::{HocError, Result};
use crate::layout::Layout;

/// Tabular actor parameters: softmax logits `θ^ℓ` for levels `1..N` and
/// sigmoid termination logits `φ^ℓ` for levels `1..N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    layout: Layout,
    /// `policy_logits[ℓ-1]` is indexed by entry `(s, o^{1:ℓ})`.
    pub policy_logits: Vec<Vec<f64>>,
    /// `termination_logits[ℓ-1]` is indexed by entry `(s, o^{1:ℓ})`.
    pub termination_logits: Vec<Vec<f64>>,
}

impl ParameterSet {
    /// All logits zero: uniform policies and β = 0.5 everywhere.
    pub fn zeros(config: &HierarchyConfig) -> Self {
        let layout = config.layout();
        let depth = layout.depth();
        let policy_logits = (1..=depth).map(|l| vec![0.0; layout.entry_count(l)]).collect();
        let termination_logits = (1..depth)
            .map(|l| vec![0.0; layout.entry_count(l)])
            .collect();
        ParameterSet {
            layout,
            policy_logits,
            termination_logits,
        }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn depth(&self) -> usize {
        self.layout.depth()
    }

    /// Logits of `π^ℓ(· | state, prefix)`.
    pub fn policy_row(&self, level: usize, state: usize, prefix: &[usize]) -> Result<&[f64]> {
        let ctx = self.layout.context_index(level, state, prefix)?;
        let n = self.layout.choices(level);
        Ok(&self.policy_logits[level - 1][ctx * n..(ctx + 1) * n])
    }

    pub fn policy_row_mut(
        &mut self,
        level: usize,
        state: usize,
        prefix: &[usize],
    ) -> Result<&mut [f64]> {
        let ctx = self.layout.context_index(level, state, prefix)?;
        let n = self.layout.choices(level);
        Ok(&mut self.policy_logits[level - 1][ctx * n..(ctx + 1) * n])
    }

    fn termination_slot(&self, state: usize, path: &[usize]) -> Result<(usize, usize)> {
        let level = path.len();
        if level == 0 || level >= self.depth() {
            return Err(HocError::Level {
                level,
                depth: self.depth(),
                allowed: "1..=N-1",
            });
        }
        Ok((level - 1, self.layout.entry_index(state, path)?))
    }

    /// Termination logit of `β^ℓ(state, o^{1:ℓ})` with `ℓ = path.len()`.
    pub fn termination_logit(&self, state: usize, path: &[usize]) -> Result<f64> {
        let (l, i) = self.termination_slot(state, path)?;
        Ok(self.termination_logits[l][i])
    }

    pub fn termination_logit_mut(&mut self, state: usize, path: &[usize]) -> Result<&mut f64> {
        let (l, i) = self.termination_slot(state, path)?;
        Ok(&mut self.termination_logits[l][i])
    }
}
