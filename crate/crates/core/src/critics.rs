use crate::config::HierarchyConfig;
use crate::error::Result;
use crate::layout::Layout;

/// Per-level critic tables `Q_U(s, o^{1:ℓ})` for `ℓ = 1..N`.
///
/// The level-`N` table is `Q_U(s, o^{1:N-1}, a)`. `Q_Ω` and `V_Ω` are never
/// stored; they are recomputed from these tables under the current policies.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticSet {
    layout: Layout,
    pub q_u: Vec<Vec<f64>>,
}

impl CriticSet {
    pub fn zeros(config: &HierarchyConfig) -> Self {
        let layout = config.layout();
        let q_u = (1..=layout.depth())
            .map(|l| vec![0.0; layout.entry_count(l)])
            .collect();
        CriticSet { layout, q_u }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// `Q_U(state, path)` at level `path.len()`.
    pub fn get(&self, state: usize, path: &[usize]) -> Result<f64> {
        let i = self.layout.entry_index(state, path)?;
        Ok(self.q_u[path.len() - 1][i])
    }

    pub fn get_mut(&mut self, state: usize, path: &[usize]) -> Result<&mut f64> {
        let i = self.layout.entry_index(state, path)?;
        Ok(&mut self.q_u[path.len() - 1][i])
    }

    /// The `Q_U` entries for every choice at level `ℓ` in context `(state, prefix)`.
    pub fn row(&self, level: usize, state: usize, prefix: &[usize]) -> Result<&[f64]> {
        let ctx = self.layout.context_index(level, state, prefix)?;
        let n = self.layout.choices(level);
        Ok(&self.q_u[level - 1][ctx * n..(ctx + 1) * n])
    }
}
