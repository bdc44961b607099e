use super::CoreError;

/// Uniform grid on `[0, horizon]` with `n_steps` cells, so `n_steps + 1`
/// nodes `t_k = horizon * k / n_steps`.
///
/// Nodes are computed as `horizon * (k as f64 / n_steps as f64)` so that
/// `node(0) == 0.0` and `node(n_steps) == horizon` hold exactly in floating
/// point, and nodes are strictly increasing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self, CoreError> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(CoreError::InvalidGrid(format!(
                "horizon must be finite and positive, got {horizon}"
            )));
        }
        if n_steps == 0 {
            return Err(CoreError::InvalidGrid("n_steps must be >= 1".into()));
        }
        Ok(TimeGrid { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of nodes, `n_steps + 1`.
    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    /// Cell width `horizon / n_steps`.
    pub fn step(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Node `t_k`. Panics if `k > n_steps`.
    pub fn node(&self, k: usize) -> f64 {
        assert!(k <= self.n_steps, "node index {k} out of range");
        self.horizon * (k as f64 / self.n_steps as f64)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes()).map(move |k| self.node(k))
    }

    /// Index of the node equal to `t` (within `1e-9` cells), if any.
    pub fn node_index_of(&self, t: f64) -> Option<usize> {
        if !t.is_finite() || t < 0.0 || t > self.horizon {
            return None;
        }
        let k = (t / self.step()).round() as usize;
        let k = k.min(self.n_steps);
        if (t - self.node(k)).abs() <= 1e-9 * self.step() {
            Some(k)
        } else {
            None
        }
    }

    /// Index `k` of the cell `[t_k, t_{k+1})` containing `t`, clamped so the
    /// horizon itself belongs to the last cell. `None` outside `[0, horizon]`.
    pub fn cell_of(&self, t: f64) -> Option<usize> {
        if !t.is_finite() || t < 0.0 || t > self.horizon {
            return None;
        }
        let k = (t / self.step()).floor() as usize;
        Some(k.min(self.n_steps - 1))
    }
}
