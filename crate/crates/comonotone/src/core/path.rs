use super::{CoreError, TimeGrid};

/// How node values extend to a function on the whole interval.
///
/// `Continuous` paths interpolate linearly between nodes; `Cadlag` paths are
/// right-continuous step functions (the value on `[t_k, t_{k+1})` is the node
/// value at `t_k`, and the horizon keeps its own node value).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathKind {
    Continuous,
    Cadlag,
}

/// A scalar path sampled on a uniform grid.
#[derive(Clone, Debug)]
pub struct Path {
    grid: TimeGrid,
    values: Vec<f64>,
    kind: PathKind,
}

impl Path {
    /// Requires one finite value per grid node.
    pub fn new(grid: TimeGrid, values: Vec<f64>, kind: PathKind) -> Result<Self, CoreError> {
        if values.len() != grid.n_nodes() {
            return Err(CoreError::InvalidPath(format!(
                "expected {} node values, got {}",
                grid.n_nodes(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::InvalidPath(format!(
                "non-finite value {} at node {k}",
                values[k]
            )));
        }
        Ok(Path { grid, values, kind })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node_value(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("paths have at least two nodes")
    }

    /// Value at an arbitrary time, by interpolation or step lookup according
    /// to the path kind. Returns NaN outside `[0, horizon]`; estimators
    /// reject non-finite functional values, so out-of-domain evaluation
    /// surfaces as an error there rather than a silent clamp.
    pub fn value_at(&self, t: f64) -> f64 {
        match self.kind {
            PathKind::Continuous => linear_interpolate(self, t),
            PathKind::Cadlag => match self.grid.cell_of(t) {
                Some(k) => {
                    if t >= self.grid.node(k + 1) {
                        // only reachable at t == horizon
                        self.values[k + 1]
                    } else {
                        self.values[k]
                    }
                }
                None => f64::NAN,
            },
        }
    }

    pub fn running_max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn running_min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Piecewise-linear value at `t`:
/// `((t_{k+1} - t) * x_k + (t - t_k) * x_{k+1}) / h` on the cell containing
/// `t`. NaN outside `[0, horizon]`.
pub fn linear_interpolate(path: &Path, t: f64) -> f64 {
    let grid = path.grid();
    let Some(k) = grid.cell_of(t) else {
        return f64::NAN;
    };
    let (t0, t1) = (grid.node(k), grid.node(k + 1));
    let h = grid.step();
    let (x0, x1) = (path.node_value(k), path.node_value(k + 1));
    ((t1 - t) * x0 + (t - t0) * x1) / h
}

/// The cadlag stepwise approximation built from the same node values: the
/// function equal to `x_k` on `[t_k, t_{k+1})` and to the terminal value at
/// the horizon. Node values are untouched; only the interpretation flips.
pub fn stepwise_approximation(path: &Path) -> Path {
    Path {
        grid: path.grid,
        values: path.values.clone(),
        kind: PathKind::Cadlag,
    }
}

/// Pointwise partial order on a shared grid: `a <= b` at every node.
pub fn pointwise_leq(a: &Path, b: &Path) -> Result<bool, CoreError> {
    if a.grid() != b.grid() {
        return Err(CoreError::GridMismatch(a.grid().n_nodes(), b.grid().n_nodes()));
    }
    Ok(a.values().iter().zip(b.values()).all(|(x, y)| x <= y))
}
