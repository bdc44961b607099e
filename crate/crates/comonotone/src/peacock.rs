//! Convex-order (peacock) monotonicity checks.
//!
//! A family `(Y_t)` is a peacock when `t -> E phi(Y_t)` is non-decreasing for
//! every convex `phi`. Closed-form convex order is rarely available, so these
//! curves are tested statistically: every parameter point is evaluated on the
//! *same* driving noise (common random numbers), monotonicity is judged on
//! the paired consecutive differences, and a curve passes when no difference
//! drops below `-z` standard errors of that difference. Pointwise confidence
//! intervals would be hopelessly conservative by comparison.
//!
//! Curves provided: the exponential-PII peacock in the volatility parameter,
//! the centered antiderivative of an integrable process in time, the Asian
//! call premium in volatility, the running-average exponential martingale in
//! maturity, and the scalar vega identity tying a finite difference to its
//! Cameron-Martin representation.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::comonotony::{Verdict, DEFAULT_Z};
use crate::core::{CoreError, MCEstimate, RngStream, TimeGrid, AUX_STREAM_BASE};
use crate::functionals::{FunctionalError, WeightMeasure};
use crate::processes::{
    log_laplace_pii, GbmSpec, PiiSpec, ProcessError, ProcessSpec, Sampler,
};

/// Step used by the central finite difference in [`scalar_vega_identity`].
pub const DELTA_SIGMA: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum PeacockError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("t = {0} is not a node of the simulation grid")]
    NotAGridNode(f64),
    #[error("value became non-finite at parameter {parameter} on path {path}")]
    NonFiniteValue { parameter: f64, path: usize },
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// Convex test function with an explicit right derivative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConvexTestFn {
    /// `(x - strike)_+`
    CallPart { strike: f64 },
    /// `|x - center|`
    AbsDev { center: f64 },
    /// `x^2`
    Square,
    /// `eps * ln(1 + exp((x - strike)/eps))`, a smooth call part.
    SoftPlus { strike: f64, eps: f64 },
}

impl ConvexTestFn {
    pub fn validate(&self) -> Result<(), PeacockError> {
        let ok = match self {
            ConvexTestFn::CallPart { strike } => strike.is_finite(),
            ConvexTestFn::AbsDev { center } => center.is_finite(),
            ConvexTestFn::Square => true,
            ConvexTestFn::SoftPlus { strike, eps } => {
                strike.is_finite() && eps.is_finite() && *eps > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(PeacockError::InvalidParameter(format!("{self:?}")))
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ConvexTestFn::CallPart { strike } => (x - strike).max(0.0),
            ConvexTestFn::AbsDev { center } => (x - center).abs(),
            ConvexTestFn::Square => x * x,
            ConvexTestFn::SoftPlus { strike, eps } => {
                let u = (x - strike) / eps;
                // ln(1 + e^u) = u + ln(1 + e^-u) for large u; avoids overflow
                if u > 30.0 {
                    eps * (u + (-u).exp().ln_1p())
                } else {
                    eps * u.exp().ln_1p()
                }
            }
        }
    }

    /// Right derivative, the version the convex-order calculus uses at kinks.
    pub fn right_derivative(&self, x: f64) -> f64 {
        match self {
            ConvexTestFn::CallPart { strike } => {
                if x >= *strike {
                    1.0
                } else {
                    0.0
                }
            }
            ConvexTestFn::AbsDev { center } => {
                if x >= *center {
                    1.0
                } else {
                    -1.0
                }
            }
            ConvexTestFn::Square => 2.0 * x,
            ConvexTestFn::SoftPlus { strike, eps } => {
                let u = (x - strike) / eps;
                if u >= 0.0 {
                    1.0 / (1.0 + (-u).exp())
                } else {
                    let e = u.exp();
                    e / (1.0 + e)
                }
            }
        }
    }
}

impl fmt::Display for ConvexTestFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConvexTestFn::CallPart { strike } => write!(f, "call_part({strike})"),
            ConvexTestFn::AbsDev { center } => write!(f, "abs_dev({center})"),
            ConvexTestFn::Square => write!(f, "square"),
            ConvexTestFn::SoftPlus { strike, eps } => write!(f, "softplus({strike},{eps})"),
        }
    }
}

/// A curve of estimates over a parameter grid, all points sharing the same
/// driving noise, with the paired consecutive differences that carry the
/// monotonicity test.
#[derive(Clone, Debug)]
pub struct PeacockCurve {
    pub name: String,
    pub parameters: Vec<f64>,
    pub estimates: Vec<MCEstimate>,
    /// `differences[i]` estimates `value(p[i+1]) - value(p[i])` from the
    /// per-path paired differences.
    pub differences: Vec<MCEstimate>,
    pub z_threshold: f64,
    /// Violation iff some consecutive difference sits below `-z` times its
    /// own standard error.
    pub verdict: Verdict,
    /// Non-fatal diagnostics (pre-pass means, discretization conventions).
    pub notes: Vec<String>,
}

impl PeacockCurve {
    /// Most negative studentized difference, 0 for single-point curves.
    pub fn worst_z(&self) -> f64 {
        self.differences
            .iter()
            .map(|d| {
                if d.std_error > 0.0 {
                    d.mean / d.std_error
                } else if d.mean >= 0.0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            })
            .fold(0.0, f64::min)
    }
}

fn check_parameter_grid(parameters: &[f64]) -> Result<(), PeacockError> {
    if parameters.is_empty() {
        return Err(PeacockError::InvalidParameter("empty parameter grid".into()));
    }
    if parameters.iter().any(|p| !p.is_finite()) {
        return Err(PeacockError::InvalidParameter("non-finite parameter".into()));
    }
    if parameters.windows(2).any(|w| w[0] >= w[1]) {
        return Err(PeacockError::InvalidParameter(
            "parameter grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Evaluate `row(i) -> values at every parameter` for each path index in
/// parallel, then fold into per-parameter columns. Path order decides which
/// error surfaces, so failures replay exactly like successes.
fn per_path_matrix<F>(
    n_paths: usize,
    n_params: usize,
    row: F,
) -> Result<Vec<Vec<f64>>, PeacockError>
where
    F: Fn(usize) -> Result<Vec<f64>, PeacockError> + Send + Sync,
{
    if n_paths < 2 {
        return Err(PeacockError::InvalidParameter(format!(
            "need at least two paths, got {n_paths}"
        )));
    }
    let rows: Vec<Result<Vec<f64>, PeacockError>> =
        (0..n_paths).into_par_iter().map(row).collect();
    let mut columns: Vec<Vec<f64>> =
        (0..n_params).map(|_| Vec::with_capacity(n_paths)).collect();
    for r in rows {
        for (col, v) in columns.iter_mut().zip(r?) {
            col.push(v);
        }
    }
    Ok(columns)
}

fn curve_from_columns(
    name: String,
    parameters: &[f64],
    columns: Vec<Vec<f64>>,
    notes: Vec<String>,
) -> Result<PeacockCurve, PeacockError> {
    let estimates = columns
        .iter()
        .map(|c| MCEstimate::from_samples(c))
        .collect::<Result<Vec<_>, _>>()?;
    let differences = columns
        .windows(2)
        .map(|w| {
            let d: Vec<f64> = w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect();
            MCEstimate::from_samples(&d)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let verdict = if differences
        .iter()
        .any(|d| d.mean < -DEFAULT_Z * d.std_error)
    {
        Verdict::Violation
    } else {
        Verdict::Consistent
    };
    Ok(PeacockCurve {
        name,
        parameters: parameters.to_vec(),
        estimates,
        differences,
        z_threshold: DEFAULT_Z,
        verdict,
        notes,
    })
}

/// `sigma -> E phi( integral_0^T exp(sigma X_t - Psi(sigma, t)) mu(dt) )`
/// for a process with independent increments; the normalization by the
/// log-Laplace exponent makes each integrand a unit-mean exponential, and
/// the curve a peacock in sigma.
pub fn exp_pii_peacock(
    spec: &PiiSpec,
    measure: &WeightMeasure,
    phi: &ConvexTestFn,
    sigma_grid: &[f64],
    grid: TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<PeacockCurve, PeacockError> {
    phi.validate()?;
    check_parameter_grid(sigma_grid)?;
    let weights = measure.node_weights(&grid)?;
    let sampler = Sampler::new(&ProcessSpec::Pii(spec.clone()), grid)?;

    // One log-Laplace table up front; a domain failure is a precondition
    // violation, not a per-path event.
    let psi: Vec<Vec<f64>> = sigma_grid
        .iter()
        .map(|&s| {
            (0..grid.n_nodes())
                .map(|k| log_laplace_pii(spec, s, grid.node(k)))
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Result<_, _>>()?;

    let columns = per_path_matrix(n_paths, sigma_grid.len(), |i| {
        let path = sampler.sample(RngStream::new(seed, i as u64))?;
        let values = path.values();
        sigma_grid
            .iter()
            .zip(&psi)
            .map(|(&sigma, psi_row)| {
                let mut acc = 0.0;
                for (k, w) in weights.iter().enumerate() {
                    if *w != 0.0 {
                        acc += w * (sigma * values[k] - psi_row[k]).exp();
                    }
                }
                let v = phi.eval(acc);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(PeacockError::NonFiniteValue { parameter: sigma, path: i })
                }
            })
            .collect()
    })?;

    curve_from_columns(
        format!("exp_pii_peacock[{phi}]"),
        sigma_grid,
        columns,
        Vec::new(),
    )
}

/// How the node means used for centering were obtained.
enum MeanSource {
    Closed,
    PrePass { n_paths: usize, max_std_error: f64 },
}

/// `t -> E phi( integral_[0,t] (X_s - E X_s) mu(ds) )`, a peacock for any
/// integrable cadlag process. Each `t` counts the nodes with `t_k <= t`.
/// Node means come from the sampler's closed form when it has one, else
/// from a pre-pass with ten times the path budget on auxiliary streams; its
/// residual standard error is recorded in the curve notes.
pub fn centered_antiderivative_peacock(
    sampler: &Sampler,
    measure: &WeightMeasure,
    phi: &ConvexTestFn,
    t_grid: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<PeacockCurve, PeacockError> {
    phi.validate()?;
    check_parameter_grid(t_grid)?;
    let grid = sampler.grid();
    if t_grid[0] < 0.0 || *t_grid.last().expect("non-empty checked") > grid.horizon() {
        return Err(PeacockError::InvalidParameter(format!(
            "t grid must stay within [0, {}]",
            grid.horizon()
        )));
    }
    let weights = measure.node_weights(&grid)?;

    let (means, source) = match sampler.node_means() {
        Some(m) => (m, MeanSource::Closed),
        None => pre_pass_means(sampler, 10 * n_paths, seed)?,
    };

    // cutoffs[j] = number of leading nodes with t_k <= t_grid[j]
    let cutoffs: Vec<usize> = t_grid
        .iter()
        .map(|&t| (0..grid.n_nodes()).take_while(|&k| grid.node(k) <= t).count())
        .collect();

    let columns = per_path_matrix(n_paths, t_grid.len(), |i| {
        let path = sampler.sample(RngStream::new(seed, i as u64))?;
        let values = path.values();
        let mut out = Vec::with_capacity(t_grid.len());
        let mut acc = 0.0;
        let mut upto = 0;
        for (j, &cut) in cutoffs.iter().enumerate() {
            while upto < cut {
                acc += weights[upto] * (values[upto] - means[upto]);
                upto += 1;
            }
            let v = phi.eval(acc);
            if v.is_finite() {
                out.push(v);
            } else {
                return Err(PeacockError::NonFiniteValue {
                    parameter: t_grid[j],
                    path: i,
                });
            }
        }
        Ok(out)
    })?;

    let notes = match source {
        MeanSource::Closed => Vec::new(),
        MeanSource::PrePass { n_paths, max_std_error } => vec![format!(
            "node means from a {n_paths}-path pre-pass; worst standard error {max_std_error:.3e}"
        )],
    };
    curve_from_columns(
        format!("centered_antiderivative[{phi}]"),
        t_grid,
        columns,
        notes,
    )
}

/// Deterministic chunked mean of every node value over auxiliary streams.
/// The reduction tree depends only on the path count, never on workers.
fn pre_pass_means(
    sampler: &Sampler,
    n_paths: usize,
    seed: u64,
) -> Result<(Vec<f64>, MeanSource), PeacockError> {
    const CHUNK: usize = 1024;
    let n_nodes = sampler.grid().n_nodes();
    let n_chunks = n_paths.div_ceil(CHUNK);

    struct ChunkSums {
        sum: Vec<f64>,
        sum_sq: Vec<f64>,
    }

    let chunks: Vec<Result<ChunkSums, PeacockError>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(n_paths);
            let mut sum = vec![0.0; n_nodes];
            let mut sum_sq = vec![0.0; n_nodes];
            for i in lo..hi {
                let path =
                    sampler.sample(RngStream::new(seed, AUX_STREAM_BASE + i as u64))?;
                for (k, v) in path.values().iter().enumerate() {
                    sum[k] += v;
                    sum_sq[k] += v * v;
                }
            }
            Ok(ChunkSums { sum, sum_sq })
        })
        .collect();

    let mut sum = vec![0.0; n_nodes];
    let mut sum_sq = vec![0.0; n_nodes];
    for chunk in chunks {
        let c = chunk?;
        for k in 0..n_nodes {
            sum[k] += c.sum[k];
            sum_sq[k] += c.sum_sq[k];
        }
    }

    let n = n_paths as f64;
    let means: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let max_std_error = (0..n_nodes)
        .map(|k| {
            let var = ((sum_sq[k] - sum[k] * sum[k] / n) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        })
        .fold(0.0, f64::max);
    Ok((means, MeanSource::PrePass { n_paths, max_std_error }))
}

/// Asian call premium as a function of volatility:
/// `Premium_0(sigma) = exp(-rT) E ( (1/T) integral_0^T S_s ds - K )_+`,
/// with `S` the exact geometric Brownian motion built from one Brownian
/// path family shared by every `sigma`. The base spec supplies `s0` and the
/// rate; its own volatility is ignored in favor of the grid.
pub fn asian_vega_curve(
    base: GbmSpec,
    sigma_grid: &[f64],
    strike: f64,
    grid: TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<PeacockCurve, PeacockError> {
    check_parameter_grid(sigma_grid)?;
    if sigma_grid[0] <= 0.0 {
        return Err(PeacockError::InvalidParameter(
            "volatilities must be positive".into(),
        ));
    }
    if !(strike.is_finite() && strike >= 0.0) {
        return Err(PeacockError::InvalidParameter(format!(
            "strike must be finite and nonnegative, got {strike}"
        )));
    }
    let bm = Sampler::new(&ProcessSpec::BrownianMotion, grid)?;
    let discount = (-base.rate * grid.horizon()).exp();
    let h_over_t = grid.step() / grid.horizon();
    let n = grid.n_steps();

    let columns = per_path_matrix(n_paths, sigma_grid.len(), |i| {
        let w = bm.sample(RngStream::new(seed, i as u64))?;
        let w = w.values();
        sigma_grid
            .iter()
            .map(|&sigma| {
                let half = base.rate - 0.5 * sigma * sigma;
                let mut avg = 0.0;
                for k in 0..n {
                    avg += h_over_t * base.s0 * (sigma * w[k] + half * grid.node(k)).exp();
                }
                let v = discount * (avg - strike).max(0.0);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(PeacockError::NonFiniteValue { parameter: sigma, path: i })
                }
            })
            .collect()
    })?;

    curve_from_columns(format!("asian_vega[K={strike}]"), sigma_grid, columns, Vec::new())
}

/// Running-average exponential martingale in its maturity:
/// `t -> E phi( (1/t) integral_0^t exp(B_s - s/2) ds )`. Every `t` must be a
/// node of the grid so the discrete average keeps mean exactly one.
pub fn carr_maturity_curve(
    phi: &ConvexTestFn,
    t_grid: &[f64],
    grid: TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<PeacockCurve, PeacockError> {
    phi.validate()?;
    check_parameter_grid(t_grid)?;
    if t_grid[0] <= 0.0 {
        return Err(PeacockError::InvalidParameter(
            "maturities must be positive".into(),
        ));
    }
    let node_ids: Vec<usize> = t_grid
        .iter()
        .map(|&t| match grid.node_index_of(t) {
            Some(k) if k > 0 => Ok(k),
            _ => Err(PeacockError::NotAGridNode(t)),
        })
        .collect::<Result<_, _>>()?;

    let bm = Sampler::new(&ProcessSpec::BrownianMotion, grid)?;
    let h = grid.step();

    let columns = per_path_matrix(n_paths, t_grid.len(), |i| {
        let path = bm.sample(RngStream::new(seed, i as u64))?;
        let w = path.values();
        let mut out = Vec::with_capacity(node_ids.len());
        let mut acc = 0.0;
        let mut upto = 0;
        for (j, &m) in node_ids.iter().enumerate() {
            while upto < m {
                acc += h * (w[upto] - 0.5 * grid.node(upto)).exp();
                upto += 1;
            }
            // m*h instead of node(m): keeps acc/t == 1 bitwise at m = 1
            let v = phi.eval(acc / (m as f64 * h));
            if v.is_finite() {
                out.push(v);
            } else {
                return Err(PeacockError::NonFiniteValue {
                    parameter: t_grid[j],
                    path: i,
                });
            }
        }
        Ok(out)
    })?;

    curve_from_columns(format!("carr_maturity[{phi}]"), t_grid, columns, Vec::new())
}

/// Both sides of the scalar vega identity on common normal draws:
/// a central finite difference of `f(sigma) = E phi(exp(sigma Z - sigma^2/2))`
/// against the Cameron-Martin form `f'(sigma) = E phi'(exp(sigma Z +
/// sigma^2/2)) Z`. Returns `(finite_difference, cameron_martin)`.
pub fn scalar_vega_identity(
    phi: &ConvexTestFn,
    sigma: f64,
    n_samples: usize,
    seed: u64,
) -> Result<(MCEstimate, MCEstimate), PeacockError> {
    phi.validate()?;
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(PeacockError::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if n_samples < 2 {
        return Err(PeacockError::InvalidParameter(format!(
            "need at least two samples, got {n_samples}"
        )));
    }

    let up = sigma + DELTA_SIGMA;
    let down = sigma - DELTA_SIGMA;
    let rows: Vec<(f64, f64)> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed, i as u64).rng();
            let z: f64 = rng.sample(StandardNormal);
            let f_up = phi.eval((up * z - 0.5 * up * up).exp());
            let f_down = phi.eval((down * z - 0.5 * down * down).exp());
            let fd = (f_up - f_down) / (2.0 * DELTA_SIGMA);
            let cm = phi.right_derivative((sigma * z + 0.5 * sigma * sigma).exp()) * z;
            (fd, cm)
        })
        .collect();

    let fd: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let cm: Vec<f64> = rows.iter().map(|r| r.1).collect();
    Ok((MCEstimate::from_samples(&fd)?, MCEstimate::from_samples(&cm)?))
}
