//! Path samplers.
//!
//! Every process is described by an immutable [`ProcessSpec`]; a [`Sampler`]
//! binds the spec to a grid, doing all expensive preparation once (covariance
//! factorizations, kernel quadrature weights, log-Laplace normalizers), after
//! which [`Sampler::sample`] is a pure function of the [`RngStream`]: same
//! stream, same path, bit for bit, wherever and whenever it runs.
//!
//! Centered Gaussian families (Brownian motion and bridge, the cosine series
//! construction, fractional Brownian motion, Liouville and parametric Wiener
//! integrals, explicit Gaussian vectors) also support *coupled* sampling:
//! [`Sampler::sample_coupled`] returns the path together with its reflection,
//! built from the negated draws, which has the same law. Geometric Brownian
//! motion and Euler schemes couple through the reflected driving noise. Jump
//! processes do not support coupling.

mod linear;
mod pii;

pub use pii::{log_laplace_pii, CompoundPoisson, FixedJump, JumpLaw, PiiSpec};

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::core::{CoreError, Path, PathKind, RngStream, TimeGrid};
use crate::gaussian::{CovMatrix, GaussianError};

/// Deterministic function of time.
pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Coefficient `(t, x) -> value` for diffusions, or kernel `(t, s)` for
/// parametric Wiener integrals.
pub type CoefFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum ProcessError {
    #[error("invalid process spec: {0}")]
    InvalidSpec(String),
    #[error("covariance factorization failed: minimum eigenvalue {min_eigenvalue}")]
    Factorization { min_eigenvalue: f64 },
    #[error("kernel evaluates to {value} at argument {at}")]
    KernelNonFinite { at: f64, value: f64 },
    #[error("state became non-finite at step {step} (t = {t})")]
    NonFiniteState { step: usize, t: f64 },
    #[error("Euler step {step} exceeds the monotone-transition bound 1/Lip(b) = {bound}")]
    StepTooCoarse { step: f64, bound: f64 },
    #[error("log-Laplace undefined at u = {u}: {reason}")]
    LogLaplaceDomain { u: f64, reason: String },
    #[error("{process} does not support antithetic coupling")]
    UnsupportedCoupling { process: String },
    #[error(transparent)]
    Covariance(#[from] GaussianError),
    #[error(transparent)]
    Path(#[from] CoreError),
}

/// Euler scheme coefficients `dX = b(t, X) dt + sigma(t, X) dW`.
#[derive(Clone)]
pub struct DiffusionSpec {
    pub x0: f64,
    pub drift: CoefFn,
    pub vol: CoefFn,
    /// Lipschitz bound for `b` in `x`, if known. When supplied, binding to a
    /// grid with `h >= 1/bound` is an error (the scheme's transitions are
    /// only monotone below it); when absent the sampler carries a warning.
    pub drift_lipschitz: Option<f64>,
}

impl DiffusionSpec {
    pub fn new(
        x0: f64,
        drift: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        vol: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        drift_lipschitz: Option<f64>,
    ) -> Self {
        DiffusionSpec {
            x0,
            drift: Arc::new(drift),
            vol: Arc::new(vol),
            drift_lipschitz,
        }
    }
}

/// Geometric Brownian motion `S_t = s0 exp(sigma W_t + (rate - sigma^2/2) t)`,
/// sampled exactly on the grid nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GbmSpec {
    pub s0: f64,
    pub rate: f64,
    pub sigma: f64,
}

/// Process family. Function-valued fields are shared closures so specs stay
/// cheap to clone and safe to use across threads.
#[derive(Clone)]
pub enum ProcessSpec {
    BrownianMotion,
    BrownianBridge,
    /// Truncated cosine series with nonnegative coefficient functions:
    /// `sqrt(2T) sum_m xi_m (1 - cos(pi m t / T)) / (pi m)`, `m = 1..=n_terms`.
    SeriesBm { n_terms: usize },
    /// Fractional Brownian motion, exact Gaussian vector via a factorization
    /// of the covariance `(t^2H + s^2H - |t-s|^2H) / 2`.
    FractionalBm { hurst: f64 },
    /// Fractional Brownian motion by the moving-average (Mandelbrot-Van Ness)
    /// representation: two independent Wiener integrals with kernels
    /// `(t+s)^(H-1/2) - s^(H-1/2)` on `(0, inf)` (truncated at `tail_cutoff`,
    /// geometric subgrid of `quad_steps` cells) and `(t-s)^(H-1/2)` on
    /// `[0, t]`, normalized so the variance at `t` is `t^2H`.
    FractionalBmMvn { hurst: f64, tail_cutoff: Option<f64>, quad_steps: Option<usize> },
    /// `X_t = integral_0^t f(t-s) dW_s` by discrete convolution; the kernel
    /// is evaluated at cell left points in its own argument, with the
    /// diagonal argument 0 replaced by `h/2`.
    Liouville { kernel: TimeFn },
    /// `X_t = integral_0^inf f(t, s) dW_s`, truncated and discretized on the
    /// same geometric subgrid as the moving-average fBm.
    WienerParam { kernel: CoefFn, tail_cutoff: Option<f64>, quad_steps: Option<usize> },
    Diffusion(DiffusionSpec),
    Gbm(GbmSpec),
    /// Finite-activity process with independent increments.
    Pii(PiiSpec),
    /// `s0 exp(X_t)` for a PII `X`; with `martingale` the exponential is
    /// normalized by the log-Laplace at 1 so every node mean is exactly `s0`.
    ExpPii { s0: f64, pii: PiiSpec, martingale: bool },
    /// An explicit centered Gaussian vector read as a path on the unit-step
    /// grid over `[0, d-1]`.
    GaussianVector(CovMatrix),
}

impl ProcessSpec {
    pub fn name(&self) -> String {
        match self {
            ProcessSpec::BrownianMotion => "brownian_motion".into(),
            ProcessSpec::BrownianBridge => "brownian_bridge".into(),
            ProcessSpec::SeriesBm { n_terms } => format!("series_bm(n={n_terms})"),
            ProcessSpec::FractionalBm { hurst } => format!("fbm(H={hurst})"),
            ProcessSpec::FractionalBmMvn { hurst, .. } => format!("fbm_mvn(H={hurst})"),
            ProcessSpec::Liouville { .. } => "liouville".into(),
            ProcessSpec::WienerParam { .. } => "wiener_param".into(),
            ProcessSpec::Diffusion(_) => "euler_diffusion".into(),
            ProcessSpec::Gbm(g) => format!("gbm(s0={},r={},sigma={})", g.s0, g.rate, g.sigma),
            ProcessSpec::Pii(_) => "pii".into(),
            ProcessSpec::ExpPii { .. } => "exp_pii".into(),
            ProcessSpec::GaussianVector(c) => format!("gaussian_vector(d={})", c.dim()),
        }
    }
}

// Closure-valued variants have nothing better to show than the name.
impl fmt::Debug for ProcessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ProcessSpec({})", self.name())
    }
}

enum Kind {
    BrownianMotion,
    BrownianBridge,
    Linear(linear::LinearMap),
    Gbm(GbmSpec),
    Euler(DiffusionSpec),
    Pii(pii::PreparedPii),
    ExpPii { s0: f64, prepared: pii::PreparedPii, log_norm: Vec<f64> },
}

/// A process bound to a grid, ready for bulk sampling.
pub struct Sampler {
    grid: TimeGrid,
    name: String,
    kind: Kind,
    warnings: Vec<String>,
}

impl Sampler {
    pub fn new(spec: &ProcessSpec, grid: TimeGrid) -> Result<Self, ProcessError> {
        let mut warnings = Vec::new();
        let kind = match spec {
            ProcessSpec::BrownianMotion => Kind::BrownianMotion,
            ProcessSpec::BrownianBridge => Kind::BrownianBridge,
            ProcessSpec::SeriesBm { n_terms } => {
                if *n_terms == 0 {
                    return Err(ProcessError::InvalidSpec("series needs n_terms >= 1".into()));
                }
                Kind::Linear(linear::series_basis(grid, *n_terms))
            }
            ProcessSpec::FractionalBm { hurst } => {
                check_hurst(*hurst)?;
                Kind::Linear(linear::fbm_factor(grid, *hurst)?)
            }
            ProcessSpec::FractionalBmMvn { hurst, tail_cutoff, quad_steps } => {
                check_hurst(*hurst)?;
                let cutoff = tail_cutoff.unwrap_or(50.0 * grid.horizon());
                let steps = quad_steps.unwrap_or(512);
                Kind::Linear(linear::fbm_mvn_weights(grid, *hurst, cutoff, steps)?)
            }
            ProcessSpec::Liouville { kernel } => {
                Kind::Linear(linear::liouville_weights(grid, kernel)?)
            }
            ProcessSpec::WienerParam { kernel, tail_cutoff, quad_steps } => {
                let cutoff = tail_cutoff.unwrap_or(50.0 * grid.horizon());
                let steps = quad_steps.unwrap_or(512);
                Kind::Linear(linear::wiener_param_weights(grid, kernel, cutoff, steps)?)
            }
            ProcessSpec::Diffusion(spec) => {
                if let Some(bound) = spec.drift_lipschitz {
                    if !(bound.is_finite() && bound >= 0.0) {
                        return Err(ProcessError::InvalidSpec(format!(
                            "drift Lipschitz bound must be finite and nonnegative, got {bound}"
                        )));
                    }
                    if bound > 0.0 && grid.step() >= 1.0 / bound {
                        return Err(ProcessError::StepTooCoarse {
                            step: grid.step(),
                            bound: 1.0 / bound,
                        });
                    }
                } else {
                    warnings.push(
                        "no drift Lipschitz bound supplied; the monotone-transition \
                         condition h < 1/Lip(b) is unchecked"
                            .into(),
                    );
                }
                Kind::Euler(spec.clone())
            }
            ProcessSpec::Gbm(g) => {
                if !(g.s0.is_finite() && g.s0 > 0.0) || !g.rate.is_finite() {
                    return Err(ProcessError::InvalidSpec(format!(
                        "gbm needs s0 > 0 and finite rate, got s0 = {}, rate = {}",
                        g.s0, g.rate
                    )));
                }
                if !(g.sigma.is_finite() && g.sigma >= 0.0) {
                    return Err(ProcessError::InvalidSpec(format!(
                        "gbm volatility must be finite and nonnegative, got {}",
                        g.sigma
                    )));
                }
                Kind::Gbm(*g)
            }
            ProcessSpec::Pii(spec) => Kind::Pii(pii::prepare(spec, grid)?),
            ProcessSpec::ExpPii { s0, pii: spec, martingale } => {
                if !(s0.is_finite() && *s0 > 0.0) {
                    return Err(ProcessError::InvalidSpec(format!(
                        "exp_pii needs s0 > 0, got {s0}"
                    )));
                }
                let prepared = pii::prepare(spec, grid)?;
                let log_norm = if *martingale {
                    (0..grid.n_nodes())
                        .map(|k| log_laplace_pii(spec, 1.0, grid.node(k)))
                        .collect::<Result<Vec<f64>, _>>()?
                } else {
                    vec![0.0; grid.n_nodes()]
                };
                Kind::ExpPii { s0: *s0, prepared, log_norm }
            }
            ProcessSpec::GaussianVector(cov) => {
                if cov.dim() < 2 {
                    return Err(ProcessError::InvalidSpec(
                        "a Gaussian vector path needs dimension >= 2".into(),
                    ));
                }
                if grid.n_nodes() != cov.dim() {
                    return Err(ProcessError::InvalidSpec(format!(
                        "grid has {} nodes but the covariance is {}-dimensional",
                        grid.n_nodes(),
                        cov.dim()
                    )));
                }
                Kind::Linear(linear::gaussian_vector_factor(cov))
            }
        };
        Ok(Sampler { grid, name: spec.name(), kind, warnings })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Non-fatal advisories collected while binding (e.g. an unchecked Euler
    /// monotonicity condition).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn supports_coupling(&self) -> bool {
        !matches!(self.kind, Kind::Pii(_) | Kind::ExpPii { .. })
    }

    /// Node-by-node means, when the spec admits a closed form.
    pub fn node_means(&self) -> Option<Vec<f64>> {
        match &self.kind {
            Kind::BrownianMotion | Kind::BrownianBridge | Kind::Linear(_) => {
                Some(vec![0.0; self.grid.n_nodes()])
            }
            Kind::Gbm(g) => {
                Some(self.grid.nodes().map(|t| g.s0 * (g.rate * t).exp()).collect())
            }
            Kind::Euler(_) => None,
            Kind::Pii(p) => Some(p.node_means(&self.grid)),
            Kind::ExpPii { s0, prepared, log_norm } => {
                // E s0 e^{X - psi(1)} = s0 e^{psi(1) - psi(1)}; without the
                // normalizer the mean needs psi(1), which prepare() validated
                // only in the martingale case, so recompute and bail on a
                // domain failure.
                let psi: Result<Vec<f64>, _> = (0..self.grid.n_nodes())
                    .map(|k| log_laplace_pii(&prepared.spec, 1.0, self.grid.node(k)))
                    .collect();
                match psi {
                    Ok(psi) => Some(
                        psi.iter()
                            .zip(log_norm)
                            .map(|(p, ln)| s0 * (p - ln).exp())
                            .collect(),
                    ),
                    Err(_) => None,
                }
            }
        }
    }

    /// Draw one path. Deterministic in `stream`.
    pub fn sample(&self, stream: RngStream) -> Result<Path, ProcessError> {
        let mut rng = stream.rng();
        self.sample_with(&mut rng)
    }

    /// Draw a path and its antithetic partner from one stream. The partner
    /// is built from the negated Gaussian draws, so for centered Gaussian
    /// processes it is exactly `-X`, and for GBM/Euler the path driven by
    /// the reflected noise.
    pub fn sample_coupled(&self, stream: RngStream) -> Result<(Path, Path), ProcessError> {
        if !self.supports_coupling() {
            return Err(ProcessError::UnsupportedCoupling { process: self.name.clone() });
        }
        let mut rng = stream.rng();
        let n = self.gaussian_draws();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let neg: Vec<f64> = z.iter().map(|x| -x).collect();
        let a = self.path_from_draws(&z)?;
        let b = self.path_from_draws(&neg)?;
        Ok((a, b))
    }

    fn gaussian_draws(&self) -> usize {
        match &self.kind {
            Kind::BrownianMotion | Kind::BrownianBridge | Kind::Gbm(_) | Kind::Euler(_) => {
                self.grid.n_steps()
            }
            Kind::Linear(map) => map.draws,
            Kind::Pii(_) | Kind::ExpPii { .. } => unreachable!("coupling rejected above"),
        }
    }

    fn sample_with(&self, rng: &mut ChaCha8Rng) -> Result<Path, ProcessError> {
        match &self.kind {
            Kind::Pii(prepared) => {
                let values = prepared.sample_nodes(&self.grid, rng)?;
                Ok(Path::new(self.grid, values, PathKind::Cadlag)?)
            }
            Kind::ExpPii { s0, prepared, log_norm } => {
                let x = prepared.sample_nodes(&self.grid, rng)?;
                let values =
                    x.iter().zip(log_norm).map(|(x, ln)| s0 * (x - ln).exp()).collect();
                Ok(Path::new(self.grid, values, PathKind::Cadlag)?)
            }
            _ => {
                let n = self.gaussian_draws();
                let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                self.path_from_draws(&z)
            }
        }
    }

    /// Gaussian-driven variants only.
    fn path_from_draws(&self, z: &[f64]) -> Result<Path, ProcessError> {
        let grid = self.grid;
        let n = grid.n_steps();
        let values = match &self.kind {
            Kind::BrownianMotion => bm_values(grid, z),
            Kind::BrownianBridge => {
                let mut w = bm_values(grid, z);
                let wt = w[n];
                let horizon = grid.horizon();
                for (k, v) in w.iter_mut().enumerate() {
                    *v -= grid.node(k) / horizon * wt;
                }
                w
            }
            Kind::Linear(map) => map.apply(z),
            Kind::Gbm(g) => {
                let w = bm_values(grid, z);
                let half = g.rate - 0.5 * g.sigma * g.sigma;
                w.iter()
                    .enumerate()
                    .map(|(k, wk)| g.s0 * (g.sigma * wk + half * grid.node(k)).exp())
                    .collect()
            }
            Kind::Euler(spec) => {
                let h = grid.step();
                let sqrt_h = h.sqrt();
                let mut values = Vec::with_capacity(grid.n_nodes());
                let mut x = spec.x0;
                values.push(x);
                for (k, zk) in z.iter().enumerate() {
                    let t = grid.node(k);
                    x += h * (spec.drift)(t, x) + (spec.vol)(t, x) * sqrt_h * zk;
                    if !x.is_finite() {
                        return Err(ProcessError::NonFiniteState {
                            step: k + 1,
                            t: grid.node(k + 1),
                        });
                    }
                    values.push(x);
                }
                values
            }
            Kind::Pii(_) | Kind::ExpPii { .. } => unreachable!("jump kinds sample directly"),
        };
        Ok(Path::new(grid, values, PathKind::Continuous)?)
    }
}

impl fmt::Debug for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Sampler")
            .field("name", &self.name)
            .field("grid", &self.grid)
            .finish()
    }
}

fn check_hurst(h: f64) -> Result<(), ProcessError> {
    if !(h.is_finite() && h > 0.0 && h <= 1.0) {
        return Err(ProcessError::InvalidSpec(format!(
            "Hurst index must lie in (0, 1], got {h}"
        )));
    }
    Ok(())
}

/// Cumulative sums of `sqrt(h) z_k`, starting at 0.
fn bm_values(grid: TimeGrid, z: &[f64]) -> Vec<f64> {
    let sqrt_h = grid.step().sqrt();
    let mut values = Vec::with_capacity(grid.n_nodes());
    let mut acc = 0.0;
    values.push(acc);
    for zk in z {
        acc += sqrt_h * zk;
        values.push(acc);
    }
    values
}

/// The fractional Brownian covariance `(t^2H + s^2H - |t-s|^2H) / 2` on the
/// grid nodes (including the degenerate t = 0 row).
pub fn fbm_covariance(grid: TimeGrid, hurst: f64) -> Result<CovMatrix, ProcessError> {
    check_hurst(hurst)?;
    let nodes: Vec<f64> = grid.nodes().collect();
    let two_h = 2.0 * hurst;
    let m = nalgebra::DMatrix::from_fn(nodes.len(), nodes.len(), |i, j| {
        0.5 * (nodes[i].powf(two_h) + nodes[j].powf(two_h)
            - (nodes[i] - nodes[j]).abs().powf(two_h))
    });
    Ok(CovMatrix::new(m)?)
}

// One-shot convenience wrappers. Bulk sampling should hold a `Sampler`, which
// amortizes the preparation these redo on every call.

pub fn simulate_bm(grid: TimeGrid, stream: RngStream) -> Result<Path, ProcessError> {
    Sampler::new(&ProcessSpec::BrownianMotion, grid)?.sample(stream)
}

pub fn simulate_bm_series(
    grid: TimeGrid,
    n_terms: usize,
    stream: RngStream,
) -> Result<Path, ProcessError> {
    Sampler::new(&ProcessSpec::SeriesBm { n_terms }, grid)?.sample(stream)
}

pub fn simulate_bridge(grid: TimeGrid, stream: RngStream) -> Result<Path, ProcessError> {
    Sampler::new(&ProcessSpec::BrownianBridge, grid)?.sample(stream)
}

pub fn simulate_fbm_cholesky(
    grid: TimeGrid,
    hurst: f64,
    stream: RngStream,
) -> Result<Path, ProcessError> {
    Sampler::new(&ProcessSpec::FractionalBm { hurst }, grid)?.sample(stream)
}

pub fn simulate_fbm_mvn(
    grid: TimeGrid,
    hurst: f64,
    tail_cutoff: Option<f64>,
    quad_steps: Option<usize>,
    stream: RngStream,
) -> Result<Path, ProcessError> {
    Sampler::new(&ProcessSpec::FractionalBmMvn { hurst, tail_cutoff, quad_steps }, grid)?
        .sample(stream)
}

pub fn simulate_liouville(
    grid: TimeGrid,
    kernel: impl Fn(f64) -> f64 + Send + Sync + 'static,
    stream: RngStream,
) -> Result<Path, ProcessError> {
    Sampler::new(&ProcessSpec::Liouville { kernel: Arc::new(kernel) }, grid)?.sample(stream)
}

pub fn simulate_wiener_param(
    grid: TimeGrid,
    kernel: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    tail_cutoff: Option<f64>,
    quad_steps: Option<usize>,
    stream: RngStream,
) -> Result<Path, ProcessError> {
    let spec =
        ProcessSpec::WienerParam { kernel: Arc::new(kernel), tail_cutoff, quad_steps };
    Sampler::new(&spec, grid)?.sample(stream)
}

/// Plain or antithetic-coupled Euler paths.
pub fn simulate_euler(
    spec: &DiffusionSpec,
    grid: TimeGrid,
    stream: RngStream,
    antithetic: bool,
) -> Result<(Path, Option<Path>), ProcessError> {
    let sampler = Sampler::new(&ProcessSpec::Diffusion(spec.clone()), grid)?;
    if antithetic {
        let (a, b) = sampler.sample_coupled(stream)?;
        Ok((a, Some(b)))
    } else {
        Ok((sampler.sample(stream)?, None))
    }
}

pub fn simulate_gbm_exact(
    spec: GbmSpec,
    grid: TimeGrid,
    stream: RngStream,
) -> Result<Path, ProcessError> {
    Sampler::new(&ProcessSpec::Gbm(spec), grid)?.sample(stream)
}

pub fn simulate_pii(
    spec: &PiiSpec,
    grid: TimeGrid,
    stream: RngStream,
) -> Result<Path, ProcessError> {
    Sampler::new(&ProcessSpec::Pii(spec.clone()), grid)?.sample(stream)
}
