//! JSON experiment configs.
//!
//! Every block is strict: unknown keys are rejected with the key name so a
//! typo cannot silently change an experiment. Seeds are mandatory, there is
//! no wall-clock default anywhere. Closure-valued process parameters are
//! exposed as small parametric families (power kernels, affine coefficients)
//! so a config file can name them.

use std::sync::Arc;

use serde::Deserialize;

use comonotone::barrier::{BarrierError, BarrierKind, BarrierSpec};
use comonotone::core::TimeGrid;
use comonotone::functionals::{
    self, compose, integral, FunctionalError, MonotoneFunctional, ScalarMap, WeightMeasure,
};
use comonotone::gaussian::CovMatrix;
use comonotone::peacock::ConvexTestFn;
use comonotone::processes::{
    CompoundPoisson, DiffusionSpec, FixedJump, GbmSpec, JumpLaw, PiiSpec, ProcessSpec,
};

use crate::CliError;

fn invalid(what: impl std::fmt::Display) -> CliError {
    CliError::Invalid(what.to_string())
}

impl From<FunctionalError> for CliError {
    fn from(e: FunctionalError) -> Self {
        invalid(e)
    }
}

impl From<BarrierError> for CliError {
    fn from(e: BarrierError) -> Self {
        invalid(e)
    }
}

/// Top-level experiment, dispatched on the `kind` key.
#[derive(Debug)]
pub enum ExperimentConfig {
    Simulate(SimulateCfg),
    Comonotony(ComonotonyCfg),
    Antithetic(AntitheticCfg),
    Peacock(PeacockCfg),
    Barrier(BarrierCfg),
    Pitt(PittCfg),
}

/// Parse a config. The `kind` key picks the experiment shape; everything
/// else is deserialized directly from the source text so error messages
/// carry the JSON path, line and column of the offending key.
pub fn parse(text: &str) -> Result<ExperimentConfig, String> {
    #[derive(Deserialize)]
    struct Probe {
        kind: KindName,
    }
    #[derive(Clone, Copy, Deserialize)]
    #[serde(rename_all = "snake_case")]
    enum KindName {
        Simulate,
        Comonotony,
        Antithetic,
        Peacock,
        Barrier,
        Pitt,
    }
    fn full<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, String> {
        let mut de = serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(&mut de).map_err(|e| e.to_string())
    }
    let probe: Probe = serde_json::from_str(text).map_err(|e| e.to_string())?;
    Ok(match probe.kind {
        KindName::Simulate => ExperimentConfig::Simulate(full(text)?),
        KindName::Comonotony => ExperimentConfig::Comonotony(full(text)?),
        KindName::Antithetic => ExperimentConfig::Antithetic(full(text)?),
        KindName::Peacock => ExperimentConfig::Peacock(full(text)?),
        KindName::Barrier => ExperimentConfig::Barrier(full(text)?),
        KindName::Pitt => ExperimentConfig::Pitt(full(text)?),
    })
}

impl ExperimentConfig {
    /// Apply command-line overrides on top of the file values.
    pub fn apply_overrides(&mut self, paths: Option<usize>, seed: Option<u64>) {
        let (n, s) = match self {
            ExperimentConfig::Simulate(c) => (Some(&mut c.n_paths), &mut c.seed),
            ExperimentConfig::Comonotony(c) => (Some(&mut c.n_paths), &mut c.seed),
            ExperimentConfig::Antithetic(c) => (Some(&mut c.n_pairs), &mut c.seed),
            ExperimentConfig::Peacock(c) => (Some(&mut c.n_paths), &mut c.seed),
            ExperimentConfig::Barrier(c) => (Some(&mut c.n_paths), &mut c.seed),
            ExperimentConfig::Pitt(c) => (None, &mut c.seed),
        };
        if let (Some(n), Some(paths)) = (n, paths) {
            *n = paths;
        }
        if let Some(seed) = seed {
            *s = seed;
        }
    }

    /// Output directory named in the config, if any (`--out` wins over it).
    pub fn out_dir(&self) -> Option<&str> {
        match self {
            ExperimentConfig::Simulate(c) => c.out.as_deref(),
            ExperimentConfig::Comonotony(c) => c.out.as_deref(),
            ExperimentConfig::Antithetic(c) => c.out.as_deref(),
            ExperimentConfig::Peacock(c) => c.out.as_deref(),
            ExperimentConfig::Barrier(c) => c.out.as_deref(),
            ExperimentConfig::Pitt(c) => c.out.as_deref(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCfg {
    pub horizon: f64,
    pub n_steps: usize,
}

impl GridCfg {
    pub fn build(&self) -> Result<TimeGrid, CliError> {
        TimeGrid::new(self.horizon, self.n_steps).map_err(invalid)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateCfg {
    /// Discriminator, consumed by the top-level probe.
    #[serde(rename = "kind")]
    pub _kind: String,
    pub process: ProcessCfg,
    pub grid: GridCfg,
    pub n_paths: usize,
    pub seed: u64,
    pub out: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComonotonyCfg {
    #[serde(rename = "kind")]
    pub _kind: String,
    pub process: ProcessCfg,
    pub grid: GridCfg,
    pub functionals: Vec<FunctionalCfg>,
    /// Index pairs into `functionals`; defaults to every pair `i <= j`.
    pub pairs: Option<Vec<(usize, usize)>>,
    pub n_paths: usize,
    pub seed: u64,
    pub out: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntitheticCfg {
    #[serde(rename = "kind")]
    pub _kind: String,
    pub process: ProcessCfg,
    pub grid: GridCfg,
    pub functional: FunctionalCfg,
    pub n_pairs: usize,
    /// Bootstrap resamples for the 99% CI of the variance ratio.
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    pub seed: u64,
    pub out: Option<String>,
}

fn default_bootstrap() -> usize {
    1000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeacockCfg {
    #[serde(rename = "kind")]
    pub _kind: String,
    pub family: PeacockFamilyCfg,
    /// Simulation grid; ignored by the gridless `scalar_vega` family.
    pub grid: Option<GridCfg>,
    pub n_paths: usize,
    pub seed: u64,
    pub out: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeacockFamilyCfg {
    ExpPii(ExpPiiFamilyCfg),
    AsianVega(AsianVegaCfg),
    Carr(CarrCfg),
    Centered(CenteredCfg),
    ScalarVega(ScalarVegaCfg),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpPiiFamilyCfg {
    pub pii: PiiCfg,
    pub measure: MeasureCfg,
    pub phi: PhiCfg,
    pub sigma_grid: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsianVegaCfg {
    pub s0: f64,
    pub rate: f64,
    pub strike: f64,
    pub sigma_grid: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarrCfg {
    pub phi: PhiCfg,
    pub t_grid: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CenteredCfg {
    pub process: ProcessCfg,
    pub measure: MeasureCfg,
    pub phi: PhiCfg,
    pub t_grid: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarVegaCfg {
    pub phi: PhiCfg,
    pub sigma: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierCfg {
    #[serde(rename = "kind")]
    pub _kind: String,
    pub process: ProcessCfg,
    pub grid: GridCfg,
    pub barrier: BarrierBlockCfg,
    pub n_paths: usize,
    pub seed: u64,
    pub out: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierBlockCfg {
    pub kind: BarrierKindCfg,
    pub strike: f64,
    pub level: f64,
    pub window: Option<(f64, f64)>,
    pub discount: Option<f64>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierKindCfg {
    DownIn,
    DownOut,
    UpIn,
    UpOut,
}

impl BarrierBlockCfg {
    pub fn build(&self) -> Result<BarrierSpec, CliError> {
        let kind = match self.kind {
            BarrierKindCfg::DownIn => BarrierKind::DownIn,
            BarrierKindCfg::DownOut => BarrierKind::DownOut,
            BarrierKindCfg::UpIn => BarrierKind::UpIn,
            BarrierKindCfg::UpOut => BarrierKind::UpOut,
        };
        let mut spec = BarrierSpec::new(kind, self.strike, self.level)?;
        if let Some((from, to)) = self.window {
            spec = spec.with_window(from, to)?;
        }
        if let Some(d) = self.discount {
            spec = spec.with_discount(d)?;
        }
        Ok(spec)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PittCfg {
    #[serde(rename = "kind")]
    pub _kind: String,
    pub matrix: MatrixCfg,
    #[serde(default)]
    pub nmf: Option<NmfCfg>,
    pub seed: u64,
    pub out: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixCfg {
    Horn,
    Custom(CustomMatrixCfg),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomMatrixCfg {
    pub rows: Vec<Vec<f64>>,
}

impl MatrixCfg {
    pub fn build(&self) -> Result<CovMatrix, CliError> {
        match self {
            MatrixCfg::Horn => Ok(comonotone::gaussian::horn_matrix()),
            MatrixCfg::Custom(c) => CovMatrix::from_rows(&c.rows).map_err(invalid),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NmfCfg {
    /// Inclusive factorization rank range to try.
    pub ranks: (usize, usize),
    #[serde(default = "default_nmf_tol")]
    pub tol: f64,
    #[serde(default = "default_nmf_iter")]
    pub max_iter: usize,
}

fn default_nmf_tol() -> f64 {
    1e-8
}

fn default_nmf_iter() -> usize {
    2000
}

// ---------------------------------------------------------------------------
// process families

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessCfg {
    BrownianMotion,
    BrownianBridge,
    SeriesBm(SeriesBmCfg),
    Fbm(FbmCfg),
    FbmMvn(FbmMvnCfg),
    Liouville(LiouvilleCfg),
    Euler(EulerCfg),
    Gbm(GbmCfg),
    Pii(PiiCfg),
    ExpPii(ExpPiiCfg),
    GaussianVector(GaussianVectorCfg),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesBmCfg {
    pub n_terms: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FbmCfg {
    pub hurst: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FbmMvnCfg {
    pub hurst: f64,
    pub tail_cutoff: Option<f64>,
    pub quad_steps: Option<usize>,
}

/// Power kernel `f(u) = u^exponent` for the Liouville convolution.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiouvilleCfg {
    pub exponent: f64,
}

/// Affine Euler coefficients: drift `a + b x`, volatility `c + d t`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EulerCfg {
    pub x0: f64,
    pub drift_a: f64,
    pub drift_b: f64,
    pub vol_c: f64,
    pub vol_d: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbmCfg {
    pub s0: f64,
    pub rate: f64,
    pub sigma: f64,
}

/// Linear characteristics: drift `slope * t`, variance `slope * t`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiiCfg {
    pub drift_slope: f64,
    pub variance_slope: f64,
    pub poisson: Option<PoissonCfg>,
    #[serde(default)]
    pub fixed_jumps: Vec<FixedJumpCfg>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpPiiCfg {
    pub s0: f64,
    pub pii: PiiCfg,
    pub martingale: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianVectorCfg {
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoissonCfg {
    pub intensity: f64,
    pub jump: JumpCfg,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedJumpCfg {
    pub time: f64,
    pub law: JumpCfg,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpCfg {
    Constant(ConstantJumpCfg),
    Normal(NormalJumpCfg),
    Exponential(ExponentialJumpCfg),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantJumpCfg {
    pub value: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalJumpCfg {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentialJumpCfg {
    pub rate: f64,
}

impl JumpCfg {
    fn build(&self) -> JumpLaw {
        match self {
            JumpCfg::Constant(c) => JumpLaw::Constant(c.value),
            JumpCfg::Normal(c) => JumpLaw::Normal { mean: c.mean, std: c.std },
            JumpCfg::Exponential(c) => JumpLaw::Exponential { rate: c.rate },
        }
    }
}

impl PiiCfg {
    pub fn build(&self) -> PiiSpec {
        let drift = self.drift_slope;
        let var = self.variance_slope;
        PiiSpec {
            drift: Arc::new(move |t| drift * t),
            variance: Arc::new(move |t| var * t),
            poisson: self.poisson.as_ref().map(|p| CompoundPoisson {
                intensity: p.intensity,
                jump: p.jump.build(),
            }),
            fixed_jumps: self
                .fixed_jumps
                .iter()
                .map(|f| FixedJump { time: f.time, law: f.law.build() })
                .collect(),
        }
    }
}

impl ProcessCfg {
    pub fn build(&self) -> Result<ProcessSpec, CliError> {
        Ok(match self {
            ProcessCfg::BrownianMotion => ProcessSpec::BrownianMotion,
            ProcessCfg::BrownianBridge => ProcessSpec::BrownianBridge,
            ProcessCfg::SeriesBm(c) => ProcessSpec::SeriesBm { n_terms: c.n_terms },
            ProcessCfg::Fbm(c) => ProcessSpec::FractionalBm { hurst: c.hurst },
            ProcessCfg::FbmMvn(c) => ProcessSpec::FractionalBmMvn {
                hurst: c.hurst,
                tail_cutoff: c.tail_cutoff,
                quad_steps: c.quad_steps,
            },
            ProcessCfg::Liouville(c) => {
                let e = c.exponent;
                if !(e.is_finite() && e >= 0.0) {
                    return Err(invalid(format!(
                        "liouville exponent must be finite and >= 0, got {e}"
                    )));
                }
                ProcessSpec::Liouville { kernel: Arc::new(move |u| u.powf(e)) }
            }
            ProcessCfg::Euler(c) => {
                let (a, b) = (c.drift_a, c.drift_b);
                let (vc, vd) = (c.vol_c, c.vol_d);
                ProcessSpec::Diffusion(DiffusionSpec::new(
                    c.x0,
                    move |_, x| a + b * x,
                    move |t, _| vc + vd * t,
                    Some(b.abs()),
                ))
            }
            ProcessCfg::Gbm(c) => {
                ProcessSpec::Gbm(GbmSpec { s0: c.s0, rate: c.rate, sigma: c.sigma })
            }
            ProcessCfg::Pii(c) => ProcessSpec::Pii(c.build()),
            ProcessCfg::ExpPii(c) => ProcessSpec::ExpPii {
                s0: c.s0,
                pii: c.pii.build(),
                martingale: c.martingale,
            },
            ProcessCfg::GaussianVector(c) => {
                ProcessSpec::GaussianVector(CovMatrix::from_rows(&c.rows).map_err(invalid)?)
            }
        })
    }
}

// ---------------------------------------------------------------------------
// functionals and test functions

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalCfg {
    Terminal,
    ValueAt(ValueAtCfg),
    RunningMax,
    RunningMin,
    Call(CallCfg),
    DownIndicator(IndicatorCfg),
    UpIndicator(IndicatorCfg),
    Integral(IntegralCfg),
    Compose(ComposeCfg),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueAtCfg {
    pub t: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CallCfg {
    pub strike: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndicatorCfg {
    pub level: f64,
    pub eps: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegralCfg {
    pub measure: MeasureCfg,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComposeCfg {
    pub map: MapCfg,
    pub inner: Box<FunctionalCfg>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapCfg {
    Neg,
    Exp,
    Square,
}

impl FunctionalCfg {
    pub fn build(&self) -> Result<MonotoneFunctional, CliError> {
        Ok(match self {
            FunctionalCfg::Terminal => functionals::terminal(),
            FunctionalCfg::ValueAt(c) => functionals::value_at(c.t),
            FunctionalCfg::RunningMax => functionals::running_max(),
            FunctionalCfg::RunningMin => functionals::running_min(),
            FunctionalCfg::Call(c) => functionals::call_payoff(c.strike)?,
            FunctionalCfg::DownIndicator(c) => {
                functionals::smoothed_down_indicator(c.level, c.eps)?
            }
            FunctionalCfg::UpIndicator(c) => functionals::smoothed_up_indicator(c.level, c.eps)?,
            FunctionalCfg::Integral(c) => integral(c.measure.build()?),
            FunctionalCfg::Compose(c) => {
                let map = match c.map {
                    MapCfg::Neg => ScalarMap::negation(),
                    MapCfg::Exp => ScalarMap::exp(),
                    MapCfg::Square => ScalarMap::square(),
                };
                compose(&map, &c.inner.build()?)
            }
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureCfg {
    Lebesgue(LebesgueCfg),
    ExpWeighted(ExpWeightedCfg),
    Dirac(DiracCfg),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LebesgueCfg {
    pub scale: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpWeightedCfg {
    pub rate: f64,
    pub scale: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiracCfg {
    pub t: f64,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

fn default_weight() -> f64 {
    1.0
}

impl MeasureCfg {
    pub fn build(&self) -> Result<WeightMeasure, CliError> {
        Ok(match self {
            MeasureCfg::Lebesgue(c) => WeightMeasure::lebesgue(c.scale)?,
            MeasureCfg::ExpWeighted(c) => WeightMeasure::exp_weighted(c.rate, c.scale)?,
            MeasureCfg::Dirac(c) => WeightMeasure::dirac_weighted(c.t, c.weight)?,
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiCfg {
    CallPart(CallPartCfg),
    AbsDev(AbsDevCfg),
    Square,
    SoftPlus(SoftPlusCfg),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CallPartCfg {
    pub strike: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsDevCfg {
    pub center: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoftPlusCfg {
    pub strike: f64,
    pub eps: f64,
}

impl PhiCfg {
    pub fn build(&self) -> ConvexTestFn {
        match self {
            PhiCfg::CallPart(c) => ConvexTestFn::CallPart { strike: c.strike },
            PhiCfg::AbsDev(c) => ConvexTestFn::AbsDev { center: c.center },
            PhiCfg::Square => ConvexTestFn::Square,
            PhiCfg::SoftPlus(c) => ConvexTestFn::SoftPlus { strike: c.strike, eps: c.eps },
        }
    }
}
