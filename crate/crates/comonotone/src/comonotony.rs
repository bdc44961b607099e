//! Covariance sign tests, the antithetic estimator, and the running-extrema
//! conditioning check.
//!
//! The testable claim: when `F` and `G` are monotone in the same direction,
//! `Cov(F(X), G(X)) >= 0` on every co-monotone process, and `<= 0` when the
//! directions oppose. A test can only ever *refute* at a confidence level,
//! so verdicts are one-sided at `z_threshold` standard errors (default 4,
//! false-alarm rate about 3e-5 per test), with a fourth-moment guard that
//! downgrades to inconclusive when the CLT standard error itself is not
//! trustworthy.
//!
//! `F` and `G` are always evaluated on identical paths (paired design);
//! independence across paths comes from one RNG stream per path index, so
//! every estimate is reproducible from the seed alone, whatever the worker
//! count. Reductions are fixed-shape pairwise sums for the same reason.

use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::core::{
    kurtosis, pairwise_sum, sample_mean, CoreError, MCEstimate, RngStream, AUX_STREAM_BASE,
};
use crate::functionals::{MonotoneFunctional, Monotonicity};
use crate::processes::{ProcessError, Sampler};

/// Default one-sided threshold in standard errors.
pub const DEFAULT_Z: f64 = 4.0;
/// Fourth-moment ratio above which a sign test refuses to conclude.
pub const KURTOSIS_GUARD: f64 = 100.0;
/// Minimum budget for a covariance sign test.
pub const MIN_COV_PATHS: usize = 100;

#[derive(Debug, Error)]
pub enum ComonotonyError {
    #[error("covariance tests need at least {MIN_COV_PATHS} paths, got {0}")]
    TooFewPaths(usize),
    #[error("functional {functional} returned {value} on path {path}")]
    NonFiniteFunctional { functional: String, value: f64, path: usize },
    #[error("pair index {index} is out of range for {len} functionals")]
    PairOutOfRange { index: usize, len: usize },
    #[error("conditioning level x = {x} exceeds the barrier y = {y}")]
    LevelAboveBarrier { x: f64, y: f64 },
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// Sign of the covariance the co-monotony principle predicts for a pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictedSign {
    NonNegative,
    NonPositive,
    NoPrediction,
}

impl PredictedSign {
    pub fn from_pair(f: Monotonicity, g: Monotonicity) -> Self {
        use Monotonicity::*;
        match (f, g) {
            (Unknown, _) | (_, Unknown) => PredictedSign::NoPrediction,
            (a, b) if a == b => PredictedSign::NonNegative,
            _ => PredictedSign::NonPositive,
        }
    }
}

impl fmt::Display for PredictedSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PredictedSign::NonNegative => ">=0",
            PredictedSign::NonPositive => "<=0",
            PredictedSign::NoPrediction => "none",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Consistent,
    Violation,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Consistent => "consistent",
            Verdict::Violation => "violation",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// One covariance sign test.
#[derive(Clone, Debug)]
pub struct CovTestReport {
    pub process: String,
    pub f_name: String,
    pub g_name: String,
    pub cov_estimate: f64,
    pub std_error: f64,
    pub z_score: f64,
    pub kurtosis: f64,
    pub n_paths: usize,
    pub predicted_sign: PredictedSign,
    pub z_threshold: f64,
    pub verdict: Verdict,
}

impl fmt::Display for CovTestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "cov({}, {}) on {}: {:.6e} +- {:.2e} (predicted {}) -> {}",
            self.f_name,
            self.g_name,
            self.process,
            self.cov_estimate,
            self.std_error,
            self.predicted_sign,
            self.verdict
        )
    }
}

// The guard outranks the sign rule: an estimate beyond the threshold on the
// wrong side is still only "inconclusive" when the fourth moment says the
// standard error cannot be trusted. Same for moments that overflowed.
fn judge(predicted: PredictedSign, cov: f64, se: f64, z: f64, kurt: f64) -> Verdict {
    match predicted {
        PredictedSign::NoPrediction => Verdict::Inconclusive,
        _ if !cov.is_finite() || !se.is_finite() || !kurt.is_finite() => Verdict::Inconclusive,
        _ if kurt > KURTOSIS_GUARD => Verdict::Inconclusive,
        PredictedSign::NonNegative if cov < -z * se => Verdict::Violation,
        PredictedSign::NonPositive if cov > z * se => Verdict::Violation,
        _ => Verdict::Consistent,
    }
}

fn z_score(cov: f64, se: f64) -> f64 {
    if se > 0.0 {
        cov / se
    } else if cov == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(cov)
    }
}

/// Evaluate every functional on every path, one RNG stream per path index.
/// Returns one value vector per functional. The first failure by path order
/// wins, so errors are as reproducible as results.
pub fn evaluate_matrix(
    sampler: &Sampler,
    functionals: &[&MonotoneFunctional],
    n_paths: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, ComonotonyError> {
    let rows: Vec<Result<Vec<f64>, ComonotonyError>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let path = sampler.sample(RngStream::new(seed, i as u64))?;
            functionals
                .iter()
                .map(|f| {
                    let v = f.eval(&path);
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(ComonotonyError::NonFiniteFunctional {
                            functional: f.name().to_string(),
                            value: v,
                            path: i,
                        })
                    }
                })
                .collect()
        })
        .collect();

    let mut columns: Vec<Vec<f64>> =
        (0..functionals.len()).map(|_| Vec::with_capacity(n_paths)).collect();
    for row in rows {
        for (col, v) in columns.iter_mut().zip(row?) {
            col.push(v);
        }
    }
    Ok(columns)
}

/// Covariance sign tests for index pairs into a shared functional set, all
/// reusing one batch of paths. `(j, j)` pairs are legal and test a variance.
pub fn estimate_cov_pairs(
    sampler: &Sampler,
    functionals: &[&MonotoneFunctional],
    pairs: &[(usize, usize)],
    n_paths: usize,
    seed: u64,
    z_threshold: f64,
) -> Result<Vec<CovTestReport>, ComonotonyError> {
    if n_paths < MIN_COV_PATHS {
        return Err(ComonotonyError::TooFewPaths(n_paths));
    }
    for &(a, b) in pairs {
        let bad = a.max(b);
        if bad >= functionals.len() {
            return Err(ComonotonyError::PairOutOfRange {
                index: bad,
                len: functionals.len(),
            });
        }
    }

    let columns = evaluate_matrix(sampler, functionals, n_paths, seed)?;
    let means: Vec<f64> = columns.iter().map(|c| sample_mean(c)).collect();

    let reports = pairs
        .iter()
        .map(|&(a, b)| {
            let (fa, fb) = (functionals[a], functionals[b]);
            let products: Vec<f64> = columns[a]
                .iter()
                .zip(&columns[b])
                .map(|(x, y)| (x - means[a]) * (y - means[b]))
                .collect();
            let cov = pairwise_sum(&products) / (n_paths as f64 - 1.0);
            let var_of_products = crate::core::sample_variance(&products);
            let se = (var_of_products / n_paths as f64).sqrt();
            let kurt = kurtosis(&products);
            let predicted = PredictedSign::from_pair(fa.monotonicity(), fb.monotonicity());
            CovTestReport {
                process: sampler.name().to_string(),
                f_name: fa.name().to_string(),
                g_name: fb.name().to_string(),
                cov_estimate: cov,
                std_error: se,
                z_score: z_score(cov, se),
                kurtosis: kurt,
                n_paths,
                predicted_sign: predicted,
                z_threshold,
                verdict: judge(predicted, cov, se, z_threshold, kurt),
            }
        })
        .collect();
    Ok(reports)
}

/// Paired covariance sign test of two functionals at the default threshold.
pub fn estimate_cov(
    sampler: &Sampler,
    f: &MonotoneFunctional,
    g: &MonotoneFunctional,
    n_paths: usize,
    seed: u64,
) -> Result<CovTestReport, ComonotonyError> {
    let mut reports = estimate_cov_pairs(sampler, &[f, g], &[(0, 1)], n_paths, seed, DEFAULT_Z)?;
    Ok(reports.remove(0))
}

/// Plain-versus-antithetic comparison on a common noise budget.
#[derive(Clone, Debug)]
pub struct AntitheticReport {
    pub process: String,
    pub functional: String,
    pub n_pairs: usize,
    /// `F` over the primary path of each pair.
    pub plain: MCEstimate,
    /// `(F(X) + F(T(X))) / 2` over the pairs.
    pub antithetic: MCEstimate,
    /// `Var antithetic / Var plain`; exactly 1 for even functionals, 0 when
    /// the pair mean is deterministic.
    pub variance_ratio: f64,
    /// Central bootstrap interval for the ratio, when resamples were run.
    pub ratio_ci_99: Option<(f64, f64)>,
}

fn variance_ratio(anti: f64, plain: f64) -> f64 {
    if plain > 0.0 {
        anti / plain
    } else if anti == plain {
        1.0
    } else {
        f64::INFINITY
    }
}

/// Antithetic estimator for a coupling-capable process: each pair draws a
/// path and its reflection from one stream, the plain estimator uses only
/// the primary leg, so both see the same driving noise.
pub fn antithetic_estimate(
    sampler: &Sampler,
    f: &MonotoneFunctional,
    n_pairs: usize,
    seed: u64,
    bootstrap_resamples: usize,
) -> Result<AntitheticReport, ComonotonyError> {
    let legs: Vec<Result<(f64, f64), ComonotonyError>> = (0..n_pairs)
        .into_par_iter()
        .map(|i| {
            let (x, y) = sampler.sample_coupled(RngStream::new(seed, i as u64))?;
            let a = f.eval(&x);
            let b = f.eval(&y);
            for v in [a, b] {
                if !v.is_finite() {
                    return Err(ComonotonyError::NonFiniteFunctional {
                        functional: f.name().to_string(),
                        value: v,
                        path: i,
                    });
                }
            }
            Ok((a, b))
        })
        .collect();

    let mut primary = Vec::with_capacity(n_pairs);
    let mut pair_means = Vec::with_capacity(n_pairs);
    for leg in legs {
        let (a, b) = leg?;
        primary.push(a);
        pair_means.push(0.5 * (a + b));
    }

    let plain = MCEstimate::from_samples(&primary)?;
    let antithetic = MCEstimate::from_samples(&pair_means)?;
    let ratio = variance_ratio(antithetic.variance, plain.variance);

    let ratio_ci_99 = (bootstrap_resamples > 0)
        .then(|| bootstrap_ratio_ci(&primary, &pair_means, bootstrap_resamples, seed));

    Ok(AntitheticReport {
        process: sampler.name().to_string(),
        functional: f.name().to_string(),
        n_pairs,
        plain,
        antithetic,
        variance_ratio: ratio,
        ratio_ci_99,
    })
}

/// Paired bootstrap for the variance ratio: resample pair indices, keep each
/// pair's two legs together, take the 0.5% and 99.5% quantiles. Uses its own
/// auxiliary stream so the path streams stay untouched.
fn bootstrap_ratio_ci(
    primary: &[f64],
    pair_means: &[f64],
    resamples: usize,
    seed: u64,
) -> (f64, f64) {
    use rand::Rng;
    let n = primary.len();
    let mut rng = RngStream::new(seed, AUX_STREAM_BASE).rng();
    let mut ratios = Vec::with_capacity(resamples);
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for _ in 0..resamples {
        for j in 0..n {
            let idx = rng.random_range(0..n);
            a[j] = primary[idx];
            b[j] = pair_means[idx];
        }
        ratios.push(variance_ratio(
            crate::core::sample_variance(&b),
            crate::core::sample_variance(&a),
        ));
    }
    ratios.sort_by(f64::total_cmp);
    let lo = ((0.005 * resamples as f64).floor() as usize).min(resamples - 1);
    let hi = ((0.995 * resamples as f64).ceil() as usize).clamp(1, resamples) - 1;
    (ratios[lo], ratios[hi])
}

/// One conditioning level of [`running_extrema_conditional`].
#[derive(Clone, Debug)]
pub struct ConditionalEntry {
    pub x: f64,
    /// Paths in the conditioning event `X_T >= x`.
    pub n_event: usize,
    /// `P(sup X >= y | X_T >= x)`; None when the event holds fewer than two
    /// paths, which the report treats as inconclusive.
    pub estimate: Option<MCEstimate>,
}

/// Estimates around the identity
/// `P(sup X >= y) = inf_{x <= y} P(sup X >= y | X_T >= x)`,
/// with the running sup monitored on the grid nodes.
#[derive(Clone, Debug)]
pub struct ConditionalExtremaReport {
    pub process: String,
    pub y: f64,
    pub n_paths: usize,
    pub unconditional: MCEstimate,
    pub entries: Vec<ConditionalEntry>,
    /// Smallest conditional estimate, as `(x, estimate)`.
    pub min_conditional: Option<(f64, MCEstimate)>,
    /// `min conditional - unconditional`; the identity says this cannot be
    /// meaningfully negative.
    pub gap: Option<f64>,
}

pub fn running_extrema_conditional(
    sampler: &Sampler,
    y: f64,
    x_list: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<ConditionalExtremaReport, ComonotonyError> {
    for &x in x_list {
        if !(x <= y) {
            return Err(ComonotonyError::LevelAboveBarrier { x, y });
        }
    }

    let rows: Vec<Result<(f64, f64), ComonotonyError>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let path = sampler.sample(RngStream::new(seed, i as u64))?;
            Ok((path.running_max(), path.terminal()))
        })
        .collect();
    let mut sups = Vec::with_capacity(n_paths);
    let mut terminals = Vec::with_capacity(n_paths);
    for row in rows {
        let (s, t) = row?;
        sups.push(s);
        terminals.push(t);
    }

    let hit: Vec<f64> = sups.iter().map(|s| if *s >= y { 1.0 } else { 0.0 }).collect();
    let unconditional = MCEstimate::from_samples(&hit)?;

    let entries: Vec<ConditionalEntry> = x_list
        .iter()
        .map(|&x| {
            let sub: Vec<f64> = hit
                .iter()
                .zip(&terminals)
                .filter(|(_, t)| **t >= x)
                .map(|(h, _)| *h)
                .collect();
            ConditionalEntry {
                x,
                n_event: sub.len(),
                estimate: MCEstimate::from_samples(&sub).ok(),
            }
        })
        .collect();

    let min_conditional = entries
        .iter()
        .filter_map(|e| e.estimate.map(|est| (e.x, est)))
        .min_by(|a, b| a.1.mean.total_cmp(&b.1.mean));
    let gap = min_conditional.map(|(_, est)| est.mean - unconditional.mean);

    Ok(ConditionalExtremaReport {
        process: sampler.name().to_string(),
        y,
        n_paths,
        unconditional,
        entries,
        min_conditional,
        gap,
    })
}
