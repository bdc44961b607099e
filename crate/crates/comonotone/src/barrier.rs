//! Semi-universal barrier-option bounds.
//!
//! Four barrier calls gate the vanilla payoff `(S_T - K)_+` by whether the
//! running extremum over the monitored nodes crosses a level `L`. For any
//! process whose discretely monitored paths satisfy co-monotony, the call
//! part is non-decreasing and the crossing indicators are monotone in the
//! path, so each product of means bounds the barrier price from one side:
//!
//! - down-and-in  `E[c 1_{min <= L}] <= E[c] P(min <= L)`
//! - down-and-out `E[c 1_{min >  L}] >= E[c] P(min >  L)`
//! - up-and-in    `E[c 1_{max >  L}] >= E[c] P(max >  L)`
//! - up-and-out   `E[c 1_{max <= L}] <= E[c] P(max <= L)`
//!
//! These are exact theorems for the discretized functionals, so a
//! statistical check needs no continuity correction. All quantities are
//! estimated on common paths; in/out parity is a pathwise identity there.

use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::comonotony::{Verdict, DEFAULT_Z};
use crate::core::{sample_mean, CoreError, MCEstimate, RngStream};
use crate::processes::{ProcessError, Sampler};

/// Widths of the smoothed crossing indicators reported next to the sharp
/// price; the proof of the bounds passes through this smoothing.
pub const SMOOTHING_EPS: [f64; 2] = [1e-2, 1e-4];

#[derive(Debug, Error)]
pub enum BarrierError {
    #[error("invalid barrier spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Core(#[from] CoreError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BarrierKind {
    DownIn,
    DownOut,
    UpIn,
    UpOut,
}

/// Which side of `E[c] * P(event)` the barrier price sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundSide {
    /// barrier price `<=` vanilla times crossing probability
    Upper,
    /// barrier price `>=` vanilla times crossing probability
    Lower,
}

impl BarrierKind {
    pub fn is_down(self) -> bool {
        matches!(self, BarrierKind::DownIn | BarrierKind::DownOut)
    }

    pub fn is_in(self) -> bool {
        matches!(self, BarrierKind::DownIn | BarrierKind::UpIn)
    }

    pub fn bound_side(self) -> BoundSide {
        match self {
            BarrierKind::DownIn | BarrierKind::UpOut => BoundSide::Upper,
            BarrierKind::DownOut | BarrierKind::UpIn => BoundSide::Lower,
        }
    }

    /// The gating event, phrased on the monitored extremum.
    pub fn event(self) -> &'static str {
        match self {
            BarrierKind::DownIn => "min <= L",
            BarrierKind::DownOut => "min > L",
            BarrierKind::UpIn => "max > L",
            BarrierKind::UpOut => "max <= L",
        }
    }
}

impl fmt::Display for BarrierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BarrierKind::DownIn => "down-and-in",
            BarrierKind::DownOut => "down-and-out",
            BarrierKind::UpIn => "up-and-in",
            BarrierKind::UpOut => "up-and-out",
        };
        f.write_str(s)
    }
}

impl fmt::Display for BoundSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundSide::Upper => "<=",
            BoundSide::Lower => ">=",
        })
    }
}

/// Barrier call on the maturity payoff `(S_T - K)_+`, monitored at the grid
/// nodes inside the window (the whole horizon when none is set).
#[derive(Clone, Copy, Debug)]
pub struct BarrierSpec {
    pub kind: BarrierKind,
    pub strike: f64,
    pub level: f64,
    /// `[a, b]` restricting the monitored nodes; the payoff still reads the
    /// terminal value.
    pub window: Option<(f64, f64)>,
    /// Multiplicative discount factor applied to all prices.
    pub discount: f64,
}

impl BarrierSpec {
    pub fn new(kind: BarrierKind, strike: f64, level: f64) -> Result<Self, BarrierError> {
        if !(strike.is_finite() && strike > 0.0) {
            return Err(BarrierError::InvalidSpec(format!(
                "strike must be positive, got {strike}"
            )));
        }
        if !(level.is_finite() && level >= 0.0) {
            return Err(BarrierError::InvalidSpec(format!(
                "barrier level must be nonnegative, got {level}"
            )));
        }
        Ok(BarrierSpec { kind, strike, level, window: None, discount: 1.0 })
    }

    pub fn with_window(mut self, from: f64, to: f64) -> Result<Self, BarrierError> {
        if !(from.is_finite() && to.is_finite() && 0.0 <= from && from < to) {
            return Err(BarrierError::InvalidSpec(format!(
                "window must satisfy 0 <= from < to, got [{from}, {to}]"
            )));
        }
        self.window = Some((from, to));
        Ok(self)
    }

    pub fn with_discount(mut self, discount: f64) -> Result<Self, BarrierError> {
        if !(discount.is_finite() && discount > 0.0) {
            return Err(BarrierError::InvalidSpec(format!(
                "discount must be positive, got {discount}"
            )));
        }
        self.discount = discount;
        Ok(self)
    }

    /// Sharp indicator of the gating event given the monitored extremum.
    fn indicator(&self, extremum: f64) -> f64 {
        let hit = match self.kind {
            BarrierKind::DownIn => extremum <= self.level,
            BarrierKind::DownOut => extremum > self.level,
            BarrierKind::UpIn => extremum > self.level,
            BarrierKind::UpOut => extremum <= self.level,
        };
        if hit {
            1.0
        } else {
            0.0
        }
    }

    /// Smoothed indicator: in-kinds are approximated from above over a band
    /// of width `eps`, out-kinds from below as the complement.
    fn smoothed(&self, extremum: f64, eps: f64) -> f64 {
        let crossing = if self.kind.is_down() {
            (1.0 - (extremum - self.level) / eps).clamp(0.0, 1.0)
        } else {
            (1.0 - (self.level - extremum) / eps).clamp(0.0, 1.0)
        };
        if self.kind.is_in() {
            crossing
        } else {
            1.0 - crossing
        }
    }
}

/// Verdict sheet for one semi-universal bound, everything on common paths.
#[derive(Clone, Debug)]
pub struct BoundReport {
    pub process: String,
    pub kind: BarrierKind,
    pub strike: f64,
    pub level: f64,
    pub n_paths: usize,
    pub barrier_price: MCEstimate,
    pub vanilla_price: MCEstimate,
    /// Probability of the gating event itself (the factor in the bound).
    pub crossing_probability: MCEstimate,
    pub bound_side: BoundSide,
    /// Bound right-hand side minus left-hand side, oriented so consistency
    /// means `slack >= -z * slack_std_error`.
    pub slack: f64,
    /// Delta-method standard error of the slack.
    pub slack_std_error: f64,
    /// `in price + out price - vanilla price`; pathwise the partition is
    /// exact, so only summation order contributes.
    pub parity_residual: f64,
    /// `(eps, price)` for the smoothed gating indicators.
    pub smoothed_prices: Vec<(f64, MCEstimate)>,
    pub z_threshold: f64,
    pub verdict: Verdict,
    pub warnings: Vec<String>,
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} call on {} (K = {}, L = {}, n = {})",
            self.kind, self.process, self.strike, self.level, self.n_paths
        )?;
        writeln!(
            f,
            "  barrier {:.6} +- {:.2e}   vanilla {:.6} +- {:.2e}   P({}) {:.4}",
            self.barrier_price.mean,
            self.barrier_price.std_error,
            self.vanilla_price.mean,
            self.vanilla_price.std_error,
            self.kind.event(),
            self.crossing_probability.mean,
        )?;
        writeln!(
            f,
            "  bound: barrier {} vanilla * P, slack {:.3e} +- {:.2e} -> {}",
            self.bound_side, self.slack, self.slack_std_error, self.verdict
        )?;
        write!(f, "  parity residual {:.3e}", self.parity_residual)
    }
}

/// Per-path legs shared by every reported quantity.
struct Legs {
    vanilla: Vec<f64>,
    gated: Vec<f64>,
    indicator: Vec<f64>,
    smoothed: Vec<Vec<f64>>,
    lowest_value: f64,
    initial_value: f64,
}

fn monitored_range(sampler: &Sampler, spec: &BarrierSpec) -> Result<(usize, usize), BarrierError> {
    let grid = sampler.grid();
    let (from, to) = spec.window.unwrap_or((0.0, grid.horizon()));
    if to > grid.horizon() {
        return Err(BarrierError::InvalidSpec(format!(
            "window end {to} exceeds the horizon {}",
            grid.horizon()
        )));
    }
    let nodes: Vec<usize> = (0..grid.n_nodes())
        .filter(|&k| from <= grid.node(k) && grid.node(k) <= to)
        .collect();
    match (nodes.first(), nodes.last()) {
        (Some(&lo), Some(&hi)) => Ok((lo, hi)),
        _ => Err(BarrierError::InvalidSpec(format!(
            "no grid node falls inside the window [{from}, {to}]"
        ))),
    }
}

fn compute_legs(
    sampler: &Sampler,
    spec: &BarrierSpec,
    n_paths: usize,
    seed: u64,
) -> Result<Legs, BarrierError> {
    if n_paths < 2 {
        return Err(BarrierError::InvalidSpec(format!(
            "need at least two paths, got {n_paths}"
        )));
    }
    let (lo, hi) = monitored_range(sampler, spec)?;
    let take_min = spec.kind.is_down();

    type Row = (f64, f64, [f64; 2], f64);
    let rows: Vec<Result<Row, BarrierError>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let path = sampler.sample(RngStream::new(seed, i as u64))?;
            let values = path.values();
            let mut extremum = values[lo];
            for &v in &values[lo + 1..=hi] {
                extremum = if take_min { extremum.min(v) } else { extremum.max(v) };
            }
            let payoff = spec.discount * (path.terminal() - spec.strike).max(0.0);
            let smoothed =
                [spec.smoothed(extremum, SMOOTHING_EPS[0]), spec.smoothed(extremum, SMOOTHING_EPS[1])];
            let low = values.iter().copied().fold(f64::INFINITY, f64::min);
            Ok((payoff, spec.indicator(extremum), smoothed, low))
        })
        .collect();

    let mut legs = Legs {
        vanilla: Vec::with_capacity(n_paths),
        gated: Vec::with_capacity(n_paths),
        indicator: Vec::with_capacity(n_paths),
        smoothed: vec![Vec::with_capacity(n_paths), Vec::with_capacity(n_paths)],
        lowest_value: f64::INFINITY,
        initial_value: f64::NAN,
    };
    for row in rows {
        let (payoff, ind, smooth, low) = row?;
        legs.vanilla.push(payoff);
        legs.gated.push(payoff * ind);
        legs.indicator.push(ind);
        for (col, s) in legs.smoothed.iter_mut().zip(smooth) {
            col.push(s);
        }
        legs.lowest_value = legs.lowest_value.min(low);
    }
    // initial node value is deterministic; read it from one replayed path
    legs.initial_value = sampler.sample(RngStream::new(seed, 0))?.values()[0];
    Ok(legs)
}

/// Monte Carlo price of the barrier call at the spec's monitoring nodes.
pub fn price_barrier(
    sampler: &Sampler,
    spec: &BarrierSpec,
    n_paths: usize,
    seed: u64,
) -> Result<MCEstimate, BarrierError> {
    let legs = compute_legs(sampler, spec, n_paths, seed)?;
    Ok(MCEstimate::from_samples(&legs.gated)?)
}

/// Price the barrier and vanilla calls on common paths and judge the
/// semi-universal bound `barrier vs vanilla * P(event)` at `z = 4`.
pub fn verify_bounds(
    sampler: &Sampler,
    spec: &BarrierSpec,
    n_paths: usize,
    seed: u64,
) -> Result<BoundReport, BarrierError> {
    let legs = compute_legs(sampler, spec, n_paths, seed)?;

    let barrier_price = MCEstimate::from_samples(&legs.gated)?;
    let vanilla_price = MCEstimate::from_samples(&legs.vanilla)?;
    let crossing_probability = MCEstimate::from_samples(&legs.indicator)?;
    let smoothed_prices: Vec<(f64, MCEstimate)> = SMOOTHING_EPS
        .iter()
        .zip(&legs.smoothed)
        .map(|(&eps, psi)| {
            let priced: Vec<f64> =
                legs.vanilla.iter().zip(psi).map(|(c, s)| c * s).collect();
            Ok((eps, MCEstimate::from_samples(&priced)?))
        })
        .collect::<Result<_, CoreError>>()?;

    // complementary kind on the same paths; the indicator partition makes
    // the pathwise identity exact, the residual is pure summation order
    let complement: Vec<f64> =
        legs.vanilla.iter().zip(&legs.gated).map(|(c, g)| c - g).collect();
    let parity_residual =
        barrier_price.mean + sample_mean(&complement) - vanilla_price.mean;

    let rhs = vanilla_price.mean * crossing_probability.mean;
    let slack = match spec.kind.bound_side() {
        BoundSide::Upper => rhs - barrier_price.mean,
        BoundSide::Lower => barrier_price.mean - rhs,
    };
    // delta-method linearization of E[c]E[I] - E[cI] around the means
    let b = vanilla_price.mean;
    let d = crossing_probability.mean;
    let influence: Vec<f64> = (0..n_paths)
        .map(|i| legs.gated[i] - b * legs.indicator[i] - d * legs.vanilla[i])
        .collect();
    let slack_std_error = MCEstimate::from_samples(&influence)?.std_error;

    let verdict = if slack >= -DEFAULT_Z * slack_std_error {
        Verdict::Consistent
    } else {
        Verdict::Violation
    };

    let mut warnings = Vec::new();
    if legs.lowest_value < 0.0 {
        warnings.push(format!(
            "paths reach {:.3e} < 0; the financial reading of the payoff is nominal",
            legs.lowest_value
        ));
    }
    let s0 = legs.initial_value;
    if spec.kind.is_down() && spec.level >= s0 {
        warnings.push(format!(
            "down barrier {} at or above the initial value {s0}; the gate is degenerate",
            spec.level
        ));
    }
    if !spec.kind.is_down() && spec.level <= s0 {
        warnings.push(format!(
            "up barrier {} at or below the initial value {s0}; the gate is degenerate",
            spec.level
        ));
    }
    if let Some((_, to)) = spec.window {
        if to < sampler.grid().horizon() {
            warnings.push(
                "monitoring window ends before maturity; the bound needs extra path \
                 regularity at the window end (fixed jumps there break it)"
                    .into(),
            );
        }
    }

    Ok(BoundReport {
        process: sampler.name().to_string(),
        kind: spec.kind,
        strike: spec.strike,
        level: spec.level,
        n_paths,
        barrier_price,
        vanilla_price,
        crossing_probability,
        bound_side: spec.kind.bound_side(),
        slack,
        slack_std_error,
        parity_residual,
        smoothed_prices,
        z_threshold: DEFAULT_Z,
        verdict,
        warnings,
    })
}
