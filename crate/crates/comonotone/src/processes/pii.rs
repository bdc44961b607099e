//! Processes with independent increments: a deterministic drift, a
//! time-changed Brownian part, compound Poisson jumps, and jumps at fixed
//! dates. Finite activity throughout, so paths are piecewise constant plus
//! the continuous parts between nodes; on the grid a jump is charged to the
//! first node at or after its time, which leaves the law *at the nodes*
//! exactly that of the continuous-time process.

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};

use super::{ProcessError, TimeFn};
use crate::core::TimeGrid;

/// Jump size distribution with a closed-form moment generating function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JumpLaw {
    Constant(f64),
    Normal { mean: f64, std: f64 },
    Exponential { rate: f64 },
}

impl JumpLaw {
    fn validate(&self) -> Result<(), ProcessError> {
        let ok = match self {
            JumpLaw::Constant(a) => a.is_finite(),
            JumpLaw::Normal { mean, std } => mean.is_finite() && std.is_finite() && *std >= 0.0,
            JumpLaw::Exponential { rate } => rate.is_finite() && *rate > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(ProcessError::InvalidSpec(format!("invalid jump law {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            JumpLaw::Constant(a) => *a,
            JumpLaw::Normal { mean, .. } => *mean,
            JumpLaw::Exponential { rate } => 1.0 / rate,
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            JumpLaw::Constant(a) => *a,
            JumpLaw::Normal { mean, std } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + std * z
            }
            JumpLaw::Exponential { rate } => {
                Exp::new(*rate).expect("rate validated positive").sample(rng)
            }
        }
    }

    /// `log E exp(u J)`. The exponential law requires `u < rate`.
    pub fn log_mgf(&self, u: f64) -> Result<f64, ProcessError> {
        match self {
            JumpLaw::Constant(a) => Ok(u * a),
            JumpLaw::Normal { mean, std } => Ok(u * mean + 0.5 * u * u * std * std),
            JumpLaw::Exponential { rate } => {
                if u < *rate {
                    Ok(-(1.0 - u / rate).ln())
                } else {
                    Err(ProcessError::LogLaplaceDomain {
                        u,
                        reason: format!("exponential jumps need u < rate = {rate}"),
                    })
                }
            }
        }
    }
}

/// Jumps at Poisson times, uniform over the horizon, i.i.d. sizes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompoundPoisson {
    pub intensity: f64,
    pub jump: JumpLaw,
}

/// A jump of random size at a known date.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedJump {
    pub time: f64,
    pub law: JumpLaw,
}

/// `X_t = b(t) + W_{c(t)} + sum_{tau_i <= t} J_i + sum_{t_i <= t} U_i`,
/// all four parts independent. `b` and `c` must be finite with `c`
/// nondecreasing from `c(0) = 0`.
#[derive(Clone)]
pub struct PiiSpec {
    pub drift: TimeFn,
    pub variance: TimeFn,
    pub poisson: Option<CompoundPoisson>,
    pub fixed_jumps: Vec<FixedJump>,
}

impl fmt::Debug for PiiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PiiSpec")
            .field("poisson", &self.poisson)
            .field("fixed_jumps", &self.fixed_jumps)
            .finish_non_exhaustive()
    }
}

/// Log-Laplace exponent `Psi(u, t) = log E exp(u X_t)`:
/// `u b(t) + u^2 c(t) / 2 + lambda t (E exp(u J) - 1)` plus the fixed-date
/// terms with `t_i <= t`.
pub fn log_laplace_pii(spec: &PiiSpec, u: f64, t: f64) -> Result<f64, ProcessError> {
    if !u.is_finite() || !(t.is_finite() && t >= 0.0) {
        return Err(ProcessError::LogLaplaceDomain {
            u,
            reason: format!("needs finite u and t >= 0, got t = {t}"),
        });
    }
    let b = (spec.drift)(t);
    let c = (spec.variance)(t);
    if !b.is_finite() || !c.is_finite() || c < 0.0 {
        return Err(ProcessError::LogLaplaceDomain {
            u,
            reason: format!("drift/variance at t = {t} gave b = {b}, c = {c}"),
        });
    }
    let mut psi = u * b + 0.5 * u * u * c;
    if let Some(cp) = &spec.poisson {
        psi += cp.intensity * t * cp.jump.log_mgf(u)?.exp_m1();
    }
    for fixed in &spec.fixed_jumps {
        if fixed.time <= t {
            psi += fixed.law.log_mgf(u)?;
        }
    }
    Ok(psi)
}

pub(super) struct PreparedPii {
    pub(super) spec: PiiSpec,
    drift_nodes: Vec<f64>,
    /// Standard deviations of the Gaussian increments, `sqrt(c(t_{k+1}) - c(t_k))`.
    gauss_std: Vec<f64>,
    /// Node each fixed jump is charged to, in declaration order.
    fixed_nodes: Vec<usize>,
}

pub(super) fn prepare(spec: &PiiSpec, grid: TimeGrid) -> Result<PreparedPii, ProcessError> {
    if let Some(cp) = &spec.poisson {
        if !(cp.intensity.is_finite() && cp.intensity >= 0.0) {
            return Err(ProcessError::InvalidSpec(format!(
                "Poisson intensity must be finite and nonnegative, got {}",
                cp.intensity
            )));
        }
        cp.jump.validate()?;
    }

    let c_nodes: Vec<f64> = grid.nodes().map(|t| (spec.variance)(t)).collect();
    if c_nodes[0] != 0.0 {
        return Err(ProcessError::InvalidSpec(format!(
            "variance function must start at c(0) = 0, got {}",
            c_nodes[0]
        )));
    }
    let mut gauss_std = Vec::with_capacity(grid.n_steps());
    for k in 0..grid.n_steps() {
        let inc = c_nodes[k + 1] - c_nodes[k];
        if !inc.is_finite() || inc < 0.0 {
            return Err(ProcessError::InvalidSpec(format!(
                "variance function must be finite and nondecreasing; increment over \
                 [{}, {}] is {inc}",
                grid.node(k),
                grid.node(k + 1)
            )));
        }
        gauss_std.push(inc.sqrt());
    }

    let drift_nodes: Vec<f64> = grid.nodes().map(|t| (spec.drift)(t)).collect();
    if let Some(bad) = drift_nodes.iter().position(|b| !b.is_finite()) {
        return Err(ProcessError::InvalidSpec(format!(
            "drift is not finite at t = {}",
            grid.node(bad)
        )));
    }

    let mut fixed_nodes = Vec::with_capacity(spec.fixed_jumps.len());
    for fixed in &spec.fixed_jumps {
        fixed.law.validate()?;
        match first_node_at_or_after(grid, fixed.time) {
            Some(k) if k > 0 => fixed_nodes.push(k),
            _ => {
                return Err(ProcessError::InvalidSpec(format!(
                    "fixed jump time {} lies outside (0, {}]",
                    fixed.time,
                    grid.horizon()
                )))
            }
        }
    }

    Ok(PreparedPii { spec: spec.clone(), drift_nodes, gauss_std, fixed_nodes })
}

/// Smallest k with `t_k >= t`, None past the horizon.
fn first_node_at_or_after(grid: TimeGrid, t: f64) -> Option<usize> {
    if !(t.is_finite() && t >= 0.0) || t > grid.horizon() {
        return None;
    }
    let mut k = ((t / grid.step()).ceil() as usize).min(grid.n_steps());
    while k > 0 && grid.node(k - 1) >= t {
        k -= 1;
    }
    while grid.node(k) < t {
        k += 1;
    }
    Some(k)
}

impl PreparedPii {
    /// Fixed draw order per path: the n Gaussian increments, the Poisson
    /// count, then each jump as a (time, size) pair, then the fixed-date
    /// sizes in declaration order.
    pub(super) fn sample_nodes(
        &self,
        grid: &TimeGrid,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<f64>, ProcessError> {
        let n = grid.n_steps();
        let mut jumps_at = vec![0.0; n + 1];

        let mut values = Vec::with_capacity(n + 1);
        values.push(0.0);
        let mut acc = 0.0;
        for std in &self.gauss_std {
            let z: f64 = rng.sample(StandardNormal);
            acc += std * z;
            values.push(acc);
        }

        if let Some(cp) = &self.spec.poisson {
            if cp.intensity > 0.0 {
                let mean = cp.intensity * grid.horizon();
                let count = Poisson::new(mean)
                    .expect("intensity and horizon validated positive")
                    .sample(rng) as usize;
                for _ in 0..count {
                    // 1 - U keeps the time inside (0, T], so no jump can
                    // land on the starting node.
                    let tau = (1.0 - rng.random::<f64>()) * grid.horizon();
                    let size = cp.jump.sample(rng);
                    let node = first_node_at_or_after(*grid, tau)
                        .expect("tau lies in (0, horizon]");
                    jumps_at[node] += size;
                }
            }
        }

        for (fixed, node) in self.spec.fixed_jumps.iter().zip(&self.fixed_nodes) {
            jumps_at[*node] += fixed.law.sample(rng);
        }

        let mut jump_acc = 0.0;
        for (k, v) in values.iter_mut().enumerate() {
            jump_acc += jumps_at[k];
            *v += self.drift_nodes[k] + jump_acc;
        }
        Ok(values)
    }

    pub(super) fn node_means(&self, grid: &TimeGrid) -> Vec<f64> {
        let lambda_mean = self
            .spec
            .poisson
            .as_ref()
            .map_or(0.0, |cp| cp.intensity * cp.jump.mean());
        let mut fixed_at = vec![0.0; grid.n_nodes()];
        for (fixed, node) in self.spec.fixed_jumps.iter().zip(&self.fixed_nodes) {
            fixed_at[*node] += fixed.law.mean();
        }
        let mut fixed_acc = 0.0;
        (0..grid.n_nodes())
            .map(|k| {
                fixed_acc += fixed_at[k];
                self.drift_nodes[k] + lambda_mean * grid.node(k) + fixed_acc
            })
            .collect()
    }
}
