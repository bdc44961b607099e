//! Monotone path functionals and the weight measures behind integral
//! functionals.
//!
//! A [`MonotoneFunctional`] carries its direction with respect to the
//! pointwise partial order on paths ([`crate::core::pointwise_leq`]). The
//! covariance sign tests in [`crate::comonotony`] read that metadata to
//! predict the sign of `Cov(F(X), G(X))`: same direction predicts `>= 0`,
//! opposite directions predict `<= 0`, and anything tagged
//! [`Monotonicity::Unknown`] predicts nothing.
//!
//! Exact barrier indicators are deliberately *not* exposed here: as sup-norm
//! functionals they are discontinuous at paths touching the level, so the
//! sign prediction is only justified for their smoothed ramps
//! ([`smoothed_down_indicator`], [`smoothed_up_indicator`]). The barrier
//! module works with the exact indicators internally, where the bound
//! theorems license them by a smoothing limit.

use std::fmt;
use std::sync::Arc;

use crate::core::{Path, TimeGrid};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FunctionalError {
    #[error("invalid weight measure: {0}")]
    InvalidMeasure(String),
    #[error("atom at t = {0} does not sit on a grid node")]
    AtomOffGrid(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Direction of a functional with respect to the pointwise order on paths.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Monotonicity {
    NonDecreasing,
    NonIncreasing,
    Unknown,
}

impl Monotonicity {
    pub fn flipped(self) -> Self {
        match self {
            Monotonicity::NonDecreasing => Monotonicity::NonIncreasing,
            Monotonicity::NonIncreasing => Monotonicity::NonDecreasing,
            Monotonicity::Unknown => Monotonicity::Unknown,
        }
    }
}

impl fmt::Display for Monotonicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Monotonicity::NonDecreasing => write!(f, "non-decreasing"),
            Monotonicity::NonIncreasing => write!(f, "non-increasing"),
            Monotonicity::Unknown => write!(f, "unknown"),
        }
    }
}

type EvalFn = Arc<dyn Fn(&Path) -> f64 + Send + Sync>;

/// A scalar functional of a path together with its declared direction.
///
/// Evaluation is infallible by signature; functionals signal trouble (an
/// atom off the grid, an out-of-domain lookup) by returning NaN, which every
/// estimator in this crate rejects with an error naming the functional.
#[derive(Clone)]
pub struct MonotoneFunctional {
    name: String,
    monotonicity: Monotonicity,
    eval: EvalFn,
}

impl MonotoneFunctional {
    pub fn new(
        name: impl Into<String>,
        monotonicity: Monotonicity,
        eval: impl Fn(&Path) -> f64 + Send + Sync + 'static,
    ) -> Self {
        MonotoneFunctional {
            name: name.into(),
            monotonicity,
            eval: Arc::new(eval),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn monotonicity(&self) -> Monotonicity {
        self.monotonicity
    }

    pub fn eval(&self, path: &Path) -> f64 {
        (self.eval)(path)
    }
}

impl fmt::Debug for MonotoneFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MonotoneFunctional")
            .field("name", &self.name)
            .field("monotonicity", &self.monotonicity)
            .finish()
    }
}

/// Terminal value `alpha(T)`.
pub fn terminal() -> MonotoneFunctional {
    MonotoneFunctional::new("terminal", Monotonicity::NonDecreasing, |p: &Path| p.terminal())
}

/// Value at a fixed time (interpolated or stepped according to the path
/// kind). NaN outside `[0, horizon]`.
pub fn value_at(t: f64) -> MonotoneFunctional {
    MonotoneFunctional::new(
        format!("value_at({t})"),
        Monotonicity::NonDecreasing,
        move |p: &Path| p.value_at(t),
    )
}

/// Running maximum over the grid nodes.
pub fn running_max() -> MonotoneFunctional {
    MonotoneFunctional::new("running_max", Monotonicity::NonDecreasing, |p: &Path| p.running_max())
}

/// Running minimum over the grid nodes.
pub fn running_min() -> MonotoneFunctional {
    MonotoneFunctional::new("running_min", Monotonicity::NonDecreasing, |p: &Path| p.running_min())
}

/// `(alpha(T) - strike)^+` with a positive strike.
pub fn call_payoff(strike: f64) -> Result<MonotoneFunctional, FunctionalError> {
    if !strike.is_finite() || strike <= 0.0 {
        return Err(FunctionalError::InvalidParameter(format!(
            "call strike must be finite and positive, got {strike}"
        )));
    }
    Ok(MonotoneFunctional::new(
        format!("call_payoff(K={strike})"),
        Monotonicity::NonDecreasing,
        move |p: &Path| (p.terminal() - strike).max(0.0),
    ))
}

/// Smoothed down-crossing indicator `min(1, (1 - (min - L)/eps)^+)`:
/// equals 1 when the running minimum is at or below the level, fades to 0
/// linearly over `[L, L + eps]`. Non-increasing in the path.
pub fn smoothed_down_indicator(level: f64, eps: f64) -> Result<MonotoneFunctional, FunctionalError> {
    if !level.is_finite() || !eps.is_finite() || eps <= 0.0 {
        return Err(FunctionalError::InvalidParameter(format!(
            "need finite level and eps > 0, got level {level}, eps {eps}"
        )));
    }
    Ok(MonotoneFunctional::new(
        format!("smoothed_down_indicator(L={level},eps={eps})"),
        Monotonicity::NonIncreasing,
        move |p: &Path| (1.0 - (p.running_min() - level) / eps).clamp(0.0, 1.0),
    ))
}

/// Smoothed up-crossing indicator: 1 when the running maximum is at or above
/// the level, fading to 0 over `[L - eps, L]`. Non-decreasing in the path.
pub fn smoothed_up_indicator(level: f64, eps: f64) -> Result<MonotoneFunctional, FunctionalError> {
    if !level.is_finite() || !eps.is_finite() || eps <= 0.0 {
        return Err(FunctionalError::InvalidParameter(format!(
            "need finite level and eps > 0, got level {level}, eps {eps}"
        )));
    }
    Ok(MonotoneFunctional::new(
        format!("smoothed_up_indicator(L={level},eps={eps})"),
        Monotonicity::NonDecreasing,
        move |p: &Path| (1.0 - (level - p.running_max()) / eps).clamp(0.0, 1.0),
    ))
}

/// A scalar post-map with declared direction, for [`compose`].
#[derive(Clone)]
pub struct ScalarMap {
    name: String,
    monotonicity: Monotonicity,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl ScalarMap {
    pub fn new(
        name: impl Into<String>,
        monotonicity: Monotonicity,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ScalarMap { name: name.into(), monotonicity, f: Arc::new(f) }
    }

    pub fn exp() -> Self {
        ScalarMap::new("exp", Monotonicity::NonDecreasing, f64::exp)
    }

    pub fn negation() -> Self {
        ScalarMap::new("neg", Monotonicity::NonIncreasing, |x| -x)
    }

    /// A non-monotone map; composition downgrades to `Unknown`.
    pub fn square() -> Self {
        ScalarMap::new("square", Monotonicity::Unknown, |x| x * x)
    }

    pub fn apply(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

/// `g o F` with the sign rule: a non-decreasing `g` keeps the inner
/// direction, a non-increasing `g` flips it, an unknown `g` erases it.
pub fn compose(map: &ScalarMap, inner: &MonotoneFunctional) -> MonotoneFunctional {
    let dir = match map.monotonicity {
        Monotonicity::NonDecreasing => inner.monotonicity(),
        Monotonicity::NonIncreasing => inner.monotonicity().flipped(),
        Monotonicity::Unknown => Monotonicity::Unknown,
    };
    let f = map.f.clone();
    let g = inner.eval.clone();
    MonotoneFunctional::new(format!("{}({})", map.name, inner.name()), dir, move |p: &Path| {
        f(g(p))
    })
}

type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A nonnegative measure on `[0, horizon]` given by point atoms plus a
/// density integrated with the left-point rule: cell `[t_k, t_{k+1})`
/// contributes weight `density(t_k) * h` at node `k`.
///
/// Atoms must sit on grid nodes; there is no hidden snapping. The measure is
/// grid-agnostic until [`WeightMeasure::node_weights`] binds it to one.
#[derive(Clone)]
pub struct WeightMeasure {
    name: String,
    atoms: Vec<(f64, f64)>,
    density: Option<DensityFn>,
}

impl WeightMeasure {
    /// Unit mass at `t`.
    pub fn dirac(t: f64) -> Result<Self, FunctionalError> {
        Self::dirac_weighted(t, 1.0)
    }

    pub fn dirac_weighted(t: f64, weight: f64) -> Result<Self, FunctionalError> {
        if !t.is_finite() || t < 0.0 {
            return Err(FunctionalError::InvalidMeasure(format!(
                "atom time must be finite and nonnegative, got {t}"
            )));
        }
        if !weight.is_finite() || weight < 0.0 {
            return Err(FunctionalError::InvalidMeasure(format!(
                "atom weight must be finite and nonnegative, got {weight}"
            )));
        }
        Ok(WeightMeasure {
            name: format!("dirac(t={t},w={weight})"),
            atoms: vec![(t, weight)],
            density: None,
        })
    }

    /// `scale * dt`. Use `scale = 1/T` for the normalized average.
    pub fn lebesgue(scale: f64) -> Result<Self, FunctionalError> {
        if !scale.is_finite() || scale < 0.0 {
            return Err(FunctionalError::InvalidMeasure(format!(
                "scale must be finite and nonnegative, got {scale}"
            )));
        }
        Ok(WeightMeasure {
            name: format!("lebesgue(scale={scale})"),
            atoms: Vec::new(),
            density: Some(Arc::new(move |_| scale)),
        })
    }

    /// `scale * e^(rate * t) dt`.
    pub fn exp_weighted(rate: f64, scale: f64) -> Result<Self, FunctionalError> {
        if !rate.is_finite() || !scale.is_finite() || scale < 0.0 {
            return Err(FunctionalError::InvalidMeasure(format!(
                "need finite rate and nonnegative scale, got rate {rate}, scale {scale}"
            )));
        }
        Ok(WeightMeasure {
            name: format!("exp_weighted(rate={rate},scale={scale})"),
            atoms: Vec::new(),
            density: Some(Arc::new(move |t| scale * (rate * t).exp())),
        })
    }

    /// Custom nonnegative density (checked on the grid nodes at binding).
    pub fn with_density(
        name: impl Into<String>,
        density: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        WeightMeasure { name: name.into(), atoms: Vec::new(), density: Some(Arc::new(density)) }
    }

    /// Add one more atom.
    pub fn with_atom(mut self, t: f64, weight: f64) -> Result<Self, FunctionalError> {
        if !t.is_finite() || t < 0.0 || !weight.is_finite() || weight < 0.0 {
            return Err(FunctionalError::InvalidMeasure(format!(
                "atom (t={t}, w={weight}) must be finite and nonnegative"
            )));
        }
        self.atoms.push((t, weight));
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// One weight per node: left-point density weights on cells plus atom
    /// weights at their nodes. Errors if an atom misses every node or lies
    /// beyond the horizon, or if the density is negative or non-finite at a
    /// node.
    pub fn node_weights(&self, grid: &TimeGrid) -> Result<Vec<f64>, FunctionalError> {
        let n = grid.n_steps();
        let h = grid.step();
        let mut w = vec![0.0; grid.n_nodes()];
        if let Some(density) = &self.density {
            for k in 0..n {
                let d = density(grid.node(k));
                if !d.is_finite() || d < 0.0 {
                    return Err(FunctionalError::InvalidMeasure(format!(
                        "density is {d} at t = {}; weights must be finite and nonnegative",
                        grid.node(k)
                    )));
                }
                w[k] = d * h;
            }
        }
        for &(t, weight) in &self.atoms {
            let k = grid.node_index_of(t).ok_or(FunctionalError::AtomOffGrid(t))?;
            w[k] += weight;
        }
        Ok(w)
    }

    /// Total mass on this grid.
    pub fn total_mass(&self, grid: &TimeGrid) -> Result<f64, FunctionalError> {
        Ok(self.node_weights(grid)?.iter().sum())
    }
}

impl fmt::Debug for WeightMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightMeasure").field("name", &self.name).finish()
    }
}

/// `integral(mu): alpha -> integral of alpha d mu`, evaluated as a weighted
/// sum of node values. Non-decreasing because the measure is nonnegative.
/// Returns NaN if the measure fails to bind to the path's grid.
pub fn integral(measure: WeightMeasure) -> MonotoneFunctional {
    let name = format!("integral[{}]", measure.name());
    MonotoneFunctional::new(name, Monotonicity::NonDecreasing, move |p: &Path| {
        match measure.node_weights(&p.grid()) {
            Ok(w) => {
                let mut acc = 0.0;
                for (wk, xk) in w.iter().zip(p.values()) {
                    if *wk != 0.0 {
                        acc += wk * xk;
                    }
                }
                acc
            }
            Err(_) => f64::NAN,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{Path, PathKind, TimeGrid};

    fn path_from(values: Vec<f64>) -> Path {
        let grid = TimeGrid::new(1.0, values.len() - 1).unwrap();
        Path::new(grid, values, PathKind::Continuous).unwrap()
    }

    #[test]
    fn basic_functionals_evaluate() {
        let p = path_from(vec![0.0, 3.0, -1.0, 2.0]);
        assert_eq!(terminal().eval(&p), 2.0);
        assert_eq!(running_max().eval(&p), 3.0);
        assert_eq!(running_min().eval(&p), -1.0);
        assert_eq!(value_at(0.0).eval(&p), 0.0);
        assert!(value_at(2.0).eval(&p).is_nan(), "out-of-domain lookup must surface as NaN");
    }

    #[test]
    fn dirac_at_horizon_is_the_terminal_functional() {
        let p = path_from(vec![0.5, -2.0, 7.25]);
        let f = integral(WeightMeasure::dirac(1.0).unwrap());
        assert_eq!(f.eval(&p), p.terminal());
    }

    #[test]
    fn normalized_lebesgue_has_unit_mass_on_constants() {
        let p = path_from(vec![3.0; 9]);
        let f = integral(WeightMeasure::lebesgue(1.0).unwrap());
        assert!((f.eval(&p) - 3.0).abs() < 1e-15, "mass normalization failed");
    }

    #[test]
    fn integral_uses_the_left_point_rule() {
        // integral of t dt over [0,1] with n cells, left points: sum_{k<n} t_k h
        // = (n-1)/(2n).
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let p = Path::new(grid, grid.nodes().collect(), PathKind::Continuous).unwrap();
        let f = integral(WeightMeasure::lebesgue(1.0).unwrap());
        assert!((f.eval(&p) - 7.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn atoms_must_sit_on_nodes() {
        let p = path_from(vec![0.0, 1.0, 2.0]); // nodes 0, 0.5, 1
        let on = integral(WeightMeasure::dirac(0.5).unwrap());
        assert_eq!(on.eval(&p), 1.0);
        let off = integral(WeightMeasure::dirac(0.3).unwrap());
        assert!(off.eval(&p).is_nan(), "off-grid atom must surface as NaN");
        let beyond = integral(WeightMeasure::dirac(1.5).unwrap());
        assert!(beyond.eval(&p).is_nan());
    }

    #[test]
    fn measures_reject_negative_weights() {
        assert!(WeightMeasure::dirac_weighted(0.5, -1.0).is_err());
        assert!(WeightMeasure::lebesgue(-0.1).is_err());
        assert!(WeightMeasure::dirac(f64::NAN).is_err());
        let m = WeightMeasure::with_density("dip", |t| 1.0 - 2.0 * t);
        let grid = TimeGrid::new(1.0, 4).unwrap();
        assert!(m.node_weights(&grid).is_err(), "negative density must fail at binding");
    }

    #[test]
    fn total_mass_combines_density_and_atoms() {
        let grid = TimeGrid::new(2.0, 4).unwrap();
        let m = WeightMeasure::lebesgue(0.5).unwrap().with_atom(2.0, 3.0).unwrap();
        assert!((m.total_mass(&grid).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn call_payoff_kinks_at_the_strike() {
        let f = call_payoff(2.0).unwrap();
        assert_eq!(f.eval(&path_from(vec![0.0, 5.0])), 3.0);
        assert_eq!(f.eval(&path_from(vec![0.0, 1.5])), 0.0);
        assert_eq!(f.eval(&path_from(vec![0.0, 2.0])), 0.0);
        assert!(call_payoff(0.0).is_err());
        assert!(call_payoff(-3.0).is_err());
        assert!(call_payoff(f64::INFINITY).is_err());
    }

    #[test]
    fn smoothed_down_indicator_ramps_between_level_and_level_plus_eps() {
        let f = smoothed_down_indicator(1.0, 0.5).unwrap();
        assert_eq!(f.monotonicity(), Monotonicity::NonIncreasing);
        assert_eq!(f.eval(&path_from(vec![2.0, 0.9])), 1.0); // touched the level
        assert_eq!(f.eval(&path_from(vec![2.0, 1.6])), 0.0); // stayed eps above
        let mid = f.eval(&path_from(vec![2.0, 1.25]));
        assert!((mid - 0.5).abs() < 1e-12, "midpoint of the ramp should be 1/2, got {mid}");
        assert!(smoothed_down_indicator(1.0, 0.0).is_err());
    }

    #[test]
    fn smoothed_up_indicator_is_the_mirror_ramp() {
        let f = smoothed_up_indicator(1.0, 0.5).unwrap();
        assert_eq!(f.monotonicity(), Monotonicity::NonDecreasing);
        assert_eq!(f.eval(&path_from(vec![0.0, 1.2])), 1.0);
        assert_eq!(f.eval(&path_from(vec![0.0, 0.4])), 0.0);
        let mid = f.eval(&path_from(vec![0.0, 0.75]));
        assert!((mid - 0.5).abs() < 1e-12);
    }

    #[test]
    fn composition_follows_the_sign_rule() {
        let inc_of_inc = compose(&ScalarMap::exp(), &terminal());
        assert_eq!(inc_of_inc.monotonicity(), Monotonicity::NonDecreasing);
        assert_eq!(inc_of_inc.name(), "exp(terminal)");

        let dec_of_inc = compose(&ScalarMap::negation(), &running_max());
        assert_eq!(dec_of_inc.monotonicity(), Monotonicity::NonIncreasing);

        let dec_of_dec =
            compose(&ScalarMap::negation(), &smoothed_down_indicator(0.0, 1.0).unwrap());
        assert_eq!(dec_of_dec.monotonicity(), Monotonicity::NonDecreasing);

        let unknown = compose(&ScalarMap::square(), &terminal());
        assert_eq!(unknown.monotonicity(), Monotonicity::Unknown);

        let p = path_from(vec![0.0, 2.0]);
        assert_eq!(inc_of_inc.eval(&p), 2.0_f64.exp());
        assert_eq!(unknown.eval(&p), 4.0);
    }
}
