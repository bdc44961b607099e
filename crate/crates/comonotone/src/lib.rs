//! Monte Carlo laboratory for the functional co-monotony of stochastic
//! processes.
//!
//! A process whose finite-dimensional marginals move "in the same direction"
//! (Brownian motion and its bridges, fractional Brownian motion, Liouville
//! integrals with nonnegative kernels, monotone-transition diffusions,
//! processes with independent increments) satisfies a covariance inequality
//! for every pair of monotone path functionals:
//!
//! ```text
//! Cov(F(X), G(X)) >= 0   when F and G are monotone in the same direction,
//!                  <= 0   when they are monotone in opposite directions.
//! ```
//!
//! Everything in this crate either exploits that inequality or stress-tests
//! it:
//!
//! * [`core`] - uniform time grids, discretized paths, counter-based RNG
//!   substreams and Monte Carlo estimates with deterministic reductions.
//! * [`processes`] - path samplers (Brownian motion, bridge, series
//!   construction, fractional BM by Cholesky or moving-average quadrature,
//!   Liouville and parametric Wiener integrals, Euler schemes, exact
//!   geometric BM, finite-activity processes with independent increments).
//! * [`functionals`] - monotone path functionals tagged with their
//!   direction, and weight measures for integral functionals.
//! * [`gaussian`] - finite-dimensional covariance analysis: the Pitt
//!   entrywise check, a nonnegative symmetric factorization search, and a
//!   classical 5x5 counter-example to completely positive factorizability.
//! * [`comonotony`] - the covariance sign tests themselves, antithetic
//!   variance reduction with coupled paths, and conditional running-extrema
//!   estimates.
//! * [`peacock`] - curves that must be non-decreasing in convex order
//!   (exponential PII integrals, centered antiderivatives, Asian option
//!   premia in volatility, running-average maturity curves) and the scalar
//!   vega identity.
//! * [`barrier`] - semi-universal bounds tying barrier option prices to the
//!   vanilla price times a crossing probability.
//!
//! All estimators are reproducible: results depend only on the master seed,
//! never on the number of worker threads.

pub mod barrier;
pub mod comonotony;
pub mod core;
pub mod functionals;
pub mod gaussian;
pub mod peacock;
pub mod processes;

pub use crate::barrier::{BarrierKind, BarrierSpec, BoundReport};
pub use crate::comonotony::{CovTestReport, PredictedSign, Verdict};
pub use crate::core::{MCEstimate, Path, PathKind, RngStream, TimeGrid};
pub use crate::functionals::{MonotoneFunctional, Monotonicity, WeightMeasure};
pub use crate::peacock::{ConvexTestFn, PeacockCurve};
pub use crate::processes::{ProcessSpec, Sampler};
