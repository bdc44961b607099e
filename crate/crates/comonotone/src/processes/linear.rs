//! Gaussian processes as linear maps of i.i.d. standard normals.
//!
//! Each construction reduces to a weight matrix `W` with `X_{t_k} = (W z)_k`:
//! a truncated series basis, a covariance factor, or quadrature weights for a
//! Wiener integral. Rows may be ragged; a short row means trailing zeros,
//! which keeps triangular factors at half the flat cost.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::{CoefFn, ProcessError};
use crate::core::TimeGrid;
use crate::gaussian::CovMatrix;

// PSD slack for covariance submatrices that are singular only through
// rounding, mirroring the tolerance used for full covariance validation.
const PSD_TOL: f64 = 1e-10;

pub(super) struct LinearMap {
    pub(super) rows: Vec<Vec<f64>>,
    pub(super) draws: usize,
}

impl LinearMap {
    pub(super) fn apply(&self, z: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().zip(z).map(|(w, zj)| w * zj).sum())
            .collect()
    }
}

/// Truncated nonnegative-coefficient expansion of Brownian motion:
/// `sqrt(2T) sum_{m=1..M} z_m (1 - cos(pi m t / T)) / (pi m)`.
pub(super) fn series_basis(grid: TimeGrid, n_terms: usize) -> LinearMap {
    let horizon = grid.horizon();
    let scale = (2.0 * horizon).sqrt();
    let rows = (0..grid.n_nodes())
        .map(|k| {
            let t = grid.node(k);
            (1..=n_terms)
                .map(|m| {
                    let pm = std::f64::consts::PI * m as f64;
                    scale * (1.0 - (pm * t / horizon).cos()) / pm
                })
                .collect()
        })
        .collect();
    LinearMap { rows, draws: n_terms }
}

/// Factor of the fractional Brownian covariance over the nodes past zero:
/// Cholesky when the matrix is positive definite, otherwise the eigenvector
/// factor `V sqrt(max(Lambda, 0))` (H = 1 gives rank one).
pub(super) fn fbm_factor(grid: TimeGrid, hurst: f64) -> Result<LinearMap, ProcessError> {
    let d = grid.n_steps();
    let two_h = 2.0 * hurst;
    let t = |i: usize| grid.node(i + 1);
    let cov = DMatrix::from_fn(d, d, |i, j| {
        0.5 * (t(i).powf(two_h) + t(j).powf(two_h) - (t(i) - t(j)).abs().powf(two_h))
    });

    let (factor, triangular) = match cov.clone().cholesky() {
        Some(chol) => (chol.unpack(), true),
        None => {
            let eig = cov.symmetric_eigen();
            let max_abs = eig.eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
            let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &l| a.min(l));
            if min < -PSD_TOL * max_abs.max(1.0) {
                return Err(ProcessError::Factorization { min_eigenvalue: min });
            }
            let mut f = eig.eigenvectors;
            for j in 0..d {
                let s = eig.eigenvalues[j].max(0.0).sqrt();
                for i in 0..d {
                    f[(i, j)] *= s;
                }
            }
            (f, false)
        }
    };

    // Node 0 is identically zero; factor row i drives node i + 1. Cholesky
    // rows are cut at the diagonal.
    let mut rows = Vec::with_capacity(d + 1);
    rows.push(Vec::new());
    for i in 0..d {
        let width = if triangular { i + 1 } else { d };
        rows.push((0..width).map(|j| factor[(i, j)]).collect());
    }
    Ok(LinearMap { rows, draws: d })
}

/// Eigen factor of an explicit covariance, one node per coordinate.
pub(super) fn gaussian_vector_factor(cov: &CovMatrix) -> LinearMap {
    let d = cov.dim();
    let eig = cov.matrix().clone().symmetric_eigen();
    let mut f = eig.eigenvectors;
    for j in 0..d {
        let s = eig.eigenvalues[j].max(0.0).sqrt();
        for i in 0..d {
            f[(i, j)] *= s;
        }
    }
    let rows = (0..d).map(|i| (0..d).map(|j| f[(i, j)]).collect()).collect();
    LinearMap { rows, draws: d }
}

/// Discrete convolution for `X_t = integral_0^t f(t-s) dW_s`. The increment
/// over `[t_j, t_{j+1})` is weighted by `f` at the left point of the cell in
/// the kernel argument `u = t_k - t_{j+1}`, except the diagonal cell, where
/// the argument 0 is replaced by the midpoint `h/2` so that kernels singular
/// at zero (Liouville with exponent below one) stay usable.
pub(super) fn liouville_weights(
    grid: TimeGrid,
    kernel: &Arc<dyn Fn(f64) -> f64 + Send + Sync>,
) -> Result<LinearMap, ProcessError> {
    let n = grid.n_steps();
    let sqrt_h = grid.step().sqrt();
    let half_h = 0.5 * grid.step();
    let mut rows = Vec::with_capacity(n + 1);
    rows.push(Vec::new());
    for k in 1..=n {
        let mut row = Vec::with_capacity(k);
        for j in 0..k {
            let u = if j + 1 == k { half_h } else { grid.node(k) - grid.node(j + 1) };
            let f = kernel(u);
            if !f.is_finite() {
                return Err(ProcessError::KernelNonFinite { at: u, value: f });
            }
            row.push(f * sqrt_h);
        }
        rows.push(row);
    }
    Ok(LinearMap { rows, draws: n })
}

/// Geometric quadrature cells on `(0, cutoff]`: boundary sequence, each
/// cell's evaluation point, and its root width `sqrt(ds)`. The first cell
/// `[0, s_min]` is evaluated at `s_min / 2`, later ones at the geometric
/// midpoint, which tracks power-law kernels far better than the arithmetic
/// one over cells spanning decades.
struct SubGrid {
    eval: Vec<f64>,
    sqrt_width: Vec<f64>,
}

fn geometric_subgrid(
    horizon: f64,
    cutoff: f64,
    steps: usize,
) -> Result<SubGrid, ProcessError> {
    let s_min = horizon * 1e-10;
    if !(cutoff.is_finite() && cutoff > s_min) {
        return Err(ProcessError::InvalidSpec(format!(
            "tail cutoff must be finite and exceed {s_min:e}, got {cutoff}"
        )));
    }
    if steps == 0 {
        return Err(ProcessError::InvalidSpec("quadrature needs at least one cell".into()));
    }
    let ratio = (cutoff / s_min).powf(1.0 / steps as f64);
    let mut eval = Vec::with_capacity(steps + 1);
    let mut sqrt_width = Vec::with_capacity(steps + 1);
    eval.push(0.5 * s_min);
    sqrt_width.push(s_min.sqrt());
    let mut lo = s_min;
    for _ in 0..steps {
        let hi = lo * ratio;
        eval.push((lo * hi).sqrt());
        sqrt_width.push((hi - lo).sqrt());
        lo = hi;
    }
    Ok(SubGrid { eval, sqrt_width })
}

/// Quadrature weights for `X_t = integral_0^infty f(t, s) dW_s`, truncated
/// at `cutoff`.
pub(super) fn wiener_param_weights(
    grid: TimeGrid,
    kernel: &CoefFn,
    cutoff: f64,
    steps: usize,
) -> Result<LinearMap, ProcessError> {
    let sub = geometric_subgrid(grid.horizon(), cutoff, steps)?;
    let mut rows = Vec::with_capacity(grid.n_nodes());
    for k in 0..grid.n_nodes() {
        let t = grid.node(k);
        let mut row = Vec::with_capacity(sub.eval.len());
        for (s, w) in sub.eval.iter().zip(&sub.sqrt_width) {
            let f = kernel(t, *s);
            if !f.is_finite() {
                return Err(ProcessError::KernelNonFinite { at: *s, value: f });
            }
            row.push(f * w);
        }
        rows.push(row);
    }
    let draws = sub.eval.len();
    Ok(LinearMap { rows, draws })
}

/// Moving-average representation of fractional Brownian motion: the sum of
/// a past-dependent integral with kernel `(t+s)^(H-1/2) - s^(H-1/2)` over
/// `(0, infinity)` and a Liouville-type integral with kernel `(t-s)^(H-1/2)`
/// over `[0, t]`, scaled so the variance at `t` is `t^2H`. The first part
/// uses truncated geometric quadrature; the second takes root-mean-square
/// cell weights, which reproduce each node's variance contribution exactly.
pub(super) fn fbm_mvn_weights(
    grid: TimeGrid,
    hurst: f64,
    cutoff: f64,
    steps: usize,
) -> Result<LinearMap, ProcessError> {
    if hurst >= 1.0 {
        return Err(ProcessError::InvalidSpec(
            "the moving-average construction needs a Hurst index below one".into(),
        ));
    }
    let a = hurst - 0.5;
    let inv_c1 = 1.0 / mvn_normalizer(hurst);
    let sub = geometric_subgrid(grid.horizon(), cutoff, steps)?;
    let n_sub = sub.eval.len();
    let n = grid.n_steps();
    let h = grid.step();
    let two_h = 2.0 * hurst;

    // Root-mean-square weights for the (t-s)^a part, by trailing cell count:
    // rms[m] covers the cell m steps behind the node.
    let rms: Vec<f64> = (1..=n)
        .map(|m| {
            ((((m as f64) * h).powf(two_h) - ((m as f64 - 1.0) * h).powf(two_h)) / two_h)
                .sqrt()
        })
        .collect();

    let s_min = grid.horizon() * 1e-10;
    let mut rows = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = grid.node(k);
        let mut row = Vec::with_capacity(n_sub + k);
        for (s, w) in sub.eval.iter().zip(&sub.sqrt_width) {
            let f = (t + s).powf(a) - s.powf(a);
            if !f.is_finite() {
                return Err(ProcessError::KernelNonFinite { at: *s, value: f });
            }
            row.push(f * w * inv_c1);
        }
        // The kernel is steepest across the head cell [0, s_min]; replace the
        // midpoint value by the signed root of the exact second moment. The
        // integrand (t + s)^a - s^a keeps one sign on the cell, negative for
        // H < 1/2, positive above.
        if t > 0.0 {
            let m2 = t.powf(2.0 * a) * s_min
                - 2.0 * t.powf(a) * s_min.powf(a + 1.0) / (a + 1.0)
                + s_min.powf(2.0 * a + 1.0) / (2.0 * a + 1.0);
            row[0] = a.signum() * m2.max(0.0).sqrt() * inv_c1;
        }
        // Cell [t_j, t_{j+1}) sits k - j steps behind node k.
        for j in 0..k {
            row.push(rms[k - j - 1] * inv_c1);
        }
        rows.push(row);
    }
    Ok(LinearMap { rows, draws: n_sub + n })
}

/// Normalizer `C_1(H)` of the moving-average representation:
/// `C_1^2 = integral_0^infty ((1+u)^(H-1/2) - u^(H-1/2))^2 du + 1/(2H)`.
/// Geometric midpoint quadrature with series corrections for both ends;
/// exact at H = 1/2, where the integral vanishes and `C_1 = 1`.
pub(super) fn mvn_normalizer(hurst: f64) -> f64 {
    let a = hurst - 0.5;
    let g = |u: f64| (1.0 + u).powf(a) - u.powf(a);

    let eps = 1e-12f64;
    let big = 1e8f64;
    let steps = 20_000usize;
    let ratio = (big / eps).powf(1.0 / steps as f64);

    // Head: (u^a - (1+u)^a)^2 ~ u^2a - 2u^a + 1 near zero, integrated exactly
    // term by term (next order is O(eps^(H + 3/2))).
    let two_h = 2.0 * hurst;
    let mut total = eps.powf(two_h) / two_h - 2.0 * eps.powf(hurst + 0.5) / (hurst + 0.5)
        + eps;

    let mut lo = eps;
    for _ in 0..steps {
        let hi = lo * ratio;
        let gm = g((lo * hi).sqrt());
        total += gm * gm * (hi - lo);
        lo = hi;
    }

    // Tail: g(u) = a u^(a-1) (1 + (a-1)/(2u) + ...), so the left-over mass is
    // a^2 [U^(2a-1)/(1-2a) + (a-1) U^(2a-2)/(2-2a)] up to O(U^(2a-3)).
    total += a * a
        * (big.powf(2.0 * a - 1.0) / (1.0 - 2.0 * a)
            + (a - 1.0) * big.powf(2.0 * a - 2.0) / (2.0 - 2.0 * a));

    (total + 0.5 / hurst).sqrt()
}
