use super::CoreError;

/// Deterministic pairwise summation.
///
/// Fixed recursive split, so the result depends only on the slice contents
/// and order, never on chunking or thread count; error grows like O(log n)
/// rather than O(n) for sequential accumulation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn sample_mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance (two-pass).
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    let m = sample_mean(xs);
    let sq: Vec<f64> = xs.iter().map(|&x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / (n - 1) as f64
}

/// Raw kurtosis `m4 / m2^2` of the centered sample (3 for a Gaussian).
///
/// Used as a CLT health check: a huge value means the stderr of the mean is
/// itself too noisy to support a z-test verdict.
pub fn kurtosis(xs: &[f64]) -> f64 {
    let m = sample_mean(xs);
    let n = xs.len() as f64;
    let c2: Vec<f64> = xs.iter().map(|&x| (x - m).powi(2)).collect();
    let c4: Vec<f64> = xs.iter().map(|&x| (x - m).powi(4)).collect();
    let m2 = pairwise_sum(&c2) / n;
    let m4 = pairwise_sum(&c4) / n;
    if m2 == 0.0 {
        // degenerate sample; harmless for the guard's purposes
        return 0.0;
    }
    m4 / (m2 * m2)
}

/// A Monte Carlo estimate: sample mean, unbiased sample variance of the
/// terms, sample count, and `std_error = sqrt(variance / n)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MCEstimate {
    pub mean: f64,
    pub variance: f64,
    pub n: usize,
    pub std_error: f64,
}

impl MCEstimate {
    /// Requires at least two finite samples.
    pub fn from_samples(xs: &[f64]) -> Result<Self, CoreError> {
        if xs.len() < 2 {
            return Err(CoreError::TooFewSamples { needed: 2, got: xs.len() });
        }
        if let Some(k) = xs.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::NonFiniteSample(k));
        }
        let mean = sample_mean(xs);
        let variance = sample_variance(xs);
        Ok(MCEstimate {
            mean,
            variance,
            n: xs.len(),
            std_error: (variance / xs.len() as f64).sqrt(),
        })
    }
}
