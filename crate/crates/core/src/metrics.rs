//! Distributional and pointwise error metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted scalar samples; the empirical quantile function is the step
/// function taking value `x_(i)` on `((i-1)/n, i/n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
}

impl EmpiricalDistribution {
    /// Sorts `samples`. Rejects empty or non-finite input.
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("empirical distribution needs samples"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("empirical samples must be finite".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(EmpiricalDistribution { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.len() as f64
    }

    /// Sample standard deviation (divisor `n - 1`).
    pub fn std(&self) -> Result<f64> {
        let n = self.len();
        if n < 2 {
            return Err(Error::InvalidArgument(
                "standard deviation needs at least 2 samples".into(),
            ));
        }
        let m = self.mean();
        let ss: f64 = self.samples.iter().map(|v| (v - m) * (v - m)).sum();
        Ok((ss / (n - 1) as f64).sqrt())
    }

    /// Empirical quantile at `u ∈ [0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.len();
        let i = ((u * n as f64).ceil() as usize).clamp(1, n);
        self.samples[i - 1]
    }
}

/// `∫₀¹ |F⁻¹(u) − G⁻¹(u)| du`, computed exactly.
pub fn wasserstein1(p: &EmpiricalDistribution, q: &EmpiricalDistribution) -> f64 {
    if p.len() == q.len() {
        wasserstein1_equal(p, q)
    } else {
        wasserstein1_merged(p, q)
    }
}

/// Mean absolute difference of order statistics; requires equal counts.
pub fn wasserstein1_equal(p: &EmpiricalDistribution, q: &EmpiricalDistribution) -> f64 {
    assert_eq!(p.len(), q.len(), "equal-count path needs equal sample counts");
    let total: f64 = p
        .samples
        .iter()
        .zip(&q.samples)
        .map(|(a, b)| (a - b).abs())
        .sum();
    total / p.len() as f64
}

/// Walks the union of breakpoints `i/n` and `j/m`; both quantile functions
/// are constant between consecutive breakpoints.
pub fn wasserstein1_merged(p: &EmpiricalDistribution, q: &EmpiricalDistribution) -> f64 {
    let (n, m) = (p.len() as u128, q.len() as u128);
    let (mut i, mut j) = (0u128, 0u128);
    // Breakpoints compared as integers i·m vs j·n to avoid rounding.
    let mut prev = 0u128;
    let mut total = 0.0;
    while i < n && j < m {
        let next_p = (i + 1) * m;
        let next_q = (j + 1) * n;
        let next = next_p.min(next_q);
        let width = (next - prev) as f64 / (n * m) as f64;
        total += width * (p.samples[i as usize] - q.samples[j as usize]).abs();
        prev = next;
        if next_p == next {
            i += 1;
        }
        if next_q == next {
            j += 1;
        }
    }
    total
}

/// `W1(p, q) / std(p)`; the first argument is the reference.
pub fn normalized_wasserstein(reference: &EmpiricalDistribution, q: &EmpiricalDistribution) -> Result<f64> {
    let s = reference.std()?;
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(
            "reference distribution has zero standard deviation".into(),
        ));
    }
    Ok(wasserstein1(reference, q) / s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub rmse: f64,
    pub mae: f64,
    /// `None` when the truth has zero variance.
    pub r2: Option<f64>,
}

pub fn point_metrics(truth: &[f64], pred: &[f64]) -> Result<PointMetrics> {
    if truth.len() != pred.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    let n = truth.len();
    if n < 2 {
        return Err(Error::InvalidArgument("point metrics need at least 2 values".into()));
    }
    let nf = n as f64;
    let ss_res: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p) * (t - p)).sum();
    let mae = truth.iter().zip(pred).map(|(t, p)| (t - p).abs()).sum::<f64>() / nf;
    let mean = truth.iter().sum::<f64>() / nf;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean) * (t - mean)).sum();
    let r2 = (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot);
    Ok(PointMetrics {
        rmse: (ss_res / nf).sqrt(),
        mae,
        r2,
    })
}
