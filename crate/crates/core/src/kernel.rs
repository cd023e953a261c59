//! Squared-exponential ARD covariance.
//!
//! The squared separation along dimension `j` is divided by `l_j` itself, not
//! by `l_j²`:
//!
//! ```text
//! k(x, x') = σ_h² · exp(-½ Σ_j (x_j - x'_j)² / l_j)
//! ```
//!
//! so `l_j` plays the role of a squared length-scale in the conventional
//! parameterization.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Default diagonal jitter, relative to the mean diagonal of the matrix.
pub const DEFAULT_RELATIVE_JITTER: f64 = 1e-6;
/// Jitter escalation stops once this fraction of the mean diagonal is exceeded.
pub const JITTER_CAP_RELATIVE: f64 = 1e-2;

/// Hyperparameters of one squared-exponential ARD kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernelParams", into = "RawKernelParams")]
pub struct KernelParams {
    lengthscales: Vec<f64>,
    signal_variance: f64,
}

#[derive(Serialize, Deserialize)]
struct RawKernelParams {
    lengthscales: Vec<f64>,
    signal_variance: f64,
}

impl TryFrom<RawKernelParams> for KernelParams {
    type Error = Error;
    fn try_from(raw: RawKernelParams) -> Result<Self> {
        KernelParams::new(raw.lengthscales, raw.signal_variance)
    }
}

impl From<KernelParams> for RawKernelParams {
    fn from(p: KernelParams) -> Self {
        RawKernelParams {
            lengthscales: p.lengthscales,
            signal_variance: p.signal_variance,
        }
    }
}

impl KernelParams {
    pub fn new(lengthscales: Vec<f64>, signal_variance: f64) -> Result<Self> {
        if lengthscales.is_empty() {
            return Err(Error::InvalidArgument(
                "kernel needs at least one lengthscale".into(),
            ));
        }
        if let Some(l) = lengthscales.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "lengthscales must be positive and finite, got {l}"
            )));
        }
        if !(signal_variance.is_finite() && signal_variance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "signal variance must be positive and finite, got {signal_variance}"
            )));
        }
        Ok(KernelParams {
            lengthscales,
            signal_variance,
        })
    }

    /// Same lengthscale in every one of `dim` dimensions.
    pub fn isotropic(dim: usize, lengthscale: f64, signal_variance: f64) -> Result<Self> {
        Self::new(vec![lengthscale; dim], signal_variance)
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_variance
    }

    /// `[log l_1, …, log l_m, log σ_h²]`, the unconstrained coordinates used
    /// by the optimizers.
    pub fn to_log_vec(&self) -> Vec<f64> {
        self.lengthscales
            .iter()
            .map(|l| l.ln())
            .chain(std::iter::once(self.signal_variance.ln()))
            .collect()
    }

    /// Inverse of [`KernelParams::to_log_vec`].
    pub fn from_log_slice(logs: &[f64]) -> Result<Self> {
        let (ls, var) = logs.split_at(logs.len().saturating_sub(1));
        Self::new(
            ls.iter().map(|v| v.exp()).collect(),
            var.first().copied().unwrap_or(f64::NAN).exp(),
        )
    }

    fn check_dim(&self, actual: usize) -> Result<()> {
        if actual != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual,
            });
        }
        Ok(())
    }
}

/// Evaluates the kernel between two points.
pub fn kernel_eval(p: &KernelParams, x: &[f64], x2: &[f64]) -> Result<f64> {
    p.check_dim(x.len())?;
    p.check_dim(x2.len())?;
    let r2: f64 = x
        .iter()
        .zip(x2)
        .zip(&p.lengthscales)
        .map(|((a, b), l)| (a - b) * (a - b) / l)
        .sum();
    Ok(p.signal_variance * (-0.5 * r2).exp())
}

/// Cross-covariance matrix between the rows of `x` and the rows of `x2`.
pub fn kernel_matrix(p: &KernelParams, x: &DMatrix<f64>, x2: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    p.check_dim(x.ncols())?;
    p.check_dim(x2.ncols())?;
    let inv_l: Vec<f64> = p.lengthscales.iter().map(|l| 1.0 / l).collect();
    let m = p.dim();
    Ok(DMatrix::from_fn(x.nrows(), x2.nrows(), |i, j| {
        let mut r2 = 0.0;
        for d in 0..m {
            let diff = x[(i, d)] - x2[(j, d)];
            r2 += diff * diff * inv_l[d];
        }
        p.signal_variance * (-0.5 * r2).exp()
    }))
}

/// Covariance matrix of the rows of `x` with themselves; exactly symmetric.
pub fn kernel_matrix_sym(p: &KernelParams, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    p.check_dim(x.ncols())?;
    let n = x.nrows();
    let m = p.dim();
    let inv_l: Vec<f64> = p.lengthscales.iter().map(|l| 1.0 / l).collect();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        k[(j, j)] = p.signal_variance;
        for i in (j + 1)..n {
            let mut r2 = 0.0;
            for d in 0..m {
                let diff = x[(i, d)] - x[(j, d)];
                r2 += diff * diff * inv_l[d];
            }
            let v = p.signal_variance * (-0.5 * r2).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// A Cholesky factor together with the diagonal jitter that was needed.
#[derive(Debug, Clone)]
pub struct StableCholesky {
    pub factor: DMatrix<f64>,
    pub jitter: f64,
}

/// Factorizes `a + jitter·I`. On failure the jitter grows tenfold (starting
/// from the default relative jitter when `jitter` is zero) until it exceeds
/// [`JITTER_CAP_RELATIVE`] of the mean diagonal.
pub fn stable_cholesky(a: &DMatrix<f64>, jitter: f64) -> Result<StableCholesky> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: a.ncols(),
        });
    }
    let scale = if n == 0 {
        1.0
    } else {
        let mean = a.diagonal().iter().map(|d| d.abs()).sum::<f64>() / n as f64;
        if mean > 0.0 && mean.is_finite() {
            mean
        } else {
            1.0
        }
    };
    let cap = JITTER_CAP_RELATIVE * scale;
    let mut jitter = jitter.max(0.0);
    loop {
        let mut shifted = a.clone();
        for i in 0..n {
            shifted[(i, i)] += jitter;
        }
        if let Some(factor) = linalg::cholesky(&shifted) {
            return Ok(StableCholesky { factor, jitter });
        }
        let next = if jitter == 0.0 {
            DEFAULT_RELATIVE_JITTER * scale
        } else {
            jitter * 10.0
        };
        if next > cap * (1.0 + 1e-9) {
            return Err(Error::NotPositiveDefinite { jitter });
        }
        log::debug!("cholesky failed at jitter {jitter:e}, retrying with {next:e}");
        jitter = next;
    }
}
