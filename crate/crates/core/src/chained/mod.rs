//! Chained (heteroscedastic) Gaussian process regression.
//!
//! Two independent sparse variational GPs share the input space: `f` is the
//! latent mean and `g` the latent log noise variance, so
//! `y | f, g ~ N(f(x), exp(g(x)))`. Each latent carries inducing inputs `Z`
//! and a Gaussian `q(u) = N(var_mean, var_chol·var_cholᵀ)` over its values
//! at `Z`.

mod collapse;
mod fit;
mod objective;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{DataSet, TransformPipeline};
use crate::error::{Error, Result};
use crate::kernel::{self, KernelParams};
use crate::linalg;
use crate::rng;

pub use collapse::{collapsed_model, optimal_whitened_q};
pub use fit::{cgp_fit, farthest_point_inducing, CgpFitConfig, CgpTrace, InducingInit};
pub use objective::{elbo_value, elbo_with_gradient, FreeParams, ParamLayout};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Jitter added to `K_ZZ`, relative to the latent's signal variance.
pub const INDUCING_JITTER: f64 = 1e-6;

/// How the latent `g` maps to the observation noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseParam {
    /// `Var[y | f, g] = exp(g)`.
    #[default]
    LogVariance,
    /// `Std[y | f, g] = exp(g)`, i.e. `Var = exp(2g)`.
    LogStd,
}

impl NoiseParam {
    /// Multiplier `c` in `Var[y | f, g] = exp(c·g)`.
    pub fn factor(self) -> f64 {
        match self {
            NoiseParam::LogVariance => 1.0,
            NoiseParam::LogStd => 2.0,
        }
    }
}

/// One sparse variational latent process.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSparseGp {
    z: DMatrix<f64>,
    var_mean: DVector<f64>,
    var_chol: DMatrix<f64>,
    kernel: KernelParams,
    mean_const: f64,
}

impl LatentSparseGp {
    pub fn new(
        z: DMatrix<f64>,
        var_mean: DVector<f64>,
        var_chol: DMatrix<f64>,
        kernel: KernelParams,
        mean_const: f64,
    ) -> Result<Self> {
        let i = z.nrows();
        if i == 0 {
            return Err(Error::Empty("latent needs at least one inducing point"));
        }
        if z.ncols() != kernel.dim() {
            return Err(Error::DimensionMismatch {
                expected: kernel.dim(),
                actual: z.ncols(),
            });
        }
        if var_mean.len() != i {
            return Err(Error::DimensionMismatch {
                expected: i,
                actual: var_mean.len(),
            });
        }
        if var_chol.shape() != (i, i) {
            return Err(Error::DimensionMismatch {
                expected: i,
                actual: var_chol.nrows(),
            });
        }
        for c in 0..i {
            if !(var_chol[(c, c)] > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "var_chol diagonal entry {c} is {} (must be positive)",
                    var_chol[(c, c)]
                )));
            }
            if (0..c).any(|r| var_chol[(r, c)] != 0.0) {
                return Err(Error::InvalidArgument("var_chol must be lower triangular".into()));
            }
        }
        if !(mean_const.is_finite() && var_mean.iter().chain(var_chol.iter()).all(|v| v.is_finite())) {
            return Err(Error::InvalidArgument("latent parameters must be finite".into()));
        }
        Ok(LatentSparseGp {
            z,
            var_mean,
            var_chol,
            kernel,
            mean_const,
        })
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn var_mean(&self) -> &DVector<f64> {
        &self.var_mean
    }

    pub fn var_chol(&self) -> &DMatrix<f64> {
        &self.var_chol
    }

    pub fn kernel(&self) -> &KernelParams {
        &self.kernel
    }

    pub fn mean_const(&self) -> f64 {
        self.mean_const
    }

    pub fn num_inducing(&self) -> usize {
        self.z.nrows()
    }

    /// Cholesky factor of `K_ZZ + jI` with `j` relative to the signal variance.
    pub fn prior_factor(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        inducing_factor(&self.kernel, &self.z)
    }
}

/// Returns `(K_ZZ + jI, L)`.
pub(crate) fn inducing_factor(k: &KernelParams, z: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let kzz = kernel::kernel_matrix_sym(k, z)?;
    let sc = kernel::stable_cholesky(&kzz, INDUCING_JITTER * k.signal_variance())?;
    let mut kmm = kzz;
    for i in 0..kmm.nrows() {
        kmm[(i, i)] += sc.jitter;
    }
    Ok((kmm, sc.factor))
}

/// Marginals of `q(f(x*)) = ∫ p(f | u) q(u) du` at the rows of `xstar`.
pub fn latent_posterior(l: &LatentSparseGp, xstar: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    let (_, chol) = l.prior_factor()?;
    let linv = linalg::lower_inverse(&chol);
    let kzx = kernel::kernel_matrix(&l.kernel, &l.z, xstar)?;
    // P = L⁻¹ K_Zx*, so K_x*Z K_ZZ⁻¹ = Pᵀ L⁻¹
    let p = &linv * &kzx;
    let w = linalg::at_b(&linv, &p);
    let centred = l.var_mean.add_scalar(-l.mean_const);
    let mean = w.tr_mul(&centred).add_scalar(l.mean_const);
    let b = linalg::at_b(&l.var_chol, &w);
    let s2 = l.kernel.signal_variance();
    let var = DVector::from_iterator(
        xstar.nrows(),
        (0..xstar.nrows()).map(|c| {
            let raw = s2 - p.column(c).norm_squared() + b.column(c).norm_squared();
            if raw < -1e-10 {
                log::warn!("clamping negative latent variance {raw:e}");
            }
            raw.max(0.0)
        }),
    );
    Ok((mean, var))
}

/// `KL(N(q_mean, q_chol·q_cholᵀ) || N(prior_mean, prior_cov))`.
pub fn gaussian_kl(
    q_mean: &DVector<f64>,
    q_chol: &DMatrix<f64>,
    prior_mean: &DVector<f64>,
    prior_cov: &DMatrix<f64>,
) -> Result<f64> {
    let i = q_mean.len();
    if q_chol.shape() != (i, i) || prior_mean.len() != i || prior_cov.shape() != (i, i) {
        return Err(Error::DimensionMismatch {
            expected: i,
            actual: prior_cov.nrows(),
        });
    }
    let l = kernel::stable_cholesky(prior_cov, 0.0)?.factor;
    let m = l
        .solve_lower_triangular(q_chol)
        .expect("cholesky factor has positive diagonal");
    let diff = linalg::solve_lower(&l, &(prior_mean - q_mean));
    let log_det_s = 2.0 * q_chol.diagonal().iter().map(|d| d.abs().ln()).sum::<f64>();
    Ok(0.5 * (m.norm_squared() + diff.norm_squared() - i as f64 + linalg::chol_logdet(&l) - log_det_s))
}

/// `E_{f~N(a_f,v_f), g~N(a_g,v_g)} log N(y | f, exp(c·g))`.
pub fn expected_loglik(y: f64, a_f: f64, v_f: f64, a_g: f64, v_g: f64, noise: NoiseParam) -> f64 {
    let c = noise.factor();
    let r = (y - a_f) * (y - a_f) + v_f;
    -0.5 * (2.0 * PI).ln() - 0.5 * c * a_g - 0.5 * (-c * a_g + 0.5 * c * c * v_g).exp() * r
}

/// [`expected_loglik`] under the log-variance convention.
pub fn expected_loglik_gaussian(y: f64, a_f: f64, v_f: f64, a_g: f64, v_g: f64) -> f64 {
    expected_loglik(y, a_f, v_f, a_g, v_g, NoiseParam::LogVariance)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElboReport {
    pub elbo: f64,
    pub expected_loglik_sum: f64,
    pub kl_f: f64,
    pub kl_g: f64,
}

impl ElboReport {
    pub(crate) fn assemble(expected_loglik_sum: f64, kl_f: f64, kl_g: f64) -> Self {
        ElboReport {
            elbo: expected_loglik_sum - kl_f - kl_g,
            expected_loglik_sum,
            kl_f,
            kl_g,
        }
    }
}

/// A trained heteroscedastic model.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainedGpModel {
    latent_f: LatentSparseGp,
    latent_g: LatentSparseGp,
    transforms: TransformPipeline,
    noise: NoiseParam,
}

impl ChainedGpModel {
    pub fn new(
        latent_f: LatentSparseGp,
        latent_g: LatentSparseGp,
        transforms: TransformPipeline,
        noise: NoiseParam,
    ) -> Result<Self> {
        let m = latent_f.kernel.dim();
        if latent_g.kernel.dim() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: latent_g.kernel.dim(),
            });
        }
        if transforms.dim() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: transforms.dim(),
            });
        }
        Ok(ChainedGpModel {
            latent_f,
            latent_g,
            transforms,
            noise,
        })
    }

    pub fn latent_f(&self) -> &LatentSparseGp {
        &self.latent_f
    }

    pub fn latent_g(&self) -> &LatentSparseGp {
        &self.latent_g
    }

    pub fn transforms(&self) -> &TransformPipeline {
        &self.transforms
    }

    pub fn noise(&self) -> NoiseParam {
        self.noise
    }

    pub fn dim(&self) -> usize {
        self.latent_f.kernel.dim()
    }

    /// Maps physical feature rows into model space.
    pub fn to_model_space(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.ncols(),
            });
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| {
            self.transforms.features[c].apply(x[(r, c)])
        }))
    }

    /// Latent noise level at physical inputs, as log variance of the physical
    /// target. Only defined for affine target transforms.
    pub fn log_noise_variance_physical(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if self.transforms.target.is_log() {
            return Err(Error::InvalidArgument(
                "physical noise variance is only defined for affine target transforms".into(),
            ));
        }
        let (a_g, _) = latent_posterior(&self.latent_g, &self.to_model_space(x)?)?;
        let shift = 2.0 * self.transforms.target.scale.ln();
        Ok(a_g.map(|v| self.noise.factor() * v + shift))
    }

    /// Predictive mean of `f` in physical units for affine target transforms.
    pub fn latent_mean_physical(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let (a_f, _) = latent_posterior(&self.latent_f, &self.to_model_space(x)?)?;
        Ok(a_f.map(|v| self.transforms.invert_target(v)))
    }

    pub fn to_saved(&self) -> SavedChained {
        SavedChained {
            format_version: MODEL_FORMAT_VERSION,
            kind: "chained-gp".into(),
            noise: self.noise,
            latent_f: SavedLatent::from(&self.latent_f),
            latent_g: SavedLatent::from(&self.latent_g),
            transforms: self.transforms.clone(),
        }
    }

    pub fn from_saved(s: SavedChained) -> Result<Self> {
        if s.format_version != MODEL_FORMAT_VERSION || s.kind != "chained-gp" {
            return Err(Error::Format(format!(
                "expected chained-gp model version {MODEL_FORMAT_VERSION}, found {} version {}",
                s.kind, s.format_version
            )));
        }
        ChainedGpModel::new(s.latent_f.into_latent()?, s.latent_g.into_latent()?, s.transforms, s.noise)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_saved())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_saved(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SavedLatent {
    #[serde(rename = "Z")]
    pub z: Vec<Vec<f64>>,
    pub var_mean: Vec<f64>,
    /// Row-major lower triangle, diagonal included.
    pub var_chol: Vec<f64>,
    pub kernel: KernelParams,
    pub mean_const: f64,
}

impl From<&LatentSparseGp> for SavedLatent {
    fn from(l: &LatentSparseGp) -> Self {
        let i = l.num_inducing();
        let var_chol = (0..i).flat_map(|r| (0..=r).map(move |c| (r, c))).map(|rc| l.var_chol[rc]).collect();
        SavedLatent {
            z: l.z.row_iter().map(|r| r.iter().copied().collect()).collect(),
            var_mean: l.var_mean.iter().copied().collect(),
            var_chol,
            kernel: l.kernel.clone(),
            mean_const: l.mean_const,
        }
    }
}

impl SavedLatent {
    fn into_latent(self) -> Result<LatentSparseGp> {
        let i = self.var_mean.len();
        let m = self.kernel.dim();
        if self.z.len() != i || self.z.iter().any(|r| r.len() != m) {
            return Err(Error::Format("Z shape does not match var_mean/kernel".into()));
        }
        if self.var_chol.len() != i * (i + 1) / 2 {
            return Err(Error::Format(format!(
                "var_chol needs {} lower-triangle entries, found {}",
                i * (i + 1) / 2,
                self.var_chol.len()
            )));
        }
        let mut chol = DMatrix::zeros(i, i);
        let mut it = self.var_chol.into_iter();
        for r in 0..i {
            for c in 0..=r {
                chol[(r, c)] = it.next().expect("length checked");
            }
        }
        let flat: Vec<f64> = self.z.into_iter().flatten().collect();
        LatentSparseGp::new(
            DMatrix::from_row_slice(i, m, &flat),
            DVector::from_vec(self.var_mean),
            chol,
            self.kernel,
            self.mean_const,
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SavedChained {
    pub format_version: u32,
    pub kind: String,
    pub noise: NoiseParam,
    pub latent_f: SavedLatent,
    pub latent_g: SavedLatent,
    pub transforms: TransformPipeline,
}

fn batch_rows(d: &DataSet, minibatch: Option<&[usize]>) -> Result<Vec<usize>> {
    match minibatch {
        None => Ok((0..d.len()).collect()),
        Some([]) => Err(Error::Empty("minibatch is empty")),
        Some(rows) => {
            if let Some(&bad) = rows.iter().find(|&&r| r >= d.len()) {
                return Err(Error::InvalidArgument(format!(
                    "minibatch row {bad} out of range for {} rows",
                    d.len()
                )));
            }
            Ok(rows.to_vec())
        }
    }
}

/// Evidence lower bound on the (model-space) data, optionally estimated on a
/// minibatch with the likelihood term rescaled by `N / |batch|`.
pub fn elbo(m: &ChainedGpModel, d: &DataSet, minibatch: Option<&[usize]>) -> Result<ElboReport> {
    if d.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            actual: d.dim(),
        });
    }
    let rows = batch_rows(d, minibatch)?;
    let xb = d.features().select_rows(rows.iter());
    let (a_f, v_f) = latent_posterior(&m.latent_f, &xb)?;
    let (a_g, v_g) = latent_posterior(&m.latent_g, &xb)?;
    let y = d.target();
    let terms = rows
        .iter()
        .enumerate()
        .map(|(b, &r)| expected_loglik(y[r], a_f[b], v_f[b], a_g[b], v_g[b], m.noise));
    let scale = d.len() as f64 / rows.len() as f64;
    let ell = scale * linalg::compensated_sum(terms);
    let kl = |l: &LatentSparseGp| -> Result<f64> {
        let (kmm, _) = l.prior_factor()?;
        let prior_mean = DVector::from_element(l.num_inducing(), l.mean_const);
        gaussian_kl(&l.var_mean, &l.var_chol, &prior_mean, &kmm)
    };
    Ok(ElboReport::assemble(ell, kl(&m.latent_f)?, kl(&m.latent_g)?))
}

/// Predictive mean and variance of `y` in model units:
/// `(a_f, v_f + exp(c·a_g + c²·v_g/2))`. Inputs are in model space.
pub fn cgp_predict_moments(m: &ChainedGpModel, xstar: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    let (a_f, v_f) = latent_posterior(&m.latent_f, xstar)?;
    let (a_g, v_g) = latent_posterior(&m.latent_g, xstar)?;
    let c = m.noise.factor();
    let var = DVector::from_fn(a_f.len(), |i, _| v_f[i] + (c * a_g[i] + 0.5 * c * c * v_g[i]).exp());
    Ok((a_f, var))
}

/// Predictive mean and variance of `y` at one physical input, in physical
/// units. Log targets integrate the latent `g` by Gauss–Hermite quadrature;
/// the `f` and noise parts of the log-normal moments are closed form.
pub fn cgp_physical_moments(m: &ChainedGpModel, x_physical: &[f64]) -> Result<(f64, f64)> {
    let xs = m.transforms.transform_point(x_physical)?;
    let xm = DMatrix::from_row_slice(1, xs.len(), &xs);
    let (a_f, v_f) = latent_posterior(&m.latent_f, &xm)?;
    let (a_g, v_g) = latent_posterior(&m.latent_g, &xm)?;
    let (a_f, v_f, a_g, v_g) = (a_f[0], v_f[0], a_g[0], v_g[0]);
    let t = m.transforms.target;
    let c = m.noise.factor();
    if !t.is_log() {
        let var = v_f + (c * a_g + 0.5 * c * c * v_g).exp();
        return Ok((t.invert(a_f), var * t.scale * t.scale));
    }
    // Y = exp(shift + b·y), y | f, g ~ N(f, exp(c·g))
    let b = t.scale;
    let gh = crate::quadrature::GaussHermite::new(40);
    let e1 = gh.expect(a_g, v_g, |g| (0.5 * b * b * (c * g).exp()).exp());
    let e2 = gh.expect(a_g, v_g, |g| (2.0 * b * b * (c * g).exp()).exp());
    let mean = (t.shift + b * a_f + 0.5 * b * b * v_f).exp() * e1;
    let second = (2.0 * t.shift + 2.0 * b * a_f + 2.0 * b * b * v_f).exp() * e2;
    Ok((mean, (second - mean * mean).max(0.0)))
}

/// Draws from the predictive law at one physical input point and returns them
/// in physical target units. Identical seeds and inputs give identical draws.
pub fn cgp_predict_samples(m: &ChainedGpModel, x_physical: &[f64], num_samples: usize, seed: u64) -> Result<Vec<f64>> {
    let xs = m.transforms.transform_point(x_physical)?;
    let xm = DMatrix::from_row_slice(1, xs.len(), &xs);
    let (a_f, v_f) = latent_posterior(&m.latent_f, &xm)?;
    let (a_g, v_g) = latent_posterior(&m.latent_g, &xm)?;
    Ok(sample_model_units(m.noise, (a_f[0], v_f[0]), (a_g[0], v_g[0]), num_samples, seed, x_physical)
        .into_iter()
        .map(|y| m.transforms.invert_target(y))
        .collect())
}

/// `f* ~ N(a_f, v_f)`, `g* ~ N(a_g, v_g)`, `y* ~ N(f*, exp(c·g*))`.
pub fn sample_model_units(
    noise: NoiseParam,
    (a_f, v_f): (f64, f64),
    (a_g, v_g): (f64, f64),
    num_samples: usize,
    seed: u64,
    x: &[f64],
) -> Vec<f64> {
    let mut r = rng::rng_from_key(rng::derive_key(&[seed, rng::hash_point(x), rng::hash_str("cgp-samples")]));
    let c = noise.factor();
    let (sf, sg) = (v_f.max(0.0).sqrt(), v_g.max(0.0).sqrt());
    (0..num_samples)
        .map(|_| {
            let zf: f64 = StandardNormal.sample(&mut r);
            let zg: f64 = StandardNormal.sample(&mut r);
            let zy: f64 = StandardNormal.sample(&mut r);
            let f = a_f + sf * zf;
            let g = a_g + sg * zg;
            f + (0.5 * c * g).exp() * zy
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn latent(z: &[f64], mean: &[f64], chol_diag: f64, mean_const: f64) -> LatentSparseGp {
        let i = z.len();
        LatentSparseGp::new(
            DMatrix::from_row_slice(i, 1, z),
            DVector::from_row_slice(mean),
            DMatrix::from_diagonal_element(i, i, chol_diag),
            KernelParams::new(vec![0.1], 1.5).unwrap(),
            mean_const,
        )
        .unwrap()
    }

    #[test]
    fn expected_loglik_cases() {
        assert_relative_eq!(expected_loglik_gaussian(0.3, 0.3, 0.0, 0.0, 0.0), -0.918939, epsilon = 1e-6);
        assert_relative_eq!(expected_loglik_gaussian(1.0, 0.0, 0.0, 0.0, 0.0), -1.418939, epsilon = 1e-6);
    }

    #[test]
    fn log_std_doubles_the_exponent() {
        let a = expected_loglik(0.7, 0.1, 0.2, 0.3, 0.05, NoiseParam::LogStd);
        let b = expected_loglik(0.7, 0.1, 0.2, 0.6, 0.2, NoiseParam::LogVariance);
        assert_relative_eq!(a, b, epsilon = 1e-14);
    }

    #[test]
    fn posterior_collapses_onto_inducing_point() {
        let l = latent(&[0.4], &[2.5], 1e-6, 0.0);
        let (a, v) = latent_posterior(&l, &DMatrix::from_row_slice(1, 1, &[0.4])).unwrap();
        assert_relative_eq!(a[0], 2.5, epsilon = 1e-5);
        assert!(v[0] < 1e-5);
    }

    #[test]
    fn posterior_reverts_far_away() {
        let l = latent(&[0.0, 0.5], &[2.0, -1.0], 0.1, 0.7);
        let (a, v) = latent_posterior(&l, &DMatrix::from_row_slice(1, 1, &[50.0])).unwrap();
        assert_relative_eq!(a[0], 0.7, epsilon = 1e-12);
        assert_relative_eq!(v[0], 1.5, epsilon = 1e-12);
    }

    #[test]
    fn kl_closed_forms() {
        let mu = DVector::from_row_slice(&[0.3, -1.2, 2.0]);
        let eye = DMatrix::identity(3, 3);
        let zero = DVector::zeros(3);
        assert_relative_eq!(gaussian_kl(&mu, &eye, &zero, &eye).unwrap(), 0.5 * mu.norm_squared(), epsilon = 1e-12);
        let cov = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 1.5]);
        let chol = crate::linalg::cholesky(&cov).unwrap();
        assert!(gaussian_kl(&mu, &chol, &mu, &cov).unwrap().abs() < 1e-10);
    }

    #[test]
    fn latent_validation() {
        let z = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let k = KernelParams::new(vec![1.0], 1.0).unwrap();
        let mean = DVector::zeros(2);
        let mut upper = DMatrix::identity(2, 2);
        upper[(0, 1)] = 0.5;
        assert!(LatentSparseGp::new(z.clone(), mean.clone(), upper, k.clone(), 0.0).is_err());
        let mut neg = DMatrix::identity(2, 2);
        neg[(1, 1)] = -1.0;
        assert!(LatentSparseGp::new(z.clone(), mean.clone(), neg, k.clone(), 0.0).is_err());
        assert!(LatentSparseGp::new(z, DVector::zeros(3), DMatrix::identity(2, 2), k, 0.0).is_err());
    }

    #[test]
    fn zero_latent_variance_moments() {
        let f = latent(&[0.2], &[1.0], 1e-9, 1.0);
        let g = latent(&[0.2], &[-0.5], 1e-9, -0.5);
        let f = LatentSparseGp { kernel: KernelParams::new(vec![0.1], 1e-12).unwrap(), ..f };
        let g = LatentSparseGp { kernel: KernelParams::new(vec![0.1], 1e-12).unwrap(), ..g };
        let m = ChainedGpModel::new(f, g, TransformPipeline::identity(vec!["x".into()], "y".into()), NoiseParam::LogVariance).unwrap();
        let (mean, var) = cgp_predict_moments(&m, &DMatrix::from_row_slice(1, 1, &[0.9])).unwrap();
        assert_relative_eq!(mean[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(var[0], (-0.5f64).exp(), epsilon = 1e-9);
    }
}
