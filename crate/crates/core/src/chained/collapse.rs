//! The homoscedastic special case: `g` pinned at a constant log variance,
//! where the optimal `q(u_f)` is available in closed form.

use nalgebra::{DMatrix, DVector};

use super::{inducing_factor, ChainedGpModel, LatentSparseGp, NoiseParam};
use crate::dataset::DataSet;
use crate::error::{Error, Result};
use crate::gpr::GprHyper;
use crate::kernel::{kernel_matrix, KernelParams};
use crate::linalg;

/// Prior variance of the pinned `g` latent; small enough that its
/// fluctuations are negligible against any realistic noise level.
pub const COLLAPSED_G_VARIANCE: f64 = 1e-10;

/// Maximizer of the whitened bound for a Gaussian likelihood with known noise:
/// precision `Λ = I + AᵀA/σ²`, mean `Λ⁻¹Aᵀr/σ²`. Returns `(v_m, R)` with
/// `R Rᵀ = Λ⁻¹`, `R` lower triangular.
pub fn optimal_whitened_q(a: &DMatrix<f64>, resid: &DVector<f64>, noise_variance: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let i = a.ncols();
    let mut lambda = linalg::at_b(a, a) / noise_variance;
    for k in 0..i {
        lambda[(k, k)] += 1.0;
    }
    let lc = linalg::cholesky(&lambda).ok_or(Error::NotPositiveDefinite { jitter: 0.0 })?;
    let v_m = linalg::chol_solve(&lc, &(a.tr_mul(resid) / noise_variance));
    let linv = linalg::lower_inverse(&lc);
    let cov = linalg::lower_gram(&linv);
    let r = linalg::cholesky(&cov).ok_or(Error::NotPositiveDefinite { jitter: 0.0 })?;
    Ok((v_m, r))
}

/// A chained model equivalent to the homoscedastic GP `hyper`: `q(u_g)` equals
/// its prior, a constant `log σ²` with negligible spread, and `q(u_f)` is
/// optimal for inducing inputs `z`.
pub fn collapsed_model(d: &DataSet, hyper: &GprHyper, z: &DMatrix<f64>) -> Result<ChainedGpModel> {
    let (_, chol) = inducing_factor(&hyper.kernel, z)?;
    let knm = kernel_matrix(&hyper.kernel, d.features(), z)?;
    let a = &knm * linalg::lower_inverse(&chol).transpose();
    let resid = d.target().add_scalar(-hyper.mean_const);
    let (v_m, r) = optimal_whitened_q(&a, &resid, hyper.noise_variance)?;
    let var_chol = (&chol * &r).lower_triangle();
    let latent_f = LatentSparseGp::new(
        z.clone(),
        (&chol * v_m).add_scalar(hyper.mean_const),
        var_chol,
        hyper.kernel.clone(),
        hyper.mean_const,
    )?;

    let g_kernel = KernelParams::new(hyper.kernel.lengthscales().to_vec(), COLLAPSED_G_VARIANCE)?;
    let (_, g_chol) = inducing_factor(&g_kernel, z)?;
    let log_var = hyper.noise_variance.ln();
    let latent_g = LatentSparseGp::new(
        z.clone(),
        DVector::from_element(z.nrows(), log_var),
        g_chol,
        g_kernel,
        log_var,
    )?;
    ChainedGpModel::new(latent_f, latent_g, d.pipeline_or_identity(), NoiseParam::LogVariance)
}
