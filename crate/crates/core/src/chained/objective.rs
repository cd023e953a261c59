//! ELBO and its gradient in whitened coordinates.
//!
//! Each latent is optimized through `u = c + L·w` with `L Lᵀ = K_ZZ + jI` and
//! `w ~ N(v_m, R Rᵀ)`, so its KL term is against `N(0, I)` and independent of
//! the kernel. With `A = K_XZ L⁻ᵀ` and `B = A R` the marginals are
//! `a = c + A v_m` and `v = σ_h² − rowsum(A∘A) + rowsum(B∘B)`.
//!
//! Free vector per latent, in order: `log l` (m), `log σ_h²`, `c`, `v_m` (I),
//! the lower triangle of `R` row by row with its diagonal stored as a log,
//! and `Z` row by row when inducing inputs are learned. The `g` block
//! follows the `f` block.

use nalgebra::{DMatrix, DVector};

use super::{inducing_factor, ChainedGpModel, ElboReport, LatentSparseGp, NoiseParam};
use crate::dataset::TransformPipeline;
use crate::error::{Error, Result};
use crate::kernel::{kernel_matrix, KernelParams};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub dim: usize,
    pub num_inducing: usize,
    pub learn_z: bool,
}

impl ParamLayout {
    fn tri(&self) -> usize {
        self.num_inducing * (self.num_inducing + 1) / 2
    }

    /// Length of one latent's block.
    pub fn block_len(&self) -> usize {
        let z = if self.learn_z { self.num_inducing * self.dim } else { 0 };
        self.dim + 2 + self.num_inducing + self.tri() + z
    }

    pub fn len(&self) -> usize {
        2 * self.block_len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Whitened parameters of both latents.
#[derive(Debug, Clone)]
pub struct FreeParams {
    pub layout: ParamLayout,
    pub theta: Vec<f64>,
    /// Inducing inputs used when `learn_z` is off.
    pub fixed_z: [DMatrix<f64>; 2],
}

struct Whitened {
    kernel: KernelParams,
    c: f64,
    v_m: DVector<f64>,
    r: DMatrix<f64>,
    z: DMatrix<f64>,
}

impl Whitened {
    fn decode(lay: &ParamLayout, block: &[f64], fixed_z: &DMatrix<f64>) -> Result<Self> {
        let (m, i) = (lay.dim, lay.num_inducing);
        let kernel = KernelParams::from_log_slice(&block[..=m])?;
        let c = block[m + 1];
        let v_m = DVector::from_column_slice(&block[m + 2..m + 2 + i]);
        let mut r = DMatrix::zeros(i, i);
        let mut k = m + 2 + i;
        for row in 0..i {
            for col in 0..=row {
                r[(row, col)] = if row == col { block[k].exp() } else { block[k] };
                k += 1;
            }
        }
        let z = if lay.learn_z {
            DMatrix::from_row_slice(i, m, &block[k..k + i * m])
        } else {
            fixed_z.clone()
        };
        Ok(Whitened { kernel, c, v_m, r, z })
    }

    fn encode(&self, lay: &ParamLayout) -> Vec<f64> {
        let i = lay.num_inducing;
        let mut out = self.kernel.to_log_vec();
        out.push(self.c);
        out.extend(self.v_m.iter());
        for row in 0..i {
            for col in 0..=row {
                let v = self.r[(row, col)];
                out.push(if row == col { v.ln() } else { v });
            }
        }
        if lay.learn_z {
            for row in self.z.row_iter() {
                out.extend(row.iter());
            }
        }
        out
    }

    fn from_latent(l: &LatentSparseGp) -> Result<Self> {
        let (_, chol) = l.prior_factor()?;
        let c = l.mean_const();
        let v_m = linalg::solve_lower(&chol, &l.var_mean().add_scalar(-c));
        let r = chol
            .solve_lower_triangular(l.var_chol())
            .expect("cholesky factor has positive diagonal");
        Ok(Whitened {
            kernel: l.kernel().clone(),
            c,
            v_m,
            r,
            z: l.z().clone(),
        })
    }

    fn to_latent(&self) -> Result<LatentSparseGp> {
        let (_, chol) = inducing_factor(&self.kernel, &self.z)?;
        let var_mean = (&chol * &self.v_m).add_scalar(self.c);
        let mut var_chol = &chol * &self.r;
        for row in 0..var_chol.nrows() {
            for col in (row + 1)..var_chol.ncols() {
                var_chol[(row, col)] = 0.0;
            }
        }
        LatentSparseGp::new(self.z.clone(), var_mean, var_chol, self.kernel.clone(), self.c)
    }

    /// `KL(N(v_m, R Rᵀ) || N(0, I))`.
    fn kl(&self) -> f64 {
        let i = self.v_m.len() as f64;
        let log_diag: f64 = self.r.diagonal().iter().map(|d| d.ln()).sum();
        0.5 * (self.r.norm_squared() + self.v_m.norm_squared() - i - 2.0 * log_diag)
    }
}

impl FreeParams {
    pub fn from_model(model: &ChainedGpModel, learn_z: bool) -> Result<Self> {
        let f = model.latent_f();
        let g = model.latent_g();
        if f.num_inducing() != g.num_inducing() {
            return Err(Error::InvalidArgument(
                "both latents must use the same number of inducing points".into(),
            ));
        }
        let layout = ParamLayout {
            dim: model.dim(),
            num_inducing: f.num_inducing(),
            learn_z,
        };
        let mut theta = Whitened::from_latent(f)?.encode(&layout);
        theta.extend(Whitened::from_latent(g)?.encode(&layout));
        Ok(FreeParams {
            layout,
            theta,
            fixed_z: [f.z().clone(), g.z().clone()],
        })
    }

    fn latents(&self) -> Result<[Whitened; 2]> {
        let bl = self.layout.block_len();
        Ok([
            Whitened::decode(&self.layout, &self.theta[..bl], &self.fixed_z[0])?,
            Whitened::decode(&self.layout, &self.theta[bl..], &self.fixed_z[1])?,
        ])
    }

    pub fn to_model(&self, transforms: TransformPipeline, noise: NoiseParam) -> Result<ChainedGpModel> {
        let [f, g] = self.latents()?;
        ChainedGpModel::new(f.to_latent()?, g.to_latent()?, transforms, noise)
    }
}

struct Forward {
    a: DVector<f64>,
    v: DVector<f64>,
    kzz: DMatrix<f64>,
    kmm: DMatrix<f64>,
    linv: DMatrix<f64>,
    knm: DMatrix<f64>,
    amat: DMatrix<f64>,
    bmat: DMatrix<f64>,
}

fn forward(w: &Whitened, xb: &DMatrix<f64>) -> Result<Forward> {
    let (kmm, chol) = inducing_factor(&w.kernel, &w.z)?;
    let jitter = kmm[(0, 0)] - w.kernel.signal_variance();
    let mut kzz = kmm.clone();
    for i in 0..kzz.nrows() {
        kzz[(i, i)] -= jitter;
    }
    let linv = linalg::lower_inverse(&chol);
    let knm = kernel_matrix(&w.kernel, xb, &w.z)?;
    let amat = &knm * linv.transpose();
    let bmat = &amat * &w.r;
    let a = (&amat * &w.v_m).add_scalar(w.c);
    let s2 = w.kernel.signal_variance();
    let v = DVector::from_fn(xb.nrows(), |b, _| {
        s2 - amat.row(b).norm_squared() + bmat.row(b).norm_squared()
    });
    Ok(Forward {
        a,
        v,
        kzz,
        kmm,
        linv,
        knm,
        amat,
        bmat,
    })
}

fn lower_part(m: &mut DMatrix<f64>) {
    for c in 1..m.ncols() {
        for r in 0..c {
            m[(r, c)] = 0.0;
        }
    }
}

/// Gradient of `Σ ga·a + Σ gv·v − KL` with respect to one latent block.
fn backward(
    lay: &ParamLayout,
    w: &Whitened,
    fw: &Forward,
    xb: &DMatrix<f64>,
    ga: &DVector<f64>,
    gv: &DVector<f64>,
) -> Vec<f64> {
    let (m, i) = (lay.dim, lay.num_inducing);
    let nb = xb.nrows();
    let s2 = w.kernel.signal_variance();
    let ls = w.kernel.lengthscales();

    let g_c = ga.sum();
    let g_vm = fw.amat.tr_mul(ga) - &w.v_m;
    let mut gb = fw.bmat.clone();
    for (b, mut row) in gb.row_iter_mut().enumerate() {
        row *= 2.0 * gv[b];
    }
    let g_r = linalg::at_b(&fw.amat, &gb);

    // G_A = ga v_mᵀ − 2 diag(gv) A + G_B Rᵀ
    let mut g_a = &gb * w.r.transpose();
    for b in 0..nb {
        for k in 0..i {
            g_a[(b, k)] += ga[b] * w.v_m[k] - 2.0 * gv[b] * fw.amat[(b, k)];
        }
    }
    let g_knm = &g_a * &fw.linv;
    // Cholesky adjoint: K̄ = sym(L⁻ᵀ Φ(Lᵀ L̄) L⁻¹) with L̄ = −L⁻ᵀ G_Aᵀ A. Since
    // dL = L Φ(L⁻¹ dK L⁻ᵀ) is lower triangular, the upper part of L̄ drops
    // out and Lᵀ L̄ = −G_Aᵀ A.
    let mut p = -linalg::at_b(&g_a, &fw.amat);
    lower_part(&mut p);
    for k in 0..i {
        p[(k, k)] *= 0.5;
    }
    let s = linalg::at_b(&fw.linv, &(&p * &fw.linv));
    let g_kmm = (&s + s.transpose()) * 0.5;

    let mut out = Vec::with_capacity(lay.block_len());
    let mut g_ls = vec![0.0; m];
    for a in 0..i {
        for b in 0..i {
            let gk = g_kmm[(a, b)] * fw.kzz[(a, b)];
            if gk != 0.0 && a != b {
                for (j, g) in g_ls.iter_mut().enumerate() {
                    let d = w.z[(a, j)] - w.z[(b, j)];
                    *g += gk * d * d;
                }
            }
        }
    }
    for k in 0..i {
        for r in 0..nb {
            let gk = g_knm[(r, k)] * fw.knm[(r, k)];
            for (j, g) in g_ls.iter_mut().enumerate() {
                let d = xb[(r, j)] - w.z[(k, j)];
                *g += gk * d * d;
            }
        }
    }
    out.extend(g_ls.iter().zip(ls).map(|(g, l)| 0.5 * g / l));
    let g_s2 = g_kmm.component_mul(&fw.kmm).sum() + g_knm.component_mul(&fw.knm).sum() + s2 * gv.sum();
    out.push(g_s2);
    out.push(g_c);
    out.extend(g_vm.iter());
    for row in 0..i {
        for col in 0..=row {
            let rv = w.r[(row, col)];
            out.push(if row == col {
                g_r[(row, col)] * rv + 1.0 - rv * rv
            } else {
                g_r[(row, col)] - rv
            });
        }
    }
    if lay.learn_z {
        let mut g_z = DMatrix::<f64>::zeros(i, m);
        for k in 0..i {
            for r in 0..nb {
                let gk = g_knm[(r, k)] * fw.knm[(r, k)];
                for j in 0..m {
                    g_z[(k, j)] += gk * (xb[(r, j)] - w.z[(k, j)]) / ls[j];
                }
            }
        }
        for a in 0..i {
            for b in 0..i {
                if a == b {
                    continue;
                }
                let gk = 2.0 * g_kmm[(a, b)] * fw.kzz[(a, b)];
                for j in 0..m {
                    g_z[(a, j)] += gk * (w.z[(b, j)] - w.z[(a, j)]) / ls[j];
                }
            }
        }
        for row in g_z.row_iter() {
            out.extend(row.iter());
        }
    }
    out
}

/// ELBO of the rows `rows` of `(x, y)`, with the likelihood term rescaled by
/// `n_total / rows.len()`, and its gradient with respect to `p.theta`.
pub fn elbo_with_gradient(
    p: &FreeParams,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    rows: &[usize],
    noise: NoiseParam,
) -> Result<(ElboReport, Vec<f64>)> {
    if rows.is_empty() {
        return Err(Error::Empty("minibatch is empty"));
    }
    if x.ncols() != p.layout.dim || x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: p.layout.dim,
            actual: x.ncols(),
        });
    }
    let [wf, wg] = p.latents()?;
    let xb = x.select_rows(rows.iter());
    let ff = forward(&wf, &xb)?;
    let fg = forward(&wg, &xb)?;
    let scale = y.len() as f64 / rows.len() as f64;
    let c = noise.factor();
    let nb = rows.len();
    let mut terms = Vec::with_capacity(nb);
    let (mut ga_f, mut gv_f) = (DVector::zeros(nb), DVector::zeros(nb));
    let (mut ga_g, mut gv_g) = (DVector::zeros(nb), DVector::zeros(nb));
    for (b, &row) in rows.iter().enumerate() {
        let resid = y[row] - ff.a[b];
        let r = resid * resid + ff.v[b];
        let e = (-c * fg.a[b] + 0.5 * c * c * fg.v[b]).exp();
        terms.push(-0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * c * fg.a[b] - 0.5 * e * r);
        ga_f[b] = scale * e * resid;
        gv_f[b] = -scale * 0.5 * e;
        ga_g[b] = scale * 0.5 * c * (e * r - 1.0);
        gv_g[b] = -scale * 0.25 * c * c * e * r;
    }
    let ell = scale * linalg::compensated_sum(terms);
    let report = ElboReport::assemble(ell, wf.kl(), wg.kl());
    if !report.elbo.is_finite() {
        return Err(Error::NonFiniteObjective { params: Vec::new() });
    }
    let mut grad = backward(&p.layout, &wf, &ff, &xb, &ga_f, &gv_f);
    grad.extend(backward(&p.layout, &wg, &fg, &xb, &ga_g, &gv_g));
    Ok((report, grad))
}

/// Value-only counterpart of [`elbo_with_gradient`].
pub fn elbo_value(
    p: &FreeParams,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    rows: &[usize],
    noise: NoiseParam,
) -> Result<ElboReport> {
    if rows.is_empty() {
        return Err(Error::Empty("minibatch is empty"));
    }
    let [wf, wg] = p.latents()?;
    let xb = x.select_rows(rows.iter());
    let ff = forward(&wf, &xb)?;
    let fg = forward(&wg, &xb)?;
    let scale = y.len() as f64 / rows.len() as f64;
    let terms = rows
        .iter()
        .enumerate()
        .map(|(b, &row)| super::expected_loglik(y[row], ff.a[b], ff.v[b], fg.a[b], fg.v[b], noise));
    let report = ElboReport::assemble(scale * linalg::compensated_sum(terms), wf.kl(), wg.kl());
    if !report.elbo.is_finite() {
        return Err(Error::NonFiniteObjective { params: Vec::new() });
    }
    Ok(report)
}
