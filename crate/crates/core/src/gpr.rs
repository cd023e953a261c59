//! Homoscedastic Gaussian process regression with a constant mean, trained by
//! type-II maximum likelihood.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{DataSet, TransformPipeline};
use crate::error::{Error, Result};
use crate::kernel::{kernel_matrix, kernel_matrix_sym, stable_cholesky, KernelParams};
use crate::linalg;
use crate::optim::{self, Bounds, LbfgsConfig};
use crate::rng;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Everything the marginal likelihood depends on besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct GprHyper {
    pub kernel: KernelParams,
    pub noise_variance: f64,
    pub mean_const: f64,
}

impl GprHyper {
    /// `[log l_1..m, log σ_h², log σ², μ]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.kernel.to_log_vec();
        v.push(self.noise_variance.ln());
        v.push(self.mean_const);
        v
    }

    pub fn from_vec(v: &[f64]) -> Result<Self> {
        let m = v.len().checked_sub(3).ok_or(Error::DimensionMismatch {
            expected: 4,
            actual: v.len(),
        })?;
        let noise_variance = v[m + 1].exp();
        if !(noise_variance.is_finite() && noise_variance >= 0.0) {
            return Err(Error::InvalidArgument("noise variance out of range".into()));
        }
        Ok(GprHyper {
            kernel: KernelParams::from_log_slice(&v[..=m])?,
            noise_variance,
            mean_const: v[m + 2],
        })
    }
}

struct Factorized {
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    resid: DVector<f64>,
}

fn factorize(h: &GprHyper, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DMatrix<f64>, Factorized)> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: y.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::Empty("exact GP needs at least one observation"));
    }
    let mut k = kernel_matrix_sym(&h.kernel, x)?;
    let kernel_only = k.clone();
    for i in 0..k.nrows() {
        k[(i, i)] += h.noise_variance;
    }
    let chol = stable_cholesky(&k, 0.0)?.factor;
    let resid = y.map(|v| v - h.mean_const);
    let alpha = linalg::chol_solve(&chol, &resid);
    Ok((kernel_only, Factorized { chol, alpha, resid }))
}

fn nll_from(f: &Factorized) -> f64 {
    let n = f.resid.len() as f64;
    0.5 * f.resid.dot(&f.alpha)
        + 0.5 * linalg::chol_logdet(&f.chol)
        + 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

/// Negative log marginal likelihood
/// `½ rᵀ(K+σ²I)⁻¹r + ½ log|K+σ²I| + (n/2) log 2π` with `r = y − μ`.
pub fn gpr_nll(h: &GprHyper, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    let (_, f) = factorize(h, x, y)?;
    Ok(nll_from(&f))
}

/// NLL and its gradient with respect to `GprHyper::to_vec` coordinates.
pub fn gpr_nll_grad(h: &GprHyper, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(f64, Vec<f64>)> {
    let (kmat, f) = factorize(h, x, y)?;
    let nll = nll_from(&f);
    let n = y.len();
    let m = h.kernel.dim();
    let linv = linalg::lower_inverse(&f.chol);
    let kinv = linalg::lower_gram(&linv);
    let ls = h.kernel.lengthscales();

    // W = K⁻¹ − ααᵀ; dNLL/dθ = ½ Σ W ∘ ∂K/∂θ
    let mut g_ls = vec![0.0; m];
    let mut g_sig = 0.0;
    let mut trace_w = 0.0;
    for b in 0..n {
        let wbb = kinv[(b, b)] - f.alpha[b] * f.alpha[b];
        trace_w += wbb;
        g_sig += wbb * kmat[(b, b)];
        for a in (b + 1)..n {
            let w = 2.0 * (kinv[(a, b)] - f.alpha[a] * f.alpha[b]);
            let wk = w * kmat[(a, b)];
            g_sig += wk;
            for (j, gj) in g_ls.iter_mut().enumerate() {
                let d = x[(a, j)] - x[(b, j)];
                *gj += wk * d * d;
            }
        }
    }
    let mut grad: Vec<f64> = g_ls
        .iter()
        .zip(ls)
        .map(|(g, l)| 0.25 * g / l)
        .collect();
    grad.push(0.5 * g_sig);
    grad.push(0.5 * h.noise_variance * trace_w);
    grad.push(-f.alpha.sum());
    Ok((nll, grad))
}

/// A trained exact GP with its factorization cached.
#[derive(Debug, Clone)]
pub struct ExactGprModel {
    train_x: DMatrix<f64>,
    train_y: DVector<f64>,
    hyper: GprHyper,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    transforms: TransformPipeline,
}

impl ExactGprModel {
    pub fn new(
        train_x: DMatrix<f64>,
        train_y: DVector<f64>,
        hyper: GprHyper,
        transforms: TransformPipeline,
    ) -> Result<Self> {
        if hyper.kernel.dim() != train_x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: hyper.kernel.dim(),
                actual: train_x.ncols(),
            });
        }
        if !(hyper.noise_variance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive, got {}",
                hyper.noise_variance
            )));
        }
        let (_, f) = factorize(&hyper, &train_x, &train_y)?;
        Ok(ExactGprModel {
            train_x,
            train_y,
            hyper,
            chol: f.chol,
            alpha: f.alpha,
            transforms,
        })
    }

    pub fn hyper(&self) -> &GprHyper {
        &self.hyper
    }

    pub fn kernel(&self) -> &KernelParams {
        &self.hyper.kernel
    }

    pub fn noise_variance(&self) -> f64 {
        self.hyper.noise_variance
    }

    pub fn mean_const(&self) -> f64 {
        self.hyper.mean_const
    }

    pub fn transforms(&self) -> &TransformPipeline {
        &self.transforms
    }

    pub fn train_x(&self) -> &DMatrix<f64> {
        &self.train_x
    }

    pub fn train_y(&self) -> &DVector<f64> {
        &self.train_y
    }

    /// Cholesky factor of `K_XX + σ²I`.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn nll(&self) -> f64 {
        let resid = self.train_y.map(|v| v - self.hyper.mean_const);
        nll_from(&Factorized {
            chol: self.chol.clone(),
            alpha: self.alpha.clone(),
            resid,
        })
    }

    /// Predictive mean and variance at the rows of `xstar` (model units).
    pub fn predict(&self, xstar: &DMatrix<f64>, include_noise: bool) -> Result<(DVector<f64>, DVector<f64>)> {
        let ks = kernel_matrix(&self.hyper.kernel, &self.train_x, xstar)?;
        let mean = ks.tr_mul(&self.alpha).add_scalar(self.hyper.mean_const);
        let v = self
            .chol
            .solve_lower_triangular(&ks)
            .expect("cached factor has a nonzero diagonal");
        let s2 = self.hyper.kernel.signal_variance();
        let noise = if include_noise { self.hyper.noise_variance } else { 0.0 };
        let var = DVector::from_iterator(
            xstar.nrows(),
            v.column_iter().map(|c| {
                let raw = s2 - c.norm_squared();
                if raw < -1e-10 {
                    log::warn!("clamping negative predictive variance {raw:e}");
                }
                raw.max(0.0) + noise
            }),
        );
        Ok((mean, var))
    }

    pub fn to_saved(&self) -> SavedGpr {
        SavedGpr {
            format_version: MODEL_FORMAT_VERSION,
            kind: "gpr".into(),
            kernel: self.hyper.kernel.clone(),
            noise_variance: self.hyper.noise_variance,
            mean_const: self.hyper.mean_const,
            transforms: self.transforms.clone(),
            train_x: self.train_x.row_iter().map(|r| r.iter().copied().collect()).collect(),
            train_y: self.train_y.iter().copied().collect(),
        }
    }

    pub fn from_saved(s: SavedGpr) -> Result<Self> {
        if s.format_version != MODEL_FORMAT_VERSION || s.kind != "gpr" {
            return Err(Error::Format(format!(
                "expected gpr model version {MODEL_FORMAT_VERSION}, found {} version {}",
                s.kind, s.format_version
            )));
        }
        let n = s.train_y.len();
        let m = s.kernel.dim();
        if s.train_x.len() != n || s.train_x.iter().any(|r| r.len() != m) {
            return Err(Error::Format("train_X shape does not match train_y/kernel".into()));
        }
        let flat: Vec<f64> = s.train_x.into_iter().flatten().collect();
        ExactGprModel::new(
            DMatrix::from_row_slice(n, m, &flat),
            DVector::from_vec(s.train_y),
            GprHyper {
                kernel: s.kernel,
                noise_variance: s.noise_variance,
                mean_const: s.mean_const,
            },
            s.transforms,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_saved())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_saved(serde_json::from_str(s)?)
    }
}

/// On-disk form of an exact GP; the factorization is rebuilt on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SavedGpr {
    pub format_version: u32,
    pub kind: String,
    pub kernel: KernelParams,
    pub noise_variance: f64,
    pub mean_const: f64,
    pub transforms: TransformPipeline,
    #[serde(rename = "train_X")]
    pub train_x: Vec<Vec<f64>>,
    pub train_y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GprFitConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
    pub init_lengthscale: f64,
    pub init_signal_variance: f64,
    pub init_noise_variance: f64,
    pub min_noise_variance: f64,
    /// Restarts run on this many random rows when the data set is larger; the
    /// best of them is then refined once on all rows. `None` uses all rows.
    #[serde(default = "default_subset")]
    pub restart_subset: Option<usize>,
}

fn default_subset() -> Option<usize> {
    Some(500)
}

impl Default for GprFitConfig {
    fn default() -> Self {
        GprFitConfig {
            restarts: 3,
            max_iters: 200,
            seed: 0,
            init_lengthscale: 1.0,
            init_signal_variance: 1.0,
            init_noise_variance: 0.1,
            min_noise_variance: 1e-6,
            restart_subset: default_subset(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GprFitReport {
    /// NLL at the un-jittered default starting point.
    pub initial_nll: f64,
    pub final_nll: f64,
    /// Final NLL reached from each start, on the restart rows.
    pub restart_nll: Vec<f64>,
    /// Rows used by the restarts when fewer than all.
    pub restart_rows: Option<usize>,
    pub evaluations: usize,
}

/// Maximizes the marginal likelihood from several starts and keeps the best.
/// The first start is the configured default; later ones jitter every log
/// hyperparameter uniformly within ±1. Large data sets run the starts on a
/// random subset and refine the winner on all rows.
pub fn gpr_fit(d: &DataSet, cfg: &GprFitConfig) -> Result<(ExactGprModel, GprFitReport)> {
    if d.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "exact GP fit needs at least 2 rows, got {}",
            d.len()
        )));
    }
    let x = d.features();
    let y = d.target();
    let m = d.dim();
    let default = GprHyper {
        kernel: KernelParams::isotropic(m, cfg.init_lengthscale, cfg.init_signal_variance)?,
        noise_variance: cfg.init_noise_variance,
        mean_const: 0.0,
    };
    let x0 = default.to_vec();
    let mut lower = vec![1e-4_f64.ln(); m];
    lower.push(1e-6_f64.ln());
    lower.push(cfg.min_noise_variance.ln());
    lower.push(-1e6);
    let mut upper = vec![1e4_f64.ln(); m];
    upper.push(1e4_f64.ln());
    upper.push(1e2_f64.ln());
    upper.push(1e6);
    let bounds = Bounds { lower, upper };
    let lcfg = LbfgsConfig {
        max_iters: cfg.max_iters,
        ..Default::default()
    };

    let objective_on = |x: &DMatrix<f64>, y: &DVector<f64>, v: &[f64]| -> Option<(f64, Vec<f64>)> {
        let h = GprHyper::from_vec(v).ok()?;
        gpr_nll_grad(&h, x, y).ok()
    };
    let initial_nll = match objective_on(x, y, &x0) {
        Some((f, _)) if f.is_finite() => f,
        _ => return Err(Error::NonFiniteObjective { params: x0 }),
    };

    let mut r = rng::rng_from_key(rng::derive_key(&[cfg.seed, rng::hash_str("gpr-restarts")]));
    let subset = cfg.restart_subset.filter(|&k| k >= 2 && k < d.len()).map(|k| {
        let mut rows: Vec<usize> = (0..d.len()).collect();
        rows.shuffle(&mut r);
        rows.truncate(k);
        rows.sort_unstable();
        d.select_rows(&rows)
    });
    let (rx, ry) = subset.as_ref().map_or((x, y), |s| (s.features(), s.target()));
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut restart_nll = Vec::new();
    let mut evaluations = 0;
    for k in 0..cfg.restarts.max(1) {
        let mut start = x0.clone();
        if k > 0 {
            for v in start.iter_mut().take(m + 2) {
                *v += r.gen_range(-1.0..1.0);
            }
        }
        let res = match optim::minimize(|v: &[f64]| objective_on(rx, ry, v), &start, &bounds, &lcfg) {
            Ok(res) => res,
            Err(e) if k == 0 => return Err(e),
            Err(e) => {
                log::warn!("restart {k} failed to start: {e}");
                continue;
            }
        };
        log::debug!("gpr restart {k}: nll {} -> {} in {} evals", res.f_initial, res.f, res.evaluations);
        evaluations += res.evaluations;
        restart_nll.push(res.f);
        if best.as_ref().is_none_or(|(f, _)| res.f < *f) {
            best = Some((res.f, res.x));
        }
    }
    let (mut final_nll, mut xbest) = best.expect("at least one restart ran");
    if subset.is_some() {
        let res = optim::minimize(|v: &[f64]| objective_on(x, y, v), &xbest, &bounds, &lcfg)?;
        log::debug!("gpr refinement: nll {} -> {} in {} evals", res.f_initial, res.f, res.evaluations);
        evaluations += res.evaluations;
        final_nll = res.f;
        xbest = res.x;
    }
    let hyper = GprHyper::from_vec(&xbest)?;
    let model = ExactGprModel::new(x.clone(), y.clone(), hyper, d.pipeline_or_identity())?;
    Ok((
        model,
        GprFitReport {
            initial_nll,
            final_nll,
            restart_nll,
            restart_rows: subset.as_ref().map(DataSet::len),
            evaluations,
        },
    ))
}

/// Noisy predictive mean and variance at one physical input, in physical
/// units (log-normal moments for log targets).
pub fn gpr_physical_moments(m: &ExactGprModel, x_physical: &[f64]) -> Result<(f64, f64)> {
    let xs = m.transforms.transform_point(x_physical)?;
    let (mean, var) = m.predict(&DMatrix::from_row_slice(1, xs.len(), &xs), true)?;
    let t = m.transforms.target;
    let (mu, v) = (t.shift + t.scale * mean[0], t.scale * t.scale * var[0]);
    if t.is_log() {
        let phys = (mu + 0.5 * v).exp();
        Ok((phys, v.exp_m1() * phys * phys))
    } else {
        Ok((mu, v))
    }
}

/// Draws from the noisy predictive distribution at one physical input,
/// returned in physical target units.
pub fn gpr_predict_samples(m: &ExactGprModel, x_physical: &[f64], num_samples: usize, seed: u64) -> Result<Vec<f64>> {
    let xs = m.transforms.transform_point(x_physical)?;
    let (mean, var) = m.predict(&DMatrix::from_row_slice(1, xs.len(), &xs), true)?;
    let sd = var[0].sqrt();
    let mut r = rng::rng_from_key(rng::derive_key(&[seed, rng::hash_point(x_physical), rng::hash_str("gpr-samples")]));
    Ok((0..num_samples)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut r);
            m.transforms.invert_target(mean[0] + sd * z)
        })
        .collect())
}
