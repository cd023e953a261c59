use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::objective::{elbo_value, elbo_with_gradient, FreeParams};
use super::{inducing_factor, ChainedGpModel, ElboReport, LatentSparseGp, NoiseParam};
use crate::dataset::DataSet;
use crate::error::{Error, Result};
use crate::gpr::{gpr_fit, GprFitConfig, GprHyper};
use crate::kernel::KernelParams;
use crate::rng;

/// Where the inducing inputs start.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InducingInit {
    /// Greedy farthest-point selection among the training inputs.
    #[default]
    FarthestPoint,
    /// All training inputs; requires `num_inducing == n`.
    TrainingInputs,
    /// Explicit rows in model space.
    Given(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CgpFitConfig {
    pub num_inducing: usize,
    pub init: InducingInit,
    pub max_iters: usize,
    /// Full batch when `None`.
    pub minibatch_size: Option<usize>,
    pub learn_z: bool,
    pub learning_rate: f64,
    pub seed: u64,
    pub noise: NoiseParam,
    /// Rows used by the exact GP fit that warm-starts `f` and the noise level.
    pub warm_start_points: usize,
}

impl Default for CgpFitConfig {
    fn default() -> Self {
        CgpFitConfig {
            num_inducing: 100,
            init: InducingInit::FarthestPoint,
            max_iters: 1000,
            minibatch_size: None,
            learn_z: false,
            learning_rate: 1e-2,
            seed: 0,
            noise: NoiseParam::LogVariance,
            warm_start_points: 500,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CgpTrace {
    /// Full-batch ELBO after each accepted step, or the rescaled minibatch
    /// estimate of each stochastic step.
    pub elbo: Vec<f64>,
    pub initial: ElboReport,
    pub final_report: ElboReport,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

/// Greedy max-min selection of `k` rows, starting from the row nearest the
/// centroid; ties go to the lowest index.
pub fn farthest_point_inducing(x: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cannot select {k} inducing points from {n} rows"
        )));
    }
    let centroid = x.row_mean();
    let dist2 = |i: usize, p: &[f64]| -> f64 {
        x.row(i).iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum()
    };
    let argmax = |v: &[f64]| {
        v.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &d)| if d > best.1 { (i, d) } else { best })
            .0
    };
    let c: Vec<f64> = centroid.iter().copied().collect();
    let neg: Vec<f64> = (0..n).map(|i| -dist2(i, &c)).collect();
    let mut chosen = vec![argmax(&neg)];
    let mut taken = vec![false; n];
    taken[chosen[0]] = true;
    let first: Vec<f64> = x.row(chosen[0]).iter().copied().collect();
    let mut min_d: Vec<f64> = (0..n).map(|i| dist2(i, &first)).collect();
    while chosen.len() < k {
        let masked: Vec<f64> = min_d
            .iter()
            .zip(&taken)
            .map(|(d, t)| if *t { f64::NEG_INFINITY } else { *d })
            .collect();
        let next = argmax(&masked);
        taken[next] = true;
        chosen.push(next);
        let p: Vec<f64> = x.row(next).iter().copied().collect();
        for (i, d) in min_d.iter_mut().enumerate() {
            *d = d.min(dist2(i, &p));
        }
    }
    Ok(x.select_rows(chosen.iter()))
}

fn inducing_inputs(d: &DataSet, cfg: &CgpFitConfig) -> Result<DMatrix<f64>> {
    let x = d.features();
    match &cfg.init {
        InducingInit::FarthestPoint => farthest_point_inducing(x, cfg.num_inducing),
        InducingInit::TrainingInputs => {
            if cfg.num_inducing != d.len() {
                return Err(Error::InvalidArgument(format!(
                    "training-input initialization needs num_inducing = n = {}, got {}",
                    d.len(),
                    cfg.num_inducing
                )));
            }
            Ok(x.clone())
        }
        InducingInit::Given(rows) => {
            if rows.len() != cfg.num_inducing || rows.iter().any(|r| r.len() != d.dim()) {
                return Err(Error::DimensionMismatch {
                    expected: cfg.num_inducing,
                    actual: rows.len(),
                });
            }
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            Ok(DMatrix::from_row_slice(rows.len(), d.dim(), &flat))
        }
    }
}

/// Homoscedastic warm start: an exact GP on at most `warm_start_points` rows,
/// returning its hyperparameters and its predictive mean at `z`.
fn warm_start(d: &DataSet, z: &DMatrix<f64>, cfg: &CgpFitConfig) -> (GprHyper, DVector<f64>) {
    let n = d.len();
    let subset = if n > cfg.warm_start_points.max(2) {
        let mut r = rng::rng_from_key(rng::derive_key(&[cfg.seed, rng::hash_str("cgp-warm-start")]));
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut r);
        idx.truncate(cfg.warm_start_points.max(2));
        idx.sort_unstable();
        d.select_rows(&idx)
    } else {
        d.clone()
    };
    let gcfg = GprFitConfig {
        restarts: 1,
        max_iters: 100,
        seed: cfg.seed,
        ..Default::default()
    };
    let fitted = gpr_fit(&subset, &gcfg).and_then(|(model, _)| {
        let (mean, _) = model.predict(z, false)?;
        Ok((model.hyper().clone(), mean))
    });
    match fitted {
        Ok(v) => v,
        Err(e) => {
            log::warn!("exact GP warm start failed ({e}); starting from unit hyperparameters");
            let y = d.target();
            let mean = y.mean();
            let var = y.variance().max(1e-6);
            let hyper = GprHyper {
                kernel: KernelParams::isotropic(d.dim(), 1.0, var).expect("positive inputs"),
                noise_variance: 0.1 * var,
                mean_const: mean,
            };
            (hyper, DVector::from_element(z.nrows(), mean))
        }
    }
}

fn initial_model(d: &DataSet, cfg: &CgpFitConfig) -> Result<ChainedGpModel> {
    let z = inducing_inputs(d, cfg)?;
    let (hyper, f_at_z) = warm_start(d, &z, cfg);
    log::info!(
        "warm start: noise variance {:.4e}, signal variance {:.4e}",
        hyper.noise_variance,
        hyper.kernel.signal_variance()
    );
    let (_, chol_f) = inducing_factor(&hyper.kernel, &z)?;
    let latent_f = LatentSparseGp::new(z.clone(), f_at_z, &chol_f * 0.1, hyper.kernel.clone(), hyper.mean_const)?;

    let g_kernel = KernelParams::new(hyper.kernel.lengthscales().to_vec(), 1.0)?;
    let (_, chol_g) = inducing_factor(&g_kernel, &z)?;
    let level = hyper.noise_variance.ln() / cfg.noise.factor();
    let latent_g = LatentSparseGp::new(
        z.clone(),
        DVector::from_element(z.nrows(), level),
        &chol_g * 0.1,
        g_kernel,
        level,
    )?;
    ChainedGpModel::new(latent_f, latent_g, d.pipeline_or_identity(), cfg.noise)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Ascent step for gradient `g` without committing the moment update.
    fn propose(&self, g: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let t = self.t + 1;
        let c1 = 1.0 - Self::B1.powi(t);
        let c2 = 1.0 - Self::B2.powi(t);
        let m: Vec<f64> = self.m.iter().zip(g).map(|(m, g)| Self::B1 * m + (1.0 - Self::B1) * g).collect();
        let v: Vec<f64> = self.v.iter().zip(g).map(|(v, g)| Self::B2 * v + (1.0 - Self::B2) * g * g).collect();
        let step = m
            .iter()
            .zip(&v)
            .map(|(m, v)| (m / c1) / ((v / c2).sqrt() + Self::EPS))
            .collect();
        (m, v, step)
    }

    fn commit(&mut self, m: Vec<f64>, v: Vec<f64>) {
        self.m = m;
        self.v = v;
        self.t += 1;
    }
}

fn shifted(theta: &[f64], step: &[f64], lr: f64) -> Vec<f64> {
    theta.iter().zip(step).map(|(t, s)| t + lr * s).collect()
}

/// Maximizes the ELBO with Adam. Full-batch steps are only accepted when the
/// ELBO does not decrease (the step size halves otherwise); minibatch runs
/// keep the parameters with the best full-batch ELBO seen at epoch ends.
pub fn cgp_fit(d: &DataSet, cfg: &CgpFitConfig) -> Result<(ChainedGpModel, CgpTrace)> {
    let n = d.len();
    if cfg.num_inducing == 0 || cfg.num_inducing > n {
        return Err(Error::InvalidArgument(format!(
            "num_inducing must be in 1..={n}, got {}",
            cfg.num_inducing
        )));
    }
    if !(cfg.learning_rate > 0.0) {
        return Err(Error::InvalidArgument("learning rate must be positive".into()));
    }
    let model = initial_model(d, cfg)?;
    let mut params = FreeParams::from_model(&model, cfg.learn_z)?;
    let (x, y) = (d.features(), d.target());
    let all: Vec<usize> = (0..n).collect();
    let initial = elbo_value(&params, x, y, &all, cfg.noise).map_err(|e| match e {
        Error::NonFiniteObjective { .. } => Error::NonFiniteObjective {
            params: params.theta.clone(),
        },
        other => other,
    })?;
    log::info!("initial ELBO {:.6}", initial.elbo);

    let mut adam = Adam::new(params.theta.len());
    let mut trace = CgpTrace {
        elbo: vec![initial.elbo],
        initial,
        final_report: initial,
        accepted_steps: 0,
        rejected_steps: 0,
    };

    match cfg.minibatch_size {
        Some(b) if b < n => {
            if b == 0 {
                return Err(Error::InvalidArgument("minibatch size must be positive".into()));
            }
            let mut r = rng::rng_from_key(rng::derive_key(&[cfg.seed, rng::hash_str("cgp-minibatch")]));
            let mut best = (initial, params.theta.clone());
            let mut order = all.clone();
            let mut lr = cfg.learning_rate;
            let mut step_count = 0;
            'epochs: while step_count < cfg.max_iters {
                order.shuffle(&mut r);
                for batch in order.chunks(b) {
                    if step_count >= cfg.max_iters {
                        break;
                    }
                    step_count += 1;
                    match elbo_with_gradient(&params, x, y, batch, cfg.noise) {
                        Ok((rep, g)) if g.iter().all(|v| v.is_finite()) => {
                            let (m, v, step) = adam.propose(&g);
                            adam.commit(m, v);
                            params.theta = shifted(&params.theta, &step, lr);
                            trace.elbo.push(rep.elbo);
                            trace.accepted_steps += 1;
                        }
                        _ => {
                            // back off to the checkpoint with a smaller step
                            params.theta = best.1.clone();
                            lr *= 0.5;
                            trace.rejected_steps += 1;
                            if lr < cfg.learning_rate * 1e-6 {
                                break 'epochs;
                            }
                        }
                    }
                }
                match elbo_value(&params, x, y, &all, cfg.noise) {
                    Ok(rep) if rep.elbo > best.0.elbo => best = (rep, params.theta.clone()),
                    Ok(_) => {}
                    Err(e) => log::debug!("full-batch ELBO failed at epoch end: {e}"),
                }
                log::debug!("epoch end after {step_count} steps: best ELBO {:.6}", best.0.elbo);
            }
            params.theta = best.1;
            trace.final_report = best.0;
        }
        _ => {
            let (mut rep, mut grad) = elbo_with_gradient(&params, x, y, &all, cfg.noise)?;
            let mut scale = 1.0;
            for _ in 0..cfg.max_iters {
                let (m, v, step) = adam.propose(&grad);
                let mut accepted = false;
                while scale * cfg.learning_rate >= cfg.learning_rate * 1e-6 {
                    let trial = shifted(&params.theta, &step, scale * cfg.learning_rate);
                    let probe = FreeParams {
                        theta: trial,
                        ..params.clone()
                    };
                    match elbo_with_gradient(&probe, x, y, &all, cfg.noise) {
                        Ok((r2, g2)) if r2.elbo >= rep.elbo && g2.iter().all(|v| v.is_finite()) => {
                            params = probe;
                            rep = r2;
                            grad = g2;
                            accepted = true;
                            break;
                        }
                        _ => {
                            scale *= 0.5;
                            trace.rejected_steps += 1;
                        }
                    }
                }
                if !accepted {
                    break;
                }
                adam.commit(m, v);
                trace.accepted_steps += 1;
                trace.elbo.push(rep.elbo);
                scale = (scale * 2.0).min(1.0);
            }
            trace.final_report = rep;
        }
    }
    log::info!(
        "final ELBO {:.6} after {} accepted steps",
        trace.final_report.elbo,
        trace.accepted_steps
    );
    let model = params.to_model(d.pipeline_or_identity(), cfg.noise)?;
    Ok((model, trace))
}
