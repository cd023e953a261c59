//! Exact GP regression against a naive dense-inverse oracle, plus recovery and
//! invariance properties.

use hetgp_core::dataset::{fit_transforms, DataSet, TransformPipeline};
use hetgp_core::gpr::{gpr_fit, gpr_nll, gpr_physical_moments, gpr_predict_samples, ExactGprModel, GprFitConfig, GprHyper};
use hetgp_core::kernel::{kernel_matrix, KernelParams};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn hyper(ls: Vec<f64>, s2: f64, noise: f64, mean: f64) -> GprHyper {
    GprHyper {
        kernel: KernelParams::new(ls, s2).unwrap(),
        noise_variance: noise,
        mean_const: mean,
    }
}

fn model(x: &DMatrix<f64>, y: &DVector<f64>, h: &GprHyper) -> ExactGprModel {
    let names = (0..x.ncols()).map(|j| format!("x{j}")).collect();
    ExactGprModel::new(x.clone(), y.clone(), h.clone(), TransformPipeline::identity(names, "y".into())).unwrap()
}

fn dense_cov(h: &GprHyper, x: &DMatrix<f64>) -> DMatrix<f64> {
    kernel_matrix(&h.kernel, x, x).unwrap() + DMatrix::identity(x.nrows(), x.nrows()) * h.noise_variance
}

fn dense_nll(h: &GprHyper, x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let k = dense_cov(h, x);
    let r = y.add_scalar(-h.mean_const);
    let n = y.len() as f64;
    0.5 * r.dot(&(k.clone().try_inverse().unwrap() * &r))
        + 0.5 * k.determinant().ln()
        + 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

fn random_problem(r: &mut ChaCha8Rng, n: usize, m: usize) -> (DMatrix<f64>, DVector<f64>, GprHyper) {
    let x = DMatrix::from_fn(n, m, |_, _| r.gen_range(0.0..1.0));
    let y = DVector::from_fn(n, |_, _| r.gen_range(-2.0..2.0));
    let ls = (0..m).map(|_| r.gen_range(0.05..1.0)).collect();
    let h = hyper(ls, r.gen_range(0.5..2.0), r.gen_range(0.01..0.3), r.gen_range(-0.5..0.5));
    (x, y, h)
}

#[test]
fn nll_matches_dense_oracle() {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    for m in [1, 2, 3] {
        let (x, y, h) = random_problem(&mut r, 5, m);
        let a = gpr_nll(&h, &x, &y).unwrap();
        let b = dense_nll(&h, &x, &y);
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn predictions_match_dense_oracle() {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let (x, y, h) = random_problem(&mut r, 5, 1);
    let xs = DMatrix::from_fn(7, 1, |i, _| -0.2 + 0.2 * i as f64);
    let kinv = dense_cov(&h, &x).try_inverse().unwrap();
    let ks = kernel_matrix(&h.kernel, &xs, &x).unwrap();
    let mean = (&ks * &kinv * y.add_scalar(-h.mean_const)).add_scalar(h.mean_const);
    let var = (&ks * &kinv * ks.transpose()).diagonal().map(|q| h.kernel.signal_variance() - q);
    let m = model(&x, &y, &h);
    let (pm, pv) = m.predict(&xs, false).unwrap();
    let (_, pvn) = m.predict(&xs, true).unwrap();
    assert!((pm - mean).amax() < 1e-8);
    assert!((&pv - &var).amax() < 1e-8);
    assert!((pvn - var.add_scalar(h.noise_variance)).amax() < 1e-8);
}

#[test]
fn interpolation_and_prior_reversion() {
    let x = DMatrix::from_column_slice(5, 1, &[0.0, 0.25, 0.5, 0.75, 1.0]);
    let y = DVector::from_column_slice(&[0.3, -0.2, 0.8, 0.1, -0.5]);
    let h = hyper(vec![0.05], 1.3, 1e-10, 0.2);
    let m = model(&x, &y, &h);
    let (mean, var) = m.predict(&x, false).unwrap();
    assert!((mean - &y).amax() < 1e-4);
    assert!(var.max() < 1e-6);
    let far = DMatrix::from_column_slice(1, 1, &[1e3]);
    let (mean, var) = m.predict(&far, true).unwrap();
    assert!((mean[0] - 0.2).abs() < 1e-12);
    assert!((var[0] - (1.3 + 1e-10)).abs() < 1e-12);
}

/// One draw from the prior on `n` points in `[0, 1]` plus Gaussian noise.
fn gp_draw(seed: u64, n: usize, noise_sd: f64) -> DataSet {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, 1, |_, _| r.gen_range(0.0..1.0));
    let k = KernelParams::new(vec![0.01], 1.0).unwrap();
    let cov = kernel_matrix(&k, &x, &x).unwrap() + DMatrix::identity(n, n) * 1e-8;
    let l = cov.cholesky().unwrap().unpack();
    let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut r));
    let e = DVector::from_fn(n, |_, _| noise_sd * Distribution::<f64>::sample(&StandardNormal, &mut r));
    DataSet::from_scaled(x, l * z + e).unwrap()
}

#[test]
fn recovers_noise_level_from_prior_draws() {
    for seed in 0..3 {
        // Fitted in standardized units, as the training pipeline does.
        let (d, pipeline) = fit_transforms(&gp_draw(seed, 200, 0.1), false).unwrap();
        let (m, rep) = gpr_fit(&d, &GprFitConfig::default()).unwrap();
        let log_sd = 0.5 * m.noise_variance().ln() + pipeline.target.scale.ln();
        assert!((log_sd - 0.1f64.ln()).abs() < 0.35, "seed {seed}: log sd {log_sd}");
        assert!(rep.final_nll <= rep.initial_nll);
        assert!((m.nll() - rep.final_nll).abs() < 1e-6 * rep.final_nll.abs().max(1.0));
    }
}

#[test]
fn constant_targets_do_not_break_the_fit() {
    let x = DMatrix::from_fn(30, 1, |i, _| i as f64 / 29.0);
    let d = DataSet::from_scaled(x, DVector::from_element(30, 3.0)).unwrap();
    let (m, rep) = gpr_fit(&d, &GprFitConfig::default()).unwrap();
    assert!(rep.final_nll.is_finite() && rep.final_nll <= rep.initial_nll);
    assert!((m.mean_const() - 3.0).abs() < 1e-3, "mean {}", m.mean_const());
    assert!(m.noise_variance() < 1e-3 && m.kernel().signal_variance() < 1e-2);
}

#[test]
fn subset_restarts_refine_on_all_rows() {
    let d = gp_draw(7, 120, 0.1);
    let cfg = GprFitConfig {
        restart_subset: Some(40),
        ..Default::default()
    };
    let (m, rep) = gpr_fit(&d, &cfg).unwrap();
    assert_eq!(rep.restart_rows, Some(40));
    assert!((gpr_nll(m.hyper(), d.features(), d.target()).unwrap() - rep.final_nll).abs() < 1e-8);
    let (_, full) = gpr_fit(&d, &GprFitConfig { restart_subset: None, ..Default::default() }).unwrap();
    assert!(rep.final_nll <= full.final_nll + 1e-3);
}

#[test]
fn adding_a_point_never_increases_variance() {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let (x, y, h) = random_problem(&mut r, 8, 2);
        let xs = DMatrix::from_fn(1, 2, |_, _| r.gen_range(0.0..1.0));
        let (_, before) = model(&x, &y, &h).predict(&xs, false).unwrap();
        let x2 = DMatrix::from_fn(9, 2, |i, j| if i < 8 { x[(i, j)] } else { xs[(0, j)] });
        let y2 = DVector::from_fn(9, |i, _| if i < 8 { y[i] } else { 0.0 });
        let (_, after) = model(&x2, &y2, &h).predict(&xs, false).unwrap();
        assert!(after[0] <= before[0] + 1e-12);
    }
}

#[test]
fn nll_is_permutation_invariant() {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let (x, y, h) = random_problem(&mut r, 40, 3);
    let order: Vec<usize> = (0..40).rev().collect();
    let xp = x.select_rows(&order);
    let yp = y.select_rows(&order);
    let a = gpr_nll(&h, &x, &y).unwrap();
    assert!((a - gpr_nll(&h, &xp, &yp).unwrap()).abs() < 1e-9 * a.abs());
}

#[test]
fn mean_shifts_with_targets() {
    let mut r = ChaCha8Rng::seed_from_u64(6);
    let (x, y, h) = random_problem(&mut r, 15, 2);
    let xs = DMatrix::from_fn(6, 2, |_, _| r.gen_range(0.0..1.0));
    let (base, _) = model(&x, &y, &h).predict(&xs, false).unwrap();
    let shifted_h = GprHyper {
        mean_const: h.mean_const + 4.5,
        ..h.clone()
    };
    let (moved, _) = model(&x, &y.add_scalar(4.5), &shifted_h).predict(&xs, false).unwrap();
    assert!((moved - base.add_scalar(4.5)).amax() < 1e-9);
}

#[test]
fn json_round_trip_predicts_identically() {
    let d = gp_draw(9, 50, 0.2);
    let (m, _) = gpr_fit(&d, &GprFitConfig::default()).unwrap();
    let back = ExactGprModel::from_json(&m.to_json().unwrap()).unwrap();
    let xs = DMatrix::from_fn(11, 1, |i, _| i as f64 / 10.0);
    let (m1, v1) = m.predict(&xs, true).unwrap();
    let (m2, v2) = back.predict(&xs, true).unwrap();
    assert!((m1 - m2).amax() <= 1e-12 && (v1 - v2).amax() <= 1e-12);
    let doc: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
    assert!(doc.get("train_X").is_some() && doc.get("chol").is_none());
}

#[test]
fn physical_moments_match_samples() {
    for positive in [false, true] {
        let raw = gp_draw(11, 60, 0.2);
        let raw = DataSet::from_scaled(raw.features().clone(), raw.target().map(|v| (0.5 * v).exp())).unwrap();
        let (d, _) = fit_transforms(&raw, positive).unwrap();
        let (m, _) = gpr_fit(&d, &GprFitConfig::default()).unwrap();
        let n = 200_000;
        let s = gpr_predict_samples(&m, &[0.4], n, 5).unwrap();
        let mean = s.iter().sum::<f64>() / n as f64;
        let var = s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        let (pm, pv) = gpr_physical_moments(&m, &[0.4]).unwrap();
        assert!((mean / pm - 1.0).abs() < 0.01, "{positive}: {mean} vs {pm}");
        assert!((var / pv - 1.0).abs() < 0.03, "{positive}: {var} vs {pv}");
    }
}
