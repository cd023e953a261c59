//! Evaluation slices and the homoscedastic-vs-heteroscedastic comparison
//! protocol: identical training data, replication references at a sweep of
//! conditions, and distribution-level scores per condition.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::chained::{cgp_fit, cgp_physical_moments, cgp_predict_samples, CgpFitConfig};
use crate::dataset::{fit_transforms, sobol_design, zscore_filter, DataSet};
use crate::error::{Error, Result};
use crate::gpr::{gpr_fit, gpr_physical_moments, gpr_predict_samples, GprFitConfig};
use crate::metrics::{normalized_wasserstein, point_metrics, EmpiricalDistribution, PointMetrics};
use crate::synth::{generate_dataset, replication_reference, Design, SyntheticScenario};

pub const DEFAULT_REPLICATIONS: usize = 100;
pub const DEFAULT_PREDICTIVE_SAMPLES: usize = 5000;
pub const DEFAULT_ZSCORE_THRESHOLD: f64 = 3.0;
/// Design size used to estimate the range of `σ(x)` over a scenario's domain.
pub const SIGMA_RANGE_POINTS: usize = 4096;

/// Feature names the `default-case` keyword fills, in order.
pub const DEFAULT_CASE_FEATURES: [&str; 6] = ["u", "TI", "alpha", "Hs", "Tp", "Wdir"];

/// Reference operating point at mean wind speed `u`: turbulence intensity
/// `12(0.75u + 5.6)/u`, shear 0.08, wave height 1, peak period 7, aligned
/// wind and waves.
pub fn default_case(u: f64) -> [f64; 6] {
    [u, 12.0 * (0.75 * u + 5.6) / u, 0.08, 1.0, 7.0, 0.0]
}

/// Expands a slice specification into query points ordered as `names`.
///
/// Clauses are separated by `;`. `name=a..b step s` sweeps one feature over
/// `a, a+s, …` up to `b` inclusive; `name=v` fixes a feature; `default-case`
/// fills every feature not otherwise set from [`default_case`] at the swept
/// (or fixed) `u`. At most one sweep is allowed and every feature must end up
/// with a value.
pub fn parse_slice(spec: &str, names: &[String]) -> Result<Vec<Vec<f64>>> {
    let bad = |msg: String| Error::InvalidArgument(format!("slice `{spec}`: {msg}"));
    let mut sweep: Option<(String, Vec<f64>)> = None;
    let mut fixed = BTreeMap::new();
    let mut use_default = false;
    for clause in spec.split(';').map(str::trim).filter(|c| !c.is_empty()) {
        if clause == "default-case" {
            use_default = true;
            continue;
        }
        let (name, rhs) = clause
            .split_once('=')
            .ok_or_else(|| bad(format!("clause `{clause}` is not `name=value` or `name=a..b step s`")))?;
        let name = name.trim().to_string();
        if !names.contains(&name) {
            return Err(bad(format!("unknown feature `{name}`")));
        }
        if sweep.as_ref().is_some_and(|(n, _)| *n == name) || fixed.contains_key(&name) {
            return Err(bad(format!("feature `{name}` assigned twice")));
        }
        let rhs = rhs.trim();
        if let Some((range, step)) = rhs.split_once("step") {
            if sweep.is_some() {
                return Err(bad("only one sweep is allowed".into()));
            }
            let (a, b) = range
                .split_once("..")
                .ok_or_else(|| bad(format!("sweep `{rhs}` needs `a..b`")))?;
            let values = sweep_values(parse_number(a, spec)?, parse_number(b, spec)?, parse_number(step, spec)?)
                .map_err(|e| bad(e.to_string()))?;
            sweep = Some((name, values));
        } else {
            fixed.insert(name, parse_number(rhs, spec)?);
        }
    }
    if use_default && names != DEFAULT_CASE_FEATURES {
        return Err(bad(format!(
            "default-case needs features {DEFAULT_CASE_FEATURES:?}, model has {names:?}"
        )));
    }
    let (sweep_name, values) = match sweep {
        Some((n, v)) => (Some(n), v),
        None => (None, vec![f64::NAN]),
    };
    values
        .into_iter()
        .map(|v| {
            let mut point = BTreeMap::new();
            if let Some(n) = &sweep_name {
                point.insert(n.clone(), v);
            }
            point.extend(fixed.iter().map(|(k, v)| (k.clone(), *v)));
            if use_default {
                let u = *point.get("u").ok_or_else(|| bad("default-case needs `u` to be swept or fixed".into()))?;
                for (name, value) in DEFAULT_CASE_FEATURES.iter().zip(default_case(u)) {
                    point.entry(name.to_string()).or_insert(value);
                }
            }
            names
                .iter()
                .map(|n| point.get(n).copied().ok_or_else(|| bad(format!("feature `{n}` has no value"))))
                .collect()
        })
        .collect()
}

fn parse_number(s: &str, spec: &str) -> Result<f64> {
    let s = s.trim();
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::InvalidArgument(format!("slice `{spec}`: `{s}` is not a finite number")))
}

fn sweep_values(a: f64, b: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || b < a {
        return Err(Error::InvalidArgument(format!(
            "sweep {a}..{b} step {step} needs a positive step and a <= b"
        )));
    }
    // Endpoint tolerance absorbs decimal steps such as 0.2.
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    if count > 100_000 {
        return Err(Error::InvalidArgument(format!("sweep produces {count} points")));
    }
    Ok((0..count).map(|k| a + k as f64 * step).collect())
}

/// Sweep used when a scenario has no slice of its own: the first feature at
/// 10%, 30%, …, 90% of its range, other features at their midpoints.
fn fraction_slice(s: &SyntheticScenario) -> Result<Vec<Vec<f64>>> {
    [0.1, 0.3, 0.5, 0.7, 0.9]
        .iter()
        .map(|&t| {
            let mut unit = vec![0.5; s.dim()];
            unit[0] = t;
            s.feature_box().map_unit(&unit)
        })
        .collect()
}

/// Default conditions and budget for a scenario's comparison: the wind-speed
/// sweep for six-feature environmental scenarios, otherwise a sweep of the
/// first feature. Six-feature runs use 1000 inducing points trained on
/// minibatches of 200 for 300 steps; the rest use 100 inducing points and
/// full-batch steps.
pub fn protocol(s: &SyntheticScenario) -> Result<(Vec<Vec<f64>>, ComparisonConfig)> {
    let mut cfg = ComparisonConfig::default();
    if s.feature_names() == DEFAULT_CASE_FEATURES {
        cfg.hgpr.num_inducing = 1000;
        cfg.hgpr.minibatch_size = Some(200);
        cfg.hgpr.max_iters = 300;
        Ok((parse_slice("u=6..22 step 4; default-case", s.feature_names())?, cfg))
    } else {
        cfg.hgpr.num_inducing = 100;
        Ok((fraction_slice(s)?, cfg))
    }
}

/// Settings of one comparison run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComparisonConfig {
    pub n_train: usize,
    pub design: Design,
    pub data_seed: u64,
    pub replications: usize,
    pub reference_seed: u64,
    pub samples: usize,
    pub sample_seed: u64,
    pub zscore_threshold: f64,
    pub gpr: GprFitConfig,
    pub hgpr: CgpFitConfig,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig {
            n_train: 2000,
            design: Design::Sobol,
            data_seed: 0,
            replications: DEFAULT_REPLICATIONS,
            reference_seed: 1,
            samples: DEFAULT_PREDICTIVE_SAMPLES,
            sample_seed: 2,
            zscore_threshold: DEFAULT_ZSCORE_THRESHOLD,
            gpr: GprFitConfig::default(),
            hgpr: CgpFitConfig::default(),
        }
    }
}

/// Scores at one sweep condition, all in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionScore {
    pub point: Vec<f64>,
    pub true_mean: f64,
    pub true_std: f64,
    pub reference_mean: f64,
    pub reference_std: f64,
    pub gpr_mean: f64,
    pub hgpr_mean: f64,
    pub dw1_gpr: f64,
    pub dw1_hgpr: f64,
    /// `true_std` lies in the central 80% of the scenario's `σ(x)` range.
    pub central: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub scenario: String,
    pub config: ComparisonConfig,
    pub training_rows: usize,
    pub removed_outliers: usize,
    /// `(min, max)` of `σ(x)` over a Sobol design of the domain.
    pub sigma_range: (f64, f64),
    pub conditions: Vec<ConditionScore>,
    pub mean_dw1_gpr: f64,
    pub mean_dw1_hgpr: f64,
    /// Predictive means against reference means across conditions.
    pub gpr_point: Option<PointMetrics>,
    pub hgpr_point: Option<PointMetrics>,
    pub gpr_seconds: f64,
    pub hgpr_seconds: f64,
}

impl Comparison {
    /// Heteroscedastic model is closer on average, and within `bound` at
    /// every central condition.
    pub fn variance_claim(&self, bound: f64) -> bool {
        self.mean_dw1_hgpr < self.mean_dw1_gpr
            && self.conditions.iter().filter(|c| c.central).all(|c| c.dw1_hgpr < bound)
    }

    /// Fraction of conditions where the two predictive means differ by less
    /// than `tol` reference standard deviations.
    pub fn mean_agreement(&self, tol: f64) -> f64 {
        let close = self
            .conditions
            .iter()
            .filter(|c| (c.gpr_mean - c.hgpr_mean).abs() < tol * c.reference_std)
            .count();
        close as f64 / self.conditions.len() as f64
    }
}

/// Range of the scenario's noise standard deviation over its domain.
pub fn sigma_range(s: &SyntheticScenario) -> Result<(f64, f64)> {
    let design = sobol_design(s.feature_specs(), SIGMA_RANGE_POINTS, 0)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..design.nrows() {
        let row: Vec<f64> = design.row(i).iter().copied().collect();
        let sd = s.std_fn(&row);
        lo = lo.min(sd);
        hi = hi.max(sd);
    }
    Ok((lo, hi))
}

/// Whether `sigma` lies in the middle 80% of the interval `range`.
pub fn in_central_band(sigma: f64, (lo, hi): (f64, f64)) -> bool {
    let w = hi - lo;
    sigma >= lo + 0.1 * w && sigma <= hi - 0.1 * w
}

/// Training pipeline shared by both models: z-score filter, then transforms
/// chosen by the scenario's positivity flag. Returns the model-space data and
/// the number of removed rows.
pub fn prepare_training(raw: &DataSet, target_positive: bool, zscore_threshold: f64) -> Result<(DataSet, usize)> {
    let filtered = zscore_filter(raw, zscore_threshold)?;
    let (d, _) = fit_transforms(&filtered.data, target_positive)?;
    Ok((d, filtered.removed.len()))
}

/// Trains both models on one data set and scores them against replication
/// references at `conditions`.
pub fn run_comparison(s: &SyntheticScenario, conditions: &[Vec<f64>], cfg: &ComparisonConfig) -> Result<Comparison> {
    if conditions.is_empty() {
        return Err(Error::Empty("comparison needs at least one condition"));
    }
    if cfg.samples < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 predictive samples, got {}",
            cfg.samples
        )));
    }
    for x in conditions {
        s.feature_box().check_contains(x)?;
    }
    let raw = generate_dataset(s, cfg.n_train, cfg.design, cfg.data_seed)?;
    let (d, removed) = prepare_training(&raw, s.target_positive(), cfg.zscore_threshold)?;
    if cfg.hgpr.num_inducing > d.len() {
        return Err(Error::InvalidArgument(format!(
            "{} inducing points exceed {} training rows",
            cfg.hgpr.num_inducing,
            d.len()
        )));
    }

    let t = Instant::now();
    let (gpr, _) = gpr_fit(&d, &cfg.gpr)?;
    let gpr_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let (hgpr, _) = cgp_fit(&d, &cfg.hgpr)?;
    let hgpr_seconds = t.elapsed().as_secs_f64();

    let reference = replication_reference(s, conditions, cfg.replications, cfg.reference_seed)?;
    let range = sigma_range(s)?;
    let mut scores = Vec::with_capacity(conditions.len());
    for (x, refd) in conditions.iter().zip(&reference.distributions) {
        let gs = gpr_predict_samples(&gpr, x, cfg.samples, cfg.sample_seed)?;
        let hs = cgp_predict_samples(&hgpr, x, cfg.samples, cfg.sample_seed)?;
        let (true_mean, true_std) = s.response_moments(x);
        scores.push(ConditionScore {
            point: x.clone(),
            true_mean,
            true_std,
            reference_mean: refd.mean(),
            reference_std: refd.std()?,
            gpr_mean: gpr_physical_moments(&gpr, x)?.0,
            hgpr_mean: cgp_physical_moments(&hgpr, x)?.0,
            dw1_gpr: normalized_wasserstein(refd, &EmpiricalDistribution::new(gs)?)?,
            dw1_hgpr: normalized_wasserstein(refd, &EmpiricalDistribution::new(hs)?)?,
            central: in_central_band(s.std_fn(x), range),
        });
    }
    let k = scores.len() as f64;
    let refs: Vec<f64> = scores.iter().map(|c| c.reference_mean).collect();
    let points = |pred: Vec<f64>| (scores.len() >= 2).then(|| point_metrics(&refs, &pred)).transpose();
    Ok(Comparison {
        scenario: s.id().to_string(),
        config: cfg.clone(),
        training_rows: d.len(),
        removed_outliers: removed,
        sigma_range: range,
        mean_dw1_gpr: scores.iter().map(|c| c.dw1_gpr).sum::<f64>() / k,
        mean_dw1_hgpr: scores.iter().map(|c| c.dw1_hgpr).sum::<f64>() / k,
        gpr_point: points(scores.iter().map(|c| c.gpr_mean).collect())?,
        hgpr_point: points(scores.iter().map(|c| c.hgpr_mean).collect())?,
        conditions: scores,
        gpr_seconds,
        hgpr_seconds,
    })
}
