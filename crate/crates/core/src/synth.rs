//! Seeded stochastic simulators with closed-form heteroscedastic ground truth.
//!
//! A scenario gives `Y | x ~ N(mean(x), exp(log_var(x)))`, or the law of
//! `exp` of that draw for positive targets. Every draw comes from a generator
//! keyed on the scenario id, the input point and a seed, so results do not
//! depend on evaluation order.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{random_design, sobol_design, DataSet, FeatureBox, FeatureSpec};
use crate::error::{Error, Result};
use crate::expr::{BoundExpr, Expr};
use crate::metrics::EmpiricalDistribution;
use crate::rng;

pub const SCENARIO_FORMAT_VERSION: u32 = 1;

/// Smallest noise variance a scenario can produce.
pub const VARIANCE_FLOOR: f64 = 1e-12;

const BUILTIN: [(&str, &str); 4] = [
    ("S1", include_str!("../scenarios/s1.json")),
    ("S6", include_str!("../scenarios/s6.json")),
    ("H1", include_str!("../scenarios/h1.json")),
    ("S1P", include_str!("../scenarios/s1p.json")),
];

/// On-disk scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub format_version: u32,
    pub id: String,
    #[serde(default)]
    pub description: String,
    pub feature_specs: Vec<FeatureSpec>,
    #[serde(default = "default_target_name")]
    pub target_name: String,
    pub mean_fn_expr: String,
    pub log_var_fn_expr: String,
    #[serde(default)]
    pub target_positive: bool,
}

fn default_target_name() -> String {
    "y".into()
}

#[derive(Debug, Clone)]
pub struct SyntheticScenario {
    file: ScenarioFile,
    fbox: FeatureBox,
    mean: BoundExpr,
    log_var: BoundExpr,
}

impl SyntheticScenario {
    pub fn from_file(file: ScenarioFile) -> Result<Self> {
        if file.format_version != SCENARIO_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "scenario format version {} is not supported (expected {SCENARIO_FORMAT_VERSION})",
                file.format_version
            )));
        }
        let fbox = FeatureBox::new(&file.feature_specs)?;
        let names = fbox.names().to_vec();
        let mean = Expr::parse(&file.mean_fn_expr)?.bind(&names)?;
        let log_var = Expr::parse(&file.log_var_fn_expr)?.bind(&names)?;
        let s = SyntheticScenario {
            file,
            fbox,
            mean,
            log_var,
        };
        s.check_finite()?;
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// A scenario shipped with the crate.
    pub fn builtin(id: &str) -> Result<Self> {
        let (_, text) = BUILTIN
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(id))
            .ok_or_else(|| Error::UnknownScenario(id.to_string()))?;
        Self::from_json(text)
    }

    pub fn builtin_ids() -> Vec<&'static str> {
        BUILTIN.iter().map(|(k, _)| *k).collect()
    }

    /// A scenario id, or otherwise a path to a scenario file.
    pub fn resolve(id_or_path: &str) -> Result<Self> {
        match Self::builtin(id_or_path) {
            Err(Error::UnknownScenario(_)) if Path::new(id_or_path).is_file() => Self::load(id_or_path),
            other => other,
        }
    }

    /// Mean and log variance must be finite over the feature box; checked on
    /// a Sobol design that includes the box corners reachable at the origin.
    fn check_finite(&self) -> Result<()> {
        let design = sobol_design(&self.file.feature_specs, 256, 0)?;
        for row in design.row_iter() {
            let x: Vec<f64> = row.iter().copied().collect();
            let (m, lv) = (self.mean_fn(&x), self.log_var_fn(&x));
            if !m.is_finite() || lv.is_nan() || lv == f64::INFINITY {
                return Err(Error::Expression(format!(
                    "scenario {} is not finite at {x:?} (mean {m}, log variance {lv})",
                    self.file.id
                )));
            }
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.file.id
    }

    pub fn file(&self) -> &ScenarioFile {
        &self.file
    }

    pub fn feature_specs(&self) -> &[FeatureSpec] {
        &self.file.feature_specs
    }

    pub fn feature_names(&self) -> &[String] {
        self.fbox.names()
    }

    pub fn target_name(&self) -> &str {
        &self.file.target_name
    }

    pub fn target_positive(&self) -> bool {
        self.file.target_positive
    }

    pub fn dim(&self) -> usize {
        self.fbox.dim()
    }

    pub fn feature_box(&self) -> &FeatureBox {
        &self.fbox
    }

    /// Mean of the Gaussian draw (of `log y` for positive targets).
    pub fn mean_fn(&self, x: &[f64]) -> f64 {
        self.mean.eval(x)
    }

    pub fn log_var_fn(&self, x: &[f64]) -> f64 {
        self.log_var.eval(x)
    }

    /// Noise variance after the floor.
    pub fn variance_fn(&self, x: &[f64]) -> f64 {
        self.log_var_fn(x).exp().max(VARIANCE_FLOOR)
    }

    pub fn std_fn(&self, x: &[f64]) -> f64 {
        self.variance_fn(x).sqrt()
    }

    /// Mean and standard deviation of `Y | x` in target units.
    pub fn response_moments(&self, x: &[f64]) -> (f64, f64) {
        let (m, v) = (self.mean_fn(x), self.variance_fn(x));
        if self.target_positive() {
            let mean = (m + 0.5 * v).exp();
            (mean, mean * v.exp_m1().sqrt())
        } else {
            (m, v.sqrt())
        }
    }
}

/// One simulator run at `x`. Identical `(scenario, x, seed)` give identical
/// output.
pub fn simulate(s: &SyntheticScenario, x: &[f64], seed: u64) -> Result<f64> {
    s.fbox.check_contains(x)?;
    Ok(draw(s, x, seed))
}

fn draw(s: &SyntheticScenario, x: &[f64], seed: u64) -> f64 {
    let key = rng::derive_key(&[rng::hash_str(&s.file.id), rng::hash_point(x), seed]);
    let mut r = rng::rng_from_key(key);
    let eps: f64 = StandardNormal.sample(&mut r);
    let v = s.mean_fn(x) + s.std_fn(x) * eps;
    if s.target_positive() {
        v.exp()
    } else {
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Design {
    #[default]
    Sobol,
    #[serde(alias = "random")]
    Pseudorandom,
}

/// Seed of training row `i` under `master_seed`.
pub fn row_seed(master_seed: u64, i: usize) -> u64 {
    rng::child_seed(master_seed, i as u64)
}

/// `n` design points with one simulator run each, in physical units.
pub fn generate_dataset(s: &SyntheticScenario, n: usize, design: Design, master_seed: u64) -> Result<DataSet> {
    let x: DMatrix<f64> = match design {
        Design::Sobol => sobol_design(s.feature_specs(), n, 0)?,
        Design::Pseudorandom => random_design(s.feature_specs(), n, master_seed)?,
    };
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let row: Vec<f64> = x.row(i).iter().copied().collect();
        y[i] = simulate(s, &row, row_seed(master_seed, i))?;
    }
    DataSet::new(x, y, s.feature_specs().to_vec(), s.target_name())
}

/// Repeated runs at fixed inputs.
#[derive(Debug, Clone)]
pub struct ReplicationStudy {
    pub conditions: Vec<Vec<f64>>,
    pub replications: usize,
    pub distributions: Vec<EmpiricalDistribution>,
    /// Draws per condition in generation order.
    pub raw: Vec<Vec<f64>>,
}

/// Seed of replication `r`; disjoint from the training-row stream.
pub fn replication_seed(master_seed: u64, r: usize) -> u64 {
    rng::child_seed(rng::derive_key(&[master_seed, rng::hash_str("replication")]), r as u64)
}

pub fn replication_reference(
    s: &SyntheticScenario,
    conditions: &[Vec<f64>],
    replications: usize,
    master_seed: u64,
) -> Result<ReplicationStudy> {
    if replications < 2 {
        return Err(Error::InvalidArgument(format!(
            "a replication study needs at least 2 replications, got {replications}"
        )));
    }
    if conditions.is_empty() {
        return Err(Error::Empty("replication study needs at least one condition"));
    }
    let mut raw = Vec::with_capacity(conditions.len());
    let mut distributions = Vec::with_capacity(conditions.len());
    for x in conditions {
        if x.len() != s.dim() {
            return Err(Error::DimensionMismatch {
                expected: s.dim(),
                actual: x.len(),
            });
        }
        let draws = (0..replications)
            .map(|r| simulate(s, x, replication_seed(master_seed, r)))
            .collect::<Result<Vec<f64>>>()?;
        distributions.push(EmpiricalDistribution::new(draws.clone())?);
        raw.push(draws);
    }
    Ok(ReplicationStudy {
        conditions: conditions.to_vec(),
        replications,
        distributions,
        raw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::environmental_features;
    use crate::metrics::normalized_wasserstein;
    use std::collections::HashSet;

    #[test]
    fn builtins_load() {
        for id in SyntheticScenario::builtin_ids() {
            let s = SyntheticScenario::builtin(id).unwrap();
            assert_eq!(s.id(), id);
        }
        assert!(matches!(SyntheticScenario::builtin("nope"), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn s6_uses_environmental_features() {
        let s = SyntheticScenario::builtin("S6").unwrap();
        assert_eq!(s.feature_specs(), environmental_features().as_slice());
    }

    #[test]
    fn s1_truth_values() {
        let s = SyntheticScenario::builtin("S1").unwrap();
        assert!((s.mean_fn(&[0.5]) - 1.5f64.sin()).abs() < 1e-15);
        assert!((s.std_fn(&[1.0]) - 0.35).abs() < 1e-12);
        assert!((s.std_fn(&[0.0]) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn determinism_and_bounds() {
        let s = SyntheticScenario::builtin("S1").unwrap();
        assert_eq!(simulate(&s, &[0.3], 9).unwrap(), simulate(&s, &[0.3], 9).unwrap());
        assert_ne!(simulate(&s, &[0.3], 9).unwrap(), simulate(&s, &[0.3], 10).unwrap());
        assert!(matches!(simulate(&s, &[1.5], 0), Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn noiseless_limit() {
        let text = include_str!("../scenarios/s1.json").replace("2 * log(0.05 + 0.25 * pow(x, 2) + 0.05)", "-1000");
        let s = SyntheticScenario::from_json(&text).unwrap();
        for seed in 0..20 {
            let y = simulate(&s, &[0.4], seed).unwrap();
            assert!((y - 1.2f64.sin()).abs() < 1e-5);
        }
    }

    #[test]
    fn non_finite_scenarios_are_rejected() {
        let text = include_str!("../scenarios/s1.json").replace("sin(3 * x)", "log(x - 0.5)");
        assert!(SyntheticScenario::from_json(&text).is_err());
        let unknown = include_str!("../scenarios/s1.json").replace("sin(3 * x)", "sin(3 * z)");
        assert!(SyntheticScenario::from_json(&unknown).is_err());
    }

    #[test]
    fn generator_law_of_large_numbers() {
        for (id, x) in [("S1", vec![0.8]), ("S6", vec![14.0, 12.0, 0.1, 2.0, 8.0, 30.0])] {
            let s = SyntheticScenario::builtin(id).unwrap();
            let n = 100_000;
            let ys: Vec<f64> = (0..n).map(|i| simulate(&s, &x, i as u64).unwrap()).collect();
            let mean = ys.iter().sum::<f64>() / n as f64;
            let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / (n - 1) as f64;
            let sd = s.std_fn(&x);
            assert!((mean - s.mean_fn(&x)).abs() < 4.0 * sd / (n as f64).sqrt(), "{id}: mean {mean}");
            assert!((var / s.variance_fn(&x) - 1.0).abs() < 0.05, "{id}: var {var}");
        }
    }

    #[test]
    fn positive_targets_stay_positive() {
        let s = SyntheticScenario::builtin("S1P").unwrap();
        let d = generate_dataset(&s, 200, Design::Pseudorandom, 3).unwrap();
        assert!(d.target().iter().all(|y| *y > 0.0));
    }

    #[test]
    fn self_consistency_of_generator() {
        for id in SyntheticScenario::builtin_ids() {
            let s = SyntheticScenario::builtin(id).unwrap();
            let x = s.feature_box().map_unit(&vec![0.6; s.dim()]).unwrap();
            let a = replication_reference(&s, std::slice::from_ref(&x), 100_000, 1).unwrap();
            let b = replication_reference(&s, &[x], 100_000, 2).unwrap();
            let d = normalized_wasserstein(&a.distributions[0], &b.distributions[0]).unwrap();
            assert!(d < 0.02, "{id}: {d}");
        }
    }

    #[test]
    fn dataset_generation() {
        let s6 = SyntheticScenario::builtin("S6").unwrap();
        let d = generate_dataset(&s6, 2491, Design::Sobol, 5).unwrap();
        assert_eq!(d.len(), 2491);
        for i in 0..d.len() {
            s6.feature_box().check_contains(&d.row(i)).unwrap();
        }
        let again = generate_dataset(&s6, 2491, Design::Sobol, 5).unwrap();
        assert_eq!(d.target(), again.target());
        let s1 = SyntheticScenario::builtin("S1").unwrap();
        assert_eq!(generate_dataset(&s1, 1, Design::Sobol, 0).unwrap().len(), 1);
    }

    #[test]
    fn row_seeds_do_not_collide() {
        let seeds: HashSet<u64> = (0..10_000).map(|i| row_seed(42, i)).collect();
        assert_eq!(seeds.len(), 10_000);
        let reps: HashSet<u64> = (0..10_000).map(|r| replication_seed(42, r)).collect();
        assert_eq!(reps.len(), 10_000);
        assert!(seeds.is_disjoint(&reps));
    }

    #[test]
    fn replication_shapes() {
        let s = SyntheticScenario::builtin("S6").unwrap();
        let conditions: Vec<Vec<f64>> = [6.0, 10.0, 14.0, 18.0, 22.0]
            .iter()
            .map(|&u| vec![u, 12.0 * (0.75 * u + 5.6) / u, 0.08, 1.0, 7.0, 0.0])
            .collect();
        let study = replication_reference(&s, &conditions, 100, 0).unwrap();
        assert_eq!(study.distributions.len(), 5);
        for (x, d) in conditions.iter().zip(&study.distributions) {
            assert_eq!(d.len(), 100);
            assert!((d.mean() - s.mean_fn(x)).abs() < 4.0 * s.std_fn(x) / 10.0);
        }
        assert!(replication_reference(&s, &conditions, 1, 0).is_err());
        assert_eq!(replication_reference(&s, &conditions[..1], 2, 0).unwrap().distributions[0].len(), 2);
    }
}
