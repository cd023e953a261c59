use std::path::{Path, PathBuf};
use std::time::Instant;

use hetgp_core::chained::{cgp_fit, CgpFitConfig, NoiseParam};
use hetgp_core::dataset::{fit_transforms, load_csv, zscore_filter};
use hetgp_core::gpr::{gpr_fit, GprFitConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{read_json, write_json, REPORT_FORMAT_VERSION};
use crate::config::{required, resolve, sidecar};
use crate::error::{invalid, CliResult, Classify};
use crate::TrainFlags;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gpr,
    Hgpr,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub model: Option<ModelKind>,
    pub data: Option<PathBuf>,
    pub target: String,
    pub n_train: Option<usize>,
    pub inducing: usize,
    pub log_target: Option<bool>,
    pub zscore: f64,
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: Option<usize>,
    pub minibatch: Option<usize>,
    pub learning_rate: f64,
    pub learn_z: bool,
    pub noise_param: NoiseParam,
    pub output: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let cgp = CgpFitConfig::default();
        TrainSettings {
            model: None,
            data: None,
            target: "y".into(),
            n_train: None,
            inducing: cgp.num_inducing,
            log_target: None,
            zscore: 3.0,
            seed: 0,
            restarts: GprFitConfig::default().restarts,
            max_iters: None,
            minibatch: None,
            learning_rate: cgp.learning_rate,
            learn_z: false,
            noise_param: NoiseParam::default(),
            output: None,
            report: None,
        }
    }
}

/// Checks everything that can be checked without reading the data.
fn validate(st: &TrainSettings) -> CliResult<()> {
    let kind = *required(&st.model, "model")?;
    required(&st.data, "data")?;
    required(&st.output, "output")?;
    if let Some(n) = st.n_train {
        if n < 3 {
            return invalid(format!("--n-train must be at least 3, got {n}"));
        }
        if kind == ModelKind::Hgpr && st.inducing > n {
            return invalid(format!("--inducing {} exceeds --n-train {n}", st.inducing));
        }
    }
    if st.inducing == 0 {
        return invalid("--inducing must be positive");
    }
    if !(st.zscore > 0.0) {
        return invalid(format!("--zscore must be positive, got {}", st.zscore));
    }
    if st.minibatch == Some(0) {
        return invalid("--minibatch must be positive");
    }
    if !(st.learning_rate > 0.0 && st.learning_rate.is_finite()) {
        return invalid(format!("--learning-rate must be positive, got {}", st.learning_rate));
    }
    if st.restarts == 0 {
        return invalid("--restarts must be positive");
    }
    Ok(())
}

/// Positivity flag recorded by `sample` next to the data file, if any.
fn sidecar_positivity(data: &Path) -> CliResult<Option<bool>> {
    let path = sidecar(data, ".json");
    if !path.exists() {
        return Ok(None);
    }
    Ok(read_json(&path)?.get("target_positive").and_then(|v| v.as_bool()))
}

pub fn run(cfg: Option<&Path>, flags: &TrainFlags) -> CliResult<()> {
    let st: TrainSettings = resolve("train", cfg, flags)?;
    validate(&st)?;
    let kind = st.model.expect("validated");
    let data_path = st.data.as_deref().expect("validated");
    let out = st.output.as_deref().expect("validated");

    let raw = load_csv(data_path, &st.target).invalid()?;
    let rows = match st.n_train {
        Some(n) if n > raw.len() => {
            return invalid(format!("--n-train {n} exceeds the {} rows in {}", raw.len(), data_path.display()))
        }
        Some(n) => n,
        None => raw.len(),
    };
    let raw = raw.head(rows);
    let log_target = match st.log_target {
        Some(v) => v,
        None => sidecar_positivity(data_path)?.unwrap_or(false),
    };
    let filtered = zscore_filter(&raw, st.zscore).invalid()?;
    let (d, _) = fit_transforms(&filtered.data, log_target).invalid()?;
    if kind == ModelKind::Hgpr && st.inducing > d.len() {
        return invalid(format!(
            "--inducing {} exceeds the {} rows left after outlier removal",
            st.inducing,
            d.len()
        ));
    }

    let t = Instant::now();
    let (model_json, fit) = match kind {
        ModelKind::Gpr => {
            let mut gcfg = GprFitConfig {
                restarts: st.restarts,
                seed: st.seed,
                ..Default::default()
            };
            if let Some(it) = st.max_iters {
                gcfg.max_iters = it;
            }
            let (m, rep) = gpr_fit(&d, &gcfg).runtime()?;
            (m.to_json().runtime()?, json!({ "gpr": rep, "fit_config": gcfg }))
        }
        ModelKind::Hgpr => {
            let mut ccfg = CgpFitConfig {
                num_inducing: st.inducing,
                minibatch_size: st.minibatch,
                learn_z: st.learn_z,
                learning_rate: st.learning_rate,
                seed: st.seed,
                noise: st.noise_param,
                ..Default::default()
            };
            if let Some(it) = st.max_iters {
                ccfg.max_iters = it;
            }
            let (m, trace) = cgp_fit(&d, &ccfg).runtime()?;
            (m.to_json().runtime()?, json!({ "hgpr": trace, "fit_config": ccfg }))
        }
    };
    let wall = t.elapsed().as_secs_f64();
    log::info!("trained {kind:?} on {} rows in {wall:.1} s", d.len());

    hetgp_core::io::write_atomic(out, format!("{model_json}\n").as_bytes()).runtime()?;
    let report_path = st.report.clone().unwrap_or_else(|| out.with_extension("report.json"));
    write_json(
        &report_path,
        &json!({
            "format_version": REPORT_FORMAT_VERSION,
            "kind": "training-report",
            "model": kind,
            "settings": st,
            "rows_read": rows,
            "rows_used": d.len(),
            "removed_outliers": filtered.removed.len(),
            "removed_rows": filtered.removed.iter().map(|i| i + 1).collect::<Vec<_>>(),
            "log_target": log_target,
            "fit": fit,
            "wall_time_seconds": wall,
        }),
    )
}
