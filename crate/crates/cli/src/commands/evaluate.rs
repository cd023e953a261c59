use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hetgp_core::metrics::{normalized_wasserstein, point_metrics, EmpiricalDistribution, PointMetrics};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{read_json, write_json, REPORT_FORMAT_VERSION};
use crate::config::{required, resolve, sidecar};
use crate::error::{invalid, CliError, CliResult, Classify};
use crate::longcsv::{self, Table};
use crate::EvaluateFlags;

/// Relative tolerance when matching prediction queries to reference conditions.
const CONDITION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSettings {
    pub reference: Option<PathBuf>,
    pub predictions: Vec<String>,
    pub output: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

/// Per-condition scores of one model.
#[derive(Debug, Clone, Serialize)]
pub struct ModelScore {
    pub dw1: f64,
    pub mean: f64,
    pub std: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub point: Vec<f64>,
    pub reference_mean: f64,
    pub reference_std: f64,
    pub models: BTreeMap<String, ModelScore>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelSummary {
    pub mean_dw1: f64,
    /// Predictive means against reference means; absent for a single condition.
    pub point: Option<PointMetrics>,
}

/// `name=path`, or a bare path named by its sidecar's model kind, else by
/// its file stem.
fn parse_prediction(arg: &str) -> CliResult<(String, PathBuf)> {
    if let Some((name, path)) = arg.split_once('=') {
        if name.is_empty() || path.is_empty() {
            return invalid(format!("bad --predictions value `{arg}`; expected [NAME=]FILE"));
        }
        return Ok((name.to_string(), PathBuf::from(path)));
    }
    let path = PathBuf::from(arg);
    let side = sidecar(&path, ".json");
    let from_sidecar = if side.exists() {
        read_json(&side)?.get("model_kind").and_then(|v| v.as_str()).map(String::from)
    } else {
        None
    };
    let name = from_sidecar
        .or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| arg.to_string());
    Ok((name, path))
}

fn same_point(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= CONDITION_TOL * x.abs().max(y.abs()).max(1.0))
}

fn check_conditions(reference: &Table, pred: &Table, name: &str) -> CliResult<()> {
    if pred.feature_names != reference.feature_names {
        return invalid(format!(
            "predictions `{name}` have features {:?}, the reference has {:?}",
            pred.feature_names, reference.feature_names
        ));
    }
    if pred.blocks.len() != reference.blocks.len() {
        return invalid(format!(
            "predictions `{name}` have {} conditions, the reference has {}",
            pred.blocks.len(),
            reference.blocks.len()
        ));
    }
    for (q, (r, p)) in reference.blocks.iter().zip(&pred.blocks).enumerate() {
        if !same_point(&r.point, &p.point) {
            return invalid(format!(
                "predictions `{name}` condition {q} is {:?}, the reference has {:?}",
                p.point, r.point
            ));
        }
        if p.samples().is_empty() {
            return invalid(format!(
                "predictions `{name}` condition {q} has no samples; rerun predict with --samples"
            ));
        }
    }
    Ok(())
}

fn score(reference: &EmpiricalDistribution, block: &crate::longcsv::Block) -> CliResult<ModelScore> {
    let draws = EmpiricalDistribution::new(block.samples().to_vec()).invalid()?;
    let dw1 = normalized_wasserstein(reference, &draws).invalid()?;
    let mean = block.scalar("mean").unwrap_or_else(|| draws.mean());
    let std = match block.scalar("variance") {
        Some(v) => Some(v.max(0.0).sqrt()),
        None => draws.std().ok(),
    };
    Ok(ModelScore { dw1, mean, std })
}

fn csv_report(feature_names: &[String], conditions: &[ConditionReport]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["condition".to_string()];
    header.extend(feature_names.iter().cloned());
    header.extend(["model", "metric", "value"].map(String::from));
    w.write_record(&header).runtime()?;
    for (q, c) in conditions.iter().enumerate() {
        let mut rows: Vec<(&str, &str, f64)> = vec![
            ("reference", "mean", c.reference_mean),
            ("reference", "std", c.reference_std),
        ];
        for (name, s) in &c.models {
            rows.push((name, "dw1", s.dw1));
            rows.push((name, "mean", s.mean));
            if let Some(sd) = s.std {
                rows.push((name, "std", sd));
            }
        }
        for (model, metric, value) in rows {
            let mut rec = vec![q.to_string()];
            rec.extend(c.point.iter().map(f64::to_string));
            rec.extend([model.to_string(), metric.to_string(), value.to_string()]);
            w.write_record(&rec).runtime()?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn run(cfg: Option<&Path>, flags: &EvaluateFlags) -> CliResult<()> {
    let st: EvaluateSettings = resolve("evaluate", cfg, flags)?;
    let reference_path = required(&st.reference, "reference")?;
    let out = required(&st.output, "output")?;
    if st.predictions.is_empty() {
        return invalid("missing required setting `--predictions`");
    }
    let mut inputs = Vec::new();
    for arg in &st.predictions {
        let (name, path) = parse_prediction(arg)?;
        if inputs.iter().any(|(n, _): &(String, Table)| *n == name) {
            return invalid(format!("prediction name `{name}` given twice; use NAME=FILE"));
        }
        inputs.push((name, longcsv::read(&path)?));
    }
    let reference = longcsv::read(reference_path)?;
    for (q, b) in reference.blocks.iter().enumerate() {
        if b.samples().len() < 2 {
            return invalid(format!("reference condition {q} needs at least 2 samples"));
        }
    }
    for (name, t) in &inputs {
        check_conditions(&reference, t, name)?;
    }

    let mut conditions = Vec::with_capacity(reference.blocks.len());
    for (q, rb) in reference.blocks.iter().enumerate() {
        let r = EmpiricalDistribution::new(rb.samples().to_vec()).invalid()?;
        let mut models = BTreeMap::new();
        for (name, t) in &inputs {
            models.insert(name.clone(), score(&r, &t.blocks[q])?);
        }
        conditions.push(ConditionReport {
            point: rb.point.clone(),
            reference_mean: r.mean(),
            reference_std: r.std().invalid()?,
            models,
        });
    }

    let truth: Vec<f64> = conditions.iter().map(|c| c.reference_mean).collect();
    let mut summary = BTreeMap::new();
    for (name, _) in &inputs {
        let dw1: Vec<f64> = conditions.iter().map(|c| c.models[name].dw1).collect();
        let means: Vec<f64> = conditions.iter().map(|c| c.models[name].mean).collect();
        let point = (truth.len() >= 2).then(|| point_metrics(&truth, &means)).transpose().runtime()?;
        summary.insert(
            name.clone(),
            ModelSummary {
                mean_dw1: dw1.iter().sum::<f64>() / dw1.len() as f64,
                point,
            },
        );
    }

    let csv_path = st.csv.clone().unwrap_or_else(|| out.with_extension("csv"));
    hetgp_core::io::write_atomic(&csv_path, csv_report(&reference.feature_names, &conditions)?.as_bytes())
        .runtime()?;
    write_json(
        out,
        &json!({
            "format_version": REPORT_FORMAT_VERSION,
            "kind": "evaluation",
            "settings": st,
            "feature_names": reference.feature_names,
            "models": inputs.iter().map(|(n, _)| n).collect::<Vec<_>>(),
            "conditions": conditions,
            "summary": summary,
        }),
    )
}
