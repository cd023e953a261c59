use std::path::{Path, PathBuf};

use hetgp_core::chained::{cgp_physical_moments, cgp_predict_samples, ChainedGpModel};
use hetgp_core::gpr::{gpr_physical_moments, gpr_predict_samples, ExactGprModel};
use hetgp_core::study::parse_slice;
use hetgp_core::TransformPipeline;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{write_json, REPORT_FORMAT_VERSION};
use crate::config::{required, resolve, sidecar};
use crate::error::{invalid, CliError, CliResult, Classify};
use crate::longcsv::{self, Block, Table};
use crate::PredictFlags;

/// Default draws per query for the heteroscedastic model.
pub const DEFAULT_HGPR_SAMPLES: usize = 5000;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictSettings {
    pub model: Option<PathBuf>,
    pub at_slice: Option<String>,
    pub query: Option<PathBuf>,
    pub samples: Option<usize>,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

enum Model {
    Gpr(ExactGprModel),
    Hgpr(ChainedGpModel),
}

impl Model {
    fn load(path: &Path) -> CliResult<Model> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        let doc: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        match doc.get("kind").and_then(|k| k.as_str()) {
            Some("gpr") => ExactGprModel::from_json(&text).map(Model::Gpr).invalid(),
            Some("chained-gp") => ChainedGpModel::from_json(&text).map(Model::Hgpr).invalid(),
            other => invalid(format!("{}: unknown model kind {other:?}", path.display())),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Model::Gpr(_) => "gpr",
            Model::Hgpr(_) => "hgpr",
        }
    }

    fn transforms(&self) -> &TransformPipeline {
        match self {
            Model::Gpr(m) => m.transforms(),
            Model::Hgpr(m) => m.transforms(),
        }
    }

    fn default_samples(&self) -> usize {
        match self {
            Model::Gpr(_) => 0,
            Model::Hgpr(_) => DEFAULT_HGPR_SAMPLES,
        }
    }

    /// Physical mean, variance and draws at one query.
    fn predict(&self, x: &[f64], samples: usize, seed: u64) -> hetgp_core::Result<(f64, f64, Vec<f64>)> {
        let ((mean, var), draws) = match self {
            Model::Gpr(m) => (gpr_physical_moments(m, x)?, gpr_predict_samples(m, x, samples, seed)?),
            Model::Hgpr(m) => (cgp_physical_moments(m, x)?, cgp_predict_samples(m, x, samples, seed)?),
        };
        Ok((mean, var, draws))
    }
}

/// Query points from a CSV whose header names the model's features, in any
/// order. The training target column may also be present and is ignored.
fn read_queries(path: &Path, t: &TransformPipeline) -> CliResult<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path).invalid()?;
    let header: Vec<String> = r.headers().invalid()?.iter().map(|h| h.trim().to_string()).collect();
    for h in &header {
        if !t.feature_names.contains(h) && *h != t.target_name {
            return invalid(format!("{}: column `{h}` is not a model feature", path.display()));
        }
    }
    let cols = t
        .feature_names
        .iter()
        .map(|f| {
            header
                .iter()
                .position(|h| h == f)
                .ok_or_else(|| CliError::Invalid(format!("{}: missing feature column `{f}`", path.display())))
        })
        .collect::<CliResult<Vec<usize>>>()?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.invalid()?;
        let row = cols
            .iter()
            .map(|&c| {
                let s = rec.get(c).unwrap_or("").trim();
                s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    CliError::Invalid(format!("{}: data row {}: `{s}` is not a finite number", path.display(), i + 1))
                })
            })
            .collect::<CliResult<Vec<f64>>>()?;
        out.push(row);
    }
    if out.is_empty() {
        return invalid(format!("{}: no query rows", path.display()));
    }
    Ok(out)
}

pub fn run(cfg: Option<&Path>, flags: &PredictFlags) -> CliResult<()> {
    let st: PredictSettings = resolve("predict", cfg, flags)?;
    let model_path = required(&st.model, "model")?;
    let out = required(&st.output, "output")?;
    let model = Model::load(model_path)?;
    let t = model.transforms();
    let queries = match (&st.at_slice, &st.query) {
        (Some(spec), None) => parse_slice(spec, &t.feature_names).invalid()?,
        (None, Some(path)) => read_queries(path, t)?,
        _ => return invalid("exactly one of `--at-slice` and `--query` is required"),
    };
    let samples = st.samples.unwrap_or_else(|| model.default_samples());

    // Draws are keyed on (seed, point), so the thread count cannot change them.
    let seed = st.seed;
    let blocks = queries
        .par_iter()
        .map(|x| {
            let (mean, var, draws) = model.predict(x, samples, seed).runtime()?;
            let mut b = Block::new(x.clone());
            b.stats.insert("mean".into(), vec![mean]);
            b.stats.insert("variance".into(), vec![var]);
            if samples > 0 {
                b.stats.insert("sample".into(), draws);
            }
            Ok(b)
        })
        .collect::<CliResult<Vec<Block>>>()?;

    longcsv::write(
        out,
        &Table {
            feature_names: t.feature_names.clone(),
            blocks,
        },
    )?;
    write_json(
        &sidecar(out, ".json"),
        &json!({
            "format_version": REPORT_FORMAT_VERSION,
            "kind": "predictions",
            "model_kind": model.name(),
            "feature_names": t.feature_names,
            "target_name": t.target_name,
            "queries": queries.len(),
            "samples": samples,
            "settings": st,
        }),
    )
}
