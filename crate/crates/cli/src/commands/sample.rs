use std::path::{Path, PathBuf};

use hetgp_core::dataset::write_csv;
use hetgp_core::study::{parse_slice, protocol};
use hetgp_core::synth::{generate_dataset, replication_reference, Design};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{scenario, write_json, REPORT_FORMAT_VERSION};
use crate::config::{required, resolve, sidecar};
use crate::error::{invalid, CliResult, Classify};
use crate::longcsv::{self, Block, Table};
use crate::SampleFlags;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSettings {
    pub scenario: Option<String>,
    pub n: Option<usize>,
    pub design: Design,
    pub seed: u64,
    pub replications: Option<usize>,
    pub at_slice: Option<String>,
    pub output: Option<PathBuf>,
}

pub fn run(cfg: Option<&Path>, flags: &SampleFlags) -> CliResult<()> {
    let st: SampleSettings = resolve("sample", cfg, flags)?;
    let s = scenario(required(&st.scenario, "scenario")?)?;
    let out = required(&st.output, "output")?;

    if let Some(reps) = st.replications {
        if st.n.is_some() {
            return invalid("`--n` and `--replications` are mutually exclusive");
        }
        if reps < 2 {
            return invalid(format!("--replications must be at least 2, got {reps}"));
        }
        let conditions = match &st.at_slice {
            Some(spec) => parse_slice(spec, s.feature_names()).invalid()?,
            None => protocol(&s).invalid()?.0,
        };
        for x in &conditions {
            s.feature_box().check_contains(x).invalid()?;
        }
        let study = replication_reference(&s, &conditions, reps, st.seed).runtime()?;
        let blocks = conditions
            .iter()
            .zip(study.raw)
            .map(|(x, draws)| {
                let mut b = Block::new(x.clone());
                b.stats.insert("sample".into(), draws);
                b
            })
            .collect();
        longcsv::write(
            out,
            &Table {
                feature_names: s.feature_names().to_vec(),
                blocks,
            },
        )?;
        return write_json(
            &sidecar(out, ".json"),
            &json!({
                "format_version": REPORT_FORMAT_VERSION,
                "kind": "replication",
                "scenario": s.id(),
                "target_name": s.target_name(),
                "replications": reps,
                "seed": st.seed,
                "conditions": conditions,
                "settings": st,
            }),
        );
    }

    if st.at_slice.is_some() {
        return invalid("`--at-slice` only applies with `--replications`");
    }
    let n = *required(&st.n, "n")?;
    if n == 0 {
        return invalid("--n must be at least 1");
    }
    let d = generate_dataset(&s, n, st.design, st.seed).runtime()?;
    write_csv(&d, out).runtime()?;
    write_json(
        &sidecar(out, ".json"),
        &json!({
            "format_version": REPORT_FORMAT_VERSION,
            "kind": "dataset",
            "scenario": s.id(),
            "design": st.design,
            "seed": st.seed,
            "n": n,
            "target_name": s.target_name(),
            "target_positive": s.target_positive(),
            "settings": st,
        }),
    )
}
