use std::path::{Path, PathBuf};

use hetgp_core::study::{protocol, run_comparison, Comparison};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{scenario, write_json, REPORT_FORMAT_VERSION};
use crate::config::resolve;
use crate::error::{invalid, CliResult, Classify};
use crate::BenchFlags;

/// Largest per-condition normalized distance allowed for the heteroscedastic
/// model where the noise level is central.
pub const DW1_BOUND: f64 = 0.5;
/// Mean agreement tolerance, in reference standard deviations.
pub const MEAN_TOL: f64 = 0.15;
/// Required fraction of conditions within `MEAN_TOL`.
pub const MEAN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSettings {
    pub scenarios: Vec<String>,
    pub quick: bool,
    pub output: Option<PathBuf>,
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings {
            scenarios: vec!["S1".into(), "S6".into()],
            quick: false,
            output: None,
        }
    }
}

fn summary_line(c: &Comparison) -> String {
    let variance = c.variance_claim(DW1_BOUND);
    let agreement = c.mean_agreement(MEAN_TOL);
    format!(
        "{}: mean d_W1 gpr {:.3} hgpr {:.3} [{}]; means agree at {:.0}% of conditions [{}]; fit {:.1} s + {:.1} s",
        c.scenario,
        c.mean_dw1_gpr,
        c.mean_dw1_hgpr,
        if variance { "PASS" } else { "FAIL" },
        100.0 * agreement,
        if agreement >= MEAN_FRACTION { "PASS" } else { "FAIL" },
        c.gpr_seconds,
        c.hgpr_seconds,
    )
}

pub fn run(cfg: Option<&Path>, flags: &BenchFlags) -> CliResult<()> {
    let st: BenchSettings = resolve("bench", cfg, flags)?;
    if st.scenarios.is_empty() {
        return invalid("no scenarios given");
    }
    let mut plans = Vec::new();
    for id in &st.scenarios {
        let s = scenario(id)?;
        let (conditions, mut config) = protocol(&s).invalid()?;
        if st.quick {
            config.n_train = 400;
            config.hgpr.num_inducing = config.hgpr.num_inducing.min(50);
            config.hgpr.minibatch_size = None;
            config.hgpr.max_iters = 300;
            config.samples = 2000;
        }
        plans.push((s, conditions, config));
    }

    let mut results = Vec::new();
    for (s, conditions, config) in &plans {
        log::info!("running {} on {} conditions", s.id(), conditions.len());
        let c = run_comparison(s, conditions, config).runtime()?;
        println!("{}", summary_line(&c));
        results.push(c);
    }
    if let Some(out) = &st.output {
        write_json(
            out,
            &json!({
                "format_version": REPORT_FORMAT_VERSION,
                "kind": "bench",
                "settings": st,
                "thresholds": { "dw1_bound": DW1_BOUND, "mean_tol": MEAN_TOL, "mean_fraction": MEAN_FRACTION },
                "comparisons": results,
            }),
        )?;
    }
    Ok(())
}
