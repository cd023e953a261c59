//! Fixtures shared by the criterion benches: training sets drawn from the
//! built-in scenarios, already in model units.

use hetgp_core::chained::{CgpFitConfig, FreeParams};
use hetgp_core::dataset::{fit_transforms, DataSet};
use hetgp_core::synth::{generate_dataset, Design, SyntheticScenario};
use hetgp_core::{ChainedGpModel, Result};

/// `n` Sobol rows of scenario `id`, standardized.
pub fn scenario_data(id: &str, n: usize) -> Result<DataSet> {
    let s = SyntheticScenario::builtin(id)?;
    let raw = generate_dataset(&s, n, Design::Sobol, 0)?;
    Ok(fit_transforms(&raw, s.target_positive())?.0)
}

/// Warm-started chained GP on `d` with `inducing` points and no Adam steps,
/// unpacked to the optimizer's free parameters.
pub fn initial_params(d: &DataSet, inducing: usize) -> Result<(ChainedGpModel, FreeParams)> {
    let cfg = CgpFitConfig {
        num_inducing: inducing,
        max_iters: 0,
        ..Default::default()
    };
    let (m, _) = hetgp_core::chained::cgp_fit(d, &cfg)?;
    let p = FreeParams::from_model(&m, false)?;
    Ok((m, p))
}
