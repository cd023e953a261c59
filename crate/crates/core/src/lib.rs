//! Heteroscedastic surrogate modelling: exact and chained Gaussian processes,
//! synthetic benchmark generation and distributional error metrics.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chained;
pub mod dataset;
pub mod error;
pub mod expr;
pub mod gpr;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod metrics;
pub mod optim;
pub mod quadrature;
pub mod rng;
pub mod study;
pub mod synth;

pub use dataset::{DataSet, FeatureSpec, TargetTransform, TransformPipeline};
pub use error::{Error, Result};
pub use gpr::{gpr_fit, gpr_physical_moments, gpr_predict_samples, ExactGprModel, GprFitConfig, GprHyper};
pub use kernel::{kernel_eval, kernel_matrix, stable_cholesky, KernelParams};
pub use chained::{
    cgp_fit, cgp_physical_moments, cgp_predict_moments, cgp_predict_samples, elbo, latent_posterior, ChainedGpModel, CgpFitConfig,
    ElboReport, LatentSparseGp, NoiseParam,
};
pub use metrics::{normalized_wasserstein, point_metrics, wasserstein1, EmpiricalDistribution};
pub use synth::{generate_dataset, replication_reference, simulate, Design, ReplicationStudy, SyntheticScenario};
pub use study::{parse_slice, protocol, run_comparison, Comparison, ComparisonConfig};
