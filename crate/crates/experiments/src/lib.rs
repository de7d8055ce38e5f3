//! Simulation studies for the pMSE mechanism and the `dp-pmse` tool:
//!
//! * `failure-rate`: how often greedy trees exceed the `1/n` sensitivity bound;
//! * `regress-eval`: regression coefficients recovered from synthetic data;
//! * `pmse-eval`: pMSE of each synthesizer's output against the original.
//!
//! Every experiment is a pure function of its configuration, master seed
//! included, and parallel runs give the same report as sequential ones.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod evaluation;
pub mod failure;
pub mod methods;
pub mod population;
pub mod report;
pub mod seeds;
pub mod synthesize;

pub use config::{Depth, ExperimentConfig, ExperimentKind, Method};
pub use error::{ExperimentError, Result};
pub use evaluation::{pmse_eval_experiment, regress_eval_experiment};
pub use failure::failure_rate_experiment;
pub use population::{combine_estimates, ols_fit, simulate_population, Coefficients};
pub use report::{emit_report, Cell, ExperimentReport};

/// Run whichever experiment `cfg` names.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match cfg.experiment {
        ExperimentKind::FailureRate => failure_rate_experiment(cfg),
        ExperimentKind::RegressEval => regress_eval_experiment(cfg),
        ExperimentKind::PmseEval => pmse_eval_experiment(cfg),
    }
}
