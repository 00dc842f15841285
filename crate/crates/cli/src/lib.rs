//! Reproducibility harness for the Klein-Gordon step simulations: run
//! configuration, single runs, barrier-height sweeps, convergence studies,
//! oracle checks and trend re-analysis, with CSV/JSON artifacts.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use commands::{
    convergence, oracle_check, retrend, simulate, sweep, with_step_height, ConvergenceReport, OracleCheckReport,
    OracleKind, Refinement, SimulationArtifacts, SweepRow,
};
pub use config::{load_config, parse_config, ConfigFormat, PotentialConfig, RunConfig};
pub use error::{HarnessError, HarnessResult};
pub use run::{execute, PreparedRun, RunOutcome};
