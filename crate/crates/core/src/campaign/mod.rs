//! Oracle corpus, acceptance checks and the artifact-writing campaign runner.

mod calibrate;
mod checks;
mod config;
mod corpus;
pub mod criteria;
mod manufactured;
mod runner;

pub use calibrate::{calibrate, calibrate_case_c1, lipschitz_spacing, lipschitz_window, C1Entry, CalibrationSpec, Constants, NuEntry};
pub use checks::{checks_csv, CheckRecord, CriterionOutcome};
pub use config::{ExperimentConfig, FluxSection, GridSection, IterationSection, Scenario};
pub use corpus::{
    convergence_study, half_max_radius, interior_error, oracle, oracle_corpus, radial_gradient_sup, solve_case, Convergence, OracleCase,
    ORACLE_GRADIENT, ORACLE_WIDTH,
};
pub use manufactured::{calibrate_nu, unit_grid, CapRecipe, DerivativeRecipe, Dip, NuCalibration};
pub use runner::{default_out, execute, exit_code, run, summarize, Manifest, RunReport, CHECKS_FILE, CONSTANTS_FILE, MANIFEST_FILE, REPORT_FILE};
