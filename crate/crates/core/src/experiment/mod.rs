//! Config-driven experiments: load a game and estimator list, run seeded
//! trials in parallel, score them and write tidy CSV plus a JSON report.

mod config;
mod output;
mod runner;
mod sweep;
pub mod verify;

pub use config::{
    load_phi, save_phi, ExperimentConfig, GameSpec, ReferenceSpec, SubprocessSpec, SweepAxis,
    SweepSpec, PHI_FORMAT,
};
pub use output::{
    fmt_f64, fmt_opt, num, report_json, write_outputs, FAIRNESS_CSV, PHI_CSV, REPORT_JSON,
    RESULTS_CSV, SUMMARY_CSV,
};
pub use runner::{
    aggregate, mean_and_std_err, metric_names, prepare, run_experiment, run_trials, scalar_metrics,
    score, Aggregate, PreparedGame, RunReport, TrialRecord,
};
pub use sweep::{run_sweep, write_sweep, SweepReport, SweepRow, SWEEP_COLUMNS, SWEEP_CSV};
