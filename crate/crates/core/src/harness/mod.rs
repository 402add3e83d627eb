//! Experiment plumbing behind the `torp` binary: matrix and instance files,
//! solver dispatch, ground-truth metrics and CSV output.

mod cli;
mod experiment;
mod io;
mod metrics;

pub use cli::{cli_main, Grid, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE};
pub use experiment::{
    load_or_generate, run_experiment, run_solver, run_trial, thread_count, vanilla_svd,
    ExperimentConfig, InstanceSource, SolverChoice, SolverParams, THREADS_ENV,
};
pub use io::{
    load_instance, load_matrix, parse_key_values, read_matrix, save_instance, save_matrix,
    write_matrix, HEADER_LEN, MAGIC, MANIFEST_FILE,
};
pub use metrics::{compute, support_scores, write_csv, MetricsRow, CSV_HEADER};
