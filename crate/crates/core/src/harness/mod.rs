//! Batch front end: configuration, chain execution, outputs, and
//! diagnostics.

pub mod cli;
pub mod diagnostics;
pub mod runner;

pub use cli::{parse_config, validate_command, Cli, Command, RunConfig};
pub use diagnostics::{
    batch_means_ess, compare_runs, compare_summaries, summarize, summarize_batches, Comparison,
    PosteriorSummary,
};
pub use runner::{execute_compare, execute_run, run_chains, CompareReport, RunOutput, SummaryDoc};
