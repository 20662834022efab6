//! Multi-seed comparison runs and their exports.

mod config;
mod convergence;
mod export;
mod runner;

pub use config::{ExperimentConfig, TrainConfig};
pub use convergence::{moving_average, smooth, ConvergenceRule};
pub use export::{
    build_summary, export, format_sig, quantize, read_episodes_csv, write_episodes_csv,
    write_smoothed_csv, Metadata, Summary, CSV_HEADER, EPISODES_CSV, SMOOTHED_CSV,
    SMOOTHING_WINDOW, SUMMARY_JSON,
};
pub use runner::{
    run_comparison, run_modes, series_stats, summarize, ExperimentResults, ModeSummary, RunFailure,
    SeriesStats, FINAL_WASSERSTEIN_EPISODES,
};
