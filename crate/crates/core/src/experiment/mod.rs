//! Experiment harness: config files, parameter sweeps, CSV and plot output.

mod config;
mod output;
mod sweep;

pub use config::{load_config, parse_config, ExperimentConfig, IsothermSection, SweepSection};
pub use output::{
    format_float, write_fit_csv, write_freundlich_plot, write_isotherm_csv, write_langmuir_plot, write_replicates_csv,
    write_series_csv, write_series_plot, write_sweep_csv, FreundlichFitRow,
};
pub use sweep::{
    derive_seed, freundlich_fit, run_sweep, Equilibrium, ReplicateResult, SweepOutcome, SweepRow, SweepSpec,
};
