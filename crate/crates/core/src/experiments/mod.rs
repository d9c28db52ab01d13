//! Declarative parameter sweeps over probes, channels and noise, with CSV and
//! JSON output.

pub mod config;
pub mod emit;
pub mod presets;
pub mod runner;

pub use config::{Experiment, NoiseConfig, ProbeEntry, SweepConfig};
pub use emit::{emit, render, write_triplets, Format};
pub use presets::{preset, PRESETS};
pub use runner::{
    find_threshold_p_star, run_sweep, run_sweep_with, worker_count, PStar, ResultRow, THREADS_ENV,
};
