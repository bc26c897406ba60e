//! Experiment harness for hierarchical option-critic agents: configuration
//! files, multi-seed runs, CSV summaries, SVG learning curves and the
//! verification command.

pub mod config;
pub mod experiment;
pub mod plot;
pub mod verify;

pub use config::{default_agent, parse_config, parse_config_file, ConfigError, ConfigErrors, EnvKind, ExperimentSpec, Metric};
pub use experiment::{run_all, run_experiment, run_single, summarize, Checkpoint, RunResult, RunSummary};
pub use plot::{emit_plot, render_svg};
pub use verify::run_verify;
