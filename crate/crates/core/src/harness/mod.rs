//! Seeded, parallel experiment runner.
//!
//! Trial `t` of a run with master seed `s` uses `trial_seeds(s, t)`: the
//! first seed generates the instance and the second the sketch, so any
//! single trial can be replayed in isolation. Rows are written in trial
//! order whatever the thread count.

pub mod config;
pub mod output;
pub mod presets;
pub mod run;
pub mod summary;

pub use config::{ChildSpec, Distribution, Experiment, ExperimentConfig, Format, Resolved, SketchSpec};
pub use output::{csv_body, csv_document, json_document, sidecar_path, write_result};
pub use presets::{preset, preset_names, Preset, PresetRun};
pub use run::{
    build_sketch, run_experiment, run_experiment_with, DiagnosticTrial, DiagnosticsSummary, ExperimentResult,
    TrialOutcome,
};
pub use summary::{summarize, Quantiles, TrialSummary};
