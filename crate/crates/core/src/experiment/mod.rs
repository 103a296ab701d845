//! Config-driven experiment harness behind the CLI.

pub mod ablation;
pub mod config;
pub mod runner;
pub mod variance;

pub use ablation::{cmd_ablation, AblationReport, AblationRow};
pub use config::{
    AblationSpec, DatasetSource, EvalSpec, ExperimentConfig, PartitionSpec, SetupSpec, TunerSpec,
    VarianceSpec,
};
pub use runner::{
    cmd_run, prepare_clients, render_table, run_setup, ClientReport, Manifest, ResultsTable,
    RunArtifacts, TableRow,
};
pub use variance::{cmd_variance_study, compare_models, VarianceEntry, VarianceReport};
