//! Experiment orchestration: configuration, manufactured problems with an
//! independent radial oracle, end-to-end regularity experiments, convergence
//! studies, and flat-file report emission.

pub mod config;
pub mod experiment;
pub mod oracle;
pub mod presets;
pub mod report;
pub mod table;

pub use config::{AnalysisConfig, ExperimentConfig};
pub use experiment::{
    analyze_solution, convergence_study, run_experiment, AnalysisOutcome, CenterAnalysis,
    ConvergenceTable, ExperimentReport, ExperimentStatus,
};
pub use oracle::{radial_oracle, RadialData, RadialSamples};
pub use presets::{manufactured_problem, Manufactured, PresetSpec};
