//! Experiment runner: replication loops over a scenario, baseline
//! comparison, aggregation and report emission.

mod emit;
mod experiment;

pub use emit::{emit_report, radar_scores, svg_radar, svg_scatter, write_report_csv, ReportFormat, CSV_HEADER};
pub use experiment::{
    b2_demo, fit_method, run_experiment, Aggregate, B2Demo, B2Row, EvalModels, ExperimentConfig, Fitted,
    FittedModels, Metadata, MethodResult, Report, Scenario, SolverAudit, Stat, CsvScenario,
};
