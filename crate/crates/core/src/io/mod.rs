//! Configuration ingestion, command dispatch and artifact serialization.

mod config;
mod format;
mod run;

pub use config::{parse_config, BcConfig, Format, GridConfig, LoadConfig, OutputConfig, Problem, RunConfig, VerifyConfig};
pub use format::{from_json, obj_string, parse_obj_vertices, read_csv, to_json, write_csv, SCHEMA_VERSION};
pub use run::{
    dispatch, error_json, Command, CurvatureRow, CurvatureSummary, EvaluateReport, MinimizeReport, NodeRow, Outcome, VerifyReport,
};
