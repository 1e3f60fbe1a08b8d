//! File formats, run configuration and the command implementations.

mod commands;
mod config;
mod export;
mod geometry;

pub use commands::{
    cmd_export, cmd_run, exit_code, initial_domain, partition_of_unity_probe, setup, summary_table,
    ExportKind, RunOutput, Setup,
};
pub use config::{ExportSection, MaterialOverride, ProblemKind, ProblemSection, RunConfig};
pub use export::{active_edges, export_fields, export_mesh, patch_samples, PatchState, RunState};
pub use geometry::{GeometryFile, PatchSpec};
