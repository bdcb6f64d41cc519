//! Scenario files, shipped presets, and the runners behind each subcommand.

mod config;
mod presets;
mod run;

pub use config::{CameraConfig, GridConfig, MarkerLayout, ParticleInit, ScenarioConfig, Schedule, ValidationConfig};
pub use presets::{preset, PRESETS};
pub use run::{
    run_ablation, run_bench_stepping, run_render, run_simulate, run_validate_depth, run_validate_multiview,
    AblationReport, BenchReport, BenchRow, BoardVariance, CrossViewMetrics, DepthFit, DepthMode, DepthReport,
    FrameStats, MultiviewReport, Output, Pipeline, RenderReport, RenderedFrame, SimulateReport, VariantResult,
};
