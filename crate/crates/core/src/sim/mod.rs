//! Free-field scene simulation, direction mappings, the energy-weighted error
//! metric and the rank sweep benchmark.

mod bench;
mod metrics;
mod scene;

pub use bench::{
    evaluate_geometry, run_benchmark, run_exact, run_model, summary, write_csv, BatchRun, BenchmarkRow,
    BenchmarkSettings, SceneBatch, CSV_HEADER,
};
pub use metrics::{map_direction, rmse, DirectionMapping};
pub use scene::{arrival_delays, random_direction, simulate_scene, Scene, SignalKind, SNR_RANGE_DB};
