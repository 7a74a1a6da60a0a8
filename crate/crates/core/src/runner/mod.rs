//! Headless scenario execution: configuration, the simulation engine, run
//! logs and seeded batches.

mod batch;
mod config;
mod engine;
mod logs;

pub use batch::{collision_free, run_batch, run_batch_logged, scenario_for_run, BatchRow, BatchSummary};
pub use config::{
    BatchConfig, BatchKind, CameraConfig, ConfigError, FlightConfig, RingConfig, ScenarioConfig, ScriptedCommand,
    TimingConfig,
};
pub use engine::{
    run_scenario, CommandRejection, CrossingRecord, GoNoGoRecord, Outcome, ScenarioResult, ScenarioRun, SimEvent,
    Simulation, FRAME_WINDOW_US,
};
pub use logs::{
    parse_trajectory, sha256_hex, RunLogs, TrajectoryRow, AUDIT_FILE, CONTROL_FILE, DETECTIONS_FILE, EVENTS_FILE,
    SUMMARY_FILE, TRAJECTORY_FILE,
};
