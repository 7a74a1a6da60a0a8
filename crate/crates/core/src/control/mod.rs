//! Intercept planning, the flight phase machine, and cascaded PID
//! execution with an energy meter.

mod cascade;
mod phase;
mod pid;
mod planner;
mod quintic;

pub use cascade::{estimate_energy, ActuationSample, CascadeController, CascadeGains, ControlTrace, EnergyMeter};
pub use phase::{is_valid_sequence, phase_step, Clearance, FlightPhase, PhaseChange, PhaseInputs, PhaseMachine};
pub use pid::{pid_update, AlphaBeta, Pid, PidGains};
pub use planner::{
    draw_start_delay, plan_maneuver, predict_intercept, Incidence, InterceptPrediction, PlanError, PlannerParams, Waypoint,
    WaypointPlan,
};
pub use quintic::{Quintic, RefState, Reference};
