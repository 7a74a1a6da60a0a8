//! Deterministic indoor-flight simulator for language-commanded maneuvers
//! around a moving, pendulum-suspended ring.
//!
//! The pipeline runs, per scenario:
//!
//! * [`world`]: quadrotor point-mass dynamics, the cable-driven ring pendulum,
//!   collision geometry, the tripod camera renderer and motion-capture feedback.
//! * [`event`]: log-intensity event synthesis from rendered frames.
//! * [`snn`]: a single leaky integrate-and-fire layer that filters the event
//!   stream, detects the ring, tracks it and summarises it into an
//!   [`snn::EnvironmentStateReport`].
//! * [`intent`]: closed-vocabulary command parsing, fixed operator responses
//!   and the pluggable go/no-go classifier.
//! * [`feasibility`]: the kinematic/velocity/time feasibility gate, the
//!   in-flight abort monitor and the labelled dataset generator.
//! * [`control`]: intercept prediction, waypoint planning, the five-phase
//!   flight machine, cascaded PID and the actuator energy meter.
//! * [`runner`] and [`service`]: headless scenario/batch execution with logs,
//!   and the live telemetry/command service.
//!
//! World frame convention: z is up, the ring travels along x on a cable lying
//! in the plane `y = cable_y`, and the drone approaches that plane along +y.

pub mod control;
pub mod event;
pub mod feasibility;
pub mod geometry;
pub mod intent;
pub mod par;
pub mod runner;
pub mod service;
pub mod snn;
pub mod world;

pub use geometry::Vec3;

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.81;
