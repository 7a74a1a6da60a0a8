//! Physics world: quadrotor, cable-driven ring pendulum, collision geometry,
//! camera rendering and motion-capture feedback.

mod camera;
mod collision;
mod drone;
mod mocap;
mod ring;

pub use camera::{render_intensity, ring_pixel_bounds, CameraModel, IntensityImage, Rect, RenderSettings, SceneRenderer};
pub use collision::{check_collision, torus_surface_distance, CollisionReport};
pub use drone::{step_drone, Attitude, DroneParams, DroneState, RotorCommand};
pub use mocap::{Mocap, MocapParams, Pose};
pub use ring::{ring_step, swing_acceleration, Cable, CableDrive, RingState};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldFault {
    #[error("drone left the room at ({x:.3}, {y:.3}, {z:.3})")]
    OutOfBounds { x: f64, y: f64, z: f64 },
    #[error("attitude {roll:.3}/{pitch:.3} rad exceeds the safe tilt limit")]
    AttitudeLimit { roll: f64, pitch: f64 },
    #[error("invalid time step {0}")]
    InvalidStep(f64),
    #[error("invalid room bounds")]
    InvalidBounds,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoomBounds {
    pub min: Vec3,
    pub max: Vec3,
}

impl RoomBounds {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self, WorldFault> {
        if (0..3).all(|i| min[i] < max[i]) {
            Ok(Self { min, max })
        } else {
            Err(WorldFault::InvalidBounds)
        }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }
}

impl Default for RoomBounds {
    fn default() -> Self {
        Self {
            min: Vec3::zeros(),
            max: Vec3::new(5.0, 4.0, 2.5),
        }
    }
}

/// Immutable per-tick view handed to loggers and observers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub time: f64,
    pub drone_position: Vec3,
    pub drone_velocity: Vec3,
    pub drone_attitude: Attitude,
    pub ring_center: Vec3,
    pub ring_angle: f64,
}

#[derive(Clone, Debug)]
pub struct World {
    pub time: f64,
    pub bounds: RoomBounds,
    pub drone: DroneState,
    pub drone_params: DroneParams,
    pub ring: RingState,
    pub drive: CableDrive,
}

impl World {
    pub fn snapshot(&self) -> StateSnapshot {
        StateSnapshot {
            time: self.time,
            drone_position: self.drone.position,
            drone_velocity: self.drone.velocity,
            drone_attitude: self.drone.attitude,
            ring_center: self.ring.center(),
            ring_angle: self.ring.pendulum_angle,
        }
    }

    /// Advances drone and ring by `dt`. The world still advances when a fault
    /// is returned, so callers can log the offending state.
    pub fn step(&mut self, cmd: &RotorCommand, dt: f64) -> Result<(), WorldFault> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(WorldFault::InvalidStep(dt));
        }
        self.drone = step_drone(&self.drone, cmd, &self.drone_params, dt);
        self.ring.drive_velocity = self.drive.command(&self.ring, dt);
        self.ring = ring_step(&self.ring, dt);
        self.time += dt;

        let p = self.drone.position;
        if !self.bounds.contains(&p) {
            return Err(WorldFault::OutOfBounds { x: p.x, y: p.y, z: p.z });
        }
        let a = self.drone.attitude;
        if self.drone.armed && (a.roll.abs() > self.drone_params.safe_tilt || a.pitch.abs() > self.drone_params.safe_tilt) {
            return Err(WorldFault::AttitudeLimit {
                roll: a.roll,
                pitch: a.pitch,
            });
        }
        Ok(())
    }
}

pub fn step_world(world: &mut World, cmd: &RotorCommand, dt: f64) -> Result<(), WorldFault> {
    world.step(cmd, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::GRAVITY;

    fn world() -> World {
        World {
            time: 0.0,
            bounds: RoomBounds::default(),
            drone: DroneState::at_rest(Vec3::new(2.5, 0.6, 1.0)),
            drone_params: DroneParams {
                drag: 0.0,
                ..DroneParams::default()
            },
            ring: RingState {
                cable: Cable { y: 2.0, z: 1.8 },
                pivot_position: 2.5,
                drive_velocity: 0.2,
                prev_drive_velocity: 0.2,
                pendulum_angle: 0.0,
                pendulum_rate: 0.0,
                suspension_length: 0.5,
                ring_radius: 0.35,
                tube_radius: 0.02,
                damping: 0.1,
            },
            drive: CableDrive {
                speed: 0.2,
                travel_min: 0.5,
                travel_max: 4.5,
                accel_limit: 0.3,
                direction: 1.0,
            },
        }
    }

    #[test]
    fn free_fall_matches_ballistic_oracle() {
        let mut w = world();
        let z0 = w.drone.position.z;
        let dt = 1e-3;
        for _ in 0..100 {
            w.step(&RotorCommand::default(), dt).unwrap();
        }
        let dz = w.drone.position.z - z0;
        let exact = -0.5 * GRAVITY * 0.1 * 0.1;
        assert!((exact + 0.04905).abs() < 1e-12);
        // semi-implicit Euler is first order: |error| <= g * T * dt / 2
        assert!((dz - exact).abs() <= 0.5 * GRAVITY * 0.1 * dt + 1e-12, "dz {dz}");
    }

    #[test]
    fn leaving_the_room_faults() {
        let mut w = world();
        w.drone.position.x = 4.999;
        w.drone.velocity.x = 2.0;
        let r = (0..10).map(|_| w.step(&RotorCommand::hover(0.5), 1e-3)).find(|r| r.is_err());
        assert!(matches!(r, Some(Err(WorldFault::OutOfBounds { .. }))));
    }

    #[test]
    fn stepping_is_deterministic() {
        let mut a = world();
        let mut b = world();
        let cmd = RotorCommand {
            thrust: 5.0,
            roll: 0.1,
            pitch: -0.05,
            yaw_rate: 0.0,
        };
        for _ in 0..500 {
            a.step(&cmd, 1e-3).unwrap();
            b.step(&cmd, 1e-3).unwrap();
        }
        assert_eq!(a.snapshot(), b.snapshot());
    }

    #[test]
    fn rejects_bad_step_and_bounds() {
        let mut w = world();
        assert!(matches!(w.step(&RotorCommand::default(), 0.0), Err(WorldFault::InvalidStep(_))));
        assert!(RoomBounds::new(Vec3::zeros(), Vec3::new(1.0, 0.0, 1.0)).is_err());
    }
}
