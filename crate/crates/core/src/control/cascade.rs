use serde::{Deserialize, Serialize};

use super::pid::{AlphaBeta, Pid, PidGains};
use super::quintic::RefState;
use crate::world::{Pose, RotorCommand};
use crate::{Vec3, GRAVITY};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CascadeGains {
    pub position_xy: PidGains,
    pub position_z: PidGains,
    pub velocity_xy: PidGains,
    pub velocity_z: PidGains,
    /// Tilt command clamp, rad.
    pub max_tilt: f64,
    pub yaw_kp: f64,
    /// Alpha-beta gains of the velocity observer on mocap position.
    pub observer_alpha: f64,
    pub observer_beta: f64,
    /// The acceleration feed-forward is read this far ahead on the reference
    /// to cover the airframe's attitude lag, s.
    pub feedforward_lead: f64,
}

impl Default for CascadeGains {
    fn default() -> Self {
        Self {
            position_xy: PidGains::p(1.6),
            position_z: PidGains::p(2.0),
            velocity_xy: PidGains {
                kp: 3.0,
                ki: 0.5,
                integral_limit: 1.0,
                output_limit: 4.0,
                ..PidGains::default()
            },
            velocity_z: PidGains {
                kp: 4.0,
                ki: 0.5,
                integral_limit: 2.0,
                output_limit: 6.0,
                ..PidGains::default()
            },
            max_tilt: 0.35,
            yaw_kp: 2.0,
            observer_alpha: 0.6,
            observer_beta: 0.25,
            feedforward_lead: 0.15,
        }
    }
}

/// What the controller measured and commanded on one tick.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlTrace {
    pub measured_position: Vec3,
    pub estimated_velocity: Vec3,
    pub velocity_command: Vec3,
    pub acceleration_command: Vec3,
    pub command: RotorCommand,
}

/// Position loop (P plus velocity feed-forward) over a velocity loop (PI
/// plus acceleration feed-forward), mapped to thrust and tilt.
#[derive(Clone, Debug)]
pub struct CascadeController {
    pub gains: CascadeGains,
    pub mass: f64,
    position: [Pid; 3],
    velocity: [Pid; 3],
    observer: [AlphaBeta; 3],
}

impl CascadeController {
    pub fn new(gains: CascadeGains, mass: f64) -> Self {
        let pos = |i| Pid::new(if i == 2 { gains.position_z } else { gains.position_xy });
        let vel = |i| Pid::new(if i == 2 { gains.velocity_z } else { gains.velocity_xy });
        Self {
            gains,
            mass,
            position: [pos(0), pos(1), pos(2)],
            velocity: [vel(0), vel(1), vel(2)],
            observer: [AlphaBeta::new(gains.observer_alpha, gains.observer_beta); 3],
        }
    }

    pub fn update(&mut self, reference: &RefState, pose: &Pose, dt: f64) -> ControlTrace {
        let mut p_est = Vec3::zeros();
        let mut v_est = Vec3::zeros();
        for i in 0..3 {
            let (p, v) = self.observer[i].update(pose.position[i], dt);
            p_est[i] = p;
            v_est[i] = v;
        }
        let mut v_cmd = Vec3::zeros();
        let mut a_cmd = Vec3::zeros();
        for i in 0..3 {
            v_cmd[i] = reference.velocity[i] + self.position[i].update(reference.position[i], pose.position[i], dt);
            a_cmd[i] = reference.acceleration[i] + self.velocity[i].update(v_cmd[i], v_est[i], dt);
        }
        let lift = (GRAVITY + a_cmd.z).max(0.1 * GRAVITY);
        let tan_max = self.gains.max_tilt.tan();
        let horizontal = Vec3::new(a_cmd.x, a_cmd.y, 0.0);
        let limit = lift * tan_max;
        let horizontal = if horizontal.norm() > limit {
            horizontal * (limit / horizontal.norm())
        } else {
            horizontal
        };
        let total = Vec3::new(horizontal.x, horizontal.y, lift);
        let pitch = total.x.atan2(total.z);
        let roll = (-total.y / total.norm()).asin();
        let command = RotorCommand {
            thrust: self.mass * total.norm(),
            roll: roll.clamp(-self.gains.max_tilt, self.gains.max_tilt),
            pitch: pitch.clamp(-self.gains.max_tilt, self.gains.max_tilt),
            yaw_rate: -self.gains.yaw_kp * pose.attitude.yaw,
        };
        ControlTrace {
            measured_position: p_est,
            estimated_velocity: v_est,
            velocity_command: v_cmd,
            acceleration_command: a_cmd,
            command,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActuationSample {
    /// N.
    pub thrust: f64,
    /// m/s.
    pub speed: f64,
    /// s.
    pub dt: f64,
}

/// Running sum of `(thrust * speed + baseline) * dt`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyMeter {
    /// Rotor power drawn regardless of motion, W.
    pub baseline_power: f64,
    pub joules: f64,
}

impl EnergyMeter {
    pub fn new(baseline_power: f64) -> Self {
        Self {
            baseline_power,
            joules: 0.0,
        }
    }

    pub fn record(&mut self, s: &ActuationSample) -> f64 {
        self.joules += (s.thrust.max(0.0) * s.speed.abs() + self.baseline_power) * s.dt;
        self.joules
    }
}

pub fn estimate_energy(history: &[ActuationSample], baseline_power: f64) -> f64 {
    let mut m = EnergyMeter::new(baseline_power);
    history.iter().for_each(|s| {
        m.record(s);
    });
    m.joules
}
