use serde::{Deserialize, Serialize};

use crate::{Vec3, GRAVITY};

/// Roll, pitch, yaw in radians (ZYX convention).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Attitude {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Attitude {
    /// World-frame direction of the body z axis (the thrust axis).
    pub fn thrust_axis(&self) -> Vec3 {
        let (sr, cr) = self.roll.sin_cos();
        let (sp, cp) = self.pitch.sin_cos();
        let (sy, cy) = self.yaw.sin_cos();
        Vec3::new(
            cy * sp * cr + sy * sr,
            sy * sp * cr - cy * sr,
            cp * cr,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroneState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub attitude: Attitude,
    /// Body angular rate (roll, pitch, yaw rate), rad/s.
    pub angular_rate: Vec3,
    pub armed: bool,
}

impl DroneState {
    pub fn at_rest(position: Vec3) -> Self {
        Self {
            position,
            velocity: Vec3::zeros(),
            attitude: Attitude::default(),
            angular_rate: Vec3::zeros(),
            armed: true,
        }
    }

    pub fn kinetic_energy(&self, mass: f64) -> f64 {
        0.5 * mass * self.velocity.norm_squared()
    }

    pub fn on_ground(&self) -> bool {
        self.position.z <= 1e-9
    }
}

/// Collective thrust plus attitude targets; the airframe's onboard
/// stabilisation tracks roll/pitch with a first-order lag.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RotorCommand {
    /// Collective thrust, N.
    pub thrust: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw_rate: f64,
}

impl RotorCommand {
    pub fn hover(mass: f64) -> Self {
        Self {
            thrust: mass * GRAVITY,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DroneParams {
    /// kg; roughly the takeoff weight of a commodity indoor quadrotor.
    pub mass: f64,
    /// Linear drag coefficient, N·s/m.
    pub drag: f64,
    /// Roll/pitch response time constant, s.
    pub attitude_time_constant: f64,
    /// Attitude beyond this raises a fault, rad.
    pub safe_tilt: f64,
    pub max_thrust: f64,
    /// Radius of the bounding sphere used for collision checks, m.
    pub bounding_radius: f64,
}

impl Default for DroneParams {
    fn default() -> Self {
        Self {
            mass: 0.5,
            drag: 0.1,
            attitude_time_constant: 0.15,
            safe_tilt: 0.45,
            max_thrust: 0.5 * GRAVITY * 2.0,
            bounding_radius: 0.15,
        }
    }
}

/// Advances the point-mass model by `dt` with semi-implicit Euler.
///
/// The floor (z = 0) is a contact surface: a descending drone stops there.
pub fn step_drone(state: &DroneState, cmd: &RotorCommand, params: &DroneParams, dt: f64) -> DroneState {
    let mut next = *state;
    let blend = 1.0 - (-dt / params.attitude_time_constant).exp();
    let prev = state.attitude;
    next.attitude.roll += (cmd.roll - prev.roll) * blend;
    next.attitude.pitch += (cmd.pitch - prev.pitch) * blend;
    next.attitude.yaw += cmd.yaw_rate * dt;
    next.angular_rate = Vec3::new(
        (next.attitude.roll - prev.roll) / dt,
        (next.attitude.pitch - prev.pitch) / dt,
        cmd.yaw_rate,
    );

    let thrust = if state.armed {
        cmd.thrust.clamp(0.0, params.max_thrust)
    } else {
        0.0
    };
    let accel = next.attitude.thrust_axis() * (thrust / params.mass)
        - Vec3::z() * GRAVITY
        - state.velocity * (params.drag / params.mass);
    next.velocity = state.velocity + accel * dt;
    next.position = state.position + next.velocity * dt;

    if next.position.z < 0.0 {
        next.position.z = 0.0;
        next.velocity = Vec3::zeros();
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_drag() -> DroneParams {
        DroneParams {
            drag: 0.0,
            ..DroneParams::default()
        }
    }

    #[test]
    fn hover_holds_position() {
        let p = no_drag();
        let s = DroneState::at_rest(Vec3::new(1.0, 1.0, 1.0));
        let n = step_drone(&s, &RotorCommand::hover(p.mass), &p, 1e-3);
        assert!((n.position - s.position).norm() < 1e-9);
    }

    #[test]
    fn level_thrust_axis_is_up() {
        assert_eq!(Attitude::default().thrust_axis(), Vec3::z());
        let pitched = Attitude {
            pitch: 0.3,
            ..Attitude::default()
        };
        // positive pitch tilts thrust toward +x
        assert!(pitched.thrust_axis().x > 0.0);
        let rolled = Attitude {
            roll: 0.3,
            ..Attitude::default()
        };
        assert!(rolled.thrust_axis().y < 0.0);
    }

    #[test]
    fn attitude_lag_is_first_order() {
        let p = no_drag();
        let mut s = DroneState::at_rest(Vec3::new(1.0, 1.0, 1.0));
        let cmd = RotorCommand {
            roll: 0.2,
            ..RotorCommand::hover(p.mass)
        };
        let dt = 1e-3;
        let steps = (p.attitude_time_constant / dt).round() as usize;
        for _ in 0..steps {
            s = step_drone(&s, &cmd, &p, dt);
        }
        let expected = 0.2 * (1.0 - (-1.0f64).exp());
        assert!((s.attitude.roll - expected).abs() < 1e-9);
    }

    #[test]
    fn floor_stops_descent() {
        let p = no_drag();
        let mut s = DroneState::at_rest(Vec3::new(1.0, 1.0, 0.01));
        for _ in 0..200 {
            s = step_drone(&s, &RotorCommand::default(), &p, 1e-3);
        }
        assert_eq!(s.position.z, 0.0);
        assert_eq!(s.velocity, Vec3::zeros());
    }
}
