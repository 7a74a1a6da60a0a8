use serde::{Deserialize, Serialize};

use crate::geometry::{approach_axis, cable_axis};
use crate::{Vec3, GRAVITY};

/// Overhead cable the ring's pivot rides along. The cable runs parallel to
/// the world x axis at height `z`, inside the plane `y = y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cable {
    pub y: f64,
    pub z: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingState {
    pub cable: Cable,
    /// Pivot position along the cable (world x), m.
    pub pivot_position: f64,
    /// Signed drive velocity of the pivot, m/s.
    pub drive_velocity: f64,
    /// Drive velocity applied during the previous step; the difference is the
    /// pivot acceleration seen by the pendulum.
    pub prev_drive_velocity: f64,
    /// Swing angle in the cable plane, rad; positive swings the ring toward +x.
    pub pendulum_angle: f64,
    pub pendulum_rate: f64,
    /// Pivot to ring centre, m.
    pub suspension_length: f64,
    pub ring_radius: f64,
    pub tube_radius: f64,
    /// Viscous damping of the swing, 1/s.
    pub damping: f64,
}

impl RingState {
    pub fn pivot(&self) -> Vec3 {
        Vec3::new(self.pivot_position, self.cable.y, self.cable.z)
    }

    pub fn center(&self) -> Vec3 {
        let (s, c) = self.pendulum_angle.sin_cos();
        self.pivot() + Vec3::new(self.suspension_length * s, 0.0, -self.suspension_length * c)
    }

    pub fn center_velocity(&self) -> Vec3 {
        let (s, c) = self.pendulum_angle.sin_cos();
        let l = self.suspension_length;
        cable_axis() * self.drive_velocity
            + Vec3::new(l * c * self.pendulum_rate, 0.0, l * s * self.pendulum_rate)
    }

    /// Swinging in the cable plane never tilts the ring's symmetry axis.
    pub fn axis(&self) -> Vec3 {
        approach_axis()
    }

    /// Swing energy per unit mass in the pivot frame (zero at rest).
    pub fn pendulum_energy(&self) -> f64 {
        let l = self.suspension_length;
        0.5 * (l * self.pendulum_rate).powi(2) + GRAVITY * l * (1.0 - self.pendulum_angle.cos())
    }
}

/// Angular acceleration of the pendulum under a given pivot acceleration.
pub fn swing_acceleration(ring: &RingState, angle: f64, rate: f64, pivot_accel: f64) -> f64 {
    let l = ring.suspension_length;
    -(GRAVITY / l) * angle.sin() - ring.damping * rate - (pivot_accel / l) * angle.cos()
}

/// Advances the pivot by `drive_velocity * dt` and the swing by one RK4 step,
/// holding the pivot acceleration `(drive_velocity - prev_drive_velocity)/dt`
/// constant over the step.
pub fn ring_step(ring: &RingState, dt: f64) -> RingState {
    let pivot_accel = (ring.drive_velocity - ring.prev_drive_velocity) / dt;
    let f = |th: f64, w: f64| (w, swing_acceleration(ring, th, w, pivot_accel));

    let (th, w) = (ring.pendulum_angle, ring.pendulum_rate);
    let k1 = f(th, w);
    let k2 = f(th + 0.5 * dt * k1.0, w + 0.5 * dt * k1.1);
    let k3 = f(th + 0.5 * dt * k2.0, w + 0.5 * dt * k2.1);
    let k4 = f(th + dt * k3.0, w + dt * k3.1);

    let mut next = *ring;
    next.pendulum_angle = th + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
    next.pendulum_rate = w + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    next.pivot_position = ring.pivot_position + ring.drive_velocity * dt;
    next.prev_drive_velocity = ring.drive_velocity;
    next
}

/// Bang-bang drive on the cable: cruises at `speed`, and reverses with a
/// bounded acceleration so that the pivot stays within `[travel_min, travel_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CableDrive {
    pub speed: f64,
    pub travel_min: f64,
    pub travel_max: f64,
    /// m/s²; `f64::INFINITY` reverses in a single step.
    pub accel_limit: f64,
    /// +1 or -1.
    pub direction: f64,
}

impl CableDrive {
    /// Drive velocity for the next step given the current ring state.
    pub fn command(&mut self, ring: &RingState, dt: f64) -> f64 {
        let v = ring.drive_velocity;
        let stop_dist = if self.accel_limit.is_finite() {
            v * v / (2.0 * self.accel_limit)
        } else {
            0.0
        };
        if self.direction > 0.0 && ring.pivot_position + stop_dist >= self.travel_max {
            self.direction = -1.0;
        } else if self.direction < 0.0 && ring.pivot_position - stop_dist <= self.travel_min {
            self.direction = 1.0;
        }
        let target = self.direction * self.speed;
        let max_dv = self.accel_limit * dt;
        v + (target - v).clamp(-max_dv, max_dv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(l: f64, damping: f64) -> RingState {
        RingState {
            cable: Cable { y: 2.0, z: 1.8 },
            pivot_position: 2.5,
            drive_velocity: 0.0,
            prev_drive_velocity: 0.0,
            pendulum_angle: 0.0,
            pendulum_rate: 0.0,
            suspension_length: l,
            ring_radius: 0.35,
            tube_radius: 0.02,
            damping,
        }
    }

    #[test]
    fn constant_drive_without_sway_stays_vertical() {
        let mut r = ring(0.5, 0.1);
        r.drive_velocity = 0.3;
        r.prev_drive_velocity = 0.3;
        let c0 = r.center();
        for _ in 0..1000 {
            r = ring_step(&r, 1e-3);
        }
        assert_eq!(r.pendulum_angle, 0.0);
        let moved = r.center() - c0;
        assert!((moved.x - 0.3).abs() < 1e-12);
        assert!(moved.y.abs() < 1e-15 && moved.z.abs() < 1e-15);
    }

    #[test]
    fn small_angle_period_matches_analytic() {
        let l = 0.5;
        let mut r = ring(l, 0.0);
        r.pendulum_angle = 0.05;
        let dt = 1e-3;
        // time between successive downward zero crossings, linearly interpolated
        let mut crossings = Vec::new();
        let mut t = 0.0;
        for _ in 0..10_000 {
            let prev = r.pendulum_angle;
            r = ring_step(&r, dt);
            t += dt;
            if prev > 0.0 && r.pendulum_angle <= 0.0 {
                let frac = prev / (prev - r.pendulum_angle);
                crossings.push(t - dt + frac * dt);
            }
        }
        let period = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
        let analytic = 2.0 * std::f64::consts::PI * (l / GRAVITY).sqrt();
        assert!((analytic - 1.4185).abs() < 1e-3);
        assert!(((period - analytic) / analytic).abs() < 0.02, "period {period}");
    }

    #[test]
    fn drive_reversal_excites_swing() {
        let mut r = ring(0.5, 0.1);
        r.drive_velocity = 0.2;
        r.prev_drive_velocity = 0.2;
        r = ring_step(&r, 1e-3);
        assert_eq!(r.pendulum_angle, 0.0);
        r.drive_velocity = -0.2;
        let n = ring_step(&r, 1e-3);
        assert!(n.pendulum_angle.abs() > 0.0);
        // pivot decelerating toward -x: the ring keeps moving +x relative to it
        assert!(n.pendulum_angle > 0.0);
        // direct evaluation of the ODE at the reversal
        let accel = swing_acceleration(&r, 0.0, 0.0, -0.4 / 1e-3);
        assert!((accel - 0.4 / 1e-3 / 0.5).abs() < 1e-9);
    }

    #[test]
    fn energy_non_increasing_without_drive() {
        let mut r = ring(0.5, 0.1);
        r.pendulum_angle = 0.4;
        let mut e = r.pendulum_energy();
        for _ in 0..5000 {
            r = ring_step(&r, 1e-3);
            let e2 = r.pendulum_energy();
            assert!(e2 <= e + 1e-15);
            e = e2;
        }
    }

    #[test]
    fn drive_reverses_within_travel() {
        let mut r = ring(0.5, 0.1);
        let mut drive = CableDrive {
            speed: 0.5,
            travel_min: 1.0,
            travel_max: 4.0,
            accel_limit: 0.3,
            direction: 1.0,
        };
        let dt = 1e-3;
        let mut lo = f64::MAX;
        let mut hi = f64::MIN;
        for _ in 0..60_000 {
            r.drive_velocity = drive.command(&r, dt);
            r = ring_step(&r, dt);
            lo = lo.min(r.pivot_position);
            hi = hi.max(r.pivot_position);
        }
        assert!(hi <= 4.0 + 1e-3 && lo >= 1.0 - 1e-3, "{lo} {hi}");
        assert!(hi > 3.9 && lo < 1.1);
    }
}
