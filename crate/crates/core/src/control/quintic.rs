use serde::{Deserialize, Serialize};

use crate::Vec3;

/// Position, velocity and acceleration at one instant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RefState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
}

impl RefState {
    pub fn at_rest(position: Vec3) -> Self {
        Self {
            position,
            ..Self::default()
        }
    }
}

/// Quintic segment matching position, velocity and acceleration at both
/// ends. Outside `[t0, t0 + duration]` it holds the end state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quintic {
    pub t0: f64,
    pub duration: f64,
    coeffs: [Vec3; 6],
}

impl Quintic {
    pub fn new(t0: f64, duration: f64, from: &RefState, to: &RefState) -> Self {
        let t = duration.max(1e-6);
        let (p0, v0, a0) = (from.position, from.velocity, from.acceleration);
        let (p1, v1, a1) = (to.position, to.velocity, to.acceleration);
        let (t2, t3) = (t * t, t * t * t);
        let c3 = (20.0 * (p1 - p0) - (8.0 * v1 + 12.0 * v0) * t - (3.0 * a0 - a1) * t2) / (2.0 * t3);
        let c4 = (30.0 * (p0 - p1) + (14.0 * v1 + 16.0 * v0) * t + (3.0 * a0 - 2.0 * a1) * t2) / (2.0 * t3 * t);
        let c5 = (12.0 * (p1 - p0) - 6.0 * (v1 + v0) * t - (a0 - a1) * t2) / (2.0 * t3 * t2);
        Self {
            t0,
            duration: t,
            coeffs: [p0, v0, a0 * 0.5, c3, c4, c5],
        }
    }

    pub fn end_time(&self) -> f64 {
        self.t0 + self.duration
    }

    pub fn eval(&self, t: f64) -> RefState {
        let c = &self.coeffs;
        let s = (t - self.t0).clamp(0.0, self.duration);
        let position = c[0] + s * (c[1] + s * (c[2] + s * (c[3] + s * (c[4] + s * c[5]))));
        let velocity = c[1] + s * (2.0 * c[2] + s * (3.0 * c[3] + s * (4.0 * c[4] + s * 5.0 * c[5])));
        let acceleration = 2.0 * c[2] + s * (6.0 * c[3] + s * (12.0 * c[4] + s * 20.0 * c[5]));
        RefState {
            position,
            velocity,
            acceleration,
        }
    }

    /// Largest speed and acceleration magnitude over the segment, sampled.
    pub fn peaks(&self, samples: usize) -> (f64, f64) {
        (0..=samples).fold((0.0f64, 0.0f64), |(v, a), k| {
            let s = self.eval(self.t0 + self.duration * k as f64 / samples as f64);
            (v.max(s.velocity.norm()), a.max(s.acceleration.norm()))
        })
    }
}

/// Piecewise reference: consecutive quintics, then a hold at the final
/// position.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub segments: Vec<Quintic>,
    pub hold: Vec3,
}

impl Reference {
    pub fn hold_at(p: Vec3) -> Self {
        Self {
            segments: Vec::new(),
            hold: p,
        }
    }

    pub fn end_time(&self) -> f64 {
        self.segments.last().map_or(f64::NEG_INFINITY, Quintic::end_time)
    }

    pub fn eval(&self, t: f64) -> RefState {
        match self.segments.iter().find(|s| t <= s.end_time()) {
            Some(seg) => seg.eval(t),
            None => RefState::at_rest(self.hold),
        }
    }
}
