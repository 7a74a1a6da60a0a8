use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Bound on the integral term's contribution to the output.
    pub integral_limit: f64,
    /// Symmetric output clamp.
    pub output_limit: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kp: 1.0,
            ki: 0.0,
            kd: 0.0,
            integral_limit: f64::INFINITY,
            output_limit: f64::INFINITY,
        }
    }
}

impl PidGains {
    pub fn p(kp: f64) -> Self {
        Self { kp, ..Self::default() }
    }
}

/// PID with derivative on measurement (no kick on setpoint steps) and a
/// clamped integral.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pid {
    pub gains: PidGains,
    /// Accumulated integral term, already multiplied by `ki`.
    pub integral: f64,
    prev_measurement: Option<f64>,
}

impl Pid {
    pub fn new(gains: PidGains) -> Self {
        Self {
            gains,
            integral: 0.0,
            prev_measurement: None,
        }
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev_measurement = None;
    }

    pub fn update(&mut self, setpoint: f64, measurement: f64, dt: f64) -> f64 {
        debug_assert!(dt > 0.0, "PID step must be positive");
        let g = &self.gains;
        let error = setpoint - measurement;
        self.integral = (self.integral + g.ki * error * dt).clamp(-g.integral_limit, g.integral_limit);
        let derivative = match self.prev_measurement {
            Some(prev) => -(measurement - prev) / dt,
            None => 0.0,
        };
        self.prev_measurement = Some(measurement);
        (g.kp * error + self.integral + g.kd * derivative).clamp(-g.output_limit, g.output_limit)
    }
}

pub fn pid_update(pid: &mut Pid, setpoint: f64, measurement: f64, dt: f64) -> f64 {
    pid.update(setpoint, measurement, dt)
}

/// Fixed-gain position/velocity observer over noisy position fixes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaBeta {
    pub alpha: f64,
    pub beta: f64,
    pub position: f64,
    pub velocity: f64,
    primed: bool,
}

impl AlphaBeta {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            beta,
            position: 0.0,
            velocity: 0.0,
            primed: false,
        }
    }

    pub fn update(&mut self, measurement: f64, dt: f64) -> (f64, f64) {
        if !self.primed {
            self.position = measurement;
            self.primed = true;
            return (self.position, self.velocity);
        }
        let predicted = self.position + self.velocity * dt;
        let residual = measurement - predicted;
        self.position = predicted + self.alpha * residual;
        self.velocity += self.beta / dt * residual;
        (self.position, self.velocity)
    }
}
