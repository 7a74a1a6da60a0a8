//! Kinematic feasibility gate: the three-stage check on a straight
//! constant-acceleration profile, the in-flight abort monitor and the
//! labelled dataset generator.

mod dataset;
mod monitor;

pub use dataset::{generate_dataset, write_jsonl, DatasetConfig, DatasetSample, DatasetSplit};
pub use monitor::{FeasibilityMonitor, MonitorInput};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeasibilityError {
    #[error("time to collision must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("invalid query: {0}")]
    InvalidQuery(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityQuery {
    pub p_src: Vec3,
    pub p_dest: Vec3,
    /// Initial speed along the source-to-destination segment, m/s.
    pub v0: f64,
    pub v_max: f64,
    pub a_max: f64,
    /// Time available to complete the segment, s.
    pub t: f64,
}

impl FeasibilityQuery {
    pub fn validate(&self) -> Result<(), FeasibilityError> {
        if !(self.t > 0.0) {
            return Err(FeasibilityError::NonPositiveTime(self.t));
        }
        if !(self.v_max > 0.0 && self.a_max > 0.0) {
            return Err(FeasibilityError::InvalidQuery("v_max and a_max must be positive"));
        }
        if !(self.v0 >= 0.0) {
            return Err(FeasibilityError::InvalidQuery("v0 must be non-negative"));
        }
        if !(crate::geometry::is_finite(&self.p_src) && crate::geometry::is_finite(&self.p_dest) && self.t.is_finite()) {
            return Err(FeasibilityError::InvalidQuery("non-finite field"));
        }
        Ok(())
    }

    pub fn distance(&self) -> f64 {
        (self.p_dest - self.p_src).norm()
    }

    /// The same query against different limits.
    pub fn with_caps(&self, caps: &DroneCapabilities) -> Self {
        Self {
            v_max: caps.v_max,
            a_max: caps.a_max,
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DroneCapabilities {
    pub v_max: f64,
    pub a_max: f64,
    pub bounding_radius: f64,
}

impl Default for DroneCapabilities {
    fn default() -> Self {
        Self {
            v_max: 1.5,
            a_max: 2.0,
            bounding_radius: 0.15,
        }
    }
}

impl DroneCapabilities {
    pub fn validate(&self) -> Result<(), FeasibilityError> {
        if self.v_max > 0.0 && self.a_max > 0.0 && self.bounding_radius >= 0.0 {
            Ok(())
        } else {
            Err(FeasibilityError::InvalidQuery("capabilities must be positive"))
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            v_max: self.v_max * factor,
            a_max: self.a_max * factor,
            ..*self
        }
    }
}

/// How the acceleration stage compares `a` against `a_max`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccelCheck {
    /// `a > a_max`, so any required deceleration passes.
    #[default]
    Signed,
    /// `|a| > a_max`.
    Magnitude,
}

/// Which stage rejected a query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Feasible,
    Kinematic,
    Velocity,
    Time,
}

impl Verdict {
    pub fn is_feasible(self) -> bool {
        self == Verdict::Feasible
    }

    pub fn reason(self) -> &'static str {
        match self {
            Verdict::Feasible => "feasible",
            Verdict::Kinematic => "kinematic infeasibility: required acceleration exceeds a_max",
            Verdict::Velocity => "velocity infeasibility: final speed exceeds v_max",
            Verdict::Time => "time infeasibility: distance cannot be covered at v_max in the time available",
        }
    }
}

/// Runs the three stages in order and reports the first that fails.
pub fn evaluate(q: &FeasibilityQuery, mode: AccelCheck) -> Result<Verdict, FeasibilityError> {
    q.validate()?;
    let d = q.distance();
    let a = 2.0 * (d - q.v0 * q.t) / (q.t * q.t);
    let a_cmp = match mode {
        AccelCheck::Signed => a,
        AccelCheck::Magnitude => a.abs(),
    };
    if a_cmp > q.a_max {
        return Ok(Verdict::Kinematic);
    }
    let v_f = q.v0 + a * q.t;
    if v_f > q.v_max {
        return Ok(Verdict::Velocity);
    }
    if d > q.v_max * q.t {
        return Ok(Verdict::Time);
    }
    Ok(Verdict::Feasible)
}

pub fn feasibility_check(q: &FeasibilityQuery) -> Result<bool, FeasibilityError> {
    evaluate(q, AccelCheck::Signed).map(Verdict::is_feasible)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(src: [f64; 3], dest: [f64; 3], v0: f64, v_max: f64, a_max: f64, t: f64) -> FeasibilityQuery {
        FeasibilityQuery {
            p_src: Vec3::from(src),
            p_dest: Vec3::from(dest),
            v0,
            v_max,
            a_max,
            t,
        }
    }

    #[test]
    fn hand_evaluated_cases() {
        let null = q([1.0, 1.0, 1.0], [1.0, 1.0, 1.0], 0.0, 1.0, 1.0, 0.3);
        assert_eq!(evaluate(&null, AccelCheck::Signed), Ok(Verdict::Feasible));
        // d = 3, a = 1.5, v_f = 3 > 1
        let fast = q([0.0, 0.0, 1.0], [3.0, 0.0, 1.0], 0.0, 1.0, 2.0, 2.0);
        assert_eq!(evaluate(&fast, AccelCheck::Signed), Ok(Verdict::Velocity));
        // d = 1, a = 0, v_f = 0.5
        let easy = q([0.0, 0.0, 1.0], [1.0, 0.0, 1.0], 0.5, 1.5, 1.0, 2.0);
        assert_eq!(feasibility_check(&easy), Ok(true));
    }

    #[test]
    fn rejects_non_positive_time() {
        let bad = q([0.0; 3], [1.0, 0.0, 0.0], 0.0, 1.0, 1.0, 0.0);
        assert_eq!(feasibility_check(&bad), Err(FeasibilityError::NonPositiveTime(0.0)));
        let neg = FeasibilityQuery { t: -1.0, ..bad };
        assert!(feasibility_check(&neg).is_err());
    }

    #[test]
    fn signed_mode_lets_deceleration_through() {
        // v0 far above what d needs: a is strongly negative
        let coast = q([0.0; 3], [0.5, 0.0, 0.0], 1.4, 1.5, 0.5, 1.0);
        assert_eq!(evaluate(&coast, AccelCheck::Signed), Ok(Verdict::Feasible));
        assert_eq!(evaluate(&coast, AccelCheck::Magnitude), Ok(Verdict::Kinematic));
    }

    #[test]
    fn time_stage_is_reachable() {
        // a = -2 and v_f = 1 pass, but 2 m at 1.5 m/s needs more than 1 s
        let late = q([0.0; 3], [2.0, 0.0, 0.0], 3.0, 1.5, 2.0, 1.0);
        assert_eq!(evaluate(&late, AccelCheck::Signed), Ok(Verdict::Time));
    }

    proptest! {
        #[test]
        fn raising_limits_never_breaks_feasibility(
            src in prop::array::uniform3(-3.0..3.0f64),
            dest in prop::array::uniform3(-3.0..3.0f64),
            v0 in 0.0..2.0f64,
            v_max in 0.1..3.0f64,
            a_max in 0.1..3.0f64,
            t in 0.05..10.0f64,
            dv in 0.0..2.0f64,
            da in 0.0..2.0f64,
        ) {
            let base = q(src, dest, v0, v_max, a_max, t);
            let looser = FeasibilityQuery { v_max: v_max + dv, a_max: a_max + da, ..base };
            for mode in [AccelCheck::Signed, AccelCheck::Magnitude] {
                if evaluate(&base, mode).unwrap().is_feasible() {
                    prop_assert!(evaluate(&looser, mode).unwrap().is_feasible());
                }
            }
        }

        #[test]
        fn null_maneuver_always_feasible(p in prop::array::uniform3(-5.0..5.0f64), t in 1e-6..100.0f64, v_max in 0.01..5.0f64, a_max in 0.01..5.0f64) {
            prop_assert_eq!(feasibility_check(&q(p, p, 0.0, v_max, a_max, t)), Ok(true));
        }

        #[test]
        fn magnitude_mode_is_stricter(
            dest in prop::array::uniform3(-3.0..3.0f64),
            v0 in 0.0..2.0f64,
            t in 0.05..10.0f64,
        ) {
            let query = q([0.0; 3], dest, v0, 1.5, 2.0, t);
            if evaluate(&query, AccelCheck::Magnitude).unwrap().is_feasible() {
                prop_assert!(feasibility_check(&query).unwrap());
            }
        }
    }
}
