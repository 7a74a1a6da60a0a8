//! Operator language: command parsing into a maneuver, the fixed response
//! strings, and the go/no-go classifier interface.

mod classifier;
mod grammar;

pub use classifier::{
    classify_go_nogo, derive_query, serve_classifier, ClassifierRequest, ExternalClassifier, GrammarClassifier,
    IntentClassifier, QueryError,
};
pub use grammar::{parse_command, tokenize, CommandGrammar, ParseError, WordClass};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::left_axis;
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManeuverKind {
    AroundLeft,
    ThroughCenter,
    AroundRight,
}

impl ManeuverKind {
    pub const ALL: [ManeuverKind; 3] = [ManeuverKind::AroundLeft, ManeuverKind::ThroughCenter, ManeuverKind::AroundRight];

    /// The canonical operator command for this maneuver.
    pub fn command(self) -> &'static str {
        match self {
            ManeuverKind::AroundLeft => "Fly Left of Ring",
            ManeuverKind::ThroughCenter => "Fly through Center of Ring",
            ManeuverKind::AroundRight => "Fly Right of Ring",
        }
    }
}

pub const DEFAULT_LATERAL_MARGIN: f64 = 0.55;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("lateral margin {margin} m does not clear ring radius {ring_radius} m plus drone radius {drone_radius} m")]
pub struct MarginError {
    pub margin: f64,
    pub ring_radius: f64,
    pub drone_radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManeuverSpec {
    pub kind: ManeuverKind,
    /// Offset of the crossing point from the ring centre for the around
    /// maneuvers, m.
    pub lateral_margin: f64,
}

impl ManeuverSpec {
    pub fn new(kind: ManeuverKind) -> Self {
        Self {
            kind,
            lateral_margin: DEFAULT_LATERAL_MARGIN,
        }
    }

    pub fn with_margin(kind: ManeuverKind, margin: f64, ring_radius: f64, drone_radius: f64) -> Result<Self, MarginError> {
        if kind != ManeuverKind::ThroughCenter && !(margin > ring_radius + drone_radius) {
            return Err(MarginError {
                margin,
                ring_radius,
                drone_radius,
            });
        }
        Ok(Self {
            kind,
            lateral_margin: margin,
        })
    }

    /// Crossing point relative to the ring centre.
    pub fn lateral_offset(&self) -> Vec3 {
        match self.kind {
            ManeuverKind::AroundLeft => left_axis() * self.lateral_margin,
            ManeuverKind::ThroughCenter => Vec3::zeros(),
            ManeuverKind::AroundRight => -left_axis() * self.lateral_margin,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseOutcome {
    Success,
    Reject,
}

pub const RESPONSE_LEFT: &str = "Successfully navigated around the ring from the left.";
pub const RESPONSE_CENTER: &str = "Successfully passed through the center of the ring.";
pub const RESPONSE_RIGHT: &str = "Successfully navigated around the ring from the right.";
pub const RESPONSE_REJECT: &str = "Exiting. Preparing to land.";

pub fn render_response(kind: ManeuverKind, outcome: ResponseOutcome) -> &'static str {
    match (outcome, kind) {
        (ResponseOutcome::Reject, _) => RESPONSE_REJECT,
        (ResponseOutcome::Success, ManeuverKind::AroundLeft) => RESPONSE_LEFT,
        (ResponseOutcome::Success, ManeuverKind::ThroughCenter) => RESPONSE_CENTER,
        (ResponseOutcome::Success, ManeuverKind::AroundRight) => RESPONSE_RIGHT,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Go,
    NoGo,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoNoGo {
    pub decision: Decision,
    pub reason: String,
}

impl GoNoGo {
    pub fn go(reason: impl Into<String>) -> Self {
        Self {
            decision: Decision::Go,
            reason: reason.into(),
        }
    }

    pub fn no_go(reason: impl Into<String>) -> Self {
        Self {
            decision: Decision::NoGo,
            reason: reason.into(),
        }
    }

    pub fn is_go(&self) -> bool {
        self.decision == Decision::Go
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margins_must_clear_the_ring() {
        assert!(ManeuverSpec::with_margin(ManeuverKind::AroundLeft, 0.5, 0.35, 0.15).is_err());
        assert!(ManeuverSpec::with_margin(ManeuverKind::AroundRight, 0.55, 0.35, 0.15).is_ok());
        assert!(ManeuverSpec::with_margin(ManeuverKind::ThroughCenter, 0.0, 0.35, 0.15).is_ok());
    }

    #[test]
    fn offsets_follow_the_flight_direction() {
        let l = ManeuverSpec::new(ManeuverKind::AroundLeft).lateral_offset();
        assert!((l - Vec3::new(-0.55, 0.0, 0.0)).norm() < 1e-12);
        let r = ManeuverSpec::new(ManeuverKind::AroundRight).lateral_offset();
        assert!((r - Vec3::new(0.55, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn responses_and_commands() {
        assert_eq!(
            render_response(ManeuverKind::ThroughCenter, ResponseOutcome::Success),
            "Successfully passed through the center of the ring."
        );
        for kind in ManeuverKind::ALL {
            assert_eq!(render_response(kind, ResponseOutcome::Reject), "Exiting. Preparing to land.");
            assert_eq!(parse_command(kind.command()).unwrap().kind, kind);
        }
    }
}
