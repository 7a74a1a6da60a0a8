use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::control::{Clearance, FlightPhase};
use crate::event::EventFrame;
use crate::intent::{Decision, ManeuverKind, ParseError};
use crate::runner::{CommandRejection, Outcome};
use crate::snn::RingTrack;
use crate::world::{Attitude, StateSnapshot};
use crate::Vec3;

/// Bumped on any incompatible change to the message shapes below.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Commander,
    Observer,
}

/// Everything a client may send.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Hello { role: Role },
    Command { text: String },
    Bye,
}

/// One server-to-client record. `seq` starts at 0 and increases by one per
/// message within a connection; `time` is simulation time in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelemetryMessage {
    pub seq: u64,
    pub time: f64,
    pub body: Body,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Body {
    /// Reply to `hello`. `role` is what was granted, which is `observer`
    /// when another connection already holds the command session.
    Welcome {
        schema_version: u32,
        session: u64,
        role: Role,
        episode: u64,
        seed: u64,
        state_hz: f64,
        frame_hz: f64,
    },
    SessionBusy { detail: String },
    RunStarted { episode: u64, seed: u64 },
    State(StateBody),
    EventFrame(FrameBody),
    PhaseChange { from: FlightPhase, to: FlightPhase },
    GoNoGo { decision: Decision, reason: String },
    Response { text: String },
    CommandAck { text: String, maneuver: ManeuverKind },
    CommandError {
        kind: CommandErrorKind,
        detail: String,
        /// Command words the grammar did not accept.
        unmatched: Vec<String>,
    },
    RunComplete {
        episode: u64,
        outcome: Outcome,
        response_text: Option<String>,
        /// J.
        energy: f64,
        /// SHA-256 of each log file, keyed by file name.
        digests: BTreeMap<String, String>,
    },
}

impl Body {
    /// Periodic samples that may be dropped under back-pressure.
    pub fn is_sample(&self) -> bool {
        matches!(self, Body::State(_) | Body::EventFrame(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandErrorKind {
    /// Not a valid client message.
    Malformed,
    /// The text failed the command grammar.
    Parse,
    /// The connection does not hold the command session.
    ReadOnly,
    /// A command is already pending or decided for this run.
    Busy,
    /// The run has ended.
    Finished,
}

impl CommandErrorKind {
    pub fn body(self, detail: impl Into<String>, unmatched: Vec<String>) -> Body {
        Body::CommandError {
            kind: self,
            detail: detail.into(),
            unmatched,
        }
    }
}

impl From<&CommandRejection> for Body {
    fn from(r: &CommandRejection) -> Self {
        match r {
            CommandRejection::Parse(e) => parse_error_body(e),
            CommandRejection::Busy => CommandErrorKind::Busy.body(r.to_string(), vec![]),
            CommandRejection::Finished => CommandErrorKind::Finished.body(r.to_string(), vec![]),
        }
    }
}

fn parse_error_body(e: &ParseError) -> Body {
    CommandErrorKind::Parse.body(e.to_string(), e.unmatched().to_vec())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackBody {
    pub position: Vec3,
    pub velocity: Vec3,
    pub age: u32,
}

/// Decimated control-rate state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateBody {
    pub phase: FlightPhase,
    pub clearance: Clearance,
    pub drone_position: Vec3,
    pub drone_velocity: Vec3,
    pub attitude: Attitude,
    pub ring_center: Vec3,
    /// Pendulum swing, rad.
    pub ring_angle: f64,
    /// J.
    pub energy: f64,
    pub track: Option<TrackBody>,
}

impl StateBody {
    pub fn new(
        s: &StateSnapshot,
        phase: FlightPhase,
        clearance: Clearance,
        energy: f64,
        track: Option<&RingTrack>,
    ) -> Self {
        Self {
            phase,
            clearance,
            drone_position: s.drone_position,
            drone_velocity: s.drone_velocity,
            attitude: s.drone_attitude,
            ring_center: s.ring_center,
            ring_angle: s.ring_angle,
            energy,
            track: track.map(|t| TrackBody {
                position: t.world_position,
                velocity: t.world_velocity,
                age: t.age,
            }),
        }
    }
}

/// Signed event counts over the window ending at `end_us`, listing only
/// non-zero pixels as `[x, y, count]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameBody {
    pub end_us: u64,
    pub window_us: u64,
    pub width: usize,
    pub height: usize,
    pub cells: Vec<(u16, u16, i32)>,
}

impl FrameBody {
    pub fn new(frame: &EventFrame, end_us: u64, window_us: u64) -> Self {
        Self {
            end_us,
            window_us,
            width: frame.width,
            height: frame.height,
            cells: frame.nonzero(),
        }
    }

    pub fn to_frame(&self) -> EventFrame {
        let mut counts = vec![0; self.width * self.height];
        for &(x, y, c) in &self.cells {
            counts[y as usize * self.width + x as usize] = c;
        }
        EventFrame {
            width: self.width,
            height: self.height,
            counts,
        }
    }
}
