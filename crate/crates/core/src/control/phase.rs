use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlightPhase {
    FlatTrimAltHold,
    LocateTrackRing,
    ManeuverThroughRing,
    PrepareToLand,
    Land,
}

impl FlightPhase {
    pub const ORDER: [FlightPhase; 5] = [
        FlightPhase::FlatTrimAltHold,
        FlightPhase::LocateTrackRing,
        FlightPhase::ManeuverThroughRing,
        FlightPhase::PrepareToLand,
        FlightPhase::Land,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn next(self) -> Option<FlightPhase> {
        Self::ORDER.get(self.index() + 1).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            FlightPhase::FlatTrimAltHold => "flat_trim_alt_hold",
            FlightPhase::LocateTrackRing => "locate_track_ring",
            FlightPhase::ManeuverThroughRing => "maneuver_through_ring",
            FlightPhase::PrepareToLand => "prepare_to_land",
            FlightPhase::Land => "land",
        }
    }
}

/// Go/no-go as the phase machine sees it: no decision yet, cleared to
/// fly, or abort.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clearance {
    #[default]
    Pending,
    Go,
    NoGo,
}

/// Exit conditions evaluated on one control tick.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseInputs {
    /// Take-off finished and the settle timer expired.
    pub stabilized: bool,
    pub track_acquired: bool,
    /// Cleared and the start delay has elapsed.
    pub departed: bool,
    /// Final waypoint reached.
    pub plan_done: bool,
    /// Descent altitude reached.
    pub descended: bool,
    pub clearance: Clearance,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseChange {
    pub from: FlightPhase,
    pub to: FlightPhase,
    /// s.
    pub at: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseMachine {
    pub phase: FlightPhase,
    pub entered_at: f64,
    pub history: Vec<PhaseChange>,
}

impl Default for PhaseMachine {
    fn default() -> Self {
        Self {
            phase: FlightPhase::FlatTrimAltHold,
            entered_at: 0.0,
            history: Vec::new(),
        }
    }
}

impl PhaseMachine {
    /// Applies at most one transition. A no-go sends any phase before
    /// `PrepareToLand` straight there; `Land` never exits.
    pub fn step(&mut self, now: f64, inputs: &PhaseInputs) -> Option<PhaseChange> {
        use FlightPhase::*;
        let to = match self.phase {
            FlatTrimAltHold | LocateTrackRing | ManeuverThroughRing if inputs.clearance == Clearance::NoGo => PrepareToLand,
            FlatTrimAltHold if inputs.stabilized => LocateTrackRing,
            LocateTrackRing if inputs.track_acquired && inputs.clearance == Clearance::Go && inputs.departed => {
                ManeuverThroughRing
            }
            ManeuverThroughRing if inputs.plan_done => PrepareToLand,
            PrepareToLand if inputs.descended => Land,
            _ => return None,
        };
        let change = PhaseChange {
            from: self.phase,
            to,
            at: now,
        };
        self.phase = to;
        self.entered_at = now;
        self.history.push(change);
        Some(change)
    }

    /// Phases visited, starting with the initial one.
    pub fn sequence(&self) -> Vec<FlightPhase> {
        std::iter::once(FlightPhase::FlatTrimAltHold)
            .chain(self.history.iter().map(|c| c.to))
            .collect()
    }
}

pub fn phase_step(machine: &mut PhaseMachine, now: f64, inputs: &PhaseInputs) -> Option<PhaseChange> {
    machine.step(now, inputs)
}

/// A path through the flight chain: starts at the first phase, each step
/// advances by one, except that any phase before `PrepareToLand` may jump
/// there directly.
pub fn is_valid_sequence(seq: &[FlightPhase]) -> bool {
    if seq.first() != Some(&FlightPhase::FlatTrimAltHold) {
        return false;
    }
    seq.windows(2).all(|w| {
        w[0].next() == Some(w[1]) || (w[1] == FlightPhase::PrepareToLand && w[0] < FlightPhase::PrepareToLand)
    })
}
