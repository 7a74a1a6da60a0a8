use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{CascadeGains, PlannerParams};
use crate::event::SensorParams;
use crate::feasibility::{AccelCheck, DroneCapabilities};
use crate::snn::{CameraMount, SnnParams, TrackParams};
use crate::world::{DroneParams, MocapParams, RenderSettings, RoomBounds};
use crate::Vec3;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse scenario config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Cable, pendulum and drive. The ring starts hanging still under its pivot
/// and already cruising at `drive_speed`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RingConfig {
    pub cable_y: f64,
    pub cable_z: f64,
    pub suspension_length: f64,
    pub ring_radius: f64,
    pub tube_radius: f64,
    /// 1/s.
    pub damping: f64,
    /// Pivot x at t = 0, m.
    pub start_x: f64,
    /// m/s.
    pub drive_speed: f64,
    /// +1 or -1.
    pub direction: f64,
    pub travel_min: f64,
    pub travel_max: f64,
    /// m/s².
    pub drive_accel_limit: f64,
    /// Swing angle at t = 0, rad.
    pub initial_angle: f64,
}

impl Default for RingConfig {
    fn default() -> Self {
        Self {
            cable_y: 2.0,
            cable_z: 1.8,
            suspension_length: 0.5,
            ring_radius: 0.35,
            tube_radius: 0.02,
            damping: 0.1,
            start_x: 1.85,
            drive_speed: 0.2,
            direction: 1.0,
            travel_min: 0.3,
            travel_max: 4.7,
            drive_accel_limit: 0.5,
            initial_angle: 0.0,
        }
    }
}

/// Tripod event camera. Resolution comes from the sensor parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraConfig {
    pub position: Vec3,
    pub target: Vec3,
    pub focal_px: f64,
    pub mount: CameraMount,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            position: Vec3::new(2.5, 3.9, 1.3),
            target: Vec3::new(2.5, 0.0, 1.3),
            focal_px: 110.0,
            mount: CameraMount::Tripod,
        }
    }
}

/// Take-off, hover and landing profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlightConfig {
    /// Drone position on the floor at t = 0.
    pub start: Vec3,
    pub cruise_altitude: f64,
    pub takeoff_duration: f64,
    /// Hover time after take-off before tracking starts, s.
    pub settle_time: f64,
    pub descent_altitude: f64,
    /// Vertical speed used to size the descent and landing legs, m/s.
    pub descent_speed: f64,
    /// Rotors cut below this altitude on landing, m.
    pub disarm_altitude: f64,
    /// Hover at the exit point before the maneuver counts as done, s.
    pub exit_settle: f64,
    /// Keep-out margin from the walls for braking stops, m.
    pub wall_margin: f64,
    /// Level retreat out of the ring's path before an abort descends, s.
    pub retreat_duration: f64,
    /// Hard stop for the run, s.
    pub max_duration: f64,
}

impl Default for FlightConfig {
    fn default() -> Self {
        Self {
            start: Vec3::new(3.15, 0.6, 0.0),
            cruise_altitude: 1.3,
            takeoff_duration: 2.0,
            settle_time: 0.5,
            descent_altitude: 0.3,
            descent_speed: 0.4,
            disarm_altitude: 0.05,
            exit_settle: 0.3,
            wall_margin: 0.3,
            retreat_duration: 1.2,
            max_duration: 40.0,
        }
    }
}

/// Physics and control rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingConfig {
    pub physics_hz: u32,
    pub control_hz: u32,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            physics_hz: 1000,
            control_hz: 100,
        }
    }
}

impl TimingConfig {
    pub fn physics_dt(&self) -> f64 {
        1.0 / self.physics_hz as f64
    }

    pub fn control_dt(&self) -> f64 {
        1.0 / self.control_hz as f64
    }

    pub fn substeps(&self) -> u32 {
        self.physics_hz / self.control_hz
    }
}

/// An operator command issued at a fixed simulation time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptedCommand {
    /// s.
    pub at: f64,
    pub text: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchKind {
    /// The ring reaches the drone's line late enough for a feasible plan.
    #[default]
    Feasible,
    /// The command arrives too late to make the crossing.
    Infeasible,
}

/// How `run_batch` randomises each run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchConfig {
    /// Drive speed range, m/s.
    pub speed_range: (f64, f64),
    /// Time from the command until the ring would reach the drone's line,
    /// for feasible runs, s.
    pub lead_range: (f64, f64),
    /// The same for infeasible runs, s.
    pub infeasible_lead_range: (f64, f64),
    pub command_time: f64,
    pub kind: BatchKind,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self {
            speed_range: (0.05, 0.5),
            lead_range: (3.0, 4.5),
            infeasible_lead_range: (0.3, 0.6),
            command_time: 3.0,
            kind: BatchKind::Feasible,
        }
    }
}

/// Everything a run needs. All sections and fields are optional in the
/// TOML file; missing values take the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Used when no seed is given on the command line.
    pub seed: u64,
    pub room: RoomBounds,
    pub ring: RingConfig,
    pub drone: DroneParams,
    pub camera: CameraConfig,
    pub render: RenderSettings,
    pub sensor: SensorParams,
    /// Background noise events per second over the whole sensor.
    pub noise_rate_hz: f64,
    pub snn: SnnParams,
    pub tracking: TrackParams,
    pub capabilities: DroneCapabilities,
    pub accel_check: AccelCheck,
    /// Reports older than this abort the flight, ms.
    pub monitor_stale_ms: u64,
    pub planner: PlannerParams,
    pub gains: CascadeGains,
    /// Rotor power drawn at any thrust, W.
    pub baseline_power: f64,
    pub mocap: MocapParams,
    pub flight: FlightConfig,
    pub timing: TimingConfig,
    pub commands: Vec<ScriptedCommand>,
    /// Forces a no-go at this time, s.
    pub inject_nogo_at: Option<f64>,
    pub batch: BatchConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            room: RoomBounds::default(),
            ring: RingConfig::default(),
            drone: DroneParams::default(),
            camera: CameraConfig::default(),
            render: RenderSettings::default(),
            sensor: SensorParams::default(),
            noise_rate_hz: 0.0,
            snn: SnnParams::default(),
            tracking: TrackParams::default(),
            capabilities: DroneCapabilities::default(),
            accel_check: AccelCheck::Signed,
            monitor_stale_ms: 300,
            planner: PlannerParams::default(),
            gains: CascadeGains::default(),
            baseline_power: 40.0,
            mocap: MocapParams::default(),
            flight: FlightConfig::default(),
            timing: TimingConfig::default(),
            commands: vec![ScriptedCommand {
                at: 3.0,
                text: "Fly through Center of Ring".into(),
            }],
            inject_nogo_at: None,
            batch: BatchConfig::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive, got {v}")))
    }
}

fn ordered(name: &str, (lo, hi): (f64, f64)) -> Result<(), ConfigError> {
    if lo.is_finite() && hi.is_finite() && lo <= hi {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be an ordered pair, got ({lo}, {hi})")))
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        RoomBounds::new(self.room.min, self.room.max).map_err(|e| invalid(e.to_string()))?;
        let r = &self.ring;
        for (name, v) in [
            ("ring.suspension_length", r.suspension_length),
            ("ring.ring_radius", r.ring_radius),
            ("ring.tube_radius", r.tube_radius),
            ("ring.drive_accel_limit", r.drive_accel_limit),
        ] {
            positive(name, v)?;
        }
        if r.tube_radius >= r.ring_radius {
            return Err(invalid("ring tube must be thinner than the ring radius"));
        }
        for (name, v) in [("ring.damping", r.damping), ("ring.drive_speed", r.drive_speed)] {
            if !(v >= 0.0) {
                return Err(invalid(format!("{name} must be non-negative")));
            }
        }
        if r.direction.abs() != 1.0 {
            return Err(invalid("ring.direction must be +1 or -1"));
        }
        if !(r.travel_min < r.travel_max && (r.travel_min..=r.travel_max).contains(&r.start_x)) {
            return Err(invalid("ring.start_x must lie within the cable travel"));
        }
        let lowest = Vec3::new(r.start_x, r.cable_y, r.cable_z - r.suspension_length - r.ring_radius);
        let highest = Vec3::new(r.start_x, r.cable_y, r.cable_z);
        if !self.room.contains(&lowest) || !self.room.contains(&highest) {
            return Err(invalid("ring and cable must hang inside the room"));
        }
        self.sensor.validate().map_err(|e| invalid(e.to_string()))?;
        self.snn.validate().map_err(|e| invalid(e.to_string()))?;
        self.capabilities.validate().map_err(|e| invalid(e.to_string()))?;
        positive("camera.focal_px", self.camera.focal_px)?;
        if (self.camera.target - self.camera.position).norm() == 0.0 {
            return Err(invalid("camera target coincides with its position"));
        }
        if !(self.noise_rate_hz >= 0.0 && self.noise_rate_hz.is_finite()) {
            return Err(invalid("noise_rate_hz must be non-negative"));
        }
        let t = &self.tracking;
        if !(t.alpha > 0.0 && t.alpha <= 1.0) {
            return Err(invalid("tracking.alpha must be in (0, 1]"));
        }
        if t.detect_period_us == 0 || t.detect_period_us >= t.stale_us {
            return Err(invalid("tracking.detect_period_us must be positive and below stale_us"));
        }
        positive("tracking.horizon", t.horizon)?;
        if self.monitor_stale_ms == 0 {
            return Err(invalid("monitor_stale_ms must be positive"));
        }
        let p = &self.planner;
        for (name, v) in [
            ("planner.approach_distance", p.approach_distance),
            ("planner.exit_distance", p.exit_distance),
            ("planner.crossing_speed", p.crossing_speed),
            ("planner.search_step", p.search_step),
            ("planner.horizon", p.horizon),
        ] {
            positive(name, v)?;
        }
        if !(p.feasibility_margin > 0.0 && p.feasibility_margin <= 1.0) {
            return Err(invalid("planner.feasibility_margin must be in (0, 1]"));
        }
        if !(p.monitor_margin > 0.0 && p.monitor_margin <= 1.0) {
            return Err(invalid("planner.monitor_margin must be in (0, 1]"));
        }
        if !(p.min_lead >= 0.0 && p.max_start_delay >= 0.0 && p.commit_lead >= 0.0) {
            return Err(invalid("planner lead times and start delay must be non-negative"));
        }
        if !(self.baseline_power >= 0.0) {
            return Err(invalid("baseline_power must be non-negative"));
        }
        positive("drone.mass", self.drone.mass)?;
        positive("drone.max_thrust", self.drone.max_thrust)?;
        if self.drone.max_thrust <= self.drone.mass * crate::GRAVITY {
            return Err(invalid("drone cannot hover: max_thrust below its weight"));
        }
        let f = &self.flight;
        if !self.room.contains(&f.start) {
            return Err(invalid("flight.start must lie inside the room"));
        }
        for (name, v) in [
            ("flight.cruise_altitude", f.cruise_altitude),
            ("flight.takeoff_duration", f.takeoff_duration),
            ("flight.descent_altitude", f.descent_altitude),
            ("flight.descent_speed", f.descent_speed),
            ("flight.disarm_altitude", f.disarm_altitude),
            ("flight.retreat_duration", f.retreat_duration),
            ("flight.max_duration", f.max_duration),
        ] {
            positive(name, v)?;
        }
        if f.cruise_altitude >= self.room.max.z || f.descent_altitude >= f.cruise_altitude {
            return Err(invalid("need disarm < descent < cruise altitude < ceiling"));
        }
        if f.disarm_altitude >= f.descent_altitude {
            return Err(invalid("need disarm < descent < cruise altitude < ceiling"));
        }
        let tm = &self.timing;
        if tm.physics_hz == 0 || tm.control_hz == 0 || !tm.physics_hz.is_multiple_of(tm.control_hz) {
            return Err(invalid("timing.physics_hz must be a positive multiple of control_hz"));
        }
        if 1_000_000 % tm.physics_hz != 0 {
            return Err(invalid("timing.physics_hz must divide one second into whole microseconds"));
        }
        if self.commands.iter().any(|c| !(c.at >= 0.0 && c.at.is_finite())) {
            return Err(invalid("command times must be non-negative"));
        }
        if self.inject_nogo_at.is_some_and(|t| !(t >= 0.0)) {
            return Err(invalid("inject_nogo_at must be non-negative"));
        }
        let b = &self.batch;
        ordered("batch.speed_range", b.speed_range)?;
        ordered("batch.lead_range", b.lead_range)?;
        ordered("batch.infeasible_lead_range", b.infeasible_lead_range)?;
        if b.speed_range.0 < 0.0 || b.lead_range.0 <= 0.0 || b.infeasible_lead_range.0 <= 0.0 {
            return Err(invalid("batch ranges must be positive"));
        }
        Ok(())
    }
}
