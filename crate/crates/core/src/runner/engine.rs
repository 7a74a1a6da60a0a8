use std::collections::{BTreeMap, VecDeque};
use std::io;
use std::path::Path;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ConfigError, ScenarioConfig};
use super::logs::RunLogs;
use crate::control::{
    draw_start_delay, plan_maneuver, predict_intercept, ActuationSample, CascadeController, Clearance, EnergyMeter,
    FlightPhase, InterceptPrediction, PhaseChange, PhaseInputs, PhaseMachine, PlanError, Quintic, RefState, Reference,
    WaypointPlan,
};
use crate::event::{merge_sorted, Event, EventFrame, NoiseGenerator, ReferenceField};
use crate::feasibility::{FeasibilityMonitor, MonitorInput};
use crate::geometry::{approach_axis, cable_axis, Plane};
use crate::intent::{
    render_response, ClassifierRequest, CommandGrammar, Decision, GoNoGo, GrammarClassifier, IntentClassifier,
    ManeuverKind, ManeuverSpec, ParseError, ResponseOutcome, RESPONSE_REJECT,
};
use crate::par::Exec;
use crate::snn::{make_esr, EgoState, EnvironmentStateReport, RingDetection, RingTrack, RingTracker};
use crate::world::{
    check_collision, Cable, CableDrive, CameraModel, CollisionReport, DroneState, Mocap, Pose, RingState, RotorCommand,
    SceneRenderer, StateSnapshot, World,
};
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Reject,
    Collision,
    Timeout,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [Outcome::Success, Outcome::Reject, Outcome::Collision, Outcome::Timeout];

    pub fn name(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Reject => "reject",
            Outcome::Collision => "collision",
            Outcome::Timeout => "timeout",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoNoGoRecord {
    /// s.
    pub time: f64,
    pub decision: Decision,
    pub reason: String,
}

/// The drone's first pass through the cable plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingRecord {
    pub time: f64,
    pub drone_position: Vec3,
    pub ring_center: Vec3,
    /// When the true ring centre reached the frozen crossing point, s.
    pub ring_arrival: Option<f64>,
}

impl CrossingRecord {
    /// Drone crossing time minus ring arrival time, s.
    pub fn sync_error(&self) -> Option<f64> {
        self.ring_arrival.map(|t| self.time - t)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub seed: u64,
    pub outcome: Outcome,
    pub response_text: Option<String>,
    pub command: Option<String>,
    pub maneuver: Option<ManeuverKind>,
    /// J.
    pub energy: f64,
    /// Simulated time at the end of the run, s.
    pub duration: f64,
    pub phase_timeline: Vec<PhaseChange>,
    pub go_nogo: Vec<GoNoGoRecord>,
    pub start_delay: Option<f64>,
    /// From the first no-go to entering `PrepareToLand`, s.
    pub abort_latency: Option<f64>,
    pub crossing: Option<CrossingRecord>,
    /// Smallest gap between the drone's bounding sphere and the ring, m.
    pub min_clearance: f64,
    pub collision: Option<CollisionReport>,
    pub event_count: u64,
    pub detection_count: usize,
    pub diagnostics: Vec<String>,
    /// SHA-256 of each log file.
    pub digests: BTreeMap<String, String>,
    pub trajectory_path: Option<String>,
}

impl ScenarioResult {
    pub fn phase_sequence(&self) -> Vec<FlightPhase> {
        std::iter::once(FlightPhase::FlatTrimAltHold)
            .chain(self.phase_timeline.iter().map(|c| c.to))
            .collect()
    }

    pub fn entered(&self, phase: FlightPhase) -> bool {
        self.phase_timeline.iter().any(|c| c.to == phase)
    }
}

/// Something observable happened during a control tick.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SimEvent {
    Phase(PhaseChange),
    GoNoGo { time: f64, decision: GoNoGo },
    Response { time: f64, text: String },
    Finished { time: f64, outcome: Outcome },
}

/// Why an interactive command was refused before reaching the classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, thiserror::Error)]
pub enum CommandRejection {
    #[error("{0}")]
    Parse(ParseError),
    #[error("a maneuver has already been commanded")]
    Busy,
    #[error("the run has finished")]
    Finished,
}

/// Inputs the planner saw on one tick. Everything here comes from the
/// environment report, the command or the reference trajectory.
#[derive(Serialize)]
struct PlannerAudit<'a> {
    time: f64,
    stage: &'static str,
    command: &'a str,
    maneuver: ManeuverKind,
    esr: &'a EnvironmentStateReport,
    reference: &'a RefState,
    start_delay: f64,
    depart_time: f64,
    intercept: Option<&'a InterceptPrediction>,
    plan: Option<&'a WaypointPlan>,
}

#[derive(Clone, Debug)]
struct Maneuver {
    text: String,
    spec: ManeuverSpec,
    start_delay: f64,
    depart_time: f64,
    intercept: Option<InterceptPrediction>,
    plan: Option<WaypointPlan>,
    committed: bool,
}

/// Recent events kept for the live event-frame view, µs.
pub const FRAME_WINDOW_US: u64 = 100_000;

/// One scenario: world, sensing, decision making and flight control,
/// advanced one control tick at a time.
pub struct Simulation {
    cfg: ScenarioConfig,
    seed: u64,
    world: World,
    renderer: SceneRenderer,
    refs: ReferenceField,
    noise: NoiseGenerator,
    tracker: RingTracker,
    mocap: Mocap,
    controller: CascadeController,
    energy: EnergyMeter,
    machine: PhaseMachine,
    monitor: FeasibilityMonitor,
    classifier: Arc<dyn IntentClassifier>,
    grammar: CommandGrammar,
    rng: ChaCha8Rng,
    reference: Reference,
    pose: Pose,
    step: u64,
    dt_us: u64,
    script: VecDeque<(f64, String)>,
    pending: VecDeque<String>,
    clearance: Clearance,
    maneuver: Option<Maneuver>,
    esr: Option<EnvironmentStateReport>,
    nogo_at: Option<f64>,
    go_nogo: Vec<GoNoGoRecord>,
    response: Option<String>,
    verified: bool,
    crossing: Option<CrossingRecord>,
    ring_arrival: Option<f64>,
    collision: Option<CollisionReport>,
    min_clearance: f64,
    diagnostics: Vec<String>,
    logs: RunLogs,
    recent: VecDeque<Event>,
    finished: Option<Outcome>,
}

fn to_us(t: f64) -> u64 {
    (t * 1e6).round().max(0.0) as u64
}

fn camera_model(cfg: &ScenarioConfig) -> CameraModel {
    CameraModel::look_at(
        cfg.camera.position,
        cfg.camera.target,
        cfg.camera.focal_px,
        cfg.sensor.width,
        cfg.sensor.height,
    )
}

impl Simulation {
    pub fn new(cfg: &ScenarioConfig, seed: u64) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let invalid = |e: String| ConfigError::Invalid(e);
        let r = &cfg.ring;
        let ring = RingState {
            cable: Cable {
                y: r.cable_y,
                z: r.cable_z,
            },
            pivot_position: r.start_x,
            drive_velocity: r.direction * r.drive_speed,
            prev_drive_velocity: r.direction * r.drive_speed,
            pendulum_angle: r.initial_angle,
            pendulum_rate: 0.0,
            suspension_length: r.suspension_length,
            ring_radius: r.ring_radius,
            tube_radius: r.tube_radius,
            damping: r.damping,
        };
        let world = World {
            time: 0.0,
            bounds: cfg.room,
            drone: DroneState::at_rest(cfg.flight.start),
            drone_params: cfg.drone,
            ring,
            drive: CableDrive {
                speed: r.drive_speed,
                travel_min: r.travel_min,
                travel_max: r.travel_max,
                accel_limit: r.drive_accel_limit,
                direction: r.direction,
            },
        };
        let camera = camera_model(cfg);
        if !camera.is_valid() {
            return Err(invalid("camera pose is degenerate".into()));
        }
        let renderer = SceneRenderer::new(camera, cfg.render, &world.ring);
        let refs = ReferenceField::from_frame(renderer.image(), &cfg.sensor).map_err(|e| invalid(e.to_string()))?;
        let motion_plane = Plane::new(Vec3::new(0.0, r.cable_y, 0.0), approach_axis());
        let mut tracker = RingTracker::new(camera, motion_plane, &cfg.sensor, cfg.snn, cfg.tracking, 0)
            .map_err(|e| invalid(e.to_string()))?;
        tracker.mount = cfg.camera.mount;

        let mut seeder = ChaCha8Rng::seed_from_u64(seed);
        let (noise_seed, mocap_seed, plan_seed) = (seeder.next_u64(), seeder.next_u64(), seeder.next_u64());

        let f = &cfg.flight;
        let start = RefState::at_rest(f.start);
        let hover = RefState::at_rest(Vec3::new(f.start.x, f.start.y, f.cruise_altitude));
        let mut script: Vec<(f64, String)> = cfg.commands.iter().map(|c| (c.at, c.text.clone())).collect();
        script.sort_by(|a, b| a.0.total_cmp(&b.0));
        let pose = Pose {
            position: f.start,
            attitude: Default::default(),
        };
        Ok(Self {
            seed,
            world,
            renderer,
            refs,
            noise: NoiseGenerator::new(cfg.noise_rate_hz, noise_seed),
            tracker,
            mocap: Mocap::new(cfg.mocap, mocap_seed),
            controller: CascadeController::new(cfg.gains, cfg.drone.mass),
            energy: EnergyMeter::new(cfg.baseline_power),
            machine: PhaseMachine::default(),
            monitor: FeasibilityMonitor::new(cfg.capabilities, cfg.accel_check, cfg.monitor_stale_ms * 1000),
            classifier: Arc::new(GrammarClassifier {
                grammar: CommandGrammar::default(),
                mode: cfg.accel_check,
            }),
            grammar: CommandGrammar::default(),
            rng: ChaCha8Rng::seed_from_u64(plan_seed),
            reference: Reference {
                segments: vec![Quintic::new(0.0, f.takeoff_duration, &start, &hover)],
                hold: hover.position,
            },
            pose,
            step: 0,
            dt_us: 1_000_000 / cfg.timing.physics_hz as u64,
            script: script.into(),
            pending: VecDeque::new(),
            clearance: Clearance::Pending,
            maneuver: None,
            esr: None,
            nogo_at: None,
            go_nogo: Vec::new(),
            response: None,
            verified: false,
            crossing: None,
            ring_arrival: None,
            collision: None,
            min_clearance: f64::INFINITY,
            diagnostics: Vec::new(),
            logs: RunLogs::default(),
            recent: VecDeque::new(),
            finished: None,
            cfg: cfg.clone(),
        })
    }

    /// Replaces the default grammar-plus-feasibility classifier.
    pub fn with_classifier(mut self, classifier: Arc<dyn IntentClassifier>) -> Self {
        self.classifier = classifier;
        self
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn time(&self) -> f64 {
        self.time_us() as f64 * 1e-6
    }

    fn time_us(&self) -> u64 {
        self.step * self.dt_us
    }

    pub fn phase(&self) -> FlightPhase {
        self.machine.phase
    }

    pub fn clearance(&self) -> Clearance {
        self.clearance
    }

    pub fn is_finished(&self) -> bool {
        self.finished.is_some()
    }

    pub fn snapshot(&self) -> StateSnapshot {
        self.world.snapshot()
    }

    pub fn esr(&self) -> Option<&EnvironmentStateReport> {
        self.esr.as_ref()
    }

    pub fn track(&self) -> Option<&RingTrack> {
        self.tracker.track(self.time_us())
    }

    pub fn energy(&self) -> f64 {
        self.energy.joules
    }

    pub fn response(&self) -> Option<&str> {
        self.response.as_deref()
    }

    pub fn logs(&self) -> &RunLogs {
        &self.logs
    }

    /// Signed event counts over the last [`FRAME_WINDOW_US`].
    pub fn event_frame(&self) -> EventFrame {
        let events: Vec<Event> = self.recent.iter().copied().collect();
        EventFrame::accumulate(&events, self.time_us(), FRAME_WINDOW_US, &self.cfg.sensor)
    }

    /// Queues an operator command for the next tick after checking it
    /// parses. Rejected commands leave the simulation untouched.
    pub fn submit_command(&mut self, text: &str) -> Result<ManeuverSpec, CommandRejection> {
        if self.finished.is_some() {
            return Err(CommandRejection::Finished);
        }
        let spec = self.grammar.parse(text).map_err(CommandRejection::Parse)?;
        if self.clearance != Clearance::Pending || !self.pending.is_empty() || !self.script.is_empty() {
            return Err(CommandRejection::Busy);
        }
        self.pending.push_back(text.to_string());
        Ok(spec)
    }

    fn decide(&mut self, now: f64, decision: GoNoGo, out: &mut Vec<SimEvent>) {
        if decision.is_go() {
            self.clearance = Clearance::Go;
        } else {
            if self.clearance == Clearance::NoGo {
                return;
            }
            self.clearance = Clearance::NoGo;
            self.nogo_at = Some(now);
            if self.machine.phase < FlightPhase::PrepareToLand {
                self.response = Some(RESPONSE_REJECT.to_string());
            }
        }
        self.go_nogo.push(GoNoGoRecord {
            time: now,
            decision: decision.decision,
            reason: decision.reason.clone(),
        });
        out.push(SimEvent::GoNoGo { time: now, decision });
        if let Some(text) = self.response.clone().filter(|_| self.clearance == Clearance::NoGo) {
            out.push(SimEvent::Response { time: now, text });
        }
    }

    fn build_esr(&self, track: &RingTrack, now_us: u64, ref_now: &RefState) -> EnvironmentStateReport {
        // The ring never leaves the cable plane, so the report times its
        // arrival at the vertical plane across the cable through the crossing.
        let plane_x = match self.maneuver.as_ref().and_then(|m| m.intercept.as_ref()) {
            Some(ip) => ip.crossing_point.x,
            None => ref_now.position.x,
        };
        let plane = Plane::new(Vec3::new(plane_x, 0.0, 0.0), cable_axis());
        make_esr(&[*track], &plane, now_us, &self.cfg.tracking).with_ego(EgoState {
            position: ref_now.position,
            speed: ref_now.velocity.norm(),
        })
    }

    fn classify_pending(&mut self, now: f64, ref_now: &RefState, out: &mut Vec<SimEvent>) {
        let Some(text) = self.pending.pop_front() else {
            return;
        };
        let esr = self.esr.clone().expect("classification waits for a report");
        let decision = self.classifier.classify(&ClassifierRequest {
            prompt: text.clone(),
            esr: esr.clone(),
            capabilities: self.cfg.capabilities,
        });
        let decision = match (decision.is_go(), self.grammar.parse(&text)) {
            (true, Ok(spec)) => {
                let start_delay = draw_start_delay(&mut self.rng, &self.cfg.planner);
                self.maneuver = Some(Maneuver {
                    text: text.clone(),
                    spec,
                    start_delay,
                    depart_time: now + start_delay,
                    intercept: None,
                    plan: None,
                    committed: false,
                });
                decision
            }
            (true, Err(e)) => GoNoGo::no_go(format!("parse failure: {e}")),
            (false, _) => decision,
        };
        if let Ok(spec) = self.grammar.parse(&text) {
            self.logs.audit_record(&PlannerAudit {
                time: now,
                stage: "classify",
                command: &text,
                maneuver: spec.kind,
                esr: &esr,
                reference: ref_now,
                start_delay: self.maneuver.as_ref().map_or(0.0, |m| m.start_delay),
                depart_time: self.maneuver.as_ref().map_or(now, |m| m.depart_time),
                intercept: None,
                plan: None,
            });
        }
        if self.maneuver.is_none() {
            self.maneuver = self.grammar.parse(&text).ok().map(|spec| Maneuver {
                text: text.clone(),
                spec,
                start_delay: 0.0,
                depart_time: now,
                intercept: None,
                plan: None,
                committed: false,
            });
        }
        self.decide(now, decision, out);
    }

    /// Re-predicts the intercept and rebuilds the reference. The first plan
    /// searches for the crossing time; later ones keep it and re-extrapolate
    /// the ring to it, which stops the crossing time from drifting tick to
    /// tick. A replan that fails its check keeps the previous plan.
    fn replan(&mut self, now: f64, track: &RingTrack, ref_now: &RefState) -> Result<(), PlanError> {
        let caps = self.cfg.capabilities;
        let params = self.cfg.planner;
        let m = self.maneuver.as_mut().expect("planning needs a maneuver");
        let offset = m.spec.lateral_offset();
        let fresh = || predict_intercept(track, ref_now, now, m.depart_time, offset, &caps, &params);
        let intercept = match m.intercept {
            Some(prev) => InterceptPrediction {
                crossing_point: track.predict(to_us(prev.crossing_time)),
                crossing_time: prev.crossing_time,
                ring_velocity: track.world_velocity,
            },
            None => fresh()?,
        };
        let planned = plan_maneuver(&m.spec, &intercept, ref_now, now, m.depart_time, m.start_delay, &caps, &params);
        let plan = match (planned, m.plan.is_some()) {
            (Ok(p), _) => p,
            (Err(_), true) => return Ok(()),
            (Err(e), false) => return Err(e),
        };
        self.reference = plan.reference(ref_now, now);
        m.intercept = Some(intercept);
        m.plan = Some(plan);
        let m = self.maneuver.as_ref().expect("just set");
        let esr = self.esr.as_ref().expect("planning waits for a report");
        self.logs.audit_record(&PlannerAudit {
            time: now,
            stage: "plan",
            command: &m.text,
            maneuver: m.spec.kind,
            esr,
            reference: ref_now,
            start_delay: m.start_delay,
            depart_time: m.depart_time,
            intercept: m.intercept.as_ref(),
            plan: m.plan.as_ref(),
        });
        Ok(())
    }

    /// Half the ring's swept slab plus clearance, measured from the cable.
    fn keep_out(&self) -> f64 {
        self.cfg.ring.tube_radius + self.cfg.drone.bounding_radius + self.cfg.flight.wall_margin
    }

    fn descent_reference(&self, from: &RefState, now: f64) -> Reference {
        self.finish_crossing(from, now)
            .unwrap_or_else(|| self.stop_and_descend(from, now))
    }

    /// A drone that can no longer stop short of the ring's path flies the
    /// planned crossing out past it before descending.
    fn finish_crossing(&self, from: &RefState, now: f64) -> Option<Reference> {
        if self.crossing.is_some() {
            return None;
        }
        let m = self.maneuver.as_ref().filter(|m| m.plan.is_some())?;
        let cable_y = self.cfg.ring.cable_y;
        let gap = cable_y - self.keep_out() - from.position.y;
        let vy = from.velocity.y.max(0.0);
        let stopping = vy * vy / (2.0 * self.cfg.capabilities.a_max);
        if !m.committed && gap > 2.0 * stopping {
            return None;
        }
        let beyond = cable_y + self.keep_out();
        let last = self
            .reference
            .segments
            .iter()
            .position(|q| q.end_time() > now && q.eval(q.end_time()).position.y >= beyond)?;
        let mut segments = self.reference.segments[..=last].to_vec();
        let end = segments[last].end_time();
        let rest = self.stop_and_descend(&segments[last].eval(end), end);
        segments.extend(rest.segments);
        Some(Reference {
            segments,
            hold: rest.hold,
        })
    }

    fn stop_and_descend(&self, from: &RefState, now: f64) -> Reference {
        let f = &self.cfg.flight;
        let dz = (from.position.z - f.descent_altitude).abs();
        let t = (dz / f.descent_speed).max(1.5);
        let lo = self.cfg.room.min.add_scalar(f.wall_margin);
        let hi = self.cfg.room.max.add_scalar(-f.wall_margin);
        let mut stop = from.position + from.velocity * (0.5 * t);
        stop.x = stop.x.clamp(lo.x, hi.x);
        stop.y = stop.y.clamp(lo.y, hi.y);
        stop.z = f.descent_altitude;
        // Never park in, or descend through, the slab the ring sweeps: stay
        // on the side of the cable the drone is on now.
        let r = &self.cfg.ring;
        let keep_out = self.keep_out();
        let side = if from.position.y > r.cable_y { 1.0 } else { -1.0 };
        let edge = r.cable_y + side * keep_out;
        stop.y = if side > 0.0 { stop.y.max(edge) } else { stop.y.min(edge) };
        if (from.position.y - r.cable_y).abs() >= keep_out {
            return Reference {
                segments: vec![Quintic::new(now, t, from, &RefState::at_rest(stop))],
                hold: stop,
            };
        }
        let clear = RefState::at_rest(Vec3::new(stop.x, stop.y, from.position.z));
        let retreat = Quintic::new(now, f.retreat_duration, from, &clear);
        let descend = Quintic::new(now + f.retreat_duration, t, &clear, &RefState::at_rest(stop));
        Reference {
            segments: vec![retreat, descend],
            hold: stop,
        }
    }

    fn landing_reference(&self, from: &RefState, now: f64) -> Reference {
        let f = &self.cfg.flight;
        let ground = Vec3::new(from.position.x, from.position.y, 0.0);
        let t = (from.position.z / f.descent_speed).max(1.0);
        Reference {
            segments: vec![Quintic::new(now, t, from, &RefState::at_rest(ground))],
            hold: ground,
        }
    }

    /// Checks the crossing against the commanded side of the ring.
    fn verify_crossing(&self) -> Result<(), String> {
        let m = self.maneuver.as_ref().ok_or("no maneuver")?;
        let c = self.crossing.ok_or("drone never crossed the ring plane")?;
        if c.time < self.machine.history.iter().find(|p| p.to == FlightPhase::ManeuverThroughRing).map_or(f64::INFINITY, |p| p.at) {
            return Err("ring plane crossed before the maneuver started".into());
        }
        let rel = c.drone_position - c.ring_center;
        let r = self.cfg.ring.ring_radius;
        let tube = self.cfg.ring.tube_radius;
        let ok = match m.spec.kind {
            ManeuverKind::ThroughCenter => (rel.x * rel.x + rel.z * rel.z).sqrt() < r - tube,
            ManeuverKind::AroundLeft => rel.x < -(r + tube),
            ManeuverKind::AroundRight => rel.x > r + tube,
        };
        if ok {
            Ok(())
        } else {
            Err(format!(
                "crossed at ({:.3}, {:.3}) from the ring centre, wrong side for {:?}",
                rel.x, rel.z, m.spec.kind
            ))
        }
    }

    /// Advances one control tick: decisions and control at the current
    /// time, then the physics and sensing substeps up to the next tick.
    pub fn step(&mut self) -> Vec<SimEvent> {
        let mut out = Vec::new();
        if self.finished.is_some() {
            return out;
        }
        let now_us = self.time_us();
        let now = self.time();
        let dt = self.cfg.timing.control_dt();

        while self.script.front().is_some_and(|(at, _)| *at <= now + 1e-9) {
            let (_, text) = self.script.pop_front().expect("front exists");
            self.pending.push_back(text);
        }

        self.pose = self.mocap.pose(&self.world.drone);
        let sensing = self.machine.phase <= FlightPhase::ManeuverThroughRing;
        if sensing {
            if let Some(det) = self.tracker.tick(now_us, Some(&self.pose)) {
                self.logs.detection_row(&det);
            }
        }
        let track = self.tracker.track(now_us).copied();
        let mut ref_now = self.reference.eval(now);
        if let Some(tr) = &track {
            self.esr = Some(self.build_esr(tr, now_us, &ref_now));
        }
        let esr_fresh = self
            .esr
            .as_ref()
            .is_some_and(|e| e.age_us(now_us) <= self.monitor.stale_us);
        let phase = self.machine.phase;
        let active = phase < FlightPhase::PrepareToLand;

        if active && self.cfg.inject_nogo_at.is_some_and(|t| now + 1e-9 >= t) {
            let g = self.monitor.abort("operator abort");
            self.decide(now, g, &mut out);
        }

        let acquired = track.is_some_and(|t| t.age >= self.cfg.planner.min_track_age);
        if phase == FlightPhase::LocateTrackRing && self.clearance == Clearance::Pending {
            if acquired && !self.pending.is_empty() {
                self.classify_pending(now, &ref_now, &mut out);
            } else {
                let since = self.esr.as_ref().map_or(to_us(self.machine.entered_at), |e| e.timestamp);
                if now_us.saturating_sub(since) > self.monitor.stale_us {
                    let g = self.monitor.abort("sensing timeout: no ring track");
                    self.decide(now, g, &mut out);
                }
            }
        }

        if self.clearance == Clearance::Go && active {
            let committed = self.maneuver.as_ref().is_some_and(|m| m.committed);
            if !committed {
                if let Some(tr) = &track {
                    if let Err(e) = self.replan(now, tr, &ref_now) {
                        let g = self.monitor.abort(format!("planner: {e}"));
                        self.decide(now, g, &mut out);
                    }
                }
                ref_now = self.reference.eval(now);
            }
            if self.clearance == Clearance::Go {
                let lead = self.cfg.planner.commit_lead;
                let m = self.maneuver.as_mut().expect("cleared maneuvers exist");
                match m.plan.as_ref() {
                    Some(plan) => {
                        if now + 1e-9 >= plan.approach().arrival_time - lead {
                            m.committed = true;
                        }
                        let input = MonitorInput {
                            now: now_us,
                            position: ref_now.position,
                            speed: ref_now.velocity.norm(),
                            crossing_point: plan.crossing().position,
                            esr: if esr_fresh { self.esr.as_ref() } else { None },
                            committed: m.committed,
                        };
                        let g = self.monitor.tick(&input);
                        if !g.is_go() {
                            self.decide(now, g, &mut out);
                        }
                    }
                    None => {
                        let g = self.monitor.abort("planner: no plan before the sensing timeout");
                        if !esr_fresh {
                            self.decide(now, g, &mut out);
                        }
                    }
                }
            }
        }

        let m = self.maneuver.as_ref();
        let f = self.cfg.flight;
        let inputs = PhaseInputs {
            stabilized: now + 1e-9 >= f.takeoff_duration + f.settle_time,
            track_acquired: acquired,
            departed: m.is_some_and(|m| m.plan.is_some() && now + 1e-9 >= m.depart_time),
            plan_done: m
                .and_then(|m| m.plan.as_ref())
                .is_some_and(|p| now + 1e-9 >= p.exit().arrival_time + f.exit_settle),
            descended: phase == FlightPhase::PrepareToLand
                && now >= self.reference.end_time()
                && (self.pose.position.z - f.descent_altitude).abs() < 0.05,
            clearance: self.clearance,
        };
        if let Some(change) = self.machine.step(now, &inputs) {
            out.push(SimEvent::Phase(change));
            match change.to {
                FlightPhase::PrepareToLand => {
                    if self.clearance != Clearance::NoGo {
                        match self.verify_crossing() {
                            Ok(()) => {
                                self.verified = true;
                                let kind = self.maneuver.as_ref().expect("maneuver flown").spec.kind;
                                let text = render_response(kind, ResponseOutcome::Success).to_string();
                                self.response = Some(text.clone());
                                out.push(SimEvent::Response { time: now, text });
                            }
                            Err(e) => self.diagnostics.push(e),
                        }
                    }
                    self.reference = self.descent_reference(&ref_now, now);
                }
                FlightPhase::Land => self.reference = self.landing_reference(&ref_now, now),
                _ => {}
            }
            ref_now = self.reference.eval(now);
        }

        let command = if self.world.drone.armed {
            if self.machine.phase == FlightPhase::Land && self.pose.position.z <= f.disarm_altitude {
                self.world.drone.armed = false;
                RotorCommand::default()
            } else {
                let setpoint = RefState {
                    acceleration: self.reference.eval(now + self.cfg.gains.feedforward_lead).acceleration,
                    ..ref_now
                };
                self.controller.update(&setpoint, &self.pose, dt).command
            }
        } else {
            RotorCommand::default()
        };
        let joules = self.energy.record(&ActuationSample {
            thrust: command.thrust,
            speed: self.world.drone.velocity.norm(),
            dt,
        });
        let gng = match self.clearance {
            Clearance::Pending => "pending",
            Clearance::Go => "go",
            Clearance::NoGo => "no_go",
        };
        let snap = self.world.snapshot();
        self.logs.trajectory_row(&snap, self.machine.phase);
        self.logs
            .control_row(now, self.machine.phase, &ref_now, &self.pose.position, &command, joules, gng);

        self.physics(&command, sensing);
        self.step_end(&mut out);
        out
    }

    fn physics(&mut self, command: &RotorCommand, sensing: bool) {
        let dt = self.cfg.timing.physics_dt();
        let cable_y = self.cfg.ring.cable_y;
        let frozen_x = self
            .maneuver
            .as_ref()
            .filter(|m| m.committed)
            .and_then(|m| m.intercept.map(|i| i.crossing_point.x));
        for _ in 0..self.cfg.timing.substeps() {
            let t0 = self.time_us();
            let before = (self.world.drone.position, self.world.ring.center());
            let fault = self.world.step(command, dt);
            self.step += 1;
            let t1 = self.time_us();
            self.world.time = t1 as f64 * 1e-6;
            let (drone, ring) = (self.world.drone.position, self.world.ring.center());
            let lerp = |a: f64, b: f64, target: f64| if b == a { 1.0 } else { (target - a) / (b - a) };

            if self.crossing.is_none() && before.0.y < cable_y && drone.y >= cable_y {
                let s = lerp(before.0.y, drone.y, cable_y);
                self.crossing = Some(CrossingRecord {
                    time: (t0 as f64 + s * (t1 - t0) as f64) * 1e-6,
                    drone_position: before.0 + (drone - before.0) * s,
                    ring_center: before.1 + (ring - before.1) * s,
                    ring_arrival: None,
                });
            }
            if let Some(x) = frozen_x {
                if self.ring_arrival.is_none() && (before.1.x - x) * (ring.x - x) <= 0.0 && before.1.x != ring.x {
                    let s = lerp(before.1.x, ring.x, x);
                    self.ring_arrival = Some((t0 as f64 + s * (t1 - t0) as f64) * 1e-6);
                }
            }

            let report = check_collision(
                &self.world.drone,
                &self.world.ring,
                self.cfg.drone.bounding_radius,
                self.world.time,
            );
            self.min_clearance = self.min_clearance.min(report.closest_distance - self.cfg.drone.bounding_radius);
            if report.collided {
                self.collision = Some(report);
                self.finished = Some(Outcome::Collision);
                return;
            }
            if let Err(e) = fault {
                self.diagnostics.push(format!("world fault at {:.3} s: {e}", self.world.time));
                self.finished = Some(Outcome::Timeout);
                return;
            }

            if sensing {
                let events = match self.renderer.update(&self.world.ring) {
                    Some(rect) => crate::event::emit_events_in(
                        &mut self.refs,
                        self.renderer.image(),
                        rect,
                        t0,
                        t1,
                        &self.cfg.sensor,
                        Exec::Sequential,
                    )
                    .expect("renderer and sensor share a resolution"),
                    None => Vec::new(),
                };
                let events = merge_sorted(events, self.noise.sample(t0, t1, &self.cfg.sensor));
                self.tracker.push(&events);
                self.logs.push_events(&events);
                self.recent.extend(events.iter().copied());
            }
        }
        let horizon = self.time_us().saturating_sub(FRAME_WINDOW_US);
        while self.recent.front().is_some_and(|e| e.t <= horizon) {
            self.recent.pop_front();
        }
    }

    fn step_end(&mut self, out: &mut Vec<SimEvent>) {
        let now = self.time();
        if self.finished.is_none() {
            if !self.world.drone.armed && self.world.drone.on_ground() {
                self.finished = Some(self.settle_outcome());
            } else if now + 1e-9 >= self.cfg.flight.max_duration {
                self.diagnostics.push(format!("run stopped at the {} s limit", self.cfg.flight.max_duration));
                self.finished = Some(Outcome::Timeout);
            }
        }
        if let Some(outcome) = self.finished {
            out.push(SimEvent::Finished { time: now, outcome });
        }
    }

    fn settle_outcome(&self) -> Outcome {
        if self.clearance == Clearance::NoGo {
            Outcome::Reject
        } else if self.verified {
            Outcome::Success
        } else {
            Outcome::Timeout
        }
    }

    /// Steps until the run ends.
    pub fn run_to_end(&mut self) {
        while self.finished.is_none() {
            self.step();
        }
    }

    pub fn result(&self) -> ScenarioResult {
        let outcome = self.finished.unwrap_or(Outcome::Timeout);
        let entered_ptl = self
            .machine
            .history
            .iter()
            .find(|c| c.to == FlightPhase::PrepareToLand)
            .map(|c| c.at);
        let mut diagnostics = self.diagnostics.clone();
        if self.finished.is_none() {
            diagnostics.push("run still in progress".into());
        }
        ScenarioResult {
            seed: self.seed,
            outcome,
            response_text: match outcome {
                Outcome::Success | Outcome::Reject => self.response.clone(),
                _ => None,
            },
            command: self.maneuver.as_ref().map(|m| m.text.clone()),
            maneuver: self.maneuver.as_ref().map(|m| m.spec.kind),
            energy: self.energy.joules,
            duration: self.time(),
            phase_timeline: self.machine.history.clone(),
            go_nogo: self.go_nogo.clone(),
            start_delay: self.maneuver.as_ref().filter(|m| m.plan.is_some()).map(|m| m.start_delay),
            abort_latency: self.nogo_at.zip(entered_ptl).map(|(n, p)| (p - n).max(0.0)),
            crossing: self.crossing.map(|c| CrossingRecord {
                ring_arrival: self.ring_arrival,
                ..c
            }),
            min_clearance: self.min_clearance,
            collision: self.collision,
            event_count: self.logs.event_count,
            detection_count: self.tracker.detections().len(),
            diagnostics,
            digests: self.logs.digests(),
            trajectory_path: None,
        }
    }

    pub fn detections(&self) -> &[RingDetection] {
        self.tracker.detections()
    }

    pub fn into_run(self) -> ScenarioRun {
        ScenarioRun {
            result: self.result(),
            logs: self.logs,
        }
    }
}

/// A finished run with its logs still in memory.
#[derive(Clone, Debug)]
pub struct ScenarioRun {
    pub result: ScenarioResult,
    pub logs: RunLogs,
}

impl ScenarioRun {
    /// Writes every log plus `summary.json` into `dir` and records the
    /// trajectory path in the result.
    pub fn write_to(&mut self, dir: &Path) -> io::Result<()> {
        self.result.trajectory_path = Some(dir.join(super::logs::TRAJECTORY_FILE).display().to_string());
        self.logs.write_to(dir, &self.result)
    }
}

/// Runs one scenario headless to completion.
pub fn run_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<ScenarioRun, ConfigError> {
    let mut sim = Simulation::new(cfg, seed)?;
    sim.run_to_end();
    Ok(sim.into_run())
}
