use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::quintic::{Quintic, RefState, Reference};
use crate::feasibility::{evaluate, AccelCheck, DroneCapabilities, FeasibilityQuery, Verdict};
use crate::geometry::{approach_axis, cable_axis};
use crate::intent::ManeuverSpec;
use crate::snn::RingTrack;
use crate::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("track has {age} updates, {min} needed")]
    TrackTooYoung { age: u32, min: u32 },
    #[error("ring cannot be reached within the horizon")]
    NoSolution,
    #[error("plan segment {segment} fails the feasibility check: {}", verdict.reason())]
    Infeasible { segment: usize, verdict: Verdict },
}

/// How the crossing leg meets the ring plane.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Incidence {
    /// Straight along the ring axis in the world frame.
    Normal,
    /// Straight along the ring axis in the ring's frame: the crossing and
    /// exit legs carry the ring's velocity along the cable, so the lateral
    /// offset from the ring stays fixed while the drone is in the plane.
    #[default]
    VelocityAligned,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerParams {
    /// Approach and crossing points are this far before the ring plane, m.
    pub approach_distance: f64,
    /// Exit point beyond the ring plane, m.
    pub exit_distance: f64,
    /// Speed through the ring plane, m/s.
    pub crossing_speed: f64,
    /// The intercept search checks against capabilities scaled by this, so
    /// the in-flight monitor has headroom.
    pub feasibility_margin: f64,
    /// The monitor's own check, replayed along the approach leg, uses the
    /// capabilities scaled by this.
    pub monitor_margin: f64,
    pub search_step: f64,
    /// Latest intercept considered, s from now.
    pub horizon: f64,
    pub min_track_age: u32,
    /// Shortest allowed first leg, s.
    pub min_lead: f64,
    pub max_start_delay: f64,
    /// The crossing point freezes this long before the approach waypoint;
    /// retargeting a leg with almost no time left demands huge accelerations.
    pub commit_lead: f64,
    pub incidence: Incidence,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            approach_distance: 0.8,
            exit_distance: 0.8,
            crossing_speed: 1.0,
            feasibility_margin: 0.7,
            monitor_margin: 0.95,
            search_step: 0.01,
            horizon: 10.0,
            min_track_age: 5,
            min_lead: 1.0,
            max_start_delay: 1.0,
            commit_lead: 0.3,
            incidence: Incidence::VelocityAligned,
        }
    }
}

impl PlannerParams {
    pub fn crossing_duration(&self) -> f64 {
        self.approach_distance / self.crossing_speed
    }

    /// Constant deceleration from crossing speed to rest over the exit leg.
    pub fn exit_duration(&self) -> f64 {
        2.0 * self.exit_distance / self.crossing_speed
    }

    /// Drone velocity through the ring plane for a ring moving at `ring_velocity`.
    pub fn crossing_velocity(&self, ring_velocity: &Vec3) -> Vec3 {
        let along = match self.incidence {
            Incidence::Normal => Vec3::zeros(),
            Incidence::VelocityAligned => cable_axis() * ring_velocity.dot(&cable_axis()),
        };
        approach_axis() * self.crossing_speed + along
    }
}

/// Where and when the ring centre will be met.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterceptPrediction {
    pub crossing_point: Vec3,
    /// Absolute simulation time, s.
    pub crossing_time: f64,
    /// Estimated ring velocity at the crossing, m/s.
    pub ring_velocity: Vec3,
}

fn us(t: f64) -> u64 {
    (t * 1e6).round().max(0.0) as u64
}

fn approach_leg(from: &RefState, t_start: f64, approach: Vec3, t_arrive: f64, velocity: Vec3) -> Quintic {
    let to = RefState {
        position: approach,
        velocity,
        acceleration: Vec3::zeros(),
    };
    Quintic::new(t_start, t_arrive - t_start, from, &to)
}

/// The in-flight monitor re-runs the straight-line check from the reference
/// to the crossing point until the plan commits; sample the approach leg
/// and make sure it would pass.
fn monitor_holds(leg: &Quintic, crossing: Vec3, tau: f64, params: &PlannerParams, caps: &DroneCapabilities) -> bool {
    let end = leg.t0 + leg.duration - params.commit_lead;
    (0..=32).all(|k| {
        let t = leg.t0 + (end - leg.t0).max(0.0) * k as f64 / 32.0;
        let r = leg.eval(t);
        let q = FeasibilityQuery {
            p_src: r.position,
            p_dest: crossing,
            v0: r.velocity.norm(),
            v_max: caps.v_max,
            a_max: caps.a_max,
            t: tau - t,
        };
        evaluate(&q, AccelCheck::Signed).is_ok_and(Verdict::is_feasible)
    })
}

/// Earliest crossing time on a `search_step` grid at which the drone,
/// leaving at `depart` (or now, if later), can reach the approach point
/// for a crossing at `offset` from the extrapolated ring centre.
pub fn predict_intercept(
    track: &RingTrack,
    drone: &RefState,
    now: f64,
    depart: f64,
    offset: Vec3,
    caps: &DroneCapabilities,
    params: &PlannerParams,
) -> Result<InterceptPrediction, PlanError> {
    if track.age < params.min_track_age {
        return Err(PlanError::TrackTooYoung {
            age: track.age,
            min: params.min_track_age,
        });
    }
    let leave = depart.max(now);
    let scaled = caps.scaled(params.feasibility_margin);
    let v_cross = params.crossing_velocity(&track.world_velocity);
    let first = leave + params.min_lead + params.crossing_duration();
    let steps = ((now + params.horizon - first) / params.search_step).floor();
    if steps < 0.0 {
        return Err(PlanError::NoSolution);
    }
    for k in 0..=steps as usize {
        let tau = first + k as f64 * params.search_step;
        let centre = track.predict(us(tau));
        let approach = centre + offset - v_cross * params.crossing_duration();
        let t_leg = tau - params.crossing_duration() - leave;
        let q = FeasibilityQuery {
            p_src: drone.position,
            p_dest: approach,
            v0: drone.velocity.norm(),
            v_max: scaled.v_max,
            a_max: scaled.a_max,
            t: t_leg,
        };
        if !evaluate(&q, AccelCheck::Signed).is_ok_and(Verdict::is_feasible) {
            continue;
        }
        let hold = RefState::at_rest(drone.position);
        let start = if leave > now { &hold } else { drone };
        let leg = approach_leg(start, leave, approach, leave + t_leg, v_cross);
        let (v_peak, a_peak) = leg.peaks(32);
        if v_peak <= caps.v_max && a_peak <= caps.a_max && monitor_holds(&leg, centre + offset, tau, params, &caps.scaled(params.monitor_margin)) {
            return Ok(InterceptPrediction {
                crossing_point: centre,
                crossing_time: tau,
                ring_velocity: track.world_velocity,
            });
        }
    }
    Err(PlanError::NoSolution)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position: Vec3,
    pub arrival_time: f64,
}

/// Approach, crossing and exit waypoints, departing at `depart_time`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaypointPlan {
    pub waypoints: Vec<Waypoint>,
    pub start_delay: f64,
    pub depart_time: f64,
    /// Velocity held from the approach point to the crossing point.
    pub crossing_velocity: Vec3,
}

impl WaypointPlan {
    pub fn approach(&self) -> &Waypoint {
        &self.waypoints[0]
    }

    pub fn crossing(&self) -> &Waypoint {
        &self.waypoints[1]
    }

    pub fn exit(&self) -> &Waypoint {
        &self.waypoints[2]
    }

    /// Smooth reference from `from` at `now` through the waypoints; holds
    /// in place until departure.
    pub fn reference(&self, from: &RefState, now: f64) -> Reference {
        let mut segments = Vec::new();
        let mut start = *from;
        let mut t = now;
        if self.depart_time > now + 1e-9 {
            let rest = RefState::at_rest(from.position);
            segments.push(Quintic::new(now, self.depart_time - now, from, &rest));
            start = rest;
            t = self.depart_time;
        }
        let (a, c, e) = (self.approach(), self.crossing(), self.exit());
        if a.arrival_time > t + 1e-9 {
            segments.push(approach_leg(&start, t, a.position, a.arrival_time, self.crossing_velocity));
        }
        let cruise = RefState {
            velocity: self.crossing_velocity,
            ..RefState::default()
        };
        let at_a = RefState {
            position: a.position,
            ..cruise
        };
        let at_c = RefState {
            position: c.position,
            ..cruise
        };
        segments.push(Quintic::new(a.arrival_time, c.arrival_time - a.arrival_time, &at_a, &at_c));
        segments.push(Quintic::new(c.arrival_time, e.arrival_time - c.arrival_time, &at_c, &RefState::at_rest(e.position)));
        Reference {
            segments,
            hold: e.position,
        }
    }
}

pub fn draw_start_delay<R: Rng + ?Sized>(rng: &mut R, params: &PlannerParams) -> f64 {
    rng.random_range(0.0..=params.max_start_delay)
}

/// Lays the three waypoints around the intercept and checks each leg.
pub fn plan_maneuver(
    spec: &ManeuverSpec,
    intercept: &InterceptPrediction,
    from: &RefState,
    now: f64,
    depart_time: f64,
    start_delay: f64,
    caps: &DroneCapabilities,
    params: &PlannerParams,
) -> Result<WaypointPlan, PlanError> {
    let crossing = intercept.crossing_point + spec.lateral_offset();
    let v_cross = params.crossing_velocity(&intercept.ring_velocity);
    let t_c = intercept.crossing_time;
    let waypoints = vec![
        Waypoint {
            position: crossing - v_cross * params.crossing_duration(),
            arrival_time: t_c - params.crossing_duration(),
        },
        Waypoint {
            position: crossing,
            arrival_time: t_c,
        },
        // constant deceleration to rest covers half the entry speed times the leg
        Waypoint {
            position: crossing + v_cross * (0.5 * params.exit_duration()),
            arrival_time: t_c + params.exit_duration(),
        },
    ];
    let leave = depart_time.max(now);
    let legs = [
        (from.position, from.velocity.norm(), leave, &waypoints[0]),
        (waypoints[0].position, v_cross.norm(), waypoints[0].arrival_time, &waypoints[1]),
        (waypoints[1].position, v_cross.norm(), waypoints[1].arrival_time, &waypoints[2]),
    ];
    for (segment, (src, v0, t0, wp)) in legs.into_iter().enumerate() {
        // a leg already under way when replanning has no time left to check
        if segment == 0 && wp.arrival_time <= t0 {
            continue;
        }
        let q = FeasibilityQuery {
            p_src: src,
            p_dest: wp.position,
            v0,
            v_max: caps.v_max,
            a_max: caps.a_max,
            t: wp.arrival_time - t0,
        };
        match evaluate(&q, AccelCheck::Signed) {
            Ok(Verdict::Feasible) => {}
            Ok(verdict) => return Err(PlanError::Infeasible { segment, verdict }),
            Err(_) => return Err(PlanError::Infeasible { segment, verdict: Verdict::Time }),
        }
    }
    Ok(WaypointPlan {
        waypoints,
        start_delay,
        depart_time,
        crossing_velocity: v_cross,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intent::ManeuverKind;
    use proptest::prelude::*;

    fn track(x: f64, vx: f64) -> RingTrack {
        RingTrack {
            world_position: Vec3::new(x, 2.0, 1.3),
            world_velocity: Vec3::new(vx, 0.0, 0.0),
            last_update: 0,
            age: 6,
        }
    }

    fn hover() -> RefState {
        RefState::at_rest(Vec3::new(2.5, 0.6, 1.3))
    }

    #[test]
    fn stationary_ring_is_met_where_it_hangs() {
        let caps = DroneCapabilities::default();
        let p = PlannerParams::default();
        let i = predict_intercept(&track(2.5, 0.0), &hover(), 0.0, 0.0, Vec3::zeros(), &caps, &p).unwrap();
        assert!((i.crossing_point - Vec3::new(2.5, 2.0, 1.3)).norm() < 1e-12);
        let plan = plan_maneuver(&ManeuverSpec::new(ManeuverKind::ThroughCenter), &i, &hover(), 0.0, 0.0, 0.0, &caps, &p).unwrap();
        // all three waypoints on the ring axis
        for w in &plan.waypoints {
            assert!((w.position.x - 2.5).abs() < 1e-12 && (w.position.z - 1.3).abs() < 1e-12);
        }
        assert!(plan.waypoints.windows(2).all(|w| w[0].arrival_time < w[1].arrival_time));
    }

    #[test]
    fn moving_ring_is_extrapolated() {
        let caps = DroneCapabilities::default();
        let p = PlannerParams::default();
        let i = predict_intercept(&track(1.0, 0.2), &hover(), 0.0, 0.0, Vec3::zeros(), &caps, &p).unwrap();
        assert!((i.crossing_point.x - (1.0 + 0.2 * i.crossing_time)).abs() < 1e-6);
        // with a 2 s crossing the ring has moved to 1.4 m
        let t2 = RingTrack { ..track(1.0, 0.2) }.predict(2_000_000);
        assert!((t2.x - 1.4).abs() < 1e-12);
    }

    #[test]
    fn fleeing_ring_has_no_solution() {
        let caps = DroneCapabilities::default();
        let p = PlannerParams::default();
        let r = predict_intercept(&track(3.0, 2.0), &hover(), 0.0, 0.0, Vec3::zeros(), &caps, &p);
        assert_eq!(r, Err(PlanError::NoSolution));
        let young = RingTrack { age: 2, ..track(3.0, 0.0) };
        assert!(matches!(
            predict_intercept(&young, &hover(), 0.0, 0.0, Vec3::zeros(), &caps, &p),
            Err(PlanError::TrackTooYoung { .. })
        ));
    }

    #[test]
    fn around_left_offsets_the_crossing() {
        let caps = DroneCapabilities::default();
        let p = PlannerParams::default();
        let spec = ManeuverSpec::new(ManeuverKind::AroundLeft);
        let i = predict_intercept(&track(2.5, 0.0), &hover(), 0.0, 0.0, spec.lateral_offset(), &caps, &p).unwrap();
        let plan = plan_maneuver(&spec, &i, &hover(), 0.0, 0.0, 0.0, &caps, &p).unwrap();
        assert!(((plan.crossing().position - i.crossing_point).norm() - 0.55).abs() < 1e-12);
        assert!(plan.crossing().position.x < i.crossing_point.x);
    }

    #[test]
    fn weak_caps_make_the_plan_infeasible() {
        let p = PlannerParams::default();
        let i = InterceptPrediction {
            crossing_point: Vec3::new(2.5, 2.0, 1.3),
            crossing_time: 1.9,
            ring_velocity: Vec3::zeros(),
        };
        let weak = DroneCapabilities {
            v_max: 0.3,
            ..DroneCapabilities::default()
        };
        let r = plan_maneuver(&ManeuverSpec::new(ManeuverKind::ThroughCenter), &i, &hover(), 0.0, 0.0, 0.0, &weak, &p);
        assert!(matches!(r, Err(PlanError::Infeasible { .. })));
    }

    #[test]
    fn aligned_crossing_keeps_the_offset_in_the_ring_frame() {
        let caps = DroneCapabilities::default();
        let p = PlannerParams::default();
        let spec = ManeuverSpec::new(ManeuverKind::AroundRight);
        let tr = track(1.5, 0.4);
        let i = predict_intercept(&tr, &hover(), 0.0, 0.0, spec.lateral_offset(), &caps, &p).unwrap();
        let plan = plan_maneuver(&spec, &i, &hover(), 0.0, 0.0, 0.0, &caps, &p).unwrap();
        let r = plan.reference(&hover(), 0.0);
        let (a, c) = (plan.approach().arrival_time, plan.crossing().arrival_time);
        for k in 0..=10 {
            let t = a + (c - a) * k as f64 / 10.0;
            let rel = r.eval(t).position - tr.predict((t * 1e6) as u64);
            assert!((rel.x - 0.55).abs() < 1e-6, "x offset {} at {t}", rel.x);
        }
        let normal = PlannerParams {
            incidence: Incidence::Normal,
            ..p
        };
        assert_eq!(normal.crossing_velocity(&tr.world_velocity), Vec3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn reference_passes_every_waypoint_on_time() {
        let caps = DroneCapabilities::default();
        let p = PlannerParams::default();
        let i = predict_intercept(&track(1.5, 0.3), &hover(), 0.0, 0.4, Vec3::zeros(), &caps, &p).unwrap();
        let plan = plan_maneuver(&ManeuverSpec::new(ManeuverKind::ThroughCenter), &i, &hover(), 0.0, 0.4, 0.4, &caps, &p).unwrap();
        let r = plan.reference(&hover(), 0.0);
        assert!((r.eval(0.2).position - hover().position).norm() < 1e-9);
        for w in &plan.waypoints {
            assert!((r.eval(w.arrival_time).position - w.position).norm() < 1e-9);
        }
        let v_cross = r.eval(plan.crossing().arrival_time).velocity;
        assert!((v_cross - Vec3::new(0.3, 1.0, 0.0)).norm() < 1e-9);
    }

    proptest! {
        #[test]
        fn found_intercepts_pass_the_monitor_until_commit(
            x in 0.5..4.5f64,
            vx in -0.5..0.5f64,
            kind in 0usize..3,
            delay in 0.0..1.0f64,
        ) {
            let caps = DroneCapabilities::default();
            let p = PlannerParams::default();
            let spec = ManeuverSpec::new(ManeuverKind::ALL[kind]);
            let tr = track(x, vx);
            let Ok(i) = predict_intercept(&tr, &hover(), 0.0, delay, spec.lateral_offset(), &caps, &p) else {
                return Ok(());
            };
            let plan = plan_maneuver(&spec, &i, &hover(), 0.0, delay, delay, &caps, &p).unwrap();
            let r = plan.reference(&hover(), 0.0);
            let commit = plan.approach().arrival_time - p.commit_lead;
            for k in 0..=100 {
                let t = commit * k as f64 / 100.0;
                let s = r.eval(t);
                let q = FeasibilityQuery {
                    p_src: s.position,
                    p_dest: plan.crossing().position,
                    v0: s.velocity.norm(),
                    v_max: caps.v_max,
                    a_max: caps.a_max,
                    t: i.crossing_time - t,
                };
                prop_assert_eq!(evaluate(&q, AccelCheck::Signed), Ok(Verdict::Feasible), "t = {}", t);
            }
        }
    }
}
