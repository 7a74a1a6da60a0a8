use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{RingDetection, RingDetector, SnnError, SnnParams};
use crate::event::{Event, SensorParams};
use crate::geometry::Plane;
use crate::world::{CameraModel, Pose};
use crate::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error("detection at {t} µs does not follow the track update at {last} µs")]
    OutOfOrder { t: u64, last: u64 },
    #[error("detection ray misses the ring motion plane")]
    NoIntersection,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackParams {
    /// EWMA weight of the newest finite difference.
    pub alpha: f64,
    pub stale_us: u64,
    pub detect_period_us: u64,
    /// Spike window the tracker clusters over. Centroids from windows shorter
    /// than about one pixel of ring travel carry pixel-grid jitter, which
    /// dominates finite differences at low speeds.
    pub measurement_window_us: u64,
    /// Time to collision reported when the ring is not closing on the plane, s.
    pub horizon: f64,
    /// Closing speeds below this count as not closing, m/s.
    pub min_closing_speed: f64,
}

impl Default for TrackParams {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            stale_us: 200_000,
            detect_period_us: 100_000,
            measurement_window_us: 250_000,
            horizon: 10.0,
            min_closing_speed: 0.01,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingTrack {
    pub world_position: Vec3,
    pub world_velocity: Vec3,
    pub last_update: u64,
    pub age: u32,
}

impl RingTrack {
    pub fn is_stale(&self, now: u64, params: &TrackParams) -> bool {
        now.saturating_sub(self.last_update) > params.stale_us
    }

    /// Constant-velocity extrapolation to `t` µs.
    pub fn predict(&self, t: u64) -> Vec3 {
        let dt = (t as f64 - self.last_update as f64) * 1e-6;
        self.world_position + self.world_velocity * dt
    }
}

/// Folds `det` into `track`. The detection is back-projected onto the known
/// ring motion plane. A missing or stale track restarts from the detection
/// with zero velocity. Velocity is the running mean of the finite
/// differences until `1/n` drops below `alpha`, then an EWMA with `alpha`.
pub fn update_track(
    track: Option<&RingTrack>,
    det: &RingDetection,
    camera: &CameraModel,
    motion_plane: &Plane,
    params: &TrackParams,
) -> Result<RingTrack, TrackError> {
    if let Some(tr) = track {
        if det.t <= tr.last_update {
            return Err(TrackError::OutOfOrder {
                t: det.t,
                last: tr.last_update,
            });
        }
    }
    let pos = camera
        .back_project(det.centroid.0, det.centroid.1, motion_plane)
        .ok_or(TrackError::NoIntersection)?;
    let live = track.filter(|tr| !tr.is_stale(det.t, params));
    Ok(match live {
        None => RingTrack {
            world_position: pos,
            world_velocity: Vec3::zeros(),
            last_update: det.t,
            age: 1,
        },
        Some(tr) => {
            let dt = (det.t - tr.last_update) as f64 * 1e-6;
            let diff = (pos - tr.world_position) / dt;
            let gain = params.alpha.max(1.0 / tr.age as f64);
            let velocity = diff * gain + tr.world_velocity * (1.0 - gain);
            RingTrack {
                world_position: pos,
                world_velocity: velocity,
                last_update: det.t,
                age: tr.age + 1,
            }
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstacleReport {
    pub position: Vec3,
    pub velocity: Vec3,
}

/// The drone's own planned state, taken from the reference trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    pub position: Vec3,
    pub speed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentStateReport {
    pub obstacle_count: usize,
    pub obstacles: Vec<ObstacleReport>,
    /// Seconds until the nearest obstacle reaches the crossing plane.
    pub time_to_collision: f64,
    /// µs.
    pub timestamp: u64,
    #[serde(default)]
    pub ego: Option<EgoState>,
}

impl EnvironmentStateReport {
    pub fn with_ego(mut self, ego: EgoState) -> Self {
        self.ego = Some(ego);
        self
    }

    pub fn age_us(&self, now: u64) -> u64 {
        now.saturating_sub(self.timestamp)
    }
}

/// Shortest time for a tracked obstacle to reach `crossing_plane`, or the
/// horizon when nothing is closing on it.
pub fn make_esr(tracks: &[RingTrack], crossing_plane: &Plane, timestamp: u64, params: &TrackParams) -> EnvironmentStateReport {
    let mut t = params.horizon;
    for tr in tracks {
        let p = tr.predict(timestamp);
        let dist = crossing_plane.signed_distance(&p);
        let closing = -dist.signum() * tr.world_velocity.dot(&crossing_plane.normal);
        if dist == 0.0 {
            t = 0.0;
        } else if closing > params.min_closing_speed {
            t = t.min(dist.abs() / closing);
        }
    }
    EnvironmentStateReport {
        obstacle_count: tracks.len(),
        obstacles: tracks
            .iter()
            .map(|tr| ObstacleReport {
                position: tr.predict(timestamp),
                velocity: tr.world_velocity,
            })
            .collect(),
        time_to_collision: t.clamp(1e-3, params.horizon),
        timestamp,
        ego: None,
    }
}

/// Where the event camera sits. A tripod camera is fixed in the world; a
/// body-mounted one follows the drone pose, which is where mocap feedback
/// compensates for the drone's own motion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub enum CameraMount {
    #[default]
    Tripod,
    Body { offset: Vec3 },
}

impl CameraMount {
    pub fn camera_at(&self, base: &CameraModel, pose: Option<&Pose>) -> CameraModel {
        match (self, pose) {
            (CameraMount::Body { offset }, Some(p)) => CameraModel {
                position: p.position + offset,
                ..*base
            },
            _ => *base,
        }
    }
}

/// Event stream to track pipeline: streaming detection at a fixed period,
/// track updates and a detection log.
#[derive(Clone, Debug)]
pub struct RingTracker {
    pub camera: CameraModel,
    pub mount: CameraMount,
    pub motion_plane: Plane,
    pub params: TrackParams,
    detector: RingDetector,
    track: Option<RingTrack>,
    next_detect: u64,
    detections: Vec<RingDetection>,
}

impl RingTracker {
    pub fn new(
        camera: CameraModel,
        motion_plane: Plane,
        sensor: &SensorParams,
        snn: SnnParams,
        params: TrackParams,
        t_start: u64,
    ) -> Result<Self, SnnError> {
        Ok(Self {
            camera,
            mount: CameraMount::Tripod,
            motion_plane,
            params,
            detector: RingDetector::new(
                sensor,
                SnnParams {
                    window_us: params.measurement_window_us,
                    ..snn
                },
                t_start,
            )?,
            track: None,
            // a partly filled window biases the first centroid
            next_detect: t_start + params.detect_period_us.max(params.measurement_window_us),
            detections: Vec::new(),
        })
    }

    pub fn push(&mut self, events: &[Event]) {
        self.detector.push(events);
    }

    /// Runs a detection when one is due at `now`; returns it when the ring
    /// was found.
    pub fn tick(&mut self, now: u64, pose: Option<&Pose>) -> Option<RingDetection> {
        if now < self.next_detect {
            return None;
        }
        self.next_detect = now + self.params.detect_period_us;
        let det = self.detector.detect(now)?;
        let camera = self.mount.camera_at(&self.camera, pose);
        if let Ok(tr) = update_track(self.track.as_ref(), &det, &camera, &self.motion_plane, &self.params) {
            self.track = Some(tr);
            self.detections.push(det);
            Some(det)
        } else {
            None
        }
    }

    /// Current track, if it has not gone stale.
    pub fn track(&self, now: u64) -> Option<&RingTrack> {
        self.track.as_ref().filter(|t| !t.is_stale(now, &self.params))
    }

    pub fn detections(&self) -> &[RingDetection] {
        &self.detections
    }

    pub fn detector(&self) -> &RingDetector {
        &self.detector
    }
}
