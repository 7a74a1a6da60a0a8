//! Event-camera synthesis by per-pixel log-intensity thresholding.
//!
//! Each pixel keeps a reference log intensity. When a new frame differs from
//! the reference by `Δ`, the pixel emits `floor(|Δ|/θ)` events of polarity
//! `sign(Δ)` and its reference moves by that many thresholds, so the residual
//! `|Δ| mod θ` carries over to the next frame.

mod io;

pub use io::{read_events_binary, read_events_text, write_events_binary, write_events_text, EVENT_RECORD_BYTES};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::{self, Exec};
use crate::world::{IntensityImage, Rect};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EventError {
    #[error("frame is {got_w}x{got_h}, sensor is {want_w}x{want_h}")]
    DimensionMismatch {
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("empty or reversed interval ({t0}, {t1}]")]
    BadInterval { t0: u64, t1: u64 },
    #[error("invalid sensor parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    On,
    Off,
}

impl Polarity {
    pub fn sign(self) -> i8 {
        match self {
            Polarity::On => 1,
            Polarity::Off => -1,
        }
    }

    pub fn from_sign(s: i8) -> Option<Self> {
        match s {
            1 => Some(Polarity::On),
            -1 => Some(Polarity::Off),
            _ => None,
        }
    }
}

/// A single `(x, y, t, p)` sensor event; `t` in microseconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    pub t: u64,
    pub p: Polarity,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorParams {
    pub width: usize,
    pub height: usize,
    /// Log-intensity units.
    pub contrast_threshold: f64,
    pub temporal_resolution_us: u64,
    /// Intensities are clamped to this before taking the log.
    pub log_floor: f64,
}

impl Default for SensorParams {
    fn default() -> Self {
        Self {
            width: 346,
            height: 260,
            contrast_threshold: 0.2,
            temporal_resolution_us: 20,
            log_floor: 1e-3,
        }
    }
}

impl SensorParams {
    pub fn validate(&self) -> Result<(), EventError> {
        if self.width == 0 || self.height == 0 || self.width > u16::MAX as usize || self.height > u16::MAX as usize {
            return Err(EventError::InvalidParams("resolution"));
        }
        if !(self.contrast_threshold > 0.0) {
            return Err(EventError::InvalidParams("contrast threshold must be positive"));
        }
        if self.temporal_resolution_us == 0 {
            return Err(EventError::InvalidParams("temporal resolution must be positive"));
        }
        if !(self.log_floor > 0.0) {
            return Err(EventError::InvalidParams("log floor must be positive"));
        }
        Ok(())
    }

    pub fn log_intensity(&self, intensity: f64) -> f64 {
        intensity.max(self.log_floor).ln()
    }

    fn check_frame(&self, frame: &IntensityImage) -> Result<(), EventError> {
        if frame.width != self.width || frame.height != self.height {
            return Err(EventError::DimensionMismatch {
                got_w: frame.width,
                got_h: frame.height,
                want_w: self.width,
                want_h: self.height,
            });
        }
        Ok(())
    }
}

/// Per-pixel reference log intensity.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceField {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl ReferenceField {
    /// References synchronised to `frame` (no pending residual).
    pub fn from_frame(frame: &IntensityImage, params: &SensorParams) -> Result<Self, EventError> {
        params.check_frame(frame)?;
        Ok(Self {
            width: frame.width,
            height: frame.height,
            data: frame.data.iter().map(|&i| params.log_intensity(i)).collect(),
        })
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Number of events and their sign for a log change `delta`.
pub fn threshold_crossings(delta: f64, threshold: f64) -> (u64, i8) {
    let n = (delta.abs() / threshold).floor();
    let sign = if delta > 0.0 { 1 } else { -1 };
    (n as u64, sign)
}

/// Timestamp of the `k`-th of `n` crossings of a pixel whose log intensity
/// changes by `delta` linearly over `(t0, t1]`, rounded up to the temporal
/// resolution and kept inside the interval.
fn crossing_time(k: u64, delta_abs: f64, threshold: f64, t0: u64, t1: u64, res: u64) -> u64 {
    let frac = ((k as f64 * threshold) / delta_abs).min(1.0);
    let t = t0 as f64 + frac * (t1 - t0) as f64;
    let q = ((t / res as f64).ceil() as u64).saturating_mul(res);
    q.clamp(t0 + 1, t1)
}

fn emit_row(
    refs_row: &mut [f64],
    frame: &IntensityImage,
    y: usize,
    x0: usize,
    x1: usize,
    t0: u64,
    t1: u64,
    params: &SensorParams,
) -> Vec<Event> {
    let theta = params.contrast_threshold;
    let mut out = Vec::new();
    for x in x0..x1 {
        let delta = params.log_intensity(frame.get(x, y)) - refs_row[x];
        let (n, sign) = threshold_crossings(delta, theta);
        if n == 0 {
            continue;
        }
        refs_row[x] += n as f64 * theta * sign as f64;
        let p = if sign > 0 { Polarity::On } else { Polarity::Off };
        for k in 1..=n {
            out.push(Event {
                x: x as u16,
                y: y as u16,
                t: crossing_time(k, delta.abs(), theta, t0, t1, params.temporal_resolution_us),
                p,
            });
        }
    }
    out
}

/// Emits events for pixels inside `rect` only; pixels outside must not have
/// changed since their last update. Output is sorted by `(t, y, x)`.
pub fn emit_events_in(
    refs: &mut ReferenceField,
    frame: &IntensityImage,
    rect: Rect,
    t0: u64,
    t1: u64,
    params: &SensorParams,
    exec: Exec,
) -> Result<Vec<Event>, EventError> {
    params.check_frame(frame)?;
    if t1 <= t0 {
        return Err(EventError::BadInterval { t0, t1 });
    }
    if rect.is_empty() {
        return Ok(Vec::new());
    }
    let width = refs.width;
    // small regions are not worth the fork/join
    let exec = if rect.area() >= 16_384 { exec } else { Exec::Sequential };
    let rows = &mut refs.data[rect.y0 * width..rect.y1 * width];
    let per_row = par::map_chunks_mut(exec, rows, width, |i, row| {
        emit_row(row, frame, rect.y0 + i, rect.x0, rect.x1, t0, t1, params)
    });
    let mut events: Vec<Event> = per_row.into_iter().flatten().collect();
    events.sort_by_key(|e| (e.t, e.y, e.x));
    Ok(events)
}

/// Full-frame event synthesis over the interval `(t0, t1]` µs.
pub fn emit_events(
    refs: &mut ReferenceField,
    frame: &IntensityImage,
    t0: u64,
    t1: u64,
    params: &SensorParams,
) -> Result<Vec<Event>, EventError> {
    emit_events_in(refs, frame, Rect::full(params.width, params.height), t0, t1, params, Exec::Parallel)
}

/// Salt-and-pepper background events at a fixed mean rate over the sensor.
#[derive(Clone, Debug)]
pub struct NoiseGenerator {
    /// Mean events per second over the whole sensor.
    pub rate_hz: f64,
    rng: ChaCha8Rng,
}

impl NoiseGenerator {
    pub fn new(rate_hz: f64, seed: u64) -> Self {
        Self {
            rate_hz,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Noise events in `(t0, t1]`, sorted by `(t, y, x)`.
    pub fn sample(&mut self, t0: u64, t1: u64, params: &SensorParams) -> Vec<Event> {
        let mean = self.rate_hz * (t1 - t0) as f64 * 1e-6;
        if mean <= 0.0 {
            return Vec::new();
        }
        let n = Poisson::new(mean).map(|d| d.sample(&mut self.rng) as usize).unwrap_or(0);
        let res = params.temporal_resolution_us;
        let mut out: Vec<Event> = (0..n)
            .map(|_| {
                let t = self.rng.random_range(t0 + 1..=t1);
                Event {
                    x: self.rng.random_range(0..params.width) as u16,
                    y: self.rng.random_range(0..params.height) as u16,
                    t: (t.div_ceil(res) * res).min(t1),
                    p: if self.rng.random_bool(0.5) { Polarity::On } else { Polarity::Off },
                }
            })
            .collect();
        out.sort_by_key(|e| (e.t, e.y, e.x));
        out
    }
}

/// Merges two `(t, y, x)`-sorted streams.
pub fn merge_sorted(a: Vec<Event>, b: Vec<Event>) -> Vec<Event> {
    if b.is_empty() {
        return a;
    }
    if a.is_empty() {
        return b;
    }
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if (a[i].t, a[i].y, a[i].x) <= (b[j].t, b[j].y, b[j].x) {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Signed per-pixel event counts.
#[derive(Clone, Debug, PartialEq)]
pub struct EventFrame {
    pub width: usize,
    pub height: usize,
    pub counts: Vec<i32>,
}

impl EventFrame {
    pub fn get(&self, x: usize, y: usize) -> i32 {
        self.counts[y * self.width + x]
    }

    /// Counts over the window `(end - window, end]`.
    pub fn accumulate(events: &[Event], end: u64, window: u64, params: &SensorParams) -> Self {
        let mut counts = vec![0i32; params.width * params.height];
        let start = end.saturating_sub(window);
        for e in events.iter().filter(|e| e.t > start && e.t <= end) {
            counts[e.y as usize * params.width + e.x as usize] += e.p.sign() as i32;
        }
        Self {
            width: params.width,
            height: params.height,
            counts,
        }
    }

    /// `(x, y, count)` for every non-zero cell, in raster order.
    pub fn nonzero(&self) -> Vec<(u16, u16, i32)> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(i, &c)| ((i % self.width) as u16, (i / self.width) as u16, c))
            .collect()
    }

    /// Binary PGM (P5): grey background, bright for positive, dark for negative.
    pub fn to_pgm(&self) -> Vec<u8> {
        let peak = self.counts.iter().map(|c| c.abs()).max().unwrap_or(0).max(1) as f64;
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(
            self.counts
                .iter()
                .map(|&c| (127.5 + 127.5 * c as f64 / peak).round().clamp(0.0, 255.0) as u8),
        );
        out
    }
}

/// Frame over the trailing `window` ending at the latest event.
pub fn accumulate_frame(events: &[Event], window: u64, params: &SensorParams) -> EventFrame {
    let end = events.iter().map(|e| e.t).max().unwrap_or(0);
    EventFrame::accumulate(events, end, window, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SensorParams {
        SensorParams {
            width: 8,
            height: 6,
            contrast_threshold: 0.25,
            ..SensorParams::default()
        }
    }

    #[test]
    fn static_scene_is_silent() {
        let p = small();
        let frame = IntensityImage::filled(8, 6, 0.7);
        let mut refs = ReferenceField::from_frame(&frame, &p).unwrap();
        for k in 0..100u64 {
            let ev = emit_events(&mut refs, &frame, k * 1000, (k + 1) * 1000, &p).unwrap();
            assert!(ev.is_empty());
        }
    }

    #[test]
    fn rise_of_two_and_a_half_thresholds() {
        let p = small();
        let theta = p.contrast_threshold;
        let base = IntensityImage::filled(8, 6, 1.0);
        let mut refs = ReferenceField::from_frame(&base, &p).unwrap();
        let mut frame = base.clone();
        frame.set(3, 2, (2.5 * theta).exp());
        let ev = emit_events(&mut refs, &frame, 0, 1000, &p).unwrap();
        assert_eq!(ev.len(), 2);
        assert!(ev.iter().all(|e| e.p == Polarity::On && e.x == 3 && e.y == 2));
        let residual = p.log_intensity(frame.get(3, 2)) - refs.get(3, 2);
        assert!((residual - 0.5 * theta).abs() < 1e-12);
    }

    #[test]
    fn fall_of_one_threshold() {
        let p = small();
        let frame = IntensityImage::filled(8, 6, 1.0);
        let mut refs = ReferenceField::from_frame(&frame, &p).unwrap();
        refs.data[5] = p.contrast_threshold;
        let ev = emit_events(&mut refs, &frame, 0, 1000, &p).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].p, Polarity::Off);
        assert_eq!((ev[0].x, ev[0].y), (5, 0));
    }

    #[test]
    fn timestamps_quantised_inside_interval_and_sorted() {
        let p = small();
        let base = IntensityImage::filled(8, 6, 0.1);
        let mut refs = ReferenceField::from_frame(&base, &p).unwrap();
        let mut frame = base.clone();
        for x in 0..8 {
            frame.set(x, x % 6, 0.1 * (1.0 + x as f64));
        }
        let ev = emit_events(&mut refs, &frame, 1000, 2000, &p).unwrap();
        assert!(!ev.is_empty());
        assert!(ev.windows(2).all(|w| (w[0].t, w[0].y, w[0].x) <= (w[1].t, w[1].y, w[1].x)));
        assert!(ev.iter().all(|e| e.t > 1000 && e.t <= 2000 && e.t % 20 == 0));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p = small();
        let frame = IntensityImage::filled(8, 6, 1.0);
        let mut refs = ReferenceField::from_frame(&frame, &p).unwrap();
        let wrong = IntensityImage::filled(7, 6, 1.0);
        assert!(matches!(
            emit_events(&mut refs, &wrong, 0, 10, &p),
            Err(EventError::DimensionMismatch { .. })
        ));
        assert!(matches!(emit_events(&mut refs, &frame, 10, 10, &p), Err(EventError::BadInterval { .. })));
    }

    #[test]
    fn global_gain_resyncs_after_one_frame() {
        let p = small();
        let mut base = IntensityImage::filled(8, 6, 0.0);
        for (i, v) in base.data.iter_mut().enumerate() {
            *v = 0.05 + 0.02 * i as f64;
        }
        let mut refs = ReferenceField::from_frame(&base, &p).unwrap();
        let mut bright = base.clone();
        bright.data.iter_mut().for_each(|v| *v *= 3.0);
        let first = emit_events(&mut refs, &bright, 0, 1000, &p).unwrap();
        let per_pixel = (3.0f64.ln() / p.contrast_threshold).floor() as usize;
        assert_eq!(first.len(), per_pixel * 48);
        assert!(first.iter().all(|e| e.p == Polarity::On));
        let second = emit_events(&mut refs, &bright, 1000, 2000, &p).unwrap();
        assert!(second.is_empty());
    }

    #[test]
    fn accumulation_counts_signed() {
        let p = small();
        assert!(accumulate_frame(&[], 30_000, &p).counts.iter().all(|&c| c == 0));
        let ev: Vec<Event> = (1..=4)
            .map(|k| Event {
                x: 2,
                y: 1,
                t: k * 100,
                p: Polarity::Off,
            })
            .collect();
        let f = accumulate_frame(&ev, 30_000, &p);
        assert_eq!(f.get(2, 1), -4);
        assert_eq!(f.nonzero(), vec![(2, 1, -4)]);
    }

    #[test]
    fn noise_generator_rate() {
        let p = SensorParams::default();
        let mut g = NoiseGenerator::new(1000.0, 3);
        let total: usize = (0..1000u64).map(|k| g.sample(k * 1000, (k + 1) * 1000, &p).len()).sum();
        // Poisson(1000): 5 sigma is about 160
        assert!((total as i64 - 1000).abs() < 160, "{total}");
    }
}
