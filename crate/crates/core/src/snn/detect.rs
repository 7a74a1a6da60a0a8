use std::collections::VecDeque;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{SnnError, SnnParams, SpikingLayer};
use crate::event::{Event, SensorParams};

/// Ring observation in sensor pixel coordinates. `t` is the mean time of the
/// cluster's spikes, the instant the averaged centroid best represents.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingDetection {
    pub centroid: (f64, f64),
    pub radius: f64,
    /// Share of the window's spikes that belong to the ring cluster.
    pub confidence: f64,
    pub t: u64,
    pub support: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpikeCluster {
    /// `(cell, spikes)` in raster order.
    pub cells: Vec<(usize, u32)>,
    pub spikes: u32,
    pub min_row: usize,
}

/// Groups spiking cells whose Chebyshev distance is at most `link_radius`.
/// With `link_radius = 1` this is 8-connected components. Clusters are
/// returned ordered by their first cell in raster order.
pub fn cluster_spikes(counts: &[(usize, u32)], width: usize, height: usize, link_radius: usize) -> Vec<SpikeCluster> {
    let mut label = vec![usize::MAX; width * height];
    let mut count = vec![0u32; width * height];
    for &(i, c) in counts {
        count[i] += c;
    }
    let r = link_radius.max(1);
    let mut clusters = Vec::new();
    let mut stack = Vec::new();
    let mut seeds: Vec<usize> = counts.iter().map(|&(i, _)| i).collect();
    seeds.sort_unstable();
    seeds.dedup();
    for seed in seeds {
        if label[seed] != usize::MAX {
            continue;
        }
        let id = clusters.len();
        label[seed] = id;
        stack.push(seed);
        let mut cells = Vec::new();
        while let Some(i) = stack.pop() {
            cells.push((i, count[i]));
            let (x, y) = (i % width, i / width);
            for ny in y.saturating_sub(r)..=(y + r).min(height - 1) {
                for nx in x.saturating_sub(r)..=(x + r).min(width - 1) {
                    let j = ny * width + nx;
                    if count[j] > 0 && label[j] == usize::MAX {
                        label[j] = id;
                        stack.push(j);
                    }
                }
            }
        }
        cells.sort_unstable();
        clusters.push(SpikeCluster {
            spikes: cells.iter().map(|c| c.1).sum(),
            min_row: cells[0].0 / width,
            cells,
        });
    }
    clusters
}

/// Weighted algebraic circle fit: minimises `sum w (x² + y² + a x + b y + c)²`.
/// Returns `(cx, cy)`, or `None` when the points do not pin down a circle.
pub fn fit_circle(points: &[(f64, f64, f64)]) -> Option<(f64, f64)> {
    let w: f64 = points.iter().map(|p| p.2).sum();
    if points.len() < 3 || w <= 0.0 {
        return None;
    }
    // centre the data for conditioning
    let mx = points.iter().map(|p| p.0 * p.2).sum::<f64>() / w;
    let my = points.iter().map(|p| p.1 * p.2).sum::<f64>() / w;
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for &(x, y, wt) in points {
        let (x, y) = (x - mx, y - my);
        let row = Vector3::new(x, y, 1.0);
        ata += row * row.transpose() * wt;
        atb += row * (-(x * x + y * y) * wt);
    }
    let sol = ata.lu().solve(&atb)?;
    let (cx, cy) = (-sol[0] / 2.0 + mx, -sol[1] / 2.0 + my);
    (cx.is_finite() && cy.is_finite()).then_some((cx, cy))
}

fn summarise(cluster: &SpikeCluster, total: u32, width: usize, ds: usize, t: u64) -> RingDetection {
    let points: Vec<(f64, f64, f64)> = cluster
        .cells
        .iter()
        .map(|&(i, c)| (((i % width) as f64 + 0.5) * ds as f64, ((i / width) as f64 + 0.5) * ds as f64, c as f64))
        .collect();
    let n = cluster.spikes as f64;
    let mean = (
        points.iter().map(|p| p.0 * p.2).sum::<f64>() / n,
        points.iter().map(|p| p.1 * p.2).sum::<f64>() / n,
    );
    // A plain spike mean is pulled towards whichever arc fired more in the
    // window; the circle fit is not. Fall back to the mean when the fit
    // wanders off the cluster.
    let spread = points.iter().map(|p| (p.0 - mean.0).hypot(p.1 - mean.1) * p.2).sum::<f64>() / n;
    let (cx, cy) = fit_circle(&points)
        .filter(|c| (c.0 - mean.0).hypot(c.1 - mean.1) <= spread)
        .unwrap_or(mean);
    let radius = points.iter().map(|p| (p.0 - cx).hypot(p.1 - cy) * p.2).sum::<f64>() / n;
    RingDetection {
        centroid: (cx, cy),
        radius,
        confidence: n / total as f64,
        t,
        support: cluster.spikes,
    }
}

/// Streaming detector: a persistent spiking layer fed in event-time order,
/// with the spikes of the trailing window kept for clustering.
#[derive(Clone, Debug)]
pub struct RingDetector {
    layer: SpikingLayer,
    /// End of the last completed step, µs.
    clock: u64,
    pending: VecDeque<Event>,
    spikes: VecDeque<(u64, usize)>,
    width: usize,
    height: usize,
}

impl RingDetector {
    /// Detector whose first step covers `(t_start, t_start + step]`.
    pub fn new(sensor: &SensorParams, params: SnnParams, t_start: u64) -> Result<Self, SnnError> {
        let layer = SpikingLayer::new(sensor, params)?;
        Ok(Self {
            width: layer.width,
            height: layer.height,
            layer,
            clock: t_start,
            pending: VecDeque::new(),
            spikes: VecDeque::new(),
        })
    }

    pub fn params(&self) -> &SnnParams {
        &self.layer.params
    }

    pub fn layer(&self) -> &SpikingLayer {
        &self.layer
    }

    /// Queues events; they must not precede events already pushed. Events at
    /// or before the detector clock are discarded.
    pub fn push(&mut self, events: &[Event]) {
        let clock = self.clock;
        self.pending.extend(events.iter().filter(|e| e.t > clock));
    }

    /// Runs every step that ends at or before `t`.
    pub fn advance_to(&mut self, t: u64) {
        let step = self.layer.params.step_us;
        while self.clock + step <= t {
            let end = self.clock + step;
            let mut n = 0;
            while n < self.pending.len() && self.pending[n].t <= end {
                n += 1;
            }
            let batch: Vec<Event> = self.pending.drain(..n).collect();
            let input = self.layer.bin_events_sparse(&batch);
            let fired = self.layer.step_sparse(&input).expect("cells come from the layer");
            self.spikes.extend(fired.into_iter().map(|c| (end, c)));
            self.clock = end;
        }
        let horizon = self.clock.saturating_sub(self.layer.params.window_us);
        while self.spikes.front().is_some_and(|s| s.0 <= horizon) {
            self.spikes.pop_front();
        }
    }

    /// Per-cell spike counts over `(clock - window, clock]`, raster order.
    pub fn window_spikes(&self) -> Vec<(usize, u32)> {
        let mut cells: Vec<usize> = self.spikes.iter().map(|s| s.1).collect();
        cells.sort_unstable();
        let mut out: Vec<(usize, u32)> = Vec::new();
        for c in cells {
            match out.last_mut() {
                Some((last, n)) if *last == c => *n += 1,
                _ => out.push((c, 1)),
            }
        }
        out
    }

    /// Advances to `t` and looks for the ring in the trailing window.
    pub fn detect(&mut self, t: u64) -> Option<RingDetection> {
        self.advance_to(t);
        let counts = self.window_spikes();
        let total: u32 = counts.iter().map(|c| c.1).sum();
        if total == 0 {
            return None;
        }
        let p = self.layer.params;
        let best = cluster_spikes(&counts, self.width, self.height, p.link_radius)
            .into_iter()
            .min_by(|a, b| {
                b.cells
                    .len()
                    .cmp(&a.cells.len())
                    .then(b.spikes.cmp(&a.spikes))
                    .then(a.min_row.cmp(&b.min_row))
            })?;
        if best.spikes < p.min_support {
            return None;
        }
        let mut member = vec![false; self.width * self.height];
        best.cells.iter().for_each(|&(i, _)| member[i] = true);
        let t_sum: f64 = self.spikes.iter().filter(|s| member[s.1]).map(|s| s.0 as f64).sum();
        let t_mean = (t_sum / best.spikes as f64).round() as u64;
        let det = summarise(&best, total, self.width, p.downsample, t_mean);
        (det.radius > 0.0).then_some(det)
    }
}

/// Runs a fresh spiking layer over the events in `(t_end - window, t_end]`.
pub fn detect_ring(events: &[Event], t_end: u64, sensor: &SensorParams, params: &SnnParams) -> Option<RingDetection> {
    let start = t_end.saturating_sub(params.window_us);
    let mut det = RingDetector::new(sensor, *params, start).ok()?;
    let lo = events.partition_point(|e| e.t <= start);
    let hi = events.partition_point(|e| e.t <= t_end);
    det.push(&events[lo..hi]);
    det.detect(t_end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Polarity;

    #[test]
    fn empty_window_detects_nothing() {
        let s = SensorParams::default();
        assert!(detect_ring(&[], 30_000, &s, &SnnParams::default()).is_none());
    }

    #[test]
    fn components_and_tie_break() {
        // two 2-cell blobs on a 10x10 grid; the lower one carries more spikes
        let counts = vec![(11, 1), (12, 1), (71, 3), (72, 1)];
        let cl = cluster_spikes(&counts, 10, 10, 1);
        assert_eq!(cl.len(), 2);
        assert_eq!(cl[1].spikes, 4);
        let linked = cluster_spikes(&counts, 10, 10, 6);
        assert_eq!(linked.len(), 1);
    }

    #[test]
    fn synthetic_circle_of_events() {
        let s = SensorParams::default();
        let (cx, cy, r) = (150.0, 120.0, 28.0);
        let mut events = Vec::new();
        for ms in 1..=30u64 {
            for k in 0..180 {
                let a = k as f64 * std::f64::consts::TAU / 180.0;
                events.push(Event {
                    x: (cx + r * a.cos()) as u16,
                    y: (cy + r * a.sin()) as u16,
                    t: ms * 1000,
                    p: Polarity::On,
                });
            }
        }
        events.sort_by_key(|e| (e.t, e.y, e.x));
        let d = detect_ring(&events, 30_000, &s, &SnnParams::default()).expect("ring");
        assert!((d.centroid.0 - cx).abs() < 1.5 && (d.centroid.1 - cy).abs() < 1.5, "{d:?}");
        assert!((d.radius - r).abs() < 2.5);
        assert!(d.confidence > 0.99);
    }

    #[test]
    fn streaming_equals_fresh_when_started_together() {
        let s = SensorParams::default();
        let p = SnnParams::default();
        let events: Vec<Event> = (1..=60u64)
            .flat_map(|ms| {
                (0..40u16).map(move |i| Event {
                    x: 100 + i,
                    y: 80 + (i % 3),
                    t: ms * 1000,
                    p: Polarity::Off,
                })
            })
            .collect();
        let mut d = RingDetector::new(&s, p, 0).unwrap();
        d.push(&events[..events.len() / 2]);
        d.advance_to(20_000);
        d.push(&events[events.len() / 2..]);
        let a = d.detect(60_000);
        let mut d2 = RingDetector::new(&s, p, 0).unwrap();
        d2.push(&events);
        assert_eq!(a, d2.detect(60_000));
    }
}
