//! Single-layer leaky integrate-and-fire filter over the event stream, ring
//! detection from the surviving spikes, and world-frame tracking.

mod detect;
mod track;

pub use detect::{cluster_spikes, detect_ring, fit_circle, RingDetection, RingDetector, SpikeCluster};
pub use track::{make_esr, CameraMount, update_track, EgoState, EnvironmentStateReport, ObstacleReport, RingTrack, RingTracker, TrackError, TrackParams};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{Event, SensorParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SnnError {
    #[error("input grid is {got}, layer has {want} cells")]
    DimensionMismatch { got: usize, want: usize },
    #[error("invalid spiking-layer parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SnnParams {
    /// Sensor pixels per neuron along each axis.
    pub downsample: usize,
    /// Weight of each of the 3x3 neighbourhood inputs.
    pub kernel_weight: f64,
    pub threshold: f64,
    /// Fraction of the membrane potential kept per step.
    pub leak: f64,
    pub step_us: u64,
    pub window_us: u64,
    /// Minimum spikes in the winning cluster.
    pub min_support: u32,
    /// Spiking cells closer than this (Chebyshev, in cells) join one cluster.
    pub link_radius: usize,
}

impl Default for SnnParams {
    fn default() -> Self {
        Self {
            downsample: 2,
            kernel_weight: 0.25,
            threshold: 1.0,
            leak: 0.9,
            step_us: 1000,
            window_us: 30_000,
            min_support: 12,
            link_radius: 20,
        }
    }
}

impl SnnParams {
    pub fn validate(&self) -> Result<(), SnnError> {
        if self.downsample == 0 {
            return Err(SnnError::InvalidParams("downsample must be at least 1"));
        }
        if !(self.leak > 0.0 && self.leak <= 1.0) {
            return Err(SnnError::InvalidParams("leak must lie in (0, 1]"));
        }
        if !(self.threshold > 0.0) || self.kernel_weight < 0.0 {
            return Err(SnnError::InvalidParams("threshold must be positive and weights non-negative"));
        }
        if self.step_us == 0 || self.window_us < self.step_us {
            return Err(SnnError::InvalidParams("window must cover at least one step"));
        }
        Ok(())
    }
}

/// Potentials that leak below this are flushed to exactly zero, so quiet
/// neurons drop out of the active set.
pub const REST_FLOOR: f64 = 1e-6;

/// Scalar LIF unit with reset to zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LifNeuron {
    pub v: f64,
    pub threshold: f64,
    pub leak: f64,
}

impl LifNeuron {
    pub fn new(threshold: f64, leak: f64) -> Self {
        Self { v: 0.0, threshold, leak }
    }

    /// `V <- leak*V + input`; fires and resets when `V >= threshold`.
    pub fn step(&mut self, input: f64) -> bool {
        self.v = self.leak * self.v + input;
        if self.v >= self.threshold {
            self.v = 0.0;
            true
        } else {
            if self.v < REST_FLOOR {
                self.v = 0.0;
            }
            false
        }
    }
}

/// Grid of LIF neurons, each fed by a 3x3 neighbourhood of input cells.
#[derive(Clone, Debug)]
pub struct SpikingLayer {
    pub width: usize,
    pub height: usize,
    pub params: SnnParams,
    potential: Vec<f64>,
    drive: Vec<f64>,
    // cells with non-zero potential, and a scratch membership mask
    active: Vec<usize>,
    mark: Vec<bool>,
}

impl SpikingLayer {
    pub fn new(sensor: &SensorParams, params: SnnParams) -> Result<Self, SnnError> {
        params.validate()?;
        let width = sensor.width / params.downsample;
        let height = sensor.height / params.downsample;
        Ok(Self {
            width,
            height,
            params,
            potential: vec![0.0; width * height],
            drive: vec![0.0; width * height],
            active: Vec::new(),
            mark: vec![false; width * height],
        })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn potential(&self, x: usize, y: usize) -> f64 {
        self.potential[y * self.width + x]
    }

    pub fn potentials(&self) -> &[f64] {
        &self.potential
    }

    /// Number of neurons with non-zero potential.
    pub fn active_count(&self) -> usize {
        self.active.len()
    }

    pub fn reset(&mut self) {
        self.potential.iter_mut().for_each(|v| *v = 0.0);
        self.active.clear();
    }

    /// Cell index of an event, or `None` for pixels beyond the last full cell.
    pub fn cell_of(&self, e: &Event) -> Option<usize> {
        let cx = e.x as usize / self.params.downsample;
        let cy = e.y as usize / self.params.downsample;
        (cx < self.width && cy < self.height).then(|| cy * self.width + cx)
    }

    /// Per-cell event counts, both polarities counted as excitatory.
    pub fn bin_events<'a>(&self, events: impl IntoIterator<Item = &'a Event>) -> Vec<u32> {
        let mut counts = vec![0u32; self.len()];
        for e in events {
            if let Some(i) = self.cell_of(e) {
                counts[i] += 1;
            }
        }
        counts
    }

    /// Sparse form of [`bin_events`](Self::bin_events).
    pub fn bin_events_sparse<'a>(&self, events: impl IntoIterator<Item = &'a Event>) -> Vec<(usize, u32)> {
        let mut cells: Vec<usize> = events.into_iter().filter_map(|e| self.cell_of(e)).collect();
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

    /// One timestep. Returns the raster-ordered indices of neurons that fired.
    pub fn lif_step(&mut self, input: &[u32]) -> Result<Vec<usize>, SnnError> {
        if input.len() != self.len() {
            return Err(SnnError::DimensionMismatch {
                got: input.len(),
                want: self.len(),
            });
        }
        let sparse: Vec<(usize, u32)> = input.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, &c)| (i, c)).collect();
        self.step_sparse(&sparse)
    }

    /// [`lif_step`](Self::lif_step) with the input given as `(cell, count)`
    /// pairs in strictly increasing cell order.
    pub fn step_sparse(&mut self, input: &[(usize, u32)]) -> Result<Vec<usize>, SnnError> {
        if let Some(&(i, _)) = input.iter().find(|(i, _)| *i >= self.len()) {
            return Err(SnnError::DimensionMismatch { got: i + 1, want: self.len() });
        }
        debug_assert!(input.windows(2).all(|p| p[0].0 < p[1].0));
        let (w, h) = (self.width, self.height);
        let k = self.params.kernel_weight;
        let mut cand = std::mem::take(&mut self.active);
        cand.iter().for_each(|&i| self.mark[i] = true);
        // Scatter from each active source in raster order; every target then
        // sums its neighbours in the same order a direct gather would.
        for &(src, c) in input {
            if c == 0 {
                continue;
            }
            let (sx, sy) = (src % w, src / w);
            let contrib = k * c as f64;
            for ty in sy.saturating_sub(1)..=(sy + 1).min(h - 1) {
                for tx in sx.saturating_sub(1)..=(sx + 1).min(w - 1) {
                    let t = ty * w + tx;
                    self.drive[t] += contrib;
                    if !self.mark[t] {
                        self.mark[t] = true;
                        cand.push(t);
                    }
                }
            }
        }

        let mut neuron = LifNeuron::new(self.params.threshold, self.params.leak);
        let mut fired = Vec::new();
        for &i in &cand {
            neuron.v = self.potential[i];
            if neuron.step(self.drive[i]) {
                fired.push(i);
            }
            self.potential[i] = neuron.v;
            self.drive[i] = 0.0;
            self.mark[i] = false;
            if neuron.v > 0.0 {
                self.active.push(i);
            }
        }
        fired.sort_unstable();
        Ok(fired)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn layer(w: usize, h: usize) -> SpikingLayer {
        let sensor = SensorParams {
            width: w * 2,
            height: h * 2,
            ..SensorParams::default()
        };
        SpikingLayer::new(&sensor, SnnParams::default()).unwrap()
    }

    #[test]
    fn quiet_layer_stays_at_rest() {
        let mut l = layer(5, 4);
        for _ in 0..50 {
            assert!(l.lif_step(&[0; 20]).unwrap().is_empty());
        }
        assert!(l.potentials().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_evaluated_crossing() {
        let mut n = LifNeuron::new(1.0, 0.9);
        n.v = 0.9;
        // 0.9*0.9 + 0.2 = 1.01
        assert!(n.step(0.2));
        assert_eq!(n.v, 0.0);
    }

    #[test]
    fn geometric_bound_never_fires() {
        let mut n = LifNeuron::new(1.0, 0.9);
        // w/(1-leak) = 0.99 < 1
        for _ in 0..100_000 {
            assert!(!n.step(0.099));
        }
        assert!(n.v < 0.99);
    }

    #[test]
    fn grid_dimensions_follow_downsample() {
        let l = SpikingLayer::new(&SensorParams::default(), SnnParams::default()).unwrap();
        assert_eq!((l.width, l.height), (173, 130));
        let mut l = layer(3, 3);
        assert!(matches!(l.lif_step(&[0; 8]), Err(SnnError::DimensionMismatch { .. })));
    }

    #[test]
    fn coherent_input_fires_isolated_does_not() {
        let mut l = layer(9, 9);
        let mut input = vec![0u32; 81];
        input[4 * 9 + 4] = 1;
        // a lone event every 20 steps: 0.25 / (1 - 0.9^20) < 1
        for k in 0..400 {
            let step = if k % 20 == 0 { input.clone() } else { vec![0; 81] };
            assert!(l.lif_step(&step).unwrap().is_empty());
        }
        let mut l = layer(9, 9);
        for x in 3..6 {
            input[4 * 9 + x] = 1;
        }
        let fired: usize = (0..4).map(|_| l.lif_step(&input).unwrap().len()).sum();
        assert!(fired > 0);
    }

    /// Independent per-neuron recurrence with an explicit neighbourhood gather.
    fn gather_oracle(w: usize, h: usize, v: &mut [f64], input: &[u32], p: &SnnParams) -> Vec<usize> {
        let mut fired = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let mut drive = 0.0;
                for sy in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                    for sx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                        let c = input[sy * w + sx];
                        if c > 0 {
                            drive += p.kernel_weight * c as f64;
                        }
                    }
                }
                let mut n = LifNeuron::new(p.threshold, p.leak);
                n.v = v[y * w + x];
                if n.step(drive) {
                    fired.push(y * w + x);
                }
                v[y * w + x] = n.v;
            }
        }
        fired
    }

    proptest! {
        #[test]
        fn layer_equals_scalar_recurrence(
            steps in proptest::collection::vec(proptest::collection::vec(0u32..3, 7 * 6), 1..20)
        ) {
            let mut l = layer(7, 6);
            let mut v = vec![0.0; 42];
            for input in &steps {
                let a = l.lif_step(input).unwrap();
                let b = gather_oracle(7, 6, &mut v, input, &l.params);
                prop_assert_eq!(a, b);
                prop_assert_eq!(l.potentials(), &v[..]);
                prop_assert!(l.potentials().iter().all(|&p| (0.0..l.params.threshold).contains(&p)));
                prop_assert!(l.active_count() == l.potentials().iter().filter(|&&p| p > 0.0).count());
            }
        }
    }
}
