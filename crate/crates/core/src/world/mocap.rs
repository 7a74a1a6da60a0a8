use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Attitude, DroneState};
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub attitude: Attitude,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MocapParams {
    /// Position noise standard deviation, m.
    pub sigma_position: f64,
    /// Attitude noise standard deviation, degrees.
    pub sigma_attitude_deg: f64,
}

impl Default for MocapParams {
    fn default() -> Self {
        Self {
            sigma_position: 1e-3,
            sigma_attitude_deg: 0.1,
        }
    }
}

/// Motion-capture emulator: ground-truth pose plus zero-mean Gaussian noise.
///
/// Its output feeds the low-level controller only.
#[derive(Clone, Debug)]
pub struct Mocap {
    params: MocapParams,
    rng: ChaCha8Rng,
}

impl Mocap {
    pub fn new(params: MocapParams, seed: u64) -> Self {
        Self {
            params,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn noise(&mut self, sigma: f64) -> f64 {
        if sigma > 0.0 {
            Normal::new(0.0, sigma).expect("finite sigma").sample(&mut self.rng)
        } else {
            0.0
        }
    }

    pub fn pose(&mut self, drone: &DroneState) -> Pose {
        let sp = self.params.sigma_position;
        let sa = self.params.sigma_attitude_deg.to_radians();
        let position = drone.position + Vec3::new(self.noise(sp), self.noise(sp), self.noise(sp));
        let attitude = Attitude {
            roll: drone.attitude.roll + self.noise(sa),
            pitch: drone.attitude.pitch + self.noise(sa),
            yaw: drone.attitude.yaw + self.noise(sa),
        };
        Pose { position, attitude }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_is_exact() {
        let mut m = Mocap::new(
            MocapParams {
                sigma_position: 0.0,
                sigma_attitude_deg: 0.0,
            },
            1,
        );
        let d = DroneState::at_rest(Vec3::new(1.0, 2.0, 0.5));
        let p = m.pose(&d);
        assert_eq!(p.position, d.position);
        assert_eq!(p.attitude, d.attitude);
    }

    #[test]
    fn noise_is_zero_mean() {
        let mut m = Mocap::new(MocapParams::default(), 99);
        let d = DroneState::at_rest(Vec3::new(1.0, 2.0, 0.5));
        let n = 10_000;
        let mean = (0..n).map(|_| m.pose(&d).position).sum::<Vec3>() / n as f64;
        // standard error is 1e-5 m; 0.1 mm is ten of them
        assert!((mean - d.position).abs().max() < 1e-4);
    }
}
