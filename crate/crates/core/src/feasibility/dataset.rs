use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{evaluate, AccelCheck, DroneCapabilities, FeasibilityError};
use crate::intent::{derive_query, CommandGrammar, ManeuverKind, ManeuverSpec};
use crate::par::{map_range, Exec};
use crate::snn::{EgoState, EnvironmentStateReport, ObstacleReport};
use crate::world::RoomBounds;
use crate::Vec3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub train_n: usize,
    pub test_n: usize,
    pub room: RoomBounds,
    pub capabilities: DroneCapabilities,
    /// Time-to-collision range, s.
    pub t_range: (f64, f64),
    /// Obstacle speed range along the cable, m/s; direction is random.
    pub obstacle_speed_range: (f64, f64),
    pub mode: AccelCheck,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            train_n: 5000,
            test_n: 1000,
            room: RoomBounds::default(),
            capabilities: DroneCapabilities::default(),
            t_range: (0.5, 8.0),
            obstacle_speed_range: (0.05, 0.5),
            mode: AccelCheck::Signed,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<(), FeasibilityError> {
        self.capabilities.validate()?;
        let (t0, t1) = self.t_range;
        if !(t0 > 0.0 && t0 < t1 && t1.is_finite()) {
            return Err(FeasibilityError::InvalidQuery("t_range must be 0 < lo < hi"));
        }
        let (s0, s1) = self.obstacle_speed_range;
        if !(s0 >= 0.0 && s0 <= s1 && s1.is_finite()) {
            return Err(FeasibilityError::InvalidQuery("obstacle_speed_range must be 0 <= lo <= hi"));
        }
        if !(0..3).all(|i| self.room.min[i] < self.room.max[i]) {
            return Err(FeasibilityError::InvalidQuery("room bounds are empty"));
        }
        Ok(())
    }
}

/// One labelled example: `label` is 1 for go, 0 for no-go.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSample {
    pub prompt: String,
    pub maneuver: ManeuverKind,
    pub esr: EnvironmentStateReport,
    pub capabilities: DroneCapabilities,
    pub label: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<DatasetSample>,
    pub test: Vec<DatasetSample>,
}

// Each sample owns a disjoint slice of its split's ChaCha stream, so samples
// can be drawn in any order.
const WORDS_PER_SAMPLE: u128 = 1 << 16;

fn uniform_in(rng: &mut ChaCha8Rng, room: &RoomBounds) -> Vec3 {
    Vec3::from_fn(|i, _| rng.random_range(room.min[i]..=room.max[i]))
}

fn draw_sample(cfg: &DatasetConfig, grammar: &CommandGrammar, seed: u64, stream: u64, index: usize) -> DatasetSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(index as u128 * WORDS_PER_SAMPLE);

    let kind = ManeuverKind::ALL[rng.random_range(0..3)];
    let prompt = grammar.sample_prompt(kind, &mut rng);
    let caps = cfg.capabilities;
    let src = uniform_in(&mut rng, &cfg.room);
    let dest = uniform_in(&mut rng, &cfg.room);
    let v0 = rng.random_range(0.0..=caps.v_max);
    let t = rng.random_range(cfg.t_range.0..=cfg.t_range.1);
    let speed = rng.random_range(cfg.obstacle_speed_range.0..=cfg.obstacle_speed_range.1);
    let velocity = Vec3::x() * if rng.random_bool(0.5) { speed } else { -speed };
    let spec = ManeuverSpec::new(kind);
    // place the obstacle so the derived destination lands on `dest`
    let position = dest - spec.lateral_offset() - velocity * t;
    let esr = EnvironmentStateReport {
        obstacle_count: 1,
        obstacles: vec![ObstacleReport { position, velocity }],
        time_to_collision: t,
        timestamp: 0,
        ego: Some(EgoState { position: src, speed: v0 }),
    };
    let query = derive_query(&spec, &esr, &caps).expect("report has ego and obstacle");
    let label = evaluate(&query, cfg.mode).expect("query drawn within its invariants").is_feasible();
    DatasetSample {
        prompt,
        maneuver: kind,
        esr,
        capabilities: caps,
        label: label as u8,
    }
}

/// Train samples come from ChaCha stream 0 and test samples from stream 1
/// of the same seed.
pub fn generate_dataset(cfg: &DatasetConfig, seed: u64, exec: Exec) -> Result<DatasetSplit, FeasibilityError> {
    cfg.validate()?;
    let grammar = CommandGrammar::default();
    let split = |stream: u64, n: usize| map_range(exec, n, |i| draw_sample(cfg, &grammar, seed, stream, i));
    Ok(DatasetSplit {
        train: split(0, cfg.train_n),
        test: split(1, cfg.test_n),
    })
}

/// One JSON object per line.
pub fn write_jsonl<W: Write>(mut w: W, samples: &[DatasetSample]) -> io::Result<()> {
    for s in samples {
        serde_json::to_writer(&mut w, s).map_err(io::Error::other)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DatasetConfig {
        DatasetConfig {
            train_n: 300,
            test_n: 100,
            ..DatasetConfig::default()
        }
    }

    #[test]
    fn sizes_classes_and_determinism() {
        let a = generate_dataset(&small(), 42, Exec::Parallel).unwrap();
        assert_eq!((a.train.len(), a.test.len()), (300, 100));
        let pos = a.train.iter().filter(|s| s.label == 1).count();
        assert!(pos > 0 && pos < 300, "{pos}");
        assert_eq!(a, generate_dataset(&small(), 42, Exec::Sequential).unwrap());
        assert_ne!(a.train, generate_dataset(&small(), 43, Exec::Sequential).unwrap().train);
    }

    #[test]
    fn prefix_stable_and_splits_differ() {
        let a = generate_dataset(&small(), 7, Exec::Sequential).unwrap();
        let b = generate_dataset(
            &DatasetConfig {
                train_n: 50,
                test_n: 10,
                ..small()
            },
            7,
            Exec::Sequential,
        )
        .unwrap();
        assert_eq!(&a.train[..50], &b.train[..]);
        assert_ne!(a.train[0], a.test[0]);
    }

    #[test]
    fn jsonl_one_record_per_line() {
        let a = generate_dataset(&small(), 1, Exec::Sequential).unwrap();
        let mut out = Vec::new();
        write_jsonl(&mut out, &a.test).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 100);
        let back: DatasetSample = serde_json::from_str(lines[3]).unwrap();
        assert_eq!(back, a.test[3]);
    }

    #[test]
    fn bad_ranges_rejected() {
        let cfg = DatasetConfig {
            t_range: (0.0, 8.0),
            ..DatasetConfig::default()
        };
        assert!(generate_dataset(&cfg, 0, Exec::Sequential).is_err());
    }
}
