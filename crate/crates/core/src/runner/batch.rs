use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{BatchKind, ConfigError, ScenarioConfig, ScriptedCommand};
use super::engine::{run_scenario, Outcome, ScenarioResult};
use super::logs::parse_trajectory;
use crate::control::{is_valid_sequence, FlightPhase};
use crate::geometry::approach_axis;
use crate::intent::ManeuverKind;
use crate::par::{self, Exec};
use crate::world::torus_surface_distance;

/// Derives run `index` of a batch from the base config. The ring cruises
/// at a random speed and direction and would reach the drone's line
/// `lead` seconds after the command; drone and ring start symmetric about
/// the room's centre line. The maneuver is drawn uniformly from the three
/// commands.
pub fn scenario_for_run(base: &ScenarioConfig, index: usize, seed: u64) -> (ScenarioConfig, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    let b = &base.batch;
    let speed = rng.random_range(b.speed_range.0..=b.speed_range.1);
    let direction = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let kind = ManeuverKind::ALL[rng.random_range(0..ManeuverKind::ALL.len())];
    let (lo, hi) = match b.kind {
        BatchKind::Feasible => b.lead_range,
        BatchKind::Infeasible => b.infeasible_lead_range,
    };
    let lead = rng.random_range(lo..=hi);
    let run_seed = rng.next_u64();

    let mut cfg = base.clone();
    let mid = 0.5 * (base.room.min.x + base.room.max.x);
    let travel = speed * (b.command_time + lead);
    cfg.ring.drive_speed = speed;
    cfg.ring.direction = direction;
    cfg.ring.start_x = mid - direction * 0.5 * travel;
    cfg.flight.start.x = mid + direction * 0.5 * travel;
    cfg.commands = vec![ScriptedCommand {
        at: b.command_time,
        text: kind.command().to_string(),
    }];
    cfg.seed = run_seed;
    (cfg, run_seed)
}

/// Post-hoc geometric check of a logged trajectory: the drone's bounding
/// sphere stays clear of the ring's torus on every row.
pub fn collision_free(trajectory_csv: &str, cfg: &ScenarioConfig) -> Result<bool, String> {
    let rows = parse_trajectory(trajectory_csv)?;
    Ok(rows.iter().all(|(r, _)| {
        torus_surface_distance(&r.drone, &r.ring, &approach_axis(), cfg.ring.ring_radius, cfg.ring.tube_radius)
            > cfg.drone.bounding_radius
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchRow {
    pub index: usize,
    pub seed: u64,
    pub maneuver: ManeuverKind,
    pub drive_speed: f64,
    pub direction: f64,
    pub outcome: Outcome,
    pub response_text: Option<String>,
    pub energy: f64,
    pub start_delay: Option<f64>,
    pub abort_latency: Option<f64>,
    pub phases: Vec<FlightPhase>,
    pub valid_phase_sequence: bool,
    pub min_clearance: f64,
    /// Drone crossing minus ring arrival, s.
    pub sync_error: Option<f64>,
    /// Collision-free according to the logged trajectory.
    pub certified: bool,
    /// A no-go appears in the run's decision log.
    pub logged_nogo: bool,
    pub diagnostics: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub n: usize,
    pub seed: u64,
    pub rows: Vec<BatchRow>,
    pub counts: BTreeMap<Outcome, usize>,
    pub success_rate: f64,
    /// J.
    pub mean_energy: f64,
    /// Over runs that aborted, s.
    pub mean_abort_latency: Option<f64>,
}

impl BatchSummary {
    pub fn count(&self, outcome: Outcome) -> usize {
        self.counts.get(&outcome).copied().unwrap_or(0)
    }

    /// Plain-text table: one line per run, then the totals.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>3} {:>20} {:<14} {:>6} {:>4} {:<9} {:>8} {:>6} {:>7}",
            "run", "seed", "maneuver", "speed", "dir", "outcome", "energy", "delay", "sync"
        );
        for r in &self.rows {
            let opt = |v: Option<f64>, scale: f64| v.map_or("-".to_string(), |v| format!("{:.0}", v * scale));
            let _ = writeln!(
                s,
                "{:>3} {:>20} {:<14} {:>6.3} {:>4} {:<9} {:>8.1} {:>6} {:>7}",
                r.index,
                r.seed,
                format!("{:?}", r.maneuver),
                r.drive_speed,
                if r.direction > 0.0 { "+x" } else { "-x" },
                r.outcome.name(),
                r.energy,
                opt(r.start_delay, 1e3),
                opt(r.sync_error, 1e3),
            );
        }
        let _ = writeln!(s, "delay and sync in ms");
        let counts: Vec<String> = Outcome::ALL
            .iter()
            .map(|o| format!("{} {}", o.name(), self.count(*o)))
            .collect();
        let _ = writeln!(s, "runs {}: {}", self.n, counts.join(", "));
        let _ = writeln!(s, "success rate {:.1}%", 100.0 * self.success_rate);
        let _ = writeln!(s, "mean energy {:.1} J", self.mean_energy);
        match self.mean_abort_latency {
            Some(l) => {
                let _ = writeln!(s, "mean abort latency {:.1} ms", l * 1e3);
            }
            None => {
                let _ = writeln!(s, "mean abort latency n/a");
            }
        }
        s
    }
}

fn row(index: usize, cfg: &ScenarioConfig, res: &ScenarioResult, certified: bool) -> BatchRow {
    let phases = res.phase_sequence();
    BatchRow {
        index,
        seed: res.seed,
        maneuver: res.maneuver.unwrap_or(ManeuverKind::ThroughCenter),
        drive_speed: cfg.ring.drive_speed,
        direction: cfg.ring.direction,
        outcome: res.outcome,
        response_text: res.response_text.clone(),
        energy: res.energy,
        start_delay: res.start_delay,
        abort_latency: res.abort_latency,
        valid_phase_sequence: is_valid_sequence(&phases),
        phases,
        min_clearance: res.min_clearance,
        sync_error: res.crossing.and_then(|c| c.sync_error()),
        certified,
        logged_nogo: res.go_nogo.iter().any(|g| g.decision == crate::intent::Decision::NoGo),
        diagnostics: res.diagnostics.clone(),
    }
}

/// Runs `n` randomised scenarios derived from `cfg` and `seed`. When `out`
/// is given each run's logs go to `out/run_<index>`.
pub fn run_batch_logged(
    cfg: &ScenarioConfig,
    n: usize,
    seed: u64,
    exec: Exec,
    out: Option<&Path>,
) -> Result<BatchSummary, ConfigError> {
    cfg.validate()?;
    let rows: Vec<Result<BatchRow, ConfigError>> = par::map_range(exec, n, |i| {
        let (run_cfg, run_seed) = scenario_for_run(cfg, i, seed);
        let mut run = run_scenario(&run_cfg, run_seed)?;
        let certified = collision_free(&run.logs.trajectory, &run_cfg).map_err(ConfigError::Invalid)?;
        if let Some(dir) = out {
            run.write_to(&dir.join(format!("run_{i:03}")))
                .map_err(|e: io::Error| ConfigError::Io {
                    path: dir.display().to_string(),
                    source: e,
                })?;
        }
        Ok(row(i, &run_cfg, &run.result, certified))
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut counts = BTreeMap::new();
    for o in Outcome::ALL {
        counts.insert(o, rows.iter().filter(|r| r.outcome == o).count());
    }
    let latencies: Vec<f64> = rows.iter().filter_map(|r| r.abort_latency).collect();
    Ok(BatchSummary {
        n,
        seed,
        success_rate: if n == 0 { 0.0 } else { counts[&Outcome::Success] as f64 / n as f64 },
        mean_energy: if n == 0 { 0.0 } else { rows.iter().map(|r| r.energy).sum::<f64>() / n as f64 },
        mean_abort_latency: (!latencies.is_empty()).then(|| latencies.iter().sum::<f64>() / latencies.len() as f64),
        counts,
        rows,
    })
}

pub fn run_batch(cfg: &ScenarioConfig, n: usize, seed: u64, exec: Exec) -> Result<BatchSummary, ConfigError> {
    run_batch_logged(cfg, n, seed, exec, None)
}
