use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::control::{FlightPhase, RefState};
use crate::event::{write_events_binary, Event};
use crate::snn::RingDetection;
use crate::world::{RotorCommand, StateSnapshot};
use crate::Vec3;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const CONTROL_FILE: &str = "control.csv";
pub const DETECTIONS_FILE: &str = "detections.csv";
pub const AUDIT_FILE: &str = "planner_audit.jsonl";
pub const EVENTS_FILE: &str = "events.bin";
pub const SUMMARY_FILE: &str = "summary.json";

const TRAJECTORY_HEADER: &str = "time,drone_x,drone_y,drone_z,ring_x,ring_y,ring_z,phase\n";
const CONTROL_HEADER: &str = "time,phase,set_x,set_y,set_z,meas_x,meas_y,meas_z,thrust,roll,pitch,yaw_rate,energy,go_nogo\n";
const DETECTIONS_HEADER: &str = "t_us,u,v,radius,confidence,support\n";

/// Everything a run writes, held in memory until [`RunLogs::write_to`].
/// Floats use Rust's shortest round-trip formatting, so re-parsing the
/// text recovers the simulated values exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct RunLogs {
    pub trajectory: String,
    pub control: String,
    pub detections: String,
    pub audit: String,
    pub events: Vec<u8>,
    pub event_count: u64,
}

impl Default for RunLogs {
    fn default() -> Self {
        Self {
            trajectory: TRAJECTORY_HEADER.into(),
            control: CONTROL_HEADER.into(),
            detections: DETECTIONS_HEADER.into(),
            audit: String::new(),
            events: Vec::new(),
            event_count: 0,
        }
    }
}

fn xyz(v: &Vec3) -> String {
    format!("{},{},{}", v.x, v.y, v.z)
}

impl RunLogs {
    pub fn trajectory_row(&mut self, s: &StateSnapshot, phase: FlightPhase) {
        let _ = writeln!(
            self.trajectory,
            "{},{},{},{}",
            s.time,
            xyz(&s.drone_position),
            xyz(&s.ring_center),
            phase.name()
        );
    }

    #[allow(clippy::too_many_arguments)]
    pub fn control_row(
        &mut self,
        time: f64,
        phase: FlightPhase,
        setpoint: &RefState,
        measured: &Vec3,
        cmd: &RotorCommand,
        energy: f64,
        go_nogo: &str,
    ) {
        let _ = writeln!(
            self.control,
            "{time},{},{},{},{},{},{},{},{energy},{go_nogo}",
            phase.name(),
            xyz(&setpoint.position),
            xyz(measured),
            cmd.thrust,
            cmd.roll,
            cmd.pitch,
            cmd.yaw_rate
        );
    }

    pub fn detection_row(&mut self, d: &RingDetection) {
        let _ = writeln!(
            self.detections,
            "{},{},{},{},{},{}",
            d.t, d.centroid.0, d.centroid.1, d.radius, d.confidence, d.support
        );
    }

    pub fn audit_record<T: Serialize>(&mut self, record: &T) {
        self.audit.push_str(&serde_json::to_string(record).expect("audit record serialises"));
        self.audit.push('\n');
    }

    pub fn push_events(&mut self, events: &[Event]) {
        write_events_binary(&mut self.events, events).expect("writing to memory");
        self.event_count += events.len() as u64;
    }

    fn files(&self) -> [(&'static str, &[u8]); 5] {
        [
            (TRAJECTORY_FILE, self.trajectory.as_bytes()),
            (CONTROL_FILE, self.control.as_bytes()),
            (DETECTIONS_FILE, self.detections.as_bytes()),
            (AUDIT_FILE, self.audit.as_bytes()),
            (EVENTS_FILE, &self.events),
        ]
    }

    /// SHA-256 of every log file, hex encoded, keyed by file name.
    pub fn digests(&self) -> BTreeMap<String, String> {
        self.files()
            .iter()
            .map(|(name, bytes)| (name.to_string(), sha256_hex(bytes)))
            .collect()
    }

    /// Writes the logs plus `summary` as pretty JSON into `dir`.
    pub fn write_to<S: Serialize>(&self, dir: &Path, summary: &S) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        for (name, bytes) in self.files() {
            fs::write(dir.join(name), bytes)?;
        }
        let mut text = serde_json::to_string_pretty(summary).map_err(io::Error::other)?;
        text.push('\n');
        fs::write(dir.join(SUMMARY_FILE), text)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// One row of `trajectory.csv`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub time: f64,
    pub drone: Vec3,
    pub ring: Vec3,
}

/// Parses `trajectory.csv` back, for post-hoc checks.
pub fn parse_trajectory(text: &str) -> Result<Vec<(TrajectoryRow, String)>, String> {
    text.lines()
        .skip(1)
        .enumerate()
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 8 {
                return Err(format!("line {}: expected 8 columns", i + 2));
            }
            let num = |k: usize| cols[k].parse::<f64>().map_err(|e| format!("line {}: {e}", i + 2));
            Ok((
                TrajectoryRow {
                    time: num(0)?,
                    drone: Vec3::new(num(1)?, num(2)?, num(3)?),
                    ring: Vec3::new(num(4)?, num(5)?, num(6)?),
                },
                cols[7].to_string(),
            ))
        })
        .collect()
}
