use super::{evaluate, AccelCheck, DroneCapabilities, FeasibilityQuery};
use crate::intent::GoNoGo;
use crate::snn::EnvironmentStateReport;
use crate::Vec3;

/// What the monitor sees on one control tick.
#[derive(Clone, Copy, Debug)]
pub struct MonitorInput<'a> {
    /// µs.
    pub now: u64,
    pub position: Vec3,
    pub speed: f64,
    /// Current predicted crossing point.
    pub crossing_point: Vec3,
    pub esr: Option<&'a EnvironmentStateReport>,
    /// The crossing point is frozen and the drone is on final approach.
    pub committed: bool,
}

/// Re-runs the feasibility check every tick and latches the first no-go.
#[derive(Clone, Debug)]
pub struct FeasibilityMonitor {
    pub caps: DroneCapabilities,
    pub mode: AccelCheck,
    /// Reports older than this are a sensing timeout, µs.
    pub stale_us: u64,
    latched: Option<GoNoGo>,
    last_query: Option<FeasibilityQuery>,
}

impl FeasibilityMonitor {
    pub fn new(caps: DroneCapabilities, mode: AccelCheck, stale_us: u64) -> Self {
        Self {
            caps,
            mode,
            stale_us,
            latched: None,
            last_query: None,
        }
    }

    pub fn is_latched(&self) -> bool {
        self.latched.is_some()
    }

    pub fn last_query(&self) -> Option<&FeasibilityQuery> {
        self.last_query.as_ref()
    }

    /// Forces a no-go, e.g. an operator abort.
    pub fn abort(&mut self, reason: impl Into<String>) -> GoNoGo {
        self.latched.get_or_insert_with(|| GoNoGo::no_go(reason)).clone()
    }

    /// Once the drone has committed to the frozen crossing point the check
    /// is no longer re-run: aborting inside the gap is worse than finishing.
    pub fn tick(&mut self, input: &MonitorInput) -> GoNoGo {
        if let Some(nogo) = &self.latched {
            return nogo.clone();
        }
        if input.committed {
            return GoNoGo::go("committed to crossing");
        }
        let esr = match input.esr {
            Some(e) if e.age_us(input.now) <= self.stale_us => e,
            _ => return self.abort("sensing timeout: environment report is stale"),
        };
        let q = FeasibilityQuery {
            p_src: input.position,
            p_dest: input.crossing_point,
            v0: input.speed,
            v_max: self.caps.v_max,
            a_max: self.caps.a_max,
            t: esr.time_to_collision,
        };
        self.last_query = Some(q);
        match evaluate(&q, self.mode) {
            Ok(v) if v.is_feasible() => GoNoGo::go(v.reason()),
            Ok(v) => self.abort(v.reason()),
            Err(e) => self.abort(e.to_string()),
        }
    }
}
