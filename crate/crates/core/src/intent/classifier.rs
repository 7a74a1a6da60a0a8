use std::io::{BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CommandGrammar, GoNoGo, ManeuverSpec};
use crate::feasibility::{evaluate, AccelCheck, DroneCapabilities, FeasibilityQuery};
use crate::service::wire::{read_frame, write_frame};
use crate::snn::EnvironmentStateReport;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("report carries no ego state")]
    NoEgo,
    #[error("no obstacle tracked")]
    NoObstacle,
}

/// Builds the feasibility query for `spec`: from the ego state to where the
/// nearest obstacle will be after the reported time to collision, shifted
/// by the maneuver's lateral offset.
pub fn derive_query(
    spec: &ManeuverSpec,
    esr: &EnvironmentStateReport,
    caps: &DroneCapabilities,
) -> Result<FeasibilityQuery, QueryError> {
    let ego = esr.ego.ok_or(QueryError::NoEgo)?;
    let t = esr.time_to_collision;
    let obstacle = esr
        .obstacles
        .iter()
        .min_by(|a, b| {
            let da = (a.position - ego.position).norm();
            let db = (b.position - ego.position).norm();
            da.total_cmp(&db)
        })
        .ok_or(QueryError::NoObstacle)?;
    Ok(FeasibilityQuery {
        p_src: ego.position,
        p_dest: obstacle.position + obstacle.velocity * t + spec.lateral_offset(),
        v0: ego.speed,
        v_max: caps.v_max,
        a_max: caps.a_max,
        t,
    })
}

/// The request record an external classifier receives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierRequest {
    pub prompt: String,
    pub esr: EnvironmentStateReport,
    pub capabilities: DroneCapabilities,
}

/// Go/no-go policy over a prompt and the current environment report.
/// Implementations are called from the simulation thread one command at a
/// time, but must be shareable with the service layer.
pub trait IntentClassifier: Send + Sync {
    fn classify(&self, request: &ClassifierRequest) -> GoNoGo;
}

/// Grammar parse followed by the feasibility check on the derived query.
#[derive(Clone, Debug, Default)]
pub struct GrammarClassifier {
    pub grammar: CommandGrammar,
    pub mode: AccelCheck,
}

impl IntentClassifier for GrammarClassifier {
    fn classify(&self, req: &ClassifierRequest) -> GoNoGo {
        let spec = match self.grammar.parse(&req.prompt) {
            Ok(s) => s,
            Err(e) => return GoNoGo::no_go(format!("parse failure: {e}")),
        };
        let query = match derive_query(&spec, &req.esr, &req.capabilities) {
            Ok(q) => q,
            Err(e) => return GoNoGo::no_go(e.to_string()),
        };
        match evaluate(&query, self.mode) {
            Ok(v) if v.is_feasible() => GoNoGo::go(v.reason()),
            Ok(v) => GoNoGo::no_go(v.reason()),
            Err(e) => GoNoGo::no_go(e.to_string()),
        }
    }
}

pub fn classify_go_nogo(prompt: &str, esr: &EnvironmentStateReport, caps: &DroneCapabilities) -> GoNoGo {
    GrammarClassifier::default().classify(&ClassifierRequest {
        prompt: prompt.to_string(),
        esr: esr.clone(),
        capabilities: *caps,
    })
}

/// Forwards each request to a model server speaking the length-prefixed
/// frame protocol. Any transport failure is a no-go.
#[derive(Clone, Debug)]
pub struct ExternalClassifier {
    pub address: String,
    pub timeout: Duration,
}

impl ExternalClassifier {
    pub fn new(address: impl Into<String>) -> Self {
        Self {
            address: address.into(),
            timeout: Duration::from_secs(5),
        }
    }

    fn call(&self, req: &ClassifierRequest) -> std::io::Result<GoNoGo> {
        let addr = self
            .address
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::NotFound, "no address"))?;
        let stream = TcpStream::connect_timeout(&addr, self.timeout)?;
        stream.set_read_timeout(Some(self.timeout))?;
        stream.set_write_timeout(Some(self.timeout))?;
        let mut w = BufWriter::new(stream.try_clone()?);
        write_frame(&mut w, req)?;
        w.flush()?;
        read_frame(&mut BufReader::new(stream))?
            .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "server closed"))
    }
}

impl IntentClassifier for ExternalClassifier {
    fn classify(&self, req: &ClassifierRequest) -> GoNoGo {
        self.call(req)
            .unwrap_or_else(|e| GoNoGo::no_go(format!("classifier unavailable: {e}")))
    }
}

/// Answers classifier requests on `listener` until it fails; one request
/// per frame, connections handled in turn.
pub fn serve_classifier<C: IntentClassifier>(listener: TcpListener, classifier: C) -> std::io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = BufWriter::new(stream);
        while let Ok(Some(req)) = read_frame::<_, ClassifierRequest>(&mut reader) {
            write_frame(&mut writer, &classifier.classify(&req))?;
            writer.flush()?;
        }
    }
    Ok(())
}
