use std::collections::BTreeMap;
use std::io::{self, BufWriter, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, Receiver, RecvTimeoutError, Sender};
use thiserror::Error;

use super::mailbox::{Mailbox, Outbound, Pop};
use super::protocol::{
    Body, ClientMessage, CommandErrorKind, FrameBody, Role, StateBody, SCHEMA_VERSION,
};
use super::wire;
use crate::runner::{ConfigError, ScenarioConfig, SimEvent, Simulation, FRAME_WINDOW_US};

/// State samples per simulated second.
pub const STATE_HZ: f64 = 20.0;
/// Event frames per simulated second.
pub const FRAME_HZ: f64 = 10.0;

const POLL: Duration = Duration::from_millis(20);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ServeOptions {
    /// Simulated seconds per wall-clock second; 0 runs unpaced.
    pub pace: f64,
    /// Runs to simulate, each on seed `seed + episode`; `None` keeps
    /// starting new ones.
    pub episodes: Option<u64>,
    /// Hold the first run until some client has said hello.
    pub wait_for_client: bool,
    /// Commands in flight to the simulation; senders block when full.
    pub command_queue: usize,
    /// Messages from the simulation awaiting fan-out.
    pub snapshot_queue: usize,
    /// Messages waiting to be written to one connection.
    pub client_queue: usize,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self {
            pace: 1.0,
            episodes: None,
            wait_for_client: true,
            command_queue: 64,
            snapshot_queue: 1024,
            client_queue: 256,
        }
    }
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: io::Error },
    #[error("a service thread panicked")]
    Panicked,
}

struct Connection {
    stream: TcpStream,
    /// Set once the client has said hello; broadcasts go only here.
    mailbox: Option<Arc<Mailbox>>,
}

struct Shared {
    opts: ServeOptions,
    shutdown: AtomicBool,
    hello_seen: AtomicBool,
    time_bits: AtomicU64,
    episode: AtomicU64,
    seed: AtomicU64,
    next_id: AtomicU64,
    state_hz: f64,
    frame_hz: f64,
    clients: Mutex<BTreeMap<u64, Connection>>,
    commander: Mutex<Option<u64>>,
    /// Replayed to clients joining after a run ended.
    last_complete: Mutex<Option<Outbound>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl Shared {
    fn time(&self) -> f64 {
        f64::from_bits(self.time_bits.load(Ordering::Acquire))
    }

    fn stopping(&self) -> bool {
        self.shutdown.load(Ordering::Acquire)
    }
}

struct Inbound {
    client: u64,
    text: String,
}

/// A bound, not yet running, telemetry and command service.
pub struct Server {
    listener: TcpListener,
    cfg: ScenarioConfig,
    seed: u64,
    opts: ServeOptions,
}

impl Server {
    pub fn bind(cfg: &ScenarioConfig, seed: u64, addr: &str, opts: ServeOptions) -> Result<Self, ServeError> {
        cfg.validate()?;
        let listener = TcpListener::bind(addr).map_err(|source| ServeError::Bind {
            addr: addr.to_string(),
            source,
        })?;
        Ok(Self {
            listener,
            cfg: cfg.clone(),
            seed,
            opts,
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Starts the simulation, fan-out and accept threads.
    pub fn spawn(self) -> io::Result<ServerHandle> {
        let addr = self.listener.local_addr()?;
        self.listener.set_nonblocking(true)?;
        let control_hz = self.cfg.timing.control_hz;
        let shared = Arc::new(Shared {
            opts: self.opts,
            shutdown: AtomicBool::new(false),
            hello_seen: AtomicBool::new(false),
            time_bits: AtomicU64::new(0.0f64.to_bits()),
            episode: AtomicU64::new(0),
            seed: AtomicU64::new(self.seed),
            next_id: AtomicU64::new(1),
            state_hz: f64::from(control_hz) / decimation(control_hz, STATE_HZ) as f64,
            frame_hz: f64::from(control_hz) / decimation(control_hz, FRAME_HZ) as f64,
            clients: Mutex::new(BTreeMap::new()),
            commander: Mutex::new(None),
            last_complete: Mutex::new(None),
        });
        let (cmd_tx, cmd_rx) = bounded(self.opts.command_queue.max(1));
        let (done_tx, done_rx) = bounded(1);
        let snapshots = Arc::new(Mailbox::new(self.opts.snapshot_queue));

        let sim = {
            let (shared, out) = (shared.clone(), snapshots.clone());
            let (cfg, seed) = (self.cfg, self.seed);
            thread::Builder::new()
                .name("sim".into())
                .spawn(move || simulate(&cfg, seed, &shared, &cmd_rx, &out, &done_tx))?
        };
        let hub = {
            let shared = shared.clone();
            thread::Builder::new()
                .name("fanout".into())
                .spawn(move || fan_out(&shared, &snapshots))?
        };
        let accept = {
            let shared = shared.clone();
            let listener = self.listener;
            thread::Builder::new()
                .name("accept".into())
                .spawn(move || accept_loop(&listener, &shared, &cmd_tx))?
        };
        Ok(ServerHandle {
            addr,
            shared,
            done: done_rx,
            sim: Some(sim),
            hub: Some(hub),
            accept: Some(accept),
        })
    }
}

fn decimation(control_hz: u32, rate: f64) -> u64 {
    ((f64::from(control_hz) / rate).round() as u64).max(1)
}

pub struct ServerHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    done: Receiver<Result<(), ConfigError>>,
    sim: Option<JoinHandle<()>>,
    hub: Option<JoinHandle<()>>,
    accept: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the configured number of runs has finished. Never
    /// returns when the episode count is unbounded.
    pub fn wait_episodes(&self) -> Result<(), ServeError> {
        match self.done.recv() {
            Ok(r) => r.map_err(ServeError::from),
            Err(_) => Err(ServeError::Panicked),
        }
    }

    /// Blocks until the accept loop ends, which only shutdown causes.
    pub fn join(mut self) -> Result<(), ServeError> {
        let accept = self.accept.take();
        let r = accept.map_or(Ok(()), |h| h.join().map_err(|_| ServeError::Panicked));
        self.stop();
        r
    }

    pub fn shutdown(mut self) -> Result<(), ServeError> {
        self.stop();
        Ok(())
    }

    fn stop(&mut self) {
        self.shared.shutdown.store(true, Ordering::Release);
        for c in lock(&self.shared.clients).values() {
            let _ = c.stream.shutdown(Shutdown::Both);
            if let Some(mb) = &c.mailbox {
                mb.close();
            }
        }
        for h in [self.accept.take(), self.sim.take(), self.hub.take()].into_iter().flatten() {
            let _ = h.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

fn simulate(
    cfg: &ScenarioConfig,
    seed: u64,
    shared: &Shared,
    commands: &Receiver<Inbound>,
    out: &Mailbox,
    done: &Sender<Result<(), ConfigError>>,
) {
    while shared.opts.wait_for_client && !shared.hello_seen.load(Ordering::Acquire) {
        if shared.stopping() {
            out.close();
            return;
        }
        thread::sleep(Duration::from_millis(5));
    }
    let mut episode = 0u64;
    let mut status = Ok(());
    while shared.opts.episodes.is_none_or(|n| episode < n) && !shared.stopping() {
        let run_seed = seed.wrapping_add(episode);
        let mut sim = match Simulation::new(cfg, run_seed) {
            Ok(sim) => sim,
            Err(e) => {
                status = Err(e);
                break;
            }
        };
        shared.episode.store(episode, Ordering::Release);
        shared.seed.store(run_seed, Ordering::Release);
        out.push(Outbound::all(sim.time(), Body::RunStarted { episode, seed: run_seed }));
        run_episode(&mut sim, episode, shared, commands, out);
        episode += 1;
    }
    let _ = done.send(status);
    // keep answering so a late command never waits forever
    while !shared.stopping() {
        match commands.recv_timeout(POLL) {
            Ok(cmd) => out.push(Outbound::to(
                cmd.client,
                shared.time(),
                CommandErrorKind::Finished.body("the run has finished", vec![]),
            )),
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => break,
        }
    }
    out.close();
}

fn run_episode(sim: &mut Simulation, episode: u64, shared: &Shared, commands: &Receiver<Inbound>, out: &Mailbox) {
    let control_hz = sim.config().timing.control_hz;
    let state_every = decimation(control_hz, STATE_HZ);
    let frame_every = decimation(control_hz, FRAME_HZ);
    let (wall0, t0) = (Instant::now(), sim.time());
    let mut tick = 0u64;
    while !shared.stopping() {
        while let Ok(cmd) = commands.try_recv() {
            match sim.submit_command(&cmd.text) {
                Ok(spec) => out.push(Outbound::all(
                    sim.time(),
                    Body::CommandAck {
                        text: cmd.text,
                        maneuver: spec.kind,
                    },
                )),
                Err(e) => out.push(Outbound::to(cmd.client, sim.time(), Body::from(&e))),
            }
        }
        let events = sim.step();
        tick += 1;
        let now = sim.time();
        shared.time_bits.store(now.to_bits(), Ordering::Release);
        for ev in events {
            let (time, body) = match ev {
                SimEvent::Phase(c) => (c.at, Body::PhaseChange { from: c.from, to: c.to }),
                SimEvent::GoNoGo { time, decision } => (
                    time,
                    Body::GoNoGo {
                        decision: decision.decision,
                        reason: decision.reason,
                    },
                ),
                SimEvent::Response { time, text } => (time, Body::Response { text }),
                SimEvent::Finished { .. } => continue,
            };
            out.push(Outbound::all(time, body));
        }
        if tick.is_multiple_of(state_every) {
            let state = StateBody::new(&sim.snapshot(), sim.phase(), sim.clearance(), sim.energy(), sim.track());
            out.push(Outbound::all(now, Body::State(state)));
        }
        if tick.is_multiple_of(frame_every) {
            let end_us = (now * 1e6).round() as u64;
            out.push(Outbound::all(
                now,
                Body::EventFrame(FrameBody::new(&sim.event_frame(), end_us, FRAME_WINDOW_US)),
            ));
        }
        if sim.is_finished() {
            let r = sim.result();
            out.push(Outbound::all(
                now,
                Body::RunComplete {
                    episode,
                    outcome: r.outcome,
                    response_text: r.response_text,
                    energy: r.energy,
                    digests: r.digests,
                },
            ));
            return;
        }
        let pace = shared.opts.pace;
        if pace > 0.0 {
            let due = wall0 + Duration::from_secs_f64((now - t0) / pace);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                thread::sleep(wait);
            }
        }
    }
}

fn fan_out(shared: &Shared, input: &Mailbox) {
    loop {
        let msg = match input.pop(POLL) {
            Pop::Message(m) => m,
            Pop::Empty => continue,
            Pop::Closed => return,
        };
        let clients = lock(&shared.clients);
        match &msg.body {
            Body::RunComplete { .. } => *lock(&shared.last_complete) = Some(msg.clone()),
            Body::RunStarted { .. } => *lock(&shared.last_complete) = None,
            _ => {}
        }
        match msg.to {
            Some(id) => {
                if let Some(mb) = clients.get(&id).and_then(|c| c.mailbox.as_ref()) {
                    mb.push(msg);
                }
            }
            None => {
                for mb in clients.values().filter_map(|c| c.mailbox.as_ref()) {
                    mb.push(msg.clone());
                }
            }
        }
    }
}

fn accept_loop(listener: &TcpListener, shared: &Arc<Shared>, commands: &Sender<Inbound>) {
    while !shared.stopping() {
        match listener.accept() {
            Ok((stream, _)) => {
                if let Err(e) = open_connection(stream, shared, commands) {
                    eprintln!("ringflight: dropping connection: {e}");
                }
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
            Err(_) => thread::sleep(POLL),
        }
    }
}

fn open_connection(stream: TcpStream, shared: &Arc<Shared>, commands: &Sender<Inbound>) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    let id = shared.next_id.fetch_add(1, Ordering::Relaxed);
    let mailbox = Arc::new(Mailbox::new(shared.opts.client_queue));
    let writer = stream.try_clone()?;
    lock(&shared.clients).insert(
        id,
        Connection {
            stream: stream.try_clone()?,
            mailbox: None,
        },
    );
    {
        let mailbox = mailbox.clone();
        thread::Builder::new()
            .name(format!("write-{id}"))
            .spawn(move || write_loop(writer, &mailbox))?;
    }
    let (shared, commands) = (shared.clone(), commands.clone());
    thread::Builder::new()
        .name(format!("read-{id}"))
        .spawn(move || {
            read_loop(id, stream, &mailbox, &shared, &commands);
            {
                let mut holder = lock(&shared.commander);
                if *holder == Some(id) {
                    *holder = None;
                }
            }
            lock(&shared.clients).remove(&id);
            mailbox.close();
        })?;
    Ok(())
}

fn write_loop(stream: TcpStream, mailbox: &Mailbox) {
    let mut w = BufWriter::new(stream);
    let mut seq = 0u64;
    loop {
        match mailbox.pop(POLL) {
            Pop::Message(m) => {
                let msg = super::protocol::TelemetryMessage {
                    seq,
                    time: m.time,
                    body: m.body,
                };
                seq += 1;
                if wire::write_frame(&mut w, &msg).is_err() || (mailbox.is_empty() && w.flush().is_err()) {
                    break;
                }
            }
            Pop::Empty => {}
            Pop::Closed => {
                let _ = w.flush();
                break;
            }
        }
    }
    let _ = w.get_ref().shutdown(Shutdown::Both);
}

fn read_loop(id: u64, mut stream: TcpStream, mailbox: &Arc<Mailbox>, shared: &Shared, commands: &Sender<Inbound>) {
    let reply = |body: Body| mailbox.push(Outbound::to(id, shared.time(), body));
    let mut role = None;
    while let Ok(Some(frame)) = wire::read_raw_frame(&mut stream) {
        let msg = match serde_json::from_slice::<ClientMessage>(&frame) {
            Ok(m) => m,
            Err(e) => {
                reply(CommandErrorKind::Malformed.body(e.to_string(), vec![]));
                continue;
            }
        };
        match (msg, role) {
            (ClientMessage::Hello { .. }, Some(_)) => {
                reply(CommandErrorKind::Malformed.body("hello already received", vec![]));
            }
            (ClientMessage::Hello { role: wanted }, None) => {
                let mut busy = false;
                let granted = match wanted {
                    Role::Commander => {
                        let mut holder = lock(&shared.commander);
                        if holder.is_none() {
                            *holder = Some(id);
                            Role::Commander
                        } else {
                            busy = true;
                            Role::Observer
                        }
                    }
                    Role::Observer => Role::Observer,
                };
                role = Some(granted);
                let mut clients = lock(&shared.clients);
                reply(Body::Welcome {
                    schema_version: SCHEMA_VERSION,
                    session: id,
                    role: granted,
                    episode: shared.episode.load(Ordering::Acquire),
                    seed: shared.seed.load(Ordering::Acquire),
                    state_hz: shared.state_hz,
                    frame_hz: shared.frame_hz,
                });
                if busy {
                    reply(Body::SessionBusy {
                        detail: "another connection holds the command session; joined read-only".into(),
                    });
                }
                if let Some(done) = lock(&shared.last_complete).clone() {
                    mailbox.push(Outbound { to: Some(id), ..done });
                }
                if let Some(c) = clients.get_mut(&id) {
                    c.mailbox = Some(mailbox.clone());
                }
                shared.hello_seen.store(true, Ordering::Release);
            }
            (ClientMessage::Command { .. }, None) => {
                reply(CommandErrorKind::Malformed.body("send hello first", vec![]));
            }
            (ClientMessage::Command { .. }, Some(Role::Observer)) => {
                reply(CommandErrorKind::ReadOnly.body("this connection is read-only", vec![]));
            }
            (ClientMessage::Command { text }, Some(Role::Commander)) => {
                if commands.send(Inbound { client: id, text }).is_err() {
                    break;
                }
            }
            (ClientMessage::Bye, _) => break,
        }
    }
}
