//! Live telemetry and command service. One thread owns the simulation and
//! talks to the connection threads only through a bounded command queue
//! and a bounded outbound queue; slow readers lose periodic samples, never
//! commands or discrete events.

mod client;
mod mailbox;
mod protocol;
mod server;
pub mod wire;

pub use client::Client;
pub use protocol::{
    Body, ClientMessage, CommandErrorKind, FrameBody, Role, StateBody, TelemetryMessage, TrackBody, SCHEMA_VERSION,
};
pub use server::{ServeError, ServeOptions, Server, ServerHandle, FRAME_HZ, STATE_HZ};
