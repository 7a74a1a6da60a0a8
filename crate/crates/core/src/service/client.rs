use std::io::{self, BufReader, BufWriter, Write};
use std::net::{Shutdown, TcpStream, ToSocketAddrs};
use std::time::Duration;

use super::protocol::{Body, ClientMessage, Role, TelemetryMessage};
use super::wire;

/// Blocking client for the telemetry and command service.
pub struct Client {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl Client {
    /// Connects and says hello as `role`. The grant arrives as the first
    /// message, a `welcome`.
    pub fn connect(addr: impl ToSocketAddrs, role: Role) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let mut c = Self {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
        };
        c.send(&ClientMessage::Hello { role })?;
        Ok(c)
    }

    pub fn set_read_timeout(&self, timeout: Option<Duration>) -> io::Result<()> {
        self.reader.get_ref().set_read_timeout(timeout)
    }

    pub fn send(&mut self, msg: &ClientMessage) -> io::Result<()> {
        wire::write_frame(&mut self.writer, msg)?;
        self.writer.flush()
    }

    pub fn command(&mut self, text: &str) -> io::Result<()> {
        self.send(&ClientMessage::Command { text: text.into() })
    }

    /// Sends an arbitrary frame body, valid or not.
    pub fn send_raw(&mut self, body: &[u8]) -> io::Result<()> {
        wire::write_raw_frame(&mut self.writer, body)?;
        self.writer.flush()
    }

    /// Next message, or `None` once the server has closed the stream.
    pub fn recv(&mut self) -> io::Result<Option<TelemetryMessage>> {
        wire::read_frame(&mut self.reader)
    }

    /// Reads until `pred` matches, returning every message seen including
    /// the match. Fails if the stream ends first.
    pub fn recv_until(&mut self, mut pred: impl FnMut(&Body) -> bool) -> io::Result<Vec<TelemetryMessage>> {
        let mut seen = Vec::new();
        loop {
            let msg = self
                .recv()?
                .ok_or_else(|| io::Error::new(io::ErrorKind::UnexpectedEof, "stream closed"))?;
            let hit = pred(&msg.body);
            seen.push(msg);
            if hit {
                return Ok(seen);
            }
        }
    }

    pub fn close(mut self) -> io::Result<()> {
        self.send(&ClientMessage::Bye)?;
        self.writer.get_ref().shutdown(Shutdown::Write)
    }
}
