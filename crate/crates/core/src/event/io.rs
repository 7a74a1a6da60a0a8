use std::io::{self, BufRead, Read, Write};

use super::{Event, Polarity};

/// `u16 x, u16 y, u64 t_us, i8 p`, little-endian, no padding.
pub const EVENT_RECORD_BYTES: usize = 13;

pub fn write_events_binary<W: Write>(mut w: W, events: &[Event]) -> io::Result<()> {
    let mut buf = [0u8; EVENT_RECORD_BYTES];
    for e in events {
        buf[0..2].copy_from_slice(&e.x.to_le_bytes());
        buf[2..4].copy_from_slice(&e.y.to_le_bytes());
        buf[4..12].copy_from_slice(&e.t.to_le_bytes());
        buf[12] = e.p.sign() as u8;
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_events_binary<R: Read>(mut r: R) -> io::Result<Vec<Event>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() % EVENT_RECORD_BYTES != 0 {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "truncated event record"));
    }
    bytes
        .chunks_exact(EVENT_RECORD_BYTES)
        .map(|c| {
            let p = Polarity::from_sign(c[12] as i8)
                .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "bad polarity"))?;
            Ok(Event {
                x: u16::from_le_bytes([c[0], c[1]]),
                y: u16::from_le_bytes([c[2], c[3]]),
                t: u64::from_le_bytes(c[4..12].try_into().expect("8 bytes")),
                p,
            })
        })
        .collect()
}

/// One `x,y,t,p` line per event.
pub fn write_events_text<W: Write>(mut w: W, events: &[Event]) -> io::Result<()> {
    for e in events {
        writeln!(w, "{},{},{},{}", e.x, e.y, e.t, e.p.sign())?;
    }
    Ok(())
}

pub fn read_events_text<R: BufRead>(r: R) -> io::Result<Vec<Event>> {
    let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 4 {
            return Err(bad("expected x,y,t,p"));
        }
        let p = f[3].parse::<i8>().ok().and_then(Polarity::from_sign).ok_or_else(|| bad("bad polarity"))?;
        out.push(Event {
            x: f[0].parse().map_err(|_| bad("bad x"))?,
            y: f[1].parse().map_err(|_| bad("bad y"))?,
            t: f[2].parse().map_err(|_| bad("bad t"))?,
            p,
        });
    }
    Ok(out)
}
