//! Framing: each record is a big-endian `u32` byte length followed by that
//! many bytes of UTF-8 JSON.

use std::io::{self, Read, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

/// Frames larger than this are refused on read.
pub const MAX_FRAME_BYTES: u32 = 16 << 20;

pub fn write_frame<W: Write, T: Serialize>(w: &mut W, msg: &T) -> io::Result<()> {
    let body = serde_json::to_vec(msg).map_err(io::Error::other)?;
    write_raw_frame(w, &body)
}

pub fn write_raw_frame<W: Write>(w: &mut W, body: &[u8]) -> io::Result<()> {
    let len = u32::try_from(body.len()).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(body)
}

/// Next frame body, or `None` on a clean end of stream.
pub fn read_raw_frame<R: Read>(r: &mut R) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len);
    if len > MAX_FRAME_BYTES {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("frame of {len} bytes exceeds limit")));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    Ok(Some(body))
}

pub fn read_frame<R: Read, T: DeserializeOwned>(r: &mut R) -> io::Result<Option<T>> {
    match read_raw_frame(r)? {
        Some(body) => serde_json::from_slice(&body)
            .map(Some)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)),
        None => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_round_trip_and_end_cleanly() {
        let mut buf = Vec::new();
        write_frame(&mut buf, &vec![1, 2, 3]).unwrap();
        write_frame(&mut buf, &"hello").unwrap();
        assert_eq!(&buf[..4], &7u32.to_be_bytes());
        let mut r = &buf[..];
        assert_eq!(read_frame::<_, Vec<i32>>(&mut r).unwrap(), Some(vec![1, 2, 3]));
        assert_eq!(read_frame::<_, String>(&mut r).unwrap(), Some("hello".into()));
        assert_eq!(read_frame::<_, String>(&mut r).unwrap(), None);
    }

    #[test]
    fn oversized_and_truncated_frames_fail() {
        let mut r = &(MAX_FRAME_BYTES + 1).to_be_bytes()[..];
        assert!(read_raw_frame(&mut r).is_err());
        let mut short = Vec::new();
        short.extend_from_slice(&10u32.to_be_bytes());
        short.extend_from_slice(b"abc");
        assert!(read_raw_frame(&mut &short[..]).is_err());
    }
}
