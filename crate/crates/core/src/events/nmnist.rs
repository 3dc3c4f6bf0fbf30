//! N-MNIST `.bin` records: 40 bits per event.
//!
//! ```text
//! byte 0      x address
//! byte 1      y address
//! byte 2 b7   polarity (1 = ON, 0 = OFF)
//! byte 2..4   timestamp, 23 bits big-endian, microseconds
//! ```

use super::{Event, EventStream, Polarity};
use crate::error::{Error, Result};

pub const NMNIST_SIZE: u16 = 34;

const RECORD: usize = 5;
const TS_MASK: u32 = (1 << 23) - 1;

pub fn parse_nmnist_bin(raw: &[u8]) -> Result<EventStream> {
    if raw.len() % RECORD != 0 {
        return Err(Error::Malformed(format!(
            "N-MNIST payload of {} bytes is not a multiple of {RECORD}",
            raw.len()
        )));
    }
    let mut events = Vec::with_capacity(raw.len() / RECORD);
    for (i, rec) in raw.chunks_exact(RECORD).enumerate() {
        let (x, y) = (rec[0] as u16, rec[1] as u16);
        if x >= NMNIST_SIZE || y >= NMNIST_SIZE {
            return Err(Error::OutOfRange(format!(
                "record {i}: address ({x}, {y}) outside {NMNIST_SIZE}x{NMNIST_SIZE}"
            )));
        }
        let p = if rec[2] & 0x80 != 0 {
            Polarity::On
        } else {
            Polarity::Off
        };
        let t = u32::from_be_bytes([rec[2] & 0x7f, rec[3], rec[4], 0]) >> 8;
        events.push(Event::new(x, y, t as u64, p));
    }
    EventStream::new(NMNIST_SIZE, NMNIST_SIZE, events)
}

/// Inverse of [`parse_nmnist_bin`] for events that fit the record layout.
pub fn encode_nmnist_bin(events: &[Event]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(events.len() * RECORD);
    for (i, e) in events.iter().enumerate() {
        if e.x > 255 || e.y > 255 || e.t > TS_MASK as u64 {
            return Err(Error::OutOfRange(format!(
                "event {i} ({}, {}, t={}) does not fit an N-MNIST record",
                e.x, e.y, e.t
            )));
        }
        let t = e.t as u32;
        let pol = if e.p == Polarity::On { 0x80 } else { 0 };
        out.extend_from_slice(&[
            e.x as u8,
            e.y as u8,
            pol | ((t >> 16) as u8 & 0x7f),
            (t >> 8) as u8,
            t as u8,
        ]);
    }
    Ok(out)
}
