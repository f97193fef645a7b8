use super::{Event, EventStream, Polarity, SensorGeometry};
use crate::error::{Error, Result};

pub const NEVT_MAGIC: &[u8; 4] = b"NEVT";
pub const NEVT_VERSION: u8 = 1;
pub const NEVT_HEADER_LEN: usize = 20;
pub const NEVT_RECORD_LEN: usize = 16;

/// Serialize to NEVT1.
///
/// Header (20 bytes): `NEVT`, version 1, flags 0, width u16, height u16,
/// two reserved zero bytes, count u64. Records (16 bytes): t_us u64, x u16, y u16, polarity i8, three
/// zero bytes. All integers little-endian.
pub fn write_binary(stream: &EventStream) -> Vec<u8> {
    let geometry = stream.geometry();
    let mut out = Vec::with_capacity(NEVT_HEADER_LEN + NEVT_RECORD_LEN * stream.len());
    out.extend_from_slice(NEVT_MAGIC);
    out.push(NEVT_VERSION);
    out.push(0);
    out.extend_from_slice(&geometry.width.to_le_bytes());
    out.extend_from_slice(&geometry.height.to_le_bytes());
    out.extend_from_slice(&[0, 0]);
    out.extend_from_slice(&(stream.len() as u64).to_le_bytes());
    for ev in stream.events() {
        out.extend_from_slice(&ev.t_us.to_le_bytes());
        out.extend_from_slice(&ev.x.to_le_bytes());
        out.extend_from_slice(&ev.y.to_le_bytes());
        out.push(ev.polarity.as_i8() as u8);
        out.extend_from_slice(&[0, 0, 0]);
    }
    out
}

pub fn read_binary(bytes: &[u8]) -> Result<EventStream> {
    if bytes.len() < 4 || &bytes[..4] != NEVT_MAGIC {
        return Err(Error::BadMagic { expected: "NEVT" });
    }
    if bytes.len() < NEVT_HEADER_LEN {
        return Err(Error::TruncatedRecord {
            index: 0,
            needed: NEVT_HEADER_LEN,
            available: bytes.len(),
        });
    }
    if bytes[4] != NEVT_VERSION {
        return Err(Error::BadVersion(bytes[4]));
    }
    let u16_at = |at: usize| u16::from_le_bytes([bytes[at], bytes[at + 1]]);
    let u64_at = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let geometry = SensorGeometry::new(u16_at(6), u16_at(8))?;
    let declared = u64_at(12);

    let payload = &bytes[NEVT_HEADER_LEN..];
    let whole = (payload.len() / NEVT_RECORD_LEN) as u64;
    let partial = payload.len() % NEVT_RECORD_LEN;
    if whole < declared && partial != 0 {
        return Err(Error::TruncatedRecord {
            index: whole,
            needed: NEVT_RECORD_LEN,
            available: partial,
        });
    }
    if whole != declared || partial != 0 {
        return Err(Error::CountMismatch {
            declared,
            actual: whole,
        });
    }

    let mut events = Vec::with_capacity(declared as usize);
    for (i, rec) in payload.chunks_exact(NEVT_RECORD_LEN).enumerate() {
        let at = NEVT_HEADER_LEN + i * NEVT_RECORD_LEN;
        let polarity = Polarity::from_i8(rec[12] as i8)
            .ok_or_else(|| Error::InvalidStream(format!("record {i}: polarity byte {:#04x}", rec[12])))?;
        events.push(Event {
            t_us: u64_at(at),
            x: u16_at(at + 8),
            y: u16_at(at + 10),
            polarity,
        });
    }
    EventStream::new(geometry, events)
}
