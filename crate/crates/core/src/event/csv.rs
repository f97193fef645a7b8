use std::fmt::Write as _;

use super::{Event, EventStream, Polarity, SensorGeometry};
use crate::error::{Error, Result};

const HEADER: &str = "t_us,x,y,p";

/// One `t_us,x,y,p` row per event, `p` written as `1` or `-1`.
pub fn write_csv(stream: &EventStream) -> String {
    let mut out = String::with_capacity(16 * (stream.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for ev in stream.events() {
        let _ = writeln!(out, "{},{},{},{}", ev.t_us, ev.x, ev.y, ev.polarity.as_i8());
    }
    out
}

/// Parse CSV produced by [`write_csv`]. The format carries no sensor size,
/// so the caller supplies it. Line numbers in errors are 1-based and count
/// the header.
pub fn read_csv(text: &str, geometry: SensorGeometry) -> Result<EventStream> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        _ => {
            return Err(Error::ParseError {
                line: 1,
                message: format!("expected header `{HEADER}`"),
            })
        }
    }
    let mut events = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::ParseError { line: line_no, message };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", fields.len())));
        }
        let t_us = fields[0].parse::<u64>().map_err(|e| err(format!("t_us: {e}")))?;
        let x = fields[1].parse::<u16>().map_err(|e| err(format!("x: {e}")))?;
        let y = fields[2].parse::<u16>().map_err(|e| err(format!("y: {e}")))?;
        let polarity = fields[3]
            .parse::<i8>()
            .ok()
            .and_then(Polarity::from_i8)
            .ok_or_else(|| err(format!("polarity `{}` is not 1 or -1", fields[3])))?;
        if !geometry.contains(x, y) {
            return Err(err(format!(
                "pixel ({x}, {y}) outside {}x{}",
                geometry.width, geometry.height
            )));
        }
        events.push(Event::new(t_us, x, y, polarity));
    }
    EventStream::new(geometry, events)
}
