//! Event data model: the `(t, x, y, p)` tuple, its ordered container, and
//! stream I/O in the NEVT1 binary and CSV formats.

mod binary;
mod csv;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use self::binary::{read_binary, write_binary, NEVT_HEADER_LEN, NEVT_MAGIC, NEVT_RECORD_LEN};
pub use self::csv::{read_csv, write_csv};

/// Sign of the brightness change that triggered an event.
///
/// `Off` sorts before `On`, matching the ascending signed wire value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Off,
    On,
}

impl Polarity {
    pub fn as_i8(self) -> i8 {
        match self {
            Polarity::Off => -1,
            Polarity::On => 1,
        }
    }

    pub fn from_i8(value: i8) -> Option<Self> {
        match value {
            1 => Some(Polarity::On),
            -1 => Some(Polarity::Off),
            _ => None,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarity::Off => Polarity::On,
            Polarity::On => Polarity::Off,
        }
    }

    /// Channel slot used by per-polarity maps: OFF = 0, ON = 1.
    pub fn index(self) -> usize {
        match self {
            Polarity::Off => 0,
            Polarity::On => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub t_us: u64,
    pub x: u16,
    pub y: u16,
    pub polarity: Polarity,
}

impl Event {
    pub fn new(t_us: u64, x: u16, y: u16, polarity: Polarity) -> Self {
        Self { t_us, x, y, polarity }
    }

    /// Canonical stream order: time, then row, column, polarity.
    #[inline]
    pub fn order_key(&self) -> (u64, u16, u16, Polarity) {
        (self.t_us, self.y, self.x, self.polarity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SensorGeometry {
    pub width: u16,
    pub height: u16,
}

impl SensorGeometry {
    pub fn new(width: u16, height: u16) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig(format!(
                "sensor geometry {width}x{height} must be at least 1x1"
            )));
        }
        Ok(Self { width, height })
    }

    #[inline]
    pub fn contains(&self, x: u16, y: u16) -> bool {
        x < self.width && y < self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// First invariant a stream violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    /// Event `index` sorts before event `index - 1`.
    Unsorted { index: usize },
    /// Event `index` lies outside the sensor.
    OutOfBounds { index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Unsorted { index } => write!(f, "unsorted at index {index}"),
            Violation::OutOfBounds { index } => write!(f, "out of bounds at index {index}"),
        }
    }
}

/// Time-ordered events on a fixed sensor.
///
/// Constructed through [`EventStream::new`] (checks invariants) or
/// [`EventStream::from_unsorted`] (sorts into canonical order first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    geometry: SensorGeometry,
    events: Vec<Event>,
}

impl EventStream {
    pub fn empty(geometry: SensorGeometry) -> Self {
        Self {
            geometry,
            events: Vec::new(),
        }
    }

    pub fn new(geometry: SensorGeometry, events: Vec<Event>) -> Result<Self> {
        let stream = Self { geometry, events };
        match stream.validate() {
            Ok(()) => Ok(stream),
            Err(v) => Err(Error::InvalidStream(v.to_string())),
        }
    }

    pub fn from_unsorted(geometry: SensorGeometry, mut events: Vec<Event>) -> Result<Self> {
        events.sort_unstable_by_key(Event::order_key);
        Self::new(geometry, events)
    }

    /// Wrap events without checking anything; pair with [`EventStream::validate`].
    pub fn from_parts_unchecked(geometry: SensorGeometry, events: Vec<Event>) -> Self {
        Self { geometry, events }
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn first_time(&self) -> Option<u64> {
        self.events.first().map(|e| e.t_us)
    }

    pub fn last_time(&self) -> Option<u64> {
        self.events.last().map(|e| e.t_us)
    }

    pub fn validate(&self) -> Result<(), Violation> {
        for (index, ev) in self.events.iter().enumerate() {
            if !self.geometry.contains(ev.x, ev.y) {
                return Err(Violation::OutOfBounds { index });
            }
            if index > 0 && self.events[index - 1].order_key() > ev.order_key() {
                return Err(Violation::Unsorted { index });
            }
        }
        Ok(())
    }

    /// Events with `t0 <= t < t1`.
    pub fn slice_time(&self, t0: u64, t1: u64) -> Result<EventStream> {
        if t0 > t1 {
            return Err(Error::InvalidWindow { t0, t1 });
        }
        let (lo, hi) = self.window_bounds(t0, t1);
        Ok(Self {
            geometry: self.geometry,
            events: self.events[lo..hi].to_vec(),
        })
    }

    /// Index range of the events in `[t0, t1)`; relies on sorted order.
    pub fn window_bounds(&self, t0: u64, t1: u64) -> (usize, usize) {
        let lo = self.events.partition_point(|e| e.t_us < t0);
        let hi = self.events.partition_point(|e| e.t_us < t1).max(lo);
        (lo, hi)
    }
}
