//! Event-stream featurization: time-surfaces and event count maps.
//!
//! A time-surface maps each pixel to `exp(-(t - T) / τ)`, where `T` is the
//! time of the most recent event at that pixel (per polarity) no later than
//! the query time `t`. Pixels without history read 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{EventStream, Polarity};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarityMode {
    /// Channel 0 = OFF, channel 1 = ON.
    SeparateChannels,
    /// Pointwise max of the two polarity surfaces.
    MergedMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimeSurfaceConfig {
    /// Decay constant; `None` means one third of the voxel bin width.
    pub tau_us: Option<f64>,
    /// Neighborhood radius for per-event patches.
    pub radius: usize,
    pub polarity_mode: PolarityMode,
}

impl Default for TimeSurfaceConfig {
    fn default() -> Self {
        Self {
            tau_us: None,
            radius: 2,
            polarity_mode: PolarityMode::MergedMax,
        }
    }
}

impl TimeSurfaceConfig {
    pub fn with_tau(tau_us: f64) -> Self {
        Self {
            tau_us: Some(tau_us),
            ..Self::default()
        }
    }

    /// Decay constant to use for a voxel grid with the given bin width.
    pub fn resolve_tau(&self, bin_width_us: f64) -> f64 {
        self.tau_us.unwrap_or((bin_width_us / 3.0).max(1.0))
    }

    fn require_tau(&self) -> Result<f64> {
        match self.tau_us {
            Some(t) if t > 0.0 && t.is_finite() => Ok(t),
            Some(t) => Err(Error::InvalidConfig(format!("tau {t} must be positive"))),
            None => Err(Error::InvalidConfig("tau must be set for a single time-surface".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFrame {
    pub bin_end_us: u64,
    pub channels: Vec<Image>,
}

impl FeatureFrame {
    /// Single-channel view: the only channel, or the max over channels.
    pub fn merged(&self) -> Image {
        let mut out = self.channels[0].clone();
        for ch in &self.channels[1..] {
            for (o, &v) in out.data_mut().iter_mut().zip(ch.data()) {
                *o = o.max(v);
            }
        }
        out
    }
}

/// Most recent event time `<= t_query` per pixel for one polarity.
pub fn last_timestamp_map(stream: &EventStream, t_query: u64, polarity: Polarity) -> Vec<Option<u64>> {
    let g = stream.geometry();
    let mut map = vec![None; g.pixel_count()];
    let end = stream.events().partition_point(|e| e.t_us <= t_query);
    for ev in &stream.events()[..end] {
        if ev.polarity == polarity {
            map[ev.y as usize * g.width as usize + ev.x as usize] = Some(ev.t_us);
        }
    }
    map
}

fn decay_image(width: usize, height: usize, last: &[Option<u64>], t_query: f64, tau: f64) -> Image {
    let data = last
        .iter()
        .map(|t| match t {
            Some(t) => (-(t_query - *t as f64) / tau).exp(),
            None => 0.0,
        })
        .collect();
    Image::from_vec(width, height, data).expect("map matches geometry")
}

fn assemble(
    stream: &EventStream,
    maps: [Vec<Option<u64>>; 2],
    t_query: u64,
    tau: f64,
    mode: PolarityMode,
) -> FeatureFrame {
    let g = stream.geometry();
    let (w, h) = (g.width as usize, g.height as usize);
    let [off, on] = maps;
    let off = decay_image(w, h, &off, t_query as f64, tau);
    let on = decay_image(w, h, &on, t_query as f64, tau);
    let channels = match mode {
        PolarityMode::SeparateChannels => vec![off, on],
        PolarityMode::MergedMax => {
            let mut merged = off;
            for (m, &v) in merged.data_mut().iter_mut().zip(on.data()) {
                *m = m.max(v);
            }
            vec![merged]
        }
    };
    FeatureFrame {
        bin_end_us: t_query,
        channels,
    }
}

/// Full-frame time-surface at `t_query` using every event with `t <= t_query`.
pub fn time_surface_frame(stream: &EventStream, t_query: u64, config: &TimeSurfaceConfig) -> Result<FeatureFrame> {
    let tau = config.require_tau()?;
    let maps = [
        last_timestamp_map(stream, t_query, Polarity::Off),
        last_timestamp_map(stream, t_query, Polarity::On),
    ];
    Ok(assemble(stream, maps, t_query, tau, config.polarity_mode))
}

/// Local time-context of event `event_index`: a `(2ρ+1)²` row-major patch
/// centered on the event, built only from same-polarity events at or before
/// it in stream order.
pub fn event_time_surface_patch(stream: &EventStream, event_index: usize, radius: usize, tau_us: f64) -> Result<Image> {
    let events = stream.events();
    let Some(current) = events.get(event_index) else {
        return Err(Error::IndexOutOfRange {
            index: event_index,
            len: events.len(),
        });
    };
    if !(tau_us > 0.0) {
        return Err(Error::InvalidConfig(format!("tau {tau_us} must be positive")));
    }
    let side = 2 * radius + 1;
    let r = radius as i64;
    let (cx, cy) = (current.x as i64, current.y as i64);
    let mut last: Vec<Option<u64>> = vec![None; side * side];
    for ev in &events[..=event_index] {
        if ev.polarity != current.polarity {
            continue;
        }
        let (dx, dy) = (ev.x as i64 - cx, ev.y as i64 - cy);
        if dx.abs() <= r && dy.abs() <= r {
            last[((dy + r) as usize) * side + (dx + r) as usize] = Some(ev.t_us);
        }
    }
    Ok(decay_image(side, side, &last, current.t_us as f64, tau_us))
}

/// Bin edges `e_0 = t_first < … ≤ e_n = t_last`, integer µs.
pub fn voxel_bin_edges(t_first: u64, t_last: u64, n_bins: usize) -> Vec<u64> {
    let span = (t_last - t_first) as u128;
    (0..=n_bins)
        .map(|k| t_first + (span * k as u128 / n_bins as u128) as u64)
        .collect()
}

/// One time-surface per voxel bin, evaluated at each bin's end.
///
/// `[t_first, t_last]` is split into `n_bins` equal half-open bins, the last
/// one closed. Bin `k` sees only events strictly before its end (the last bin
/// also sees events at `t_last`).
pub fn voxel_grid_features(
    stream: &EventStream,
    n_bins: usize,
    config: &TimeSurfaceConfig,
) -> Result<Vec<FeatureFrame>> {
    if n_bins == 0 {
        return Err(Error::InvalidConfig("n_bins must be at least 1".into()));
    }
    let (Some(t_first), Some(t_last)) = (stream.first_time(), stream.last_time()) else {
        return Err(Error::EmptyStream);
    };
    let edges = voxel_bin_edges(t_first, t_last, n_bins);
    let tau = config.resolve_tau((t_last - t_first) as f64 / n_bins as f64);
    let g = stream.geometry();
    let mut maps: [Vec<Option<u64>>; 2] = [vec![None; g.pixel_count()], vec![None; g.pixel_count()]];
    let events = stream.events();
    let mut cursor = 0;
    let mut frames = Vec::with_capacity(n_bins);
    for k in 0..n_bins {
        let end = edges[k + 1];
        let last_bin = k + 1 == n_bins;
        while cursor < events.len() && (events[cursor].t_us < end || (last_bin && events[cursor].t_us <= end)) {
            let ev = &events[cursor];
            maps[ev.polarity.index()][ev.y as usize * g.width as usize + ev.x as usize] = Some(ev.t_us);
            cursor += 1;
        }
        frames.push(assemble(stream, maps.clone(), end, tau, config.polarity_mode));
    }
    Ok(frames)
}

/// Per-pixel event counts in `[t0, t1)`: one map, or `[OFF, ON]` maps.
pub fn event_count_map(stream: &EventStream, t0: u64, t1: u64, per_polarity: bool) -> Result<Vec<Vec<u32>>> {
    if t0 > t1 {
        return Err(Error::InvalidWindow { t0, t1 });
    }
    let g = stream.geometry();
    let n_maps = if per_polarity { 2 } else { 1 };
    let mut maps = vec![vec![0u32; g.pixel_count()]; n_maps];
    let (lo, hi) = stream.window_bounds(t0, t1);
    for ev in &stream.events()[lo..hi] {
        let m = if per_polarity { ev.polarity.index() } else { 0 };
        maps[m][ev.y as usize * g.width as usize + ev.x as usize] += 1;
    }
    Ok(maps)
}
