//! Contrast-threshold event simulation.
//!
//! Each pixel keeps a reference log intensity, initialized from the first
//! frame. Between consecutive frames the log intensity is taken to be linear
//! in time, so each crossing of `reference ± C` has a closed-form time. Every
//! crossing emits one event and moves the reference by `±C`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Event, EventStream, Polarity, SensorGeometry};
use crate::forward::WallFrame;

// Absorbs the last-ulp shortfall when a step is an exact multiple of C.
const CROSSING_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EventSimConfig {
    /// Log-intensity step per event.
    pub contrast_threshold: f64,
    /// Added to intensity before taking the log.
    pub log_floor: f64,
    /// Minimum spacing between two events of one pixel.
    pub refractory_us: u64,
    /// Standard deviation of per-pixel threshold mismatch; 0 disables it.
    pub threshold_jitter: f64,
    pub jitter_seed: u64,
}

impl Default for EventSimConfig {
    fn default() -> Self {
        Self {
            contrast_threshold: 0.15,
            log_floor: 1e-5,
            refractory_us: 0,
            threshold_jitter: 0.0,
            jitter_seed: 0,
        }
    }
}

impl EventSimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.contrast_threshold > 0.0) || !(self.log_floor > 0.0) || !(self.threshold_jitter >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "contrast threshold and log floor must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// Per-pixel thresholds; constant unless jitter is enabled.
    fn thresholds(&self, n: usize) -> Vec<f64> {
        if self.threshold_jitter == 0.0 {
            return vec![self.contrast_threshold; n];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.jitter_seed);
        let normal = Normal::new(self.contrast_threshold, self.threshold_jitter).expect("valid sigma");
        // clamp so a pathological draw cannot stall the crossing loop
        let floor = 0.01 * self.contrast_threshold;
        (0..n).map(|_| normal.sample(&mut rng).max(floor)).collect()
    }
}

fn check_frames(frames: &[WallFrame]) -> Result<(usize, usize)> {
    if frames.len() < 2 {
        return Err(Error::TooFewFrames(frames.len()));
    }
    let dims = frames[0].image.dims();
    for (index, f) in frames.iter().enumerate() {
        if f.image.dims() != dims {
            return Err(Error::MismatchedDims {
                index,
                expected: dims,
                got: f.image.dims(),
            });
        }
        if index > 0 && f.t_us <= frames[index - 1].t_us {
            return Err(Error::NonMonotonicTimestamps { index });
        }
    }
    Ok(dims)
}

pub fn simulate_events(frames: &[WallFrame], config: &EventSimConfig) -> Result<EventStream> {
    config.validate()?;
    let (width, height) = check_frames(frames)?;
    let geometry = SensorGeometry::new(
        u16::try_from(width).map_err(|_| Error::InvalidConfig(format!("width {width} too large")))?,
        u16::try_from(height).map_err(|_| Error::InvalidConfig(format!("height {height} too large")))?,
    )?;
    let thresholds = config.thresholds(width * height);
    let log = |v: f64| (v.max(0.0) + config.log_floor).ln();

    let mut events: Vec<Event> = (0..width * height)
        .into_par_iter()
        .flat_map_iter(|idx| {
            let x = (idx % width) as u16;
            let y = (idx / width) as u16;
            let c = thresholds[idx];
            let mut out = Vec::new();
            let mut reference = log(frames[0].image.data()[idx]);
            let mut last_emit: Option<u64> = None;
            for w in frames.windows(2) {
                let (a, b) = (&w[0], &w[1]);
                let la = log(a.image.data()[idx]);
                let lb = log(b.image.data()[idx]);
                let dl = lb - la;
                if dl == 0.0 {
                    continue;
                }
                let span = (b.t_us - a.t_us) as f64;
                let (polarity, step) = if dl > 0.0 {
                    (Polarity::On, c)
                } else {
                    (Polarity::Off, -c)
                };
                loop {
                    let level = reference + step;
                    let beyond = if dl > 0.0 {
                        lb - level >= -CROSSING_SLACK
                    } else {
                        level - lb >= -CROSSING_SLACK
                    };
                    if !beyond {
                        break;
                    }
                    let frac = ((level - la) / dl).clamp(0.0, 1.0);
                    let t_us = a.t_us + (frac * span).round() as u64;
                    reference = level;
                    if last_emit.is_some_and(|prev| t_us < prev + config.refractory_us) {
                        continue;
                    }
                    last_emit = Some(t_us);
                    out.push(Event { t_us, x, y, polarity });
                }
            }
            out.into_iter()
        })
        .collect();
    events.sort_unstable_by_key(Event::order_key);
    EventStream::new(geometry, events)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRateReport {
    pub total: usize,
    pub on: usize,
    pub off: usize,
    pub duration_s: f64,
    pub events_per_s: f64,
}

pub fn event_rate_report(stream: &EventStream, duration_s: f64) -> Result<EventRateReport> {
    if !(duration_s > 0.0) {
        return Err(Error::InvalidConfig(format!("duration {duration_s} must be positive")));
    }
    let on = stream.events().iter().filter(|e| e.polarity == Polarity::On).count();
    let total = stream.len();
    Ok(EventRateReport {
        total,
        on,
        off: total - on,
        duration_s,
        events_per_s: total as f64 / duration_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Image;

    fn frame(t_us: u64, values: &[f64]) -> WallFrame {
        WallFrame {
            t_us,
            image: Image::from_vec(values.len(), 1, values.to_vec()).unwrap(),
        }
    }

    fn exact() -> EventSimConfig {
        EventSimConfig {
            log_floor: 1e-12,
            ..EventSimConfig::default()
        }
    }

    #[test]
    fn constant_video_is_silent() {
        let frames = vec![frame(0, &[0.3, 0.0]), frame(10, &[0.3, 0.0]), frame(20, &[0.3, 0.0])];
        assert!(simulate_events(&frames, &EventSimConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn three_threshold_step_gives_three_events() {
        let c: f64 = 0.15;
        let up = vec![frame(0, &[1.0]), frame(3000, &[(3.0 * c).exp()])];
        let s = simulate_events(&up, &exact()).unwrap();
        let times: Vec<_> = s.events().iter().map(|e| e.t_us).collect();
        assert_eq!(times, vec![1000, 2000, 3000]);
        assert!(s.events().iter().all(|e| e.polarity == Polarity::On));

        let down = vec![frame(0, &[1.0]), frame(3000, &[(-3.0 * c).exp()])];
        let s = simulate_events(&down, &exact()).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.events().iter().all(|e| e.polarity == Polarity::Off));
    }

    #[test]
    fn reference_carries_across_frames() {
        // two half steps add up to one crossing at the second frame
        let c: f64 = 0.15;
        let frames = vec![frame(0, &[1.0]), frame(100, &[(0.5 * c).exp()]), frame(200, &[c.exp()])];
        let s = simulate_events(&frames, &exact()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.events()[0].t_us, 200);
    }

    #[test]
    fn refractory_suppresses_close_events() {
        let c: f64 = 0.15;
        let frames = vec![frame(0, &[1.0]), frame(30, &[(3.0 * c).exp()])];
        let cfg = EventSimConfig {
            refractory_us: 15,
            ..exact()
        };
        let times: Vec<_> = simulate_events(&frames, &cfg)
            .unwrap()
            .events()
            .iter()
            .map(|e| e.t_us)
            .collect();
        assert_eq!(times, vec![10, 30]);
    }

    #[test]
    fn frame_checks() {
        assert!(matches!(
            simulate_events(&[frame(0, &[1.0])], &exact()),
            Err(Error::TooFewFrames(1))
        ));
        assert!(matches!(
            simulate_events(&[frame(0, &[1.0]), frame(0, &[2.0])], &exact()),
            Err(Error::NonMonotonicTimestamps { index: 1 })
        ));
        assert!(matches!(
            simulate_events(&[frame(0, &[1.0]), frame(5, &[2.0, 1.0])], &exact()),
            Err(Error::MismatchedDims { index: 1, .. })
        ));
    }

    #[test]
    fn jitter_is_seeded() {
        let frames = vec![frame(0, &[1.0; 16]), frame(1000, &[2.0; 16])];
        let cfg = EventSimConfig {
            threshold_jitter: 0.03,
            jitter_seed: 7,
            ..EventSimConfig::default()
        };
        let a = simulate_events(&frames, &cfg).unwrap();
        let b = simulate_events(&frames, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rate_report() {
        let g = SensorGeometry::new(4, 4).unwrap();
        let empty = EventStream::empty(g);
        assert_eq!(event_rate_report(&empty, 1.0).unwrap().events_per_s, 0.0);
        let events = (0..10)
            .map(|i| Event::new(i, 0, 0, if i % 3 == 0 { Polarity::Off } else { Polarity::On }))
            .collect();
        let s = EventStream::new(g, events).unwrap();
        let r = event_rate_report(&s, 2.0).unwrap();
        assert_eq!((r.total, r.on, r.off), (10, 6, 4));
        assert_eq!(r.events_per_s, 5.0);
        assert!(event_rate_report(&s, 0.0).is_err());
    }
}
