use evnlos::forward::WallFrame;
use evnlos::sim::{simulate_events, EventSimConfig};
use evnlos::{Error, Image, Polarity};
use proptest::prelude::*;

fn exact_cfg(c: f64) -> EventSimConfig {
    EventSimConfig {
        contrast_threshold: c,
        log_floor: 1e-12,
        ..EventSimConfig::default()
    }
}

fn frame(t_us: u64, image: Image) -> WallFrame {
    WallFrame { t_us, image }
}

fn video(w: usize, h: usize, values: &[Vec<f64>], dt: u64) -> Vec<WallFrame> {
    values
        .iter()
        .enumerate()
        .map(|(k, v)| frame(k as u64 * dt, Image::from_vec(w, h, v.clone()).unwrap()))
        .collect()
}

#[test]
fn three_threshold_step_gives_three_events_each_way() {
    let c: f64 = 0.15;
    let lo = 0.2;
    let hi = lo * (3.0 * c).exp();
    for (a, b, pol) in [(lo, hi, Polarity::On), (hi, lo, Polarity::Off)] {
        let frames = vec![frame(0, Image::filled(2, 2, a)), frame(1000, Image::filled(2, 2, b))];
        let s = simulate_events(&frames, &exact_cfg(c)).unwrap();
        assert_eq!(s.len(), 12);
        assert!(s.events().iter().all(|e| e.polarity == pol));
        for px in 0..4u16 {
            let times: Vec<u64> = s
                .events()
                .iter()
                .filter(|e| e.x == px % 2 && e.y == px / 2)
                .map(|e| e.t_us)
                .collect();
            assert_eq!(times, vec![333, 667, 1000]);
        }
    }
}

#[test]
fn constant_video_is_silent() {
    let frames: Vec<WallFrame> = (0..5).map(|k| frame(k * 100, Image::filled(3, 3, 0.4))).collect();
    assert!(simulate_events(&frames, &EventSimConfig::default()).unwrap().is_empty());
}

#[test]
fn refractory_window_drops_close_events() {
    let c: f64 = 0.1;
    let frames = vec![
        frame(0, Image::filled(1, 1, 0.1)),
        frame(100, Image::filled(1, 1, 0.1 * (5.0 * c).exp())),
    ];
    let free = simulate_events(&frames, &exact_cfg(c)).unwrap();
    assert_eq!(free.len(), 5);
    let cfg = EventSimConfig {
        refractory_us: 30,
        ..exact_cfg(c)
    };
    let limited = simulate_events(&frames, &cfg).unwrap();
    let times: Vec<u64> = limited.events().iter().map(|e| e.t_us).collect();
    assert_eq!(times, vec![20, 60, 100]);
}

#[test]
fn jitter_is_seeded() {
    let frames = vec![
        frame(0, Image::from_fn(6, 6, |x, y| 0.1 + 0.02 * (x + y) as f64)),
        frame(500, Image::from_fn(6, 6, |x, y| 0.9 - 0.01 * (x * y) as f64)),
    ];
    let cfg = EventSimConfig {
        threshold_jitter: 0.03,
        jitter_seed: 11,
        ..EventSimConfig::default()
    };
    let a = simulate_events(&frames, &cfg).unwrap();
    let b = simulate_events(&frames, &cfg).unwrap();
    assert_eq!(a, b);
    let plain = simulate_events(&frames, &EventSimConfig::default()).unwrap();
    assert_ne!(a, plain);
}

#[test]
fn bad_inputs_are_rejected() {
    let one = vec![frame(0, Image::filled(2, 2, 1.0))];
    assert!(matches!(
        simulate_events(&one, &EventSimConfig::default()),
        Err(Error::TooFewFrames(1))
    ));
    let back = vec![frame(10, Image::filled(2, 2, 1.0)), frame(10, Image::filled(2, 2, 1.0))];
    assert!(matches!(
        simulate_events(&back, &EventSimConfig::default()),
        Err(Error::NonMonotonicTimestamps { index: 1 })
    ));
    let dims = vec![frame(0, Image::filled(2, 2, 1.0)), frame(10, Image::filled(3, 2, 1.0))];
    assert!(matches!(
        simulate_events(&dims, &EventSimConfig::default()),
        Err(Error::MismatchedDims { index: 1, .. })
    ));
    let bad = EventSimConfig {
        contrast_threshold: 0.0,
        ..EventSimConfig::default()
    };
    assert!(simulate_events(&back, &bad).is_err());
}

fn video_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.01f64..1.0, 9), 2..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn inverting_log_intensity_flips_every_polarity(values in video_strategy()) {
        let cfg = exact_cfg(0.1);
        let fwd = simulate_events(&video(3, 3, &values, 1000), &cfg).unwrap();
        let inv: Vec<Vec<f64>> = values.iter().map(|f| f.iter().map(|v| 1.0 / v).collect()).collect();
        let rev = simulate_events(&video(3, 3, &inv, 1000), &cfg).unwrap();
        prop_assert_eq!(fwd.len(), rev.len());
        for (a, b) in fwd.events().iter().zip(rev.events()) {
            prop_assert_eq!((a.t_us, a.x, a.y), (b.t_us, b.x, b.y));
            prop_assert_eq!(a.polarity, b.polarity.flipped());
        }
    }

    #[test]
    fn doubling_frame_rate_with_log_linear_midpoints_keeps_events(values in video_strategy()) {
        let cfg = EventSimConfig { contrast_threshold: 0.07, ..EventSimConfig::default() };
        let floor = cfg.log_floor;
        let base = simulate_events(&video(3, 3, &values, 2000), &cfg).unwrap();
        let mut dense = Vec::new();
        for w in values.windows(2) {
            dense.push(w[0].clone());
            dense.push(w[0].iter().zip(&w[1]).map(|(a, b)| (((a + floor).ln() + (b + floor).ln()) / 2.0).exp() - floor).collect());
        }
        dense.push(values.last().unwrap().clone());
        let fine = simulate_events(&video(3, 3, &dense, 1000), &cfg).unwrap();
        prop_assert_eq!(base.len(), fine.len());
        let key = |e: &evnlos::Event| (e.x, e.y, e.t_us);
        let mut a: Vec<_> = base.events().to_vec();
        let mut b: Vec<_> = fine.events().to_vec();
        a.sort_by_key(key);
        b.sort_by_key(key);
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!((x.x, x.y, x.polarity), (y.x, y.y, y.polarity));
            prop_assert!(x.t_us.abs_diff(y.t_us) <= 1, "{} vs {}", x.t_us, y.t_us);
        }
    }

    #[test]
    fn simulation_is_deterministic_and_valid(values in video_strategy()) {
        let frames = video(3, 3, &values, 700);
        let a = simulate_events(&frames, &EventSimConfig::default()).unwrap();
        let b = simulate_events(&frames, &EventSimConfig::default()).unwrap();
        prop_assert!(a.validate().is_ok());
        prop_assert_eq!(&a, &b);
        let t_end = frames.last().unwrap().t_us;
        prop_assert!(a.events().iter().all(|e| e.t_us > 0 && e.t_us <= t_end));
    }

    #[test]
    fn net_polarity_tracks_total_log_change(values in video_strategy()) {
        let c = 0.1;
        let s = simulate_events(&video(3, 3, &values, 1000), &exact_cfg(c)).unwrap();
        for px in 0..9usize {
            let net: i64 = s.events().iter()
                .filter(|e| e.y as usize * 3 + e.x as usize == px)
                .map(|e| e.polarity.as_i8() as i64)
                .sum();
            let total = (values.last().unwrap()[px] / values[0][px]).ln();
            // the reference ends within one threshold of the final level
            prop_assert!((total - net as f64 * c).abs() < c + 1e-9);
        }
    }
}
