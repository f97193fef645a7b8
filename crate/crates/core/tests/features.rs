use evnlos::features::{
    event_count_map, event_time_surface_patch, time_surface_frame, voxel_bin_edges, voxel_grid_features, PolarityMode,
    TimeSurfaceConfig,
};
use evnlos::{Event, EventStream, Polarity, SensorGeometry};
use proptest::prelude::*;

const W: u16 = 7;
const H: u16 = 5;

fn separate(tau: f64) -> TimeSurfaceConfig {
    TimeSurfaceConfig {
        polarity_mode: PolarityMode::SeparateChannels,
        ..TimeSurfaceConfig::with_tau(tau)
    }
}

// Distinct timestamps keep stream order and time order identical.
fn stream_strategy() -> impl Strategy<Value = EventStream> {
    prop::collection::vec((0u16..W, 0u16..H, any::<bool>()), 1..60).prop_flat_map(|raw| {
        let n = raw.len();
        prop::collection::btree_set(0u64..100_000, n).prop_map(move |times| {
            let events = times
                .into_iter()
                .zip(&raw)
                .map(|(t, &(x, y, on))| Event::new(t, x, y, if on { Polarity::On } else { Polarity::Off }))
                .collect();
            EventStream::new(SensorGeometry::new(W, H).unwrap(), events).unwrap()
        })
    })
}

#[test]
fn decay_hits_exp_minus_k() {
    let g = SensorGeometry::new(3, 3).unwrap();
    let t0 = 12_345;
    let s = EventStream::new(g, vec![Event::new(t0, 1, 1, Polarity::On)]).unwrap();
    for tau in [1.0, 17.5, 40_000.0] {
        for k in 0..3u32 {
            let t = t0 + (k as f64 * tau) as u64;
            let f = time_surface_frame(&s, t, &TimeSurfaceConfig::with_tau(tau))
                .unwrap()
                .merged();
            let expect = (-((t - t0) as f64) / tau).exp();
            assert!((f.get(1, 1) - expect).abs() < 1e-12);
            assert_eq!(f.sum() - f.get(1, 1), 0.0);
        }
    }
}

#[test]
fn voxel_edges_cover_span() {
    assert_eq!(voxel_bin_edges(10, 20, 3), vec![10, 13, 16, 20]);
    assert_eq!(voxel_bin_edges(5, 5, 2), vec![5, 5, 5]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn surface_decays_without_new_events(s in stream_strategy(), gap in 1u64..50_000) {
        let t = s.last_time().unwrap();
        let cfg = TimeSurfaceConfig::with_tau(5_000.0);
        let now = time_surface_frame(&s, t, &cfg).unwrap().merged();
        let later = time_surface_frame(&s, t + gap, &cfg).unwrap().merged();
        let factor = (-(gap as f64) / 5_000.0).exp();
        for (a, b) in now.data().iter().zip(later.data()) {
            prop_assert!(b <= a);
            prop_assert!((b - a * factor).abs() < 1e-12);
        }
    }

    #[test]
    fn event_patch_matches_frame_crop(s in stream_strategy(), pick in any::<prop::sample::Index>(), radius in 0usize..3) {
        let i = pick.index(s.len());
        let ev = s.events()[i];
        let tau = 3_000.0;
        let patch = event_time_surface_patch(&s, i, radius, tau).unwrap();
        let frame = time_surface_frame(&s, ev.t_us, &separate(tau)).unwrap();
        let channel = &frame.channels[ev.polarity.index()];
        let r = radius as isize;
        let crop = channel.crop(ev.x as isize - r, ev.y as isize - r, 2 * radius + 1, 2 * radius + 1);
        prop_assert_eq!(patch.get(radius, radius), 1.0);
        for (a, b) in patch.data().iter().zip(crop.data()) {
            prop_assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn count_maps_add_up(s in stream_strategy(), a in 0u64..100_000, b in 0u64..100_000) {
        let (t0, t1) = (a.min(b), a.max(b));
        let in_window = s.events().iter().filter(|e| e.t_us >= t0 && e.t_us < t1).count() as u64;
        let merged = event_count_map(&s, t0, t1, false).unwrap();
        let split = event_count_map(&s, t0, t1, true).unwrap();
        prop_assert_eq!(merged[0].iter().map(|&c| c as u64).sum::<u64>(), in_window);
        for px in 0..merged[0].len() {
            prop_assert_eq!(merged[0][px], split[0][px] + split[1][px]);
        }
    }

    #[test]
    fn slices_compose(s in stream_strategy(), mut cuts in prop::collection::vec(0u64..100_000, 4)) {
        cuts.sort_unstable();
        let outer = s.slice_time(cuts[0], cuts[3]).unwrap();
        let inner = outer.slice_time(cuts[1], cuts[2]).unwrap();
        prop_assert_eq!(&inner, &s.slice_time(cuts[1], cuts[2]).unwrap());
        let left = s.slice_time(cuts[0], cuts[1]).unwrap();
        let right = s.slice_time(cuts[1], cuts[3]).unwrap();
        prop_assert_eq!(left.len() + right.len(), outer.len());
    }

    #[test]
    fn last_voxel_bin_is_the_full_surface(s in stream_strategy(), n_bins in 1usize..6) {
        let cfg = TimeSurfaceConfig::with_tau(2_000.0);
        let bins = voxel_grid_features(&s, n_bins, &cfg).unwrap();
        prop_assert_eq!(bins.len(), n_bins);
        let t_last = s.last_time().unwrap();
        prop_assert_eq!(bins.last().unwrap().bin_end_us, t_last);
        let full = time_surface_frame(&s, t_last, &cfg).unwrap();
        prop_assert_eq!(&bins.last().unwrap().channels, &full.channels);
        for f in &bins {
            prop_assert!(f.merged().data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
