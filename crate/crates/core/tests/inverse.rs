use evnlos::forward::{diffuse_kernel, place_target, Pose, SceneGeometry, TargetFrame, WallRenderer};
use evnlos::metrics::{contour_distance, psnr, ssim, CdConfig, SsimConfig};
use evnlos::recon::{composite_loss_with, loss_and_gradient, wiener_deconvolve, Dims, LinearReconstructor};
use evnlos::targets::block_digit;
use evnlos::Image;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Wall pitch equal to the target pitch, standoff two pitches.
fn near_contact() -> SceneGeometry {
    SceneGeometry {
        standoff_m: 0.002,
        target_extent_m: 0.028,
        target_res: 28,
        wall_extent_m: 0.064,
        wall_res: 64,
    }
}

#[test]
fn wiener_recovers_noiseless_render() {
    let g = near_contact();
    let renderer = WallRenderer::new(g).unwrap();
    for digit in [0, 3, 8] {
        let target = TargetFrame::new(block_digit(digit, 0, 0).unwrap(), Pose::new(0.003, -0.002));
        let wall = renderer.render(&target).unwrap();
        let truth = place_target(&target, &g).unwrap();
        let est = wiener_deconvolve(&wall, &diffuse_kernel(&g).unwrap(), 1e-8, None).unwrap();
        let db = psnr(&est, &truth, 1.0).unwrap();
        assert!(db >= 40.0, "digit {digit}: {db} dB");
    }
}

#[test]
fn stronger_regularization_smooths_more() {
    let g = near_contact();
    let target = TargetFrame::new(block_digit(5, 0, 0).unwrap(), Pose::default());
    let wall = WallRenderer::new(g).unwrap().render(&target).unwrap();
    let truth = place_target(&target, &g).unwrap();
    let k = diffuse_kernel(&g).unwrap();
    let scores: Vec<f64> = [1e-8, 1e-3, 1e-1]
        .iter()
        .map(|&l| psnr(&wiener_deconvolve(&wall, &k, l, None).unwrap(), &truth, 1.0).unwrap())
        .collect();
    assert!(scores[0] > scores[1] && scores[1] > scores[2], "{scores:?}");
}

fn random_image(rng: &mut ChaCha8Rng, n: usize) -> Image {
    Image::from_fn(n, n, |_, _| rng.random_range(0.05..0.95))
}

fn central_difference(pred: &Image, gt: &Image, alpha: f64, beta: f64, cfg: &SsimConfig) -> Image {
    let h = 1e-6;
    let mut out = Image::zeros(pred.width(), pred.height());
    for i in 0..pred.len() {
        let mut up = pred.clone();
        up.data_mut()[i] += h;
        let mut down = pred.clone();
        down.data_mut()[i] -= h;
        let f = |p: &Image| composite_loss_with(p, gt, alpha, beta, cfg).unwrap();
        out.data_mut()[i] = (f(&up) - f(&down)) / (2.0 * h);
    }
    out
}

#[test]
fn composite_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let weights = [(1.0, 0.0), (0.0, 1.0), (1.0, 0.1), (0.5, 2.0)];
    for case in 0..20 {
        let (alpha, beta) = weights[case % weights.len()];
        let cfg = if case % 2 == 0 {
            SsimConfig::default()
        } else {
            SsimConfig::gaussian()
        };
        let pred = random_image(&mut rng, 12);
        let gt = random_image(&mut rng, 12);
        let (_, analytic) = loss_and_gradient(&pred, &gt, alpha, beta, &cfg).unwrap();
        let numeric = central_difference(&pred, &gt, alpha, beta, &cfg);
        let scale = numeric.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let worst = analytic
            .data()
            .iter()
            .zip(numeric.data())
            .map(|(a, n)| (a - n).abs() / scale)
            .fold(0.0, f64::max);
        assert!(worst < 1e-4, "case {case} (alpha {alpha}, beta {beta}): {worst}");
    }
}

#[test]
fn metric_closed_forms() {
    let gt = Image::from_fn(16, 16, |x, y| ((x * 13 + y * 7) % 200) as f64);
    let shifted = gt.map(|v| v + 16.0);
    let db = psnr(&shifted, &gt, 255.0).unwrap();
    assert!((db - 24.05).abs() < 0.01, "{db}");

    let s = ssim(
        &Image::filled(8, 8, 0.5),
        &Image::filled(8, 8, 0.25),
        &SsimConfig::default(),
    )
    .unwrap();
    assert!((s - 0.8001).abs() < 0.0005, "{s}");

    let bar = Image::from_fn(12, 9, |x, _| if x == 5 { 1.0 } else { 0.0 });
    let cd = CdConfig::default();
    assert_eq!(contour_distance(&bar, &cd).unwrap(), 5.0);
    let digit = block_digit(2, 0, 0).unwrap();
    let base = contour_distance(&digit, &cd).unwrap();
    for dx in [-3isize, -1, 2, 4] {
        // the shift is exact; only the final division by the row count rounds
        let moved = contour_distance(&digit.shifted(dx, 0), &cd).unwrap();
        assert!((moved - base - dx as f64).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn model_file_round_trips(
        iw in 1usize..6, ih in 1usize..6, ow in 1usize..6, oh in 1usize..6, seed in any::<u64>()
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (din, dout) = (Dims::new(iw, ih), Dims::new(ow, oh));
        let weights = (0..din.len() * dout.len()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let bias = (0..dout.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = LinearReconstructor::from_parts(din, dout, weights, bias).unwrap();
        let bytes = m.to_bytes();
        prop_assert_eq!(&bytes[..4], b"NLRW");
        let back = LinearReconstructor::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn psnr_and_ssim_are_symmetric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_image(&mut rng, 11);
        let b = random_image(&mut rng, 11);
        prop_assert_eq!(psnr(&a, &b, 1.0).unwrap(), psnr(&b, &a, 1.0).unwrap());
        for cfg in [SsimConfig::default(), SsimConfig::gaussian()] {
            let ab = ssim(&a, &b, &cfg).unwrap();
            prop_assert!((ab - ssim(&b, &a, &cfg).unwrap()).abs() < 1e-12);
            prop_assert!(ab <= 1.0 + 1e-12);
        }
    }
}
