//! Reconstruction quality and position metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::NEVT_HEADER_LEN;
use crate::image::Image;

/// Mean squared error between two images of equal size.
pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let sum: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.len() as f64)
}

/// Peak signal-to-noise ratio in dB; identical images give `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image, peak: f64) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / m).log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SsimWindow {
    /// Statistics over the whole image.
    Global,
    /// 11×11 Gaussian window, σ = 1.5, valid positions only.
    Gaussian11,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SsimConfig {
    pub window: SsimWindow,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self {
            window: SsimWindow::Global,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimConfig {
    pub fn gaussian() -> Self {
        Self {
            window: SsimWindow::Gaussian11,
            ..Self::default()
        }
    }

    fn constants(&self) -> (f64, f64) {
        let l = self.dynamic_range;
        ((self.k1 * l).powi(2), (self.k2 * l).powi(2))
    }
}

/// Normalized weights of one window placement.
struct Window {
    width: usize,
    height: usize,
    weights: Vec<f64>,
}

impl Window {
    fn for_image(kind: SsimWindow, w: usize, h: usize) -> Window {
        match kind {
            SsimWindow::Global => Window {
                width: w,
                height: h,
                weights: vec![1.0 / (w * h) as f64; w * h],
            },
            SsimWindow::Gaussian11 => {
                // shrink to the image for inputs smaller than the window
                let gauss = |n: usize| -> Vec<f64> {
                    let c = (n as f64 - 1.0) / 2.0;
                    (0..n)
                        .map(|i| (-(i as f64 - c).powi(2) / (2.0 * 1.5 * 1.5)).exp())
                        .collect()
                };
                let (kw, kh) = (w.min(11), h.min(11));
                let (gx, gy) = (gauss(kw), gauss(kh));
                let mut weights: Vec<f64> = gy.iter().flat_map(|&a| gx.iter().map(move |&b| a * b)).collect();
                let total: f64 = weights.iter().sum();
                weights.iter_mut().for_each(|v| *v /= total);
                Window {
                    width: kw,
                    height: kh,
                    weights,
                }
            }
        }
    }
}

/// SSIM and, optionally, its gradient with respect to `a`.
///
/// Local statistics use population moments under the window weights; the
/// score is the mean of the local SSIM map over all valid placements.
pub(crate) fn ssim_impl(a: &Image, b: &Image, config: &SsimConfig, want_grad: bool) -> Result<(f64, Option<Image>)> {
    a.ensure_same_dims(b)?;
    if a.is_empty() {
        return Err(Error::DimMismatch("empty image".into()));
    }
    let (c1, c2) = config.constants();
    let (w, h) = a.dims();
    let win = Window::for_image(config.window, w, h);
    let (px, py) = (w - win.width + 1, h - win.height + 1);
    let positions = (px * py) as f64;
    let mut total = 0.0;
    let mut grad = want_grad.then(|| Image::zeros(w, h));

    for oy in 0..py {
        for ox in 0..px {
            let (mut ma, mut mb, mut maa, mut mbb, mut mab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for ky in 0..win.height {
                for kx in 0..win.width {
                    let wt = win.weights[ky * win.width + kx];
                    let va = a.get(ox + kx, oy + ky);
                    let vb = b.get(ox + kx, oy + ky);
                    ma += wt * va;
                    mb += wt * vb;
                    maa += wt * va * va;
                    mbb += wt * vb * vb;
                    mab += wt * va * vb;
                }
            }
            let var_a = maa - ma * ma;
            let var_b = mbb - mb * mb;
            let cov = mab - ma * mb;
            let num1 = 2.0 * ma * mb + c1;
            let num2 = 2.0 * cov + c2;
            let den1 = ma * ma + mb * mb + c1;
            let den2 = var_a + var_b + c2;
            let s = num1 * num2 / (den1 * den2);
            total += s;

            if let Some(g) = grad.as_mut() {
                let ds_num1 = num2 / (den1 * den2);
                let ds_num2 = num1 / (den1 * den2);
                let ds_den1 = -s / den1;
                let ds_den2 = -s / den2;
                // chain through the raw moments m_a, m_aa, m_ab
                let ds_ma = ds_num1 * 2.0 * mb - ds_num2 * 2.0 * mb + ds_den1 * 2.0 * ma - ds_den2 * 2.0 * ma;
                let ds_maa = ds_den2;
                let ds_mab = ds_num2 * 2.0;
                for ky in 0..win.height {
                    for kx in 0..win.width {
                        let wt = win.weights[ky * win.width + kx];
                        let (x, y) = (ox + kx, oy + ky);
                        let d = wt * (ds_ma + 2.0 * a.get(x, y) * ds_maa + b.get(x, y) * ds_mab);
                        g.add_at(x, y, d / positions);
                    }
                }
            }
        }
    }
    Ok((total / positions, grad))
}

pub fn ssim(a: &Image, b: &Image, config: &SsimConfig) -> Result<f64> {
    ssim_impl(a, b, config, false).map(|(v, _)| v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CdConfig {
    /// Foreground is any pixel whose 8-bit value is at least this.
    pub binarize_threshold: u8,
}

impl Default for CdConfig {
    fn default() -> Self {
        Self {
            binarize_threshold: 128,
        }
    }
}

/// Contour distance: mean column of the first foreground pixel over rows
/// that contain foreground. Image values are unit range and are scaled to
/// 8-bit before thresholding.
pub fn contour_distance(image: &Image, config: &CdConfig) -> Result<f64> {
    if config.binarize_threshold == 0 {
        return Err(Error::InvalidConfig("binarize threshold must be in [1, 255]".into()));
    }
    if image.is_empty() {
        return Err(Error::NoForeground("empty image".into()));
    }
    let threshold = config.binarize_threshold as f64;
    let (mut sum, mut rows) = (0usize, 0usize);
    for y in 0..image.height() {
        let first = (0..image.width()).find(|&x| (image.get(x, y).clamp(0.0, 1.0) * 255.0).round() >= threshold);
        if let Some(x) = first {
            sum += x;
            rows += 1;
        }
    }
    if rows == 0 {
        return Err(Error::NoForeground("image".into()));
    }
    Ok(sum as f64 / rows as f64)
}

/// `|Cd(recon) − Cd(gt)|`.
pub fn cd_deviation(recon: &Image, gt: &Image, config: &CdConfig) -> Result<f64> {
    let tag = |which: &'static str| {
        move |e: Error| match e {
            Error::NoForeground(_) => Error::NoForeground(which.to_string()),
            other => other,
        }
    };
    let r = contour_distance(recon, config).map_err(tag("reconstruction"))?;
    let g = contour_distance(gt, config).map_err(tag("ground truth"))?;
    Ok((r - g).abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataVolumeReport {
    pub event_bytes: u64,
    pub frame_bytes: u64,
    pub ratio: f64,
    pub summary: String,
}

pub fn data_volume_report(event_bytes: u64, frame_bytes: u64) -> Result<DataVolumeReport> {
    if frame_bytes == 0 {
        return Err(Error::InvalidConfig("frame byte count must be positive".into()));
    }
    let ratio = event_bytes as f64 / frame_bytes as f64;
    let summary = format!(
        "event data {:.2} MB vs frame data {:.2} MB ({:.2}% of frame volume)",
        event_bytes as f64 / 1e6,
        frame_bytes as f64 / 1e6,
        100.0 * ratio
    );
    Ok(DataVolumeReport {
        event_bytes,
        frame_bytes,
        ratio,
        summary,
    })
}

/// Smallest possible event file: a bare NEVT1 header.
pub const EMPTY_EVENT_FILE_BYTES: u64 = NEVT_HEADER_LEN as u64;

#[cfg(test)]
mod tests {
    use super::*;

    fn bar(width: usize, height: usize, col: usize) -> Image {
        Image::from_fn(width, height, |x, _| if x == col { 1.0 } else { 0.0 })
    }

    #[test]
    fn psnr_closed_forms() {
        let a = Image::filled(8, 8, 100.0);
        let b = Image::filled(8, 8, 116.0);
        let expected = 10.0 * (255.0f64 * 255.0 / 256.0).log10();
        assert!((psnr(&a, &b, 255.0).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 24.05).abs() < 0.01);
        let u = Image::filled(4, 4, 0.3);
        let v = Image::filled(4, 4, 0.4);
        assert!((psnr(&u, &v, 1.0).unwrap() - 20.0).abs() < 1e-9);
        assert_eq!(psnr(&u, &u, 1.0).unwrap(), f64::INFINITY);
        assert!(psnr(&u, &Image::zeros(3, 4), 1.0).is_err());
    }

    #[test]
    fn ssim_constant_images() {
        let a = Image::filled(6, 6, 0.5);
        let b = Image::filled(6, 6, 0.25);
        let v = ssim(&a, &b, &SsimConfig::default()).unwrap();
        let expected = (2.0 * 0.125 + 1e-4) / (0.3125 + 1e-4);
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 0.8001).abs() < 5e-4);
        assert_eq!(ssim(&a, &a, &SsimConfig::default()).unwrap(), 1.0);
    }

    #[test]
    fn ssim_gaussian_window_on_small_and_large_images() {
        let a = Image::from_fn(20, 16, |x, y| ((x * 7 + y * 3) % 11) as f64 / 10.0);
        let flat = Image::filled(20, 16, 0.5);
        let cfg = SsimConfig::gaussian();
        assert!((ssim(&a, &a, &cfg).unwrap() - 1.0).abs() < 1e-12);
        assert!(ssim(&a, &flat, &cfg).unwrap() < 1.0);
        let tiny = Image::from_fn(5, 5, |x, y| (x + y) as f64 / 8.0);
        assert!((ssim(&tiny, &tiny, &cfg).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contour_distance_examples() {
        assert_eq!(contour_distance(&bar(12, 10, 5), &CdConfig::default()).unwrap(), 5.0);
        assert_eq!(contour_distance(&bar(12, 10, 0), &CdConfig::default()).unwrap(), 0.0);
        assert!(matches!(
            contour_distance(&Image::zeros(4, 4), &CdConfig::default()),
            Err(Error::NoForeground(_))
        ));
        // rows without foreground are skipped
        let mut img = Image::zeros(6, 3);
        img.set(2, 0, 1.0);
        img.set(4, 2, 0.9);
        assert_eq!(contour_distance(&img, &CdConfig::default()).unwrap(), 3.0);
        // 127/255 stays background at the default threshold
        let dim = Image::filled(3, 1, 127.0 / 255.0);
        assert!(contour_distance(&dim, &CdConfig::default()).is_err());
    }

    #[test]
    fn cd_deviation_examples() {
        let cfg = CdConfig::default();
        assert_eq!(cd_deviation(&bar(12, 10, 5), &bar(12, 10, 9), &cfg).unwrap(), 4.0);
        assert_eq!(cd_deviation(&bar(12, 10, 5), &bar(12, 10, 5), &cfg).unwrap(), 0.0);
        match cd_deviation(&Image::zeros(12, 10), &bar(12, 10, 5), &cfg) {
            Err(Error::NoForeground(which)) => assert_eq!(which, "reconstruction"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn data_volume_examples() {
        let r = data_volume_report(5_960_000, 291_510_000).unwrap();
        assert!((r.ratio - 0.0204).abs() < 1e-4);
        assert_eq!(data_volume_report(7, 7).unwrap().ratio, 1.0);
        let empty = data_volume_report(EMPTY_EVENT_FILE_BYTES, 1000).unwrap();
        assert_eq!(empty.ratio, 0.02);
        assert!(data_volume_report(1, 0).is_err());
    }
}
