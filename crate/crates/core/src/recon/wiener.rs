use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{next_pow2, Direction, Spectrum2};
use crate::image::Image;

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

/// Regularized frequency-domain deconvolution.
///
/// Computes `F⁻¹[ conj(H)·W / (|H|² + λ·max|H|²) ]`, where `H` is the
/// spectrum of `kernel` recentred so that its center pixel (`width/2`,
/// `height/2`) sits at the origin and `W` the spectrum of `wall`. Both are
/// zero padded to the next power of two. `λ` is relative to the peak kernel
/// power so it is independent of the kernel's absolute scale. The estimate is
/// clipped at zero and cropped to `crop` (whole grid when `None`).
pub fn wiener_deconvolve(wall: &Image, kernel: &Image, lambda: f64, crop: Option<Rect>) -> Result<Image> {
    wall.ensure_same_dims(kernel)?;
    if !(lambda >= 0.0) {
        return Err(Error::InvalidConfig(format!("lambda {lambda} must be non-negative")));
    }
    let (w, h) = wall.dims();
    let (pw, ph) = (next_pow2(w), next_pow2(h));
    let (cx, cy) = ((w / 2) as isize, (h / 2) as isize);

    let mut kspec = Spectrum2::zeros(pw, ph);
    for y in 0..h {
        for x in 0..w {
            let ix = (x as isize - cx).rem_euclid(pw as isize) as usize;
            let iy = (y as isize - cy).rem_euclid(ph as isize) as usize;
            kspec.data[iy * pw + ix] = Complex64::new(kernel.get(x, y), 0.0);
        }
    }
    kspec.transform(Direction::Forward)?;

    let mut wspec = Spectrum2::zeros(pw, ph);
    for y in 0..h {
        for x in 0..w {
            wspec.data[y * pw + x] = Complex64::new(wall.get(x, y), 0.0);
        }
    }
    wspec.transform(Direction::Forward)?;

    let peak = kspec.data.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
    let reg = if lambda.is_infinite() {
        f64::INFINITY
    } else {
        lambda * peak
    };
    for (ws, hk) in wspec.data.iter_mut().zip(&kspec.data) {
        let denom = hk.norm_sqr() + reg;
        if denom == 0.0 {
            return Err(Error::SingularKernel);
        }
        *ws = if denom.is_infinite() {
            Complex64::new(0.0, 0.0)
        } else {
            *ws * hk.conj() / denom
        };
    }
    wspec.transform(Direction::Inverse)?;

    let r = crop.unwrap_or(Rect {
        x: 0,
        y: 0,
        width: w,
        height: h,
    });
    if r.x + r.width > w || r.y + r.height > h {
        return Err(Error::DimMismatch(format!("crop {r:?} exceeds {w}x{h}")));
    }
    Ok(Image::from_fn(r.width, r.height, |x, y| {
        wspec.data[(y + r.y) * pw + x + r.x].re.max(0.0)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn delta(w: usize, h: usize) -> Image {
        let mut k = Image::zeros(w, h);
        k.set(w / 2, h / 2, 1.0);
        k
    }

    #[test]
    fn delta_kernel_returns_wall() {
        let wall = Image::from_fn(8, 8, |x, y| ((x * 3 + y) % 5) as f64);
        let est = wiener_deconvolve(&wall, &delta(8, 8), 0.0, None).unwrap();
        for (a, b) in est.data().iter().zip(wall.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        let crop = Rect {
            x: 2,
            y: 1,
            width: 3,
            height: 4,
        };
        let est = wiener_deconvolve(&wall, &delta(8, 8), 0.0, Some(crop)).unwrap();
        assert!((est.get(0, 0) - wall.get(2, 1)).abs() < 1e-12);
    }

    #[test]
    fn non_power_of_two_is_padded() {
        let wall = Image::from_fn(6, 5, |x, y| (x + 2 * y) as f64);
        let est = wiener_deconvolve(&wall, &delta(6, 5), 0.0, None).unwrap();
        for (a, b) in est.data().iter().zip(wall.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn huge_lambda_gives_zero() {
        let wall = Image::filled(8, 8, 1.0);
        let k = Image::filled(8, 8, 0.1);
        let est = wiener_deconvolve(&wall, &k, 1e12, None).unwrap();
        assert!(est.max() < 1e-9);
        assert_eq!(wiener_deconvolve(&wall, &k, f64::INFINITY, None).unwrap().max(), 0.0);
    }

    #[test]
    fn zero_spectrum_without_regularization_is_singular() {
        let wall = Image::filled(4, 4, 1.0);
        assert!(matches!(
            wiener_deconvolve(&wall, &Image::zeros(4, 4), 0.0, None),
            Err(Error::SingularKernel)
        ));
        assert!(wiener_deconvolve(&wall, &Image::zeros(3, 4), 0.0, None).is_err());
    }
}
