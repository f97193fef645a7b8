use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major grayscale image of `f64` samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimMismatch(format!(
                "{} samples for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    #[inline]
    pub fn add_at(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] += value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Image {
        self.map(|v| v * factor)
    }

    pub fn clamped(&self, lo: f64, hi: f64) -> Image {
        self.map(|v| v.clamp(lo, hi))
    }

    pub fn ensure_same_dims(&self, other: &Image) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    /// Copy of the `width`×`height` window whose top-left corner is `(x0, y0)`.
    /// Cells outside the source read as zero.
    pub fn crop(&self, x0: isize, y0: isize, width: usize, height: usize) -> Image {
        Image::from_fn(width, height, |x, y| {
            let sx = x0 + x as isize;
            let sy = y0 + y as isize;
            if sx < 0 || sy < 0 || sx >= self.width as isize || sy >= self.height as isize {
                0.0
            } else {
                self.get(sx as usize, sy as usize)
            }
        })
    }

    /// Translate by `(dx, dy)` pixels with zero fill.
    pub fn shifted(&self, dx: isize, dy: isize) -> Image {
        self.crop(-dx, -dy, self.width, self.height)
    }

    /// Area-average resampling to `out_w`×`out_h`.
    ///
    /// Each output cell averages the input over its footprint, weighting
    /// partially covered input pixels by overlap, so integer factors reduce to
    /// plain block means.
    pub fn downsample_area(&self, out_w: usize, out_h: usize) -> Image {
        let sx = self.width as f64 / out_w as f64;
        let sy = self.height as f64 / out_h as f64;
        let cover = |lo: f64, hi: f64, n: usize| -> Vec<(usize, f64)> {
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(n);
            (first..last)
                .filter_map(|i| {
                    let w = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                    (w > 0.0).then_some((i, w))
                })
                .collect()
        };
        let cols: Vec<_> = (0..out_w)
            .map(|ox| cover(ox as f64 * sx, (ox + 1) as f64 * sx, self.width))
            .collect();
        let rows: Vec<_> = (0..out_h)
            .map(|oy| cover(oy as f64 * sy, (oy + 1) as f64 * sy, self.height))
            .collect();
        let area = sx * sy;
        Image::from_fn(out_w, out_h, |ox, oy| {
            let mut acc = 0.0;
            for &(y, wy) in &rows[oy] {
                for &(x, wx) in &cols[ox] {
                    acc += self.get(x, y) * wx * wy;
                }
            }
            acc / area
        })
    }

    /// Bilinear sample at fractional pixel coordinates (pixel centers at
    /// integer positions). Outside the image reads as zero.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let at = |xi: f64, yi: f64| -> f64 {
            if xi < 0.0 || yi < 0.0 || xi >= self.width as f64 || yi >= self.height as f64 {
                0.0
            } else {
                self.get(xi as usize, yi as usize)
            }
        };
        at(x0, y0) * (1.0 - fx) * (1.0 - fy)
            + at(x0 + 1.0, y0) * fx * (1.0 - fy)
            + at(x0, y0 + 1.0) * (1.0 - fx) * fy
            + at(x0 + 1.0, y0 + 1.0) * fx * fy
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_downsample_is_block_mean() {
        let img = Image::from_fn(4, 4, |x, y| (x + 4 * y) as f64);
        let small = img.downsample_area(2, 2);
        assert_eq!(small.data(), &[2.5, 4.5, 10.5, 12.5]);
    }

    #[test]
    fn fractional_downsample_preserves_mean() {
        let img = Image::from_fn(7, 5, |x, y| ((x * 3 + y * 5) % 7) as f64);
        let small = img.downsample_area(3, 2);
        assert!((small.mean() - img.mean()).abs() < 1e-12);
    }

    #[test]
    fn shift_zero_fills() {
        let img = Image::from_fn(3, 1, |x, _| x as f64 + 1.0);
        assert_eq!(img.shifted(1, 0).data(), &[0.0, 1.0, 2.0]);
        assert_eq!(img.shifted(-2, 0).data(), &[3.0, 0.0, 0.0]);
    }

    #[test]
    fn bilinear_hits_pixel_centers() {
        let img = Image::from_fn(3, 3, |x, y| (x * 10 + y) as f64);
        assert_eq!(img.sample_bilinear(2.0, 1.0), 21.0);
        assert!((img.sample_bilinear(0.5, 0.0) - 5.0).abs() < 1e-12);
        assert_eq!(img.sample_bilinear(-1.0, 0.0), 0.0);
    }
}
