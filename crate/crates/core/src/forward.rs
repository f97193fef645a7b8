//! Forward model: the irradiance pattern a hidden, self-luminous planar
//! target casts on a parallel diffuse wall.
//!
//! Each target pixel is treated as a small Lambertian emitter of area `ΔA`
//! and unit exitance per unit intensity. The irradiance it produces at an
//! in-plane offset `u` on a wall at distance `d` is
//!
//! ```text
//! K(u) = ΔA · d² / (π · (d² + |u|²)²)
//! ```
//!
//! Target pixels are snapped to the nearest wall-grid cell and the resulting
//! source map is convolved (linearly, zero padded) with `K`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{next_pow2, Direction, Spectrum2};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneGeometry {
    /// Separation `d` between target plane and wall.
    pub standoff_m: f64,
    /// Side length of the square target.
    pub target_extent_m: f64,
    /// Target pixels per side.
    pub target_res: usize,
    /// Side length of the square wall footprint.
    pub wall_extent_m: f64,
    /// Wall pixels per side.
    pub wall_res: usize,
}

impl Default for SceneGeometry {
    fn default() -> Self {
        Self {
            standoff_m: 0.25,
            target_extent_m: 0.03,
            target_res: 28,
            wall_extent_m: 1.0,
            wall_res: 128,
        }
    }
}

impl SceneGeometry {
    pub fn validate(&self) -> Result<()> {
        let positive = self.standoff_m > 0.0
            && self.target_extent_m > 0.0
            && self.wall_extent_m > 0.0
            && self.target_res > 0
            && self.wall_res > 0;
        if !positive || !self.standoff_m.is_finite() || !self.wall_extent_m.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "scene geometry must be positive and finite: {self:?}"
            )));
        }
        if self.wall_extent_m < self.target_extent_m {
            return Err(Error::InvalidConfig(format!(
                "wall extent {} m is smaller than target extent {} m",
                self.wall_extent_m, self.target_extent_m
            )));
        }
        if self.wall_res > u16::MAX as usize {
            return Err(Error::InvalidConfig(format!(
                "wall_res {} exceeds 65535",
                self.wall_res
            )));
        }
        Ok(())
    }

    pub fn target_pitch(&self) -> f64 {
        self.target_extent_m / self.target_res as f64
    }

    pub fn wall_pitch(&self) -> f64 {
        self.wall_extent_m / self.wall_res as f64
    }

    /// Area `ΔA` of one target pixel.
    pub fn target_pixel_area(&self) -> f64 {
        self.target_pitch().powi(2)
    }

    /// Index of the wall cell sitting at in-plane coordinate 0.
    pub fn wall_center_index(&self) -> usize {
        self.wall_res / 2
    }

    /// In-plane coordinate of wall cell `i` (same for rows and columns).
    pub fn wall_coord(&self, i: usize) -> f64 {
        (i as f64 - self.wall_center_index() as f64) * self.wall_pitch()
    }

    /// Target-plane coordinate of target pixel `i`'s center, before the pose offset.
    pub fn target_coord(&self, i: usize) -> f64 {
        (i as f64 + 0.5 - self.target_res as f64 / 2.0) * self.target_pitch()
    }

    /// Nearest wall cell to in-plane coordinate `x`, if it lies on the grid.
    pub fn nearest_wall_index(&self, x: f64) -> Option<usize> {
        let i = (x / self.wall_pitch()).round() + self.wall_center_index() as f64;
        (i >= 0.0 && i < self.wall_res as f64).then_some(i as usize)
    }

    /// Irradiance at in-plane offset `(ux, uy)` from one unit-exitance target pixel.
    pub fn kernel_value(&self, ux: f64, uy: f64) -> f64 {
        let d2 = self.standoff_m * self.standoff_m;
        let s = d2 + ux * ux + uy * uy;
        self.target_pixel_area() * d2 / (PI * s * s)
    }

    /// Whether every target pixel at this pose snaps onto the wall grid.
    pub fn pose_fits(&self, pose: Pose) -> bool {
        let lo = self.target_coord(0);
        let hi = self.target_coord(self.target_res - 1);
        [lo + pose.dx_m, hi + pose.dx_m]
            .iter()
            .all(|&x| self.nearest_wall_index(x).is_some())
            && [lo + pose.dy_m, hi + pose.dy_m]
                .iter()
                .all(|&y| self.nearest_wall_index(y).is_some())
    }
}

/// Fraction of a point Lambertian emitter's flux landing within radius `r`
/// on a parallel plane at distance `d`: `r² / (d² + r²)`.
pub fn captured_fraction_disk(r: f64, d: f64) -> f64 {
    r * r / (d * d + r * r)
}

/// Fraction of a point Lambertian emitter's flux landing on the axis-aligned
/// rectangle `[x0, x1] × [y0, y1]` of a parallel plane at distance `d`, with
/// the emitter above the origin.
pub fn captured_fraction_rect(x0: f64, x1: f64, y0: f64, y1: f64, d: f64) -> f64 {
    // signed corner term; the flux over [0, x] × [0, y]
    let corner = |x: f64, y: f64| {
        let (x, y) = (x / d, y / d);
        let sx = (1.0 + x * x).sqrt();
        let sy = (1.0 + y * y).sqrt();
        (x / sx * (y / sx).atan() + y / sy * (x / sy).atan()) / (2.0 * PI)
    };
    corner(x1, y1) - corner(x0, y1) - corner(x1, y0) + corner(x0, y0)
}

/// The sampled kernel on the wall grid, centered at [`SceneGeometry::wall_center_index`].
pub fn diffuse_kernel(geometry: &SceneGeometry) -> Result<Image> {
    geometry.validate()?;
    let c = geometry.wall_center_index() as f64;
    let p = geometry.wall_pitch();
    Ok(Image::from_fn(geometry.wall_res, geometry.wall_res, |x, y| {
        geometry.kernel_value((x as f64 - c) * p, (y as f64 - c) * p)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub dx_m: f64,
    pub dy_m: f64,
}

impl Pose {
    pub fn new(dx_m: f64, dy_m: f64) -> Self {
        Self { dx_m, dy_m }
    }

    pub fn lerp(self, other: Pose, f: f64) -> Pose {
        Pose {
            dx_m: self.dx_m + (other.dx_m - self.dx_m) * f,
            dy_m: self.dy_m + (other.dy_m - self.dy_m) * f,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetFrame {
    pub image: Image,
    pub pose: Pose,
}

impl TargetFrame {
    pub fn new(image: Image, pose: Pose) -> Self {
        Self { image, pose }
    }

    pub fn validate(&self, geometry: &SceneGeometry) -> Result<()> {
        let n = geometry.target_res;
        if self.image.dims() != (n, n) {
            return Err(Error::DimMismatch(format!(
                "target image {:?}, expected {n}x{n}",
                self.image.dims()
            )));
        }
        if self.image.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidConfig("target values must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub t_us: u64,
    pub pose: Pose,
}

/// Piecewise-linear target motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    knots: Vec<Knot>,
}

impl Trajectory {
    pub fn new(knots: Vec<Knot>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        if let Some(i) = knots.windows(2).position(|w| w[1].t_us <= w[0].t_us) {
            return Err(Error::NonMonotonicTimestamps { index: i + 1 });
        }
        Ok(Self { knots })
    }

    /// Constant-velocity move from `from` at `t0` to `to` at `t1`.
    pub fn linear(t0: u64, from: Pose, t1: u64, to: Pose) -> Result<Self> {
        Self::new(vec![Knot { t_us: t0, pose: from }, Knot { t_us: t1, pose: to }])
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    pub fn start_us(&self) -> u64 {
        self.knots[0].t_us
    }

    pub fn end_us(&self) -> u64 {
        self.knots[self.knots.len() - 1].t_us
    }

    /// Pose at `t_us`, linear between knots and held constant outside.
    pub fn pose_at(&self, t_us: f64) -> Pose {
        let first = &self.knots[0];
        if t_us <= first.t_us as f64 {
            return first.pose;
        }
        for w in self.knots.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if t_us <= b.t_us as f64 {
                let f = (t_us - a.t_us as f64) / (b.t_us - a.t_us) as f64;
                return a.pose.lerp(b.pose, f);
            }
        }
        self.knots[self.knots.len() - 1].pose
    }

    pub fn validate(&self, geometry: &SceneGeometry) -> Result<()> {
        // linear segments between fitting knots stay on the (convex) grid
        for k in &self.knots {
            if !geometry.pose_fits(k.pose) {
                return Err(Error::PoseOutOfBounds {
                    dx_m: k.pose.dx_m,
                    dy_m: k.pose.dy_m,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WallFrame {
    pub t_us: u64,
    pub image: Image,
}

/// Snap each target pixel to its nearest wall cell and accumulate exitance.
pub fn place_target(target: &TargetFrame, geometry: &SceneGeometry) -> Result<Image> {
    target.validate(geometry)?;
    let out_of_bounds = || Error::PoseOutOfBounds {
        dx_m: target.pose.dx_m,
        dy_m: target.pose.dy_m,
    };
    let n = geometry.target_res;
    let cols: Vec<usize> = (0..n)
        .map(|i| geometry.nearest_wall_index(geometry.target_coord(i) + target.pose.dx_m))
        .collect::<Option<_>>()
        .ok_or_else(out_of_bounds)?;
    let rows: Vec<usize> = (0..n)
        .map(|i| geometry.nearest_wall_index(geometry.target_coord(i) + target.pose.dy_m))
        .collect::<Option<_>>()
        .ok_or_else(out_of_bounds)?;
    let mut source = Image::zeros(geometry.wall_res, geometry.wall_res);
    for (ty, &wy) in rows.iter().enumerate() {
        for (tx, &wx) in cols.iter().enumerate() {
            source.add_at(wx, wy, target.image.get(tx, ty));
        }
    }
    Ok(source)
}

/// Renders wall frames for one geometry, caching the kernel spectrum.
#[derive(Debug, Clone)]
pub struct WallRenderer {
    geometry: SceneGeometry,
    fft_size: usize,
    kernel_spectrum: Spectrum2,
}

impl WallRenderer {
    pub fn new(geometry: SceneGeometry) -> Result<Self> {
        geometry.validate()?;
        let n = geometry.wall_res;
        // every source/receiver offset in (-n, n) must fit without wrapping
        let size = next_pow2(2 * n - 1);
        let p = geometry.wall_pitch();
        let mut kernel = Spectrum2::zeros(size, size);
        let offsets = -(n as isize - 1)..=(n as isize - 1);
        for oy in offsets.clone() {
            for ox in offsets.clone() {
                let v = geometry.kernel_value(ox as f64 * p, oy as f64 * p);
                let iy = oy.rem_euclid(size as isize) as usize;
                let ix = ox.rem_euclid(size as isize) as usize;
                kernel.data[iy * size + ix] = Complex64::new(v, 0.0);
            }
        }
        kernel.transform(Direction::Forward)?;
        Ok(Self {
            geometry,
            fft_size: size,
            kernel_spectrum: kernel,
        })
    }

    pub fn geometry(&self) -> &SceneGeometry {
        &self.geometry
    }

    /// Wall irradiance from a source map already on the wall grid.
    pub fn render_source(&self, source: &Image) -> Result<Image> {
        let n = self.geometry.wall_res;
        if source.dims() != (n, n) {
            return Err(Error::DimMismatch(format!(
                "source map {:?}, expected {n}x{n}",
                source.dims()
            )));
        }
        let size = self.fft_size;
        let mut spec = Spectrum2::zeros(size, size);
        for y in 0..n {
            for x in 0..n {
                spec.data[y * size + x] = Complex64::new(source.get(x, y), 0.0);
            }
        }
        spec.transform(Direction::Forward)?;
        for (s, k) in spec.data.iter_mut().zip(&self.kernel_spectrum.data) {
            *s *= k;
        }
        spec.transform(Direction::Inverse)?;
        Ok(Image::from_fn(n, n, |x, y| spec.data[y * size + x].re.max(0.0)))
    }

    pub fn render(&self, target: &TargetFrame) -> Result<Image> {
        self.render_source(&place_target(target, &self.geometry)?)
    }
}

pub fn render_wall_frame(target: &TargetFrame, geometry: &SceneGeometry) -> Result<Image> {
    WallRenderer::new(*geometry)?.render(target)
}

/// Frame times `start, start + Δ, …` up to and including the trajectory end,
/// with `Δ = 1e6 / frame_rate` µs rounded per frame.
pub fn frame_times(trajectory: &Trajectory, frame_rate: f64) -> Result<Vec<u64>> {
    if !(frame_rate > 0.0 && frame_rate.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "frame rate {frame_rate} must be positive"
        )));
    }
    let start = trajectory.start_us();
    let span = (trajectory.end_us() - start) as f64;
    let period = 1e6 / frame_rate;
    let count = (span / period + 1e-9).floor() as u64 + 1;
    Ok((0..count).map(|k| start + (k as f64 * period).round() as u64).collect())
}

pub fn render_video(
    target_image: &Image,
    trajectory: &Trajectory,
    frame_rate: f64,
    renderer: &WallRenderer,
) -> Result<Vec<WallFrame>> {
    trajectory.validate(renderer.geometry())?;
    let times = frame_times(trajectory, frame_rate)?;
    times
        .par_iter()
        .map(|&t_us| {
            let target = TargetFrame::new(target_image.clone(), trajectory.pose_at(t_us as f64));
            Ok(WallFrame {
                t_us,
                image: renderer.render(&target)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SceneGeometry {
        SceneGeometry {
            standoff_m: 0.05,
            target_extent_m: 0.04,
            target_res: 4,
            wall_extent_m: 0.16,
            wall_res: 16,
        }
    }

    fn impulse(res: usize) -> Image {
        let mut img = Image::zeros(res, res);
        img.set(res / 2, res / 2, 1.0);
        img
    }

    #[test]
    fn kernel_center_value() {
        let g = SceneGeometry::default();
        let k = diffuse_kernel(&g).unwrap();
        let c = g.wall_center_index();
        let expected = (0.03f64 / 28.0).powi(2) / (PI * 0.25 * 0.25);
        assert!((k.get(c, c) - expected).abs() < 1e-18);
        assert!((k.get(c, c) - 5.85e-6).abs() < 0.01e-6);
    }

    #[test]
    fn disk_capture_closed_form() {
        assert!((captured_fraction_disk(0.25, 0.25) - 0.5).abs() < 1e-15);
        assert!(captured_fraction_disk(1e9, 0.25) > 1.0 - 1e-12);
    }

    /// Midpoint quadrature of the kernel over a rectangle.
    fn quad_rect(x0: f64, x1: f64, y0: f64, y1: f64, d: f64) -> f64 {
        let n = 800;
        let (hx, hy) = ((x1 - x0) / n as f64, (y1 - y0) / n as f64);
        let mut acc = 0.0;
        for j in 0..n {
            let y = y0 + (j as f64 + 0.5) * hy;
            for i in 0..n {
                let x = x0 + (i as f64 + 0.5) * hx;
                let s = d * d + x * x + y * y;
                acc += d * d / (PI * s * s);
            }
        }
        acc * hx * hy
    }

    #[test]
    fn rect_capture_matches_quadrature() {
        let d = 0.25;
        for &(x0, x1, y0, y1) in &[(-0.5, 0.5, -0.5, 0.5), (0.0, 0.3, 0.0, 0.2), (-0.1, 0.4, 0.05, 0.6)] {
            let exact = captured_fraction_rect(x0, x1, y0, y1, d);
            let quad = quad_rect(x0, x1, y0, y1, d);
            assert!((exact - quad).abs() < 1e-6, "{exact} vs {quad}");
        }
        assert!((captured_fraction_rect(-1e6, 1e6, -1e6, 1e6, d) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_target_gives_zero_wall() {
        let g = tiny();
        let t = TargetFrame::new(Image::zeros(4, 4), Pose::default());
        assert!(render_wall_frame(&t, &g).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_response_is_kernel() {
        let g = SceneGeometry {
            target_res: 1,
            target_extent_m: 0.01,
            ..tiny()
        };
        let t = TargetFrame::new(impulse(1), Pose::default());
        let wall = render_wall_frame(&t, &g).unwrap();
        let k = diffuse_kernel(&g).unwrap();
        for (a, b) in wall.data().iter().zip(k.data()) {
            assert!((a - b).abs() <= 1e-9 * k.max());
        }
    }

    #[test]
    fn pose_off_grid_is_rejected() {
        let g = tiny();
        let t = TargetFrame::new(Image::filled(4, 4, 1.0), Pose::new(0.07, 0.0));
        assert!(matches!(render_wall_frame(&t, &g), Err(Error::PoseOutOfBounds { .. })));
    }

    #[test]
    fn video_frame_count_and_spacing() {
        let g = tiny();
        let r = WallRenderer::new(g).unwrap();
        let traj = Trajectory::linear(0, Pose::new(-0.02, 0.0), 1_000_000, Pose::new(0.02, 0.0)).unwrap();
        let frames = render_video(&Image::filled(4, 4, 0.5), &traj, 100.0, &r).unwrap();
        assert_eq!(frames.len(), 101);
        assert_eq!(frames[1].t_us, 10_000);
        assert_eq!(frames[100].t_us, 1_000_000);
        let p = traj.pose_at(frames[50].t_us as f64);
        assert!(p.dx_m.abs() < 1e-15);

        let still = Trajectory::new(vec![Knot {
            t_us: 5,
            pose: Pose::default(),
        }])
        .unwrap();
        let frames = render_video(&Image::filled(4, 4, 0.5), &still, 100.0, &r).unwrap();
        assert_eq!(frames.len(), 1);
    }

    #[test]
    fn trajectory_rejects_bad_knots() {
        assert!(matches!(Trajectory::new(vec![]), Err(Error::EmptyTrajectory)));
        let k = Knot {
            t_us: 3,
            pose: Pose::default(),
        };
        assert!(Trajectory::new(vec![k, k]).is_err());
    }
}
