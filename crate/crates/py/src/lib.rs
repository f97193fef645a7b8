//! Python bindings: event streams, forward model, simulator, features,
//! metrics and reconstruction. Images cross the boundary as lists of rows.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use evnlos::event::{read_binary, write_binary, write_csv};
use evnlos::features::{time_surface_frame, voxel_grid_features as voxel_features, TimeSurfaceConfig};
use evnlos::forward::{diffuse_kernel as kernel_image, Pose, SceneGeometry, TargetFrame, WallFrame, WallRenderer};
use evnlos::metrics::{self, CdConfig, SsimConfig};
use evnlos::pipeline::{generate_dataset as gen_dataset, PipelineConfig, Profile};
use evnlos::recon;
use evnlos::sim::{simulate_events as simulate, EventSimConfig};
use evnlos::targets::{block_digit as digit_image, TargetSource};
use evnlos::{Event, Image, Polarity, SensorGeometry};

create_exception!(evnlos_py, EvnlosError, PyException);

fn err(e: evnlos::Error) -> PyErr {
    EvnlosError::new_err(format!("{}: {e}", e.kind()))
}

fn to_image(rows: Vec<Vec<f64>>) -> PyResult<Image> {
    let h = rows.len();
    let w = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != w) {
        return Err(EvnlosError::new_err("DimMismatch: ragged image rows"));
    }
    Image::from_vec(w, h, rows.concat()).map_err(err)
}

fn to_rows(img: &Image) -> Vec<Vec<f64>> {
    img.data().chunks(img.width().max(1)).map(<[f64]>::to_vec).collect()
}

fn geometry(
    standoff_m: f64,
    target_extent_m: f64,
    target_res: usize,
    wall_extent_m: f64,
    wall_res: usize,
) -> PyResult<SceneGeometry> {
    let g = SceneGeometry {
        standoff_m,
        target_extent_m,
        target_res,
        wall_extent_m,
        wall_res,
    };
    g.validate().map_err(err)?;
    Ok(g)
}

#[pyclass(name = "EventStream", module = "evnlos_py", skip_from_py_object)]
#[derive(Clone)]
struct PyEventStream {
    inner: evnlos::EventStream,
}

#[pymethods]
impl PyEventStream {
    /// Build from `(t_us, x, y, polarity)` tuples; sorts into canonical order.
    #[new]
    fn new(width: u16, height: u16, events: Vec<(u64, u16, u16, i8)>) -> PyResult<Self> {
        let geometry = SensorGeometry::new(width, height).map_err(err)?;
        let events = events
            .into_iter()
            .map(|(t, x, y, p)| {
                let polarity =
                    Polarity::from_i8(p).ok_or_else(|| EvnlosError::new_err(format!("InvalidStream: polarity {p}")))?;
                Ok(Event::new(t, x, y, polarity))
            })
            .collect::<PyResult<Vec<_>>>()?;
        let inner = evnlos::EventStream::from_unsorted(geometry, events).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        read_binary(data).map(|inner| Self { inner }).map_err(err)
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        let bytes = std::fs::read(&path).map_err(|e| EvnlosError::new_err(format!("Io: {}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }

    fn to_bytes(&self) -> Vec<u8> {
        write_binary(&self.inner)
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        std::fs::write(&path, write_binary(&self.inner))
            .map_err(|e| EvnlosError::new_err(format!("Io: {}: {e}", path.display())))
    }

    fn to_csv(&self) -> String {
        write_csv(&self.inner)
    }

    #[getter]
    fn width(&self) -> u16 {
        self.inner.geometry().width
    }

    #[getter]
    fn height(&self) -> u16 {
        self.inner.geometry().height
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn events(&self) -> Vec<(u64, u16, u16, i8)> {
        self.inner
            .events()
            .iter()
            .map(|e| (e.t_us, e.x, e.y, e.polarity.as_i8()))
            .collect()
    }

    /// Events with `t0 <= t < t1`.
    fn slice_time(&self, t0: u64, t1: u64) -> PyResult<Self> {
        self.inner.slice_time(t0, t1).map(|inner| Self { inner }).map_err(err)
    }

    /// `None` when valid, else a description of the first violation.
    fn validate(&self) -> Option<String> {
        self.inner.validate().err().map(|v| v.to_string())
    }

    fn __repr__(&self) -> String {
        let g = self.inner.geometry();
        format!("EventStream({}x{}, {} events)", g.width, g.height, self.inner.len())
    }
}

#[pyfunction]
#[pyo3(signature = (standoff_m=0.25, target_extent_m=0.03, target_res=28, wall_extent_m=1.0, wall_res=128))]
fn diffuse_kernel(
    standoff_m: f64,
    target_extent_m: f64,
    target_res: usize,
    wall_extent_m: f64,
    wall_res: usize,
) -> PyResult<Vec<Vec<f64>>> {
    let g = geometry(standoff_m, target_extent_m, target_res, wall_extent_m, wall_res)?;
    kernel_image(&g).map(|k| to_rows(&k)).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (target, dx_m=0.0, dy_m=0.0, standoff_m=0.25, target_extent_m=0.03, wall_extent_m=1.0, wall_res=128))]
#[allow(clippy::too_many_arguments)]
fn render_wall_frame(
    target: Vec<Vec<f64>>,
    dx_m: f64,
    dy_m: f64,
    standoff_m: f64,
    target_extent_m: f64,
    wall_extent_m: f64,
    wall_res: usize,
) -> PyResult<Vec<Vec<f64>>> {
    let img = to_image(target)?;
    let g = geometry(standoff_m, target_extent_m, img.width(), wall_extent_m, wall_res)?;
    let renderer = WallRenderer::new(g).map_err(err)?;
    renderer
        .render(&TargetFrame::new(img, Pose::new(dx_m, dy_m)))
        .map(|w| to_rows(&w))
        .map_err(err)
}

/// `frames` is a list of `(t_us, image)` pairs.
#[pyfunction]
#[pyo3(signature = (frames, contrast_threshold=0.15, log_floor=1e-5, refractory_us=0))]
fn simulate_events(
    frames: Vec<(u64, Vec<Vec<f64>>)>,
    contrast_threshold: f64,
    log_floor: f64,
    refractory_us: u64,
) -> PyResult<PyEventStream> {
    let frames = frames
        .into_iter()
        .map(|(t_us, rows)| {
            Ok(WallFrame {
                t_us,
                image: to_image(rows)?,
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    let cfg = EventSimConfig {
        contrast_threshold,
        log_floor,
        refractory_us,
        ..EventSimConfig::default()
    };
    simulate(&frames, &cfg)
        .map(|inner| PyEventStream { inner })
        .map_err(err)
}

/// Merged-polarity time-surface at `t_query`.
#[pyfunction]
fn time_surface(stream: &PyEventStream, t_query: u64, tau_us: f64) -> PyResult<Vec<Vec<f64>>> {
    time_surface_frame(&stream.inner, t_query, &TimeSurfaceConfig::with_tau(tau_us))
        .map(|f| to_rows(&f.merged()))
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (stream, n_bins, tau_us=None))]
fn voxel_grid_features(
    stream: &PyEventStream,
    n_bins: usize,
    tau_us: Option<f64>,
) -> PyResult<Vec<(u64, Vec<Vec<f64>>)>> {
    let cfg = TimeSurfaceConfig {
        tau_us,
        ..TimeSurfaceConfig::default()
    };
    voxel_features(&stream.inner, n_bins, &cfg)
        .map(|fs| fs.iter().map(|f| (f.bin_end_us, to_rows(&f.merged()))).collect())
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (a, b, peak=1.0))]
fn psnr(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, peak: f64) -> PyResult<f64> {
    metrics::psnr(&to_image(a)?, &to_image(b)?, peak).map_err(err)
}

/// `window` is `"global"` or `"gaussian"`.
#[pyfunction]
#[pyo3(signature = (a, b, window="global"))]
fn ssim(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, window: &str) -> PyResult<f64> {
    let cfg = match window {
        "global" => SsimConfig::default(),
        "gaussian" => SsimConfig::gaussian(),
        other => return Err(EvnlosError::new_err(format!("InvalidConfig: unknown window {other:?}"))),
    };
    metrics::ssim(&to_image(a)?, &to_image(b)?, &cfg).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (image, threshold=128))]
fn contour_distance(image: Vec<Vec<f64>>, threshold: u8) -> PyResult<f64> {
    metrics::contour_distance(
        &to_image(image)?,
        &CdConfig {
            binarize_threshold: threshold,
        },
    )
    .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (pred, gt, alpha=1.0, beta=0.1))]
fn composite_loss(pred: Vec<Vec<f64>>, gt: Vec<Vec<f64>>, alpha: f64, beta: f64) -> PyResult<f64> {
    recon::composite_loss(&to_image(pred)?, &to_image(gt)?, alpha, beta).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (wall, kernel, lam=1e-8))]
fn wiener_deconvolve(wall: Vec<Vec<f64>>, kernel: Vec<Vec<f64>>, lam: f64) -> PyResult<Vec<Vec<f64>>> {
    recon::wiener_deconvolve(&to_image(wall)?, &to_image(kernel)?, lam, None)
        .map(|img| to_rows(&img))
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (digit, variant=0, seed=0))]
fn block_digit(digit: u8, variant: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    digit_image(digit, variant, seed).map(|img| to_rows(&img)).map_err(err)
}

#[pyclass(name = "LinearReconstructor", module = "evnlos_py")]
struct PyLinearReconstructor {
    inner: recon::LinearReconstructor,
}

#[pymethods]
impl PyLinearReconstructor {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        recon::LinearReconstructor::load(&path)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    /// `(width, height)` of the expected input.
    #[getter]
    fn in_dims(&self) -> (usize, usize) {
        let d = self.inner.in_dims();
        (d.width, d.height)
    }

    #[getter]
    fn out_dims(&self) -> (usize, usize) {
        let d = self.inner.out_dims();
        (d.width, d.height)
    }

    /// Resample `feature` to the input size and predict, clipped to [0, 1].
    fn predict(&self, feature: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let input = recon::model_input(&to_image(feature)?, self.inner.in_dims());
        self.inner.predict_image(&input).map(|img| to_rows(&img)).map_err(err)
    }
}

/// Generate a builtin-digit dataset; returns `(train, val, test)` counts.
#[pyfunction]
#[pyo3(signature = (out_dir, profile="smoke", seed=0))]
fn generate_dataset(out_dir: PathBuf, profile: &str, seed: u64) -> PyResult<(usize, usize, usize)> {
    let profile = Profile::by_name(profile).map_err(err)?;
    let cfg = PipelineConfig {
        seed,
        ..PipelineConfig::default()
    };
    let ds = gen_dataset(&TargetSource::BuiltinBlockDigits, &profile, &cfg, &out_dir).map_err(err)?;
    let s = &ds.manifest.splits;
    Ok((s.train.len(), s.val.len(), s.test.len()))
}

/// Split counts of a profile without generating anything.
#[pyfunction]
fn profile_counts(profile: &str) -> PyResult<(usize, usize, usize)> {
    let c = Profile::by_name(profile).and_then(|p| p.counts()).map_err(err)?;
    Ok((c.train, c.val, c.test))
}

#[pymodule]
fn evnlos_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("EvnlosError", m.py().get_type::<EvnlosError>())?;
    m.add_class::<PyEventStream>()?;
    m.add_class::<PyLinearReconstructor>()?;
    m.add_function(wrap_pyfunction!(diffuse_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(render_wall_frame, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_events, m)?)?;
    m.add_function(wrap_pyfunction!(time_surface, m)?)?;
    m.add_function(wrap_pyfunction!(voxel_grid_features, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(contour_distance, m)?)?;
    m.add_function(wrap_pyfunction!(composite_loss, m)?)?;
    m.add_function(wrap_pyfunction!(wiener_deconvolve, m)?)?;
    m.add_function(wrap_pyfunction!(block_digit, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(profile_counts, m)?)?;
    Ok(())
}
