use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{read_binary, write_binary, EventStream};
use crate::features::{voxel_bin_edges, voxel_grid_features, FeatureFrame, PolarityMode};
use crate::forward::{render_video, Pose, SceneGeometry, TargetFrame, Trajectory, WallRenderer};
use crate::image::Image;
use crate::pgm::Pgm;
use crate::pipeline::config::PipelineConfig;
use crate::pipeline::profile::{Profile, SamplePlan, Split};
use crate::sim::simulate_events;
use crate::targets::{TargetPool, TargetSource};

pub const MANIFEST_FORMAT: &str = "evnlos-dataset/1";
pub const MANIFEST_FILE: &str = "manifest.json";
/// Feature and ground-truth PGMs store `value * 65535`.
pub const UNIT_SCALE: f64 = 65535.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallRecord {
    pub times_us: Vec<u64>,
    pub frames: Vec<String>,
    /// JSON list of frame times, for `simulate`.
    pub timestamps: String,
    /// PGM sample = irradiance × scale.
    pub scale: f64,
}

/// One voxel bin: E feature, F frame and ground truth share its end time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRecord {
    pub t_start_us: u64,
    pub t_end_us: u64,
    pub pose: Pose,
    /// One path per feature channel.
    pub features: Vec<String>,
    pub frame: String,
    /// Irradiance of the brightest downsampled wall pixel; the F frame is
    /// stored divided by it.
    pub frame_peak: f64,
    pub ground_truth: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub split: Split,
    pub digit: u8,
    pub variant: usize,
    pub position: usize,
    pub n_positions: usize,
    pub trajectory: Trajectory,
    pub target: String,
    pub wall: WallRecord,
    pub events: String,
    pub event_count: usize,
    pub tau_us: f64,
    pub bins: Vec<BinRecord>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<SampleRecord>,
    pub val: Vec<SampleRecord>,
    pub test: Vec<SampleRecord>,
}

impl Splits {
    pub fn get(&self, split: Split) -> &[SampleRecord] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn all(&self) -> impl Iterator<Item = &SampleRecord> {
        self.train.iter().chain(&self.val).chain(&self.test)
    }
}

/// Bytes written per modality.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ByteTotals {
    pub events: u64,
    pub wall_frames: u64,
    pub features: u64,
    pub frames: u64,
    pub ground_truth: u64,
    pub targets: u64,
}

impl ByteTotals {
    fn add(&mut self, o: &ByteTotals) {
        self.events += o.events;
        self.wall_frames += o.wall_frames;
        self.features += o.features;
        self.frames += o.frames;
        self.ground_truth += o.ground_truth;
        self.targets += o.targets;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub profile: Profile,
    pub source: TargetSource,
    pub config: PipelineConfig,
    pub splits: Splits,
    pub totals: ByteTotals,
}

/// A manifest together with the directory its paths are relative to.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
}

impl Dataset {
    /// Open `manifest.json`, given either its path or its directory.
    pub fn open(path: &Path) -> Result<Self> {
        let file = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let text = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::json(&file, e))?;
        if manifest.format != MANIFEST_FORMAT {
            return Err(Error::InvalidConfig(format!(
                "unsupported manifest format {:?}",
                manifest.format
            )));
        }
        let root = file.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { root, manifest })
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn samples(&self, split: Split) -> &[SampleRecord] {
        self.manifest.splits.get(split)
    }

    pub fn read_unit_image(&self, rel: &str) -> Result<Image> {
        Ok(Pgm::read(&self.resolve(rel))?.to_image(UNIT_SCALE))
    }

    pub fn read_feature(&self, bin: &BinRecord) -> Result<FeatureFrame> {
        let channels = bin
            .features
            .iter()
            .map(|p| self.read_unit_image(p))
            .collect::<Result<_>>()?;
        Ok(FeatureFrame {
            bin_end_us: bin.t_end_us,
            channels,
        })
    }

    pub fn read_events(&self, sample: &SampleRecord) -> Result<EventStream> {
        let path = self.resolve(&sample.events);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        read_binary(&bytes)
    }

    /// Check that every referenced file exists, parses and is consistent
    /// with the manifest.
    pub fn verify(&self) -> Result<()> {
        let m = &self.manifest;
        let g = m.config.geometry;
        let res = m.config.model_input_res;
        let mut ids = HashSet::new();
        for s in m.splits.all() {
            let fail = |msg: String| Error::InvalidStream(msg).in_sample(&s.id);
            if !ids.insert(s.id.as_str()) {
                return Err(fail("duplicate sample id".into()));
            }
            let expect_dims = |img: &Image, w: usize, what: &str| {
                if img.dims() == (w, w) {
                    Ok(())
                } else {
                    Err(fail(format!("{what} is {:?}, expected {w}x{w}", img.dims())))
                }
            };
            expect_dims(&self.read_unit_image(&s.target)?, g.target_res, "target")?;
            if s.wall.frames.len() != s.wall.times_us.len() {
                return Err(fail("wall frame count differs from timestamps".into()));
            }
            let ts_path = self.resolve(&s.wall.timestamps);
            let ts_text = std::fs::read_to_string(&ts_path).map_err(|e| Error::io(&ts_path, e))?;
            let ts: Vec<u64> = serde_json::from_str(&ts_text).map_err(|e| Error::json(&ts_path, e))?;
            if ts != s.wall.times_us {
                return Err(fail("timestamp sidecar differs from manifest".into()));
            }
            for f in &s.wall.frames {
                let pgm = Pgm::read(&self.resolve(f)).map_err(|e| e.in_sample(&s.id))?;
                if (pgm.width, pgm.height) != (g.wall_res, g.wall_res) {
                    return Err(fail(format!("wall frame {f} has wrong size")));
                }
            }
            let stream = self.read_events(s).map_err(|e| e.in_sample(&s.id))?;
            stream.validate().map_err(|v| fail(v.to_string()))?;
            if stream.len() != s.event_count {
                return Err(fail("event count differs from manifest".into()));
            }
            let mut prev_end = None;
            for b in &s.bins {
                if prev_end.is_some_and(|p| b.t_end_us <= p) || b.t_start_us > b.t_end_us {
                    return Err(fail("bin times not increasing".into()));
                }
                prev_end = Some(b.t_end_us);
                if b.pose != s.trajectory.pose_at(b.t_end_us as f64) {
                    return Err(fail(format!("pose at {} is not the trajectory pose", b.t_end_us)));
                }
                for c in &b.features {
                    expect_dims(&self.read_unit_image(c)?, g.wall_res, "feature")?;
                }
                expect_dims(&self.read_unit_image(&b.frame)?, res, "frame")?;
                expect_dims(&self.read_unit_image(&b.ground_truth)?, g.target_res, "ground truth")?;
            }
        }
        Ok(())
    }
}

/// Ground truth for a target at `pose`: the target plane seen through a
/// `canvas_extent_m` window centred on the zero pose, `target_res` pixels per
/// side, bilinear.
pub fn ground_truth_canvas(target: &Image, pose: Pose, geometry: &SceneGeometry, canvas_extent_m: f64) -> Image {
    let n = geometry.target_res;
    let cp = canvas_extent_m / n as f64;
    let tp = geometry.target_pitch();
    let half = n as f64 / 2.0;
    Image::from_fn(n, n, |u, v| {
        let wx = (u as f64 + 0.5 - half) * cp;
        let wy = (v as f64 + 0.5 - half) * cp;
        let tx = (wx - pose.dx_m) / tp + half - 0.5;
        let ty = (wy - pose.dy_m) / tp + half - 0.5;
        target.sample_bilinear(tx, ty)
    })
}

/// F-mode frame: the wall area-downsampled to `res`, divided by its peak.
pub fn frame_mode_image(wall: &Image, res: usize) -> (Image, f64) {
    let small = wall.downsample_area(res, res);
    let peak = small.max();
    if peak > 0.0 {
        (small.scaled(1.0 / peak), peak)
    } else {
        (small, 0.0)
    }
}

fn write_bytes(root: &Path, rel: &str, bytes: &[u8]) -> Result<u64> {
    let path = root.join(rel);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(bytes.len() as u64)
}

fn write_unit(root: &Path, rel: &str, img: &Image) -> Result<u64> {
    write_bytes(root, rel, &Pgm::from_image_u16(img, UNIT_SCALE).encode())
}

pub fn sample_trajectory(config: &PipelineConfig, plan: &SamplePlan) -> Result<Trajectory> {
    let m = &config.motion;
    let x = config.position_x(plan.position, plan.n_positions);
    Trajectory::linear(
        0,
        Pose::new(x - m.travel_m, m.dy_m),
        m.duration_us,
        Pose::new(x, m.dy_m),
    )
}

struct Generated {
    record: SampleRecord,
    bytes: ByteTotals,
}

fn generate_sample(
    plan: &SamplePlan,
    pool: &TargetPool,
    config: &PipelineConfig,
    renderer: &WallRenderer,
    root: &Path,
) -> Result<Generated> {
    let dir = format!("samples/{}", plan.id);
    let g = config.geometry;
    let mut bytes = ByteTotals::default();

    let target = pool.get(plan.digit, plan.variant)?;
    let target_rel = format!("{dir}/target.pgm");
    bytes.targets += write_unit(root, &target_rel, &target)?;

    let trajectory = sample_trajectory(config, plan)?;
    let frames = render_video(&target, &trajectory, config.motion.frame_rate_hz, renderer)?;
    let peak = frames.iter().map(|f| f.image.max()).fold(0.0, f64::max);
    let scale = if peak > 0.0 { 65535.0 / peak } else { 1.0 };
    let mut frame_paths = Vec::with_capacity(frames.len());
    for (k, f) in frames.iter().enumerate() {
        let rel = format!("{dir}/wall/f{k:04}.pgm");
        bytes.wall_frames += write_bytes(root, &rel, &Pgm::from_image_u16(&f.image, scale).encode())?;
        frame_paths.push(rel);
    }
    let times_us: Vec<u64> = frames.iter().map(|f| f.t_us).collect();
    let ts_rel = format!("{dir}/wall/times.json");
    write_bytes(
        root,
        &ts_rel,
        serde_json::to_string(&times_us).expect("plain list").as_bytes(),
    )?;

    let stream = simulate_events(&frames, &config.event_sim)?;
    let events_rel = format!("{dir}/events.nevt");
    bytes.events += write_bytes(root, &events_rel, &write_binary(&stream))?;

    let fc = &config.features;
    let n_bins = fc.n_bins;
    let (edges, features, tau_us) = match (stream.first_time(), stream.last_time()) {
        (Some(t0), Some(t1)) => {
            let edges = voxel_bin_edges(t0, t1, n_bins);
            let tau = fc.time_surface.resolve_tau((t1 - t0) as f64 / n_bins as f64);
            (edges, voxel_grid_features(&stream, n_bins, &fc.time_surface)?, tau)
        }
        _ => {
            // no events: blank features over the trajectory span
            let edges = voxel_bin_edges(trajectory.start_us(), trajectory.end_us(), n_bins);
            let span = (trajectory.end_us() - trajectory.start_us()) as f64;
            let channels = match fc.time_surface.polarity_mode {
                PolarityMode::MergedMax => 1,
                PolarityMode::SeparateChannels => 2,
            };
            let blank = edges[1..]
                .iter()
                .map(|&e| FeatureFrame {
                    bin_end_us: e,
                    channels: vec![Image::zeros(g.wall_res, g.wall_res); channels],
                })
                .collect();
            (edges, blank, fc.time_surface.resolve_tau(span / n_bins as f64))
        }
    };

    let mut bins = Vec::with_capacity(n_bins);
    for (k, feature) in features.iter().enumerate() {
        let t_end = edges[k + 1];
        let pose = trajectory.pose_at(t_end as f64);
        let names: Vec<String> = if feature.channels.len() == 1 {
            vec![format!("{dir}/features/b{k}.pgm")]
        } else {
            vec![
                format!("{dir}/features/b{k}_off.pgm"),
                format!("{dir}/features/b{k}_on.pgm"),
            ]
        };
        for (name, ch) in names.iter().zip(&feature.channels) {
            bytes.features += write_unit(root, name, ch)?;
        }
        let wall = renderer.render(&TargetFrame::new(target.clone(), pose))?;
        let (frame, frame_peak) = frame_mode_image(&wall, config.model_input_res);
        let frame_rel = format!("{dir}/frames/b{k}.pgm");
        bytes.frames += write_unit(root, &frame_rel, &frame)?;
        let gt = ground_truth_canvas(&target, pose, &g, config.canvas_extent_m);
        let gt_rel = format!("{dir}/gt/b{k}.pgm");
        bytes.ground_truth += write_unit(root, &gt_rel, &gt)?;
        bins.push(BinRecord {
            t_start_us: edges[k],
            t_end_us: t_end,
            pose,
            features: names,
            frame: frame_rel,
            frame_peak,
            ground_truth: gt_rel,
        });
    }

    Ok(Generated {
        record: SampleRecord {
            id: plan.id.clone(),
            split: plan.split,
            digit: plan.digit,
            variant: plan.variant,
            position: plan.position,
            n_positions: plan.n_positions,
            trajectory,
            target: target_rel,
            wall: WallRecord {
                times_us,
                frames: frame_paths,
                timestamps: ts_rel,
                scale,
            },
            events: events_rel,
            event_count: stream.len(),
            tau_us,
            bins,
        },
        bytes,
    })
}

/// Render, simulate and featurize every sample of `profile` into `out_dir`
/// and write `manifest.json` there.
pub fn generate_dataset(
    source: &TargetSource,
    profile: &Profile,
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<Dataset> {
    config.validate()?;
    let plan = profile.plan()?;
    let pool = TargetPool::load(source, config.seed)?;
    for p in &plan {
        if let Some(n) = pool.available(p.digit) {
            if p.variant >= n {
                return Err(Error::InvalidConfig(format!(
                    "source has {n} images of digit {}, profile needs {}",
                    p.digit,
                    p.variant + 1
                )));
            }
        }
    }
    let renderer = WallRenderer::new(config.geometry)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let generated: Vec<Generated> = plan
        .par_iter()
        .map(|p| generate_sample(p, &pool, config, &renderer, out_dir).map_err(|e| e.in_sample(&p.id)))
        .collect::<Result<_>>()?;

    let mut splits = Splits::default();
    let mut totals = ByteTotals::default();
    for g in generated {
        totals.add(&g.bytes);
        match g.record.split {
            Split::Train => splits.train.push(g.record),
            Split::Val => splits.val.push(g.record),
            Split::Test => splits.test.push(g.record),
        }
    }
    let manifest = DatasetManifest {
        format: MANIFEST_FORMAT.into(),
        profile: profile.clone(),
        source: source.clone(),
        config: config.clone(),
        splits,
        totals,
    };
    let path = out_dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(Dataset {
        root: out_dir.to_path_buf(),
        manifest,
    })
}
