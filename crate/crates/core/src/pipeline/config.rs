use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::TimeSurfaceConfig;
use crate::forward::SceneGeometry;
use crate::metrics::{CdConfig, SsimConfig};
use crate::recon::TrainConfig;
use crate::sim::EventSimConfig;

/// Per-sample target motion: a horizontal sweep ending at the sample's
/// position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionConfig {
    pub frame_rate_hz: f64,
    pub duration_us: u64,
    /// Distance covered during the sweep.
    pub travel_m: f64,
    /// Final positions are spread evenly over `[-span/2, span/2]`.
    pub position_span_m: f64,
    pub dy_m: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            frame_rate_hz: 100.0,
            duration_us: 200_000,
            travel_m: 0.01,
            position_span_m: 0.02,
            dy_m: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinSelection {
    /// Only the final voxel bin of each sample.
    Last,
    /// Every voxel bin, each with the ground truth at its own end time.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub n_bins: usize,
    pub time_surface: TimeSurfaceConfig,
    pub train_bins: BinSelection,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            n_bins: 4,
            time_surface: TimeSurfaceConfig::default(),
            train_bins: BinSelection::Last,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub geometry: SceneGeometry,
    pub motion: MotionConfig,
    pub event_sim: EventSimConfig,
    pub features: FeatureConfig,
    /// Side of the ground-truth canvas on the target plane, centred on the
    /// zero pose. The canvas has `target_res` pixels per side.
    pub canvas_extent_m: f64,
    /// Model input is resampled to this many pixels per side.
    pub model_input_res: usize,
    pub train: TrainConfig,
    pub wiener_lambda: f64,
    pub cd: CdConfig,
    pub eval_ssim: SsimConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            geometry: SceneGeometry::default(),
            motion: MotionConfig::default(),
            // the desk scene's wall contrast changes by well under 0.15 per sweep
            event_sim: EventSimConfig {
                contrast_threshold: 0.05,
                ..EventSimConfig::default()
            },
            features: FeatureConfig::default(),
            canvas_extent_m: 0.06,
            model_input_res: 32,
            train: TrainConfig::default(),
            wiener_lambda: 1e-8,
            cd: CdConfig::default(),
            eval_ssim: SsimConfig::gaussian(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.event_sim.validate()?;
        self.train.validate()?;
        let m = &self.motion;
        if !(m.frame_rate_hz > 0.0) || m.duration_us == 0 || !(m.travel_m >= 0.0) || !(m.position_span_m >= 0.0) {
            return Err(Error::InvalidConfig(format!("invalid motion: {m:?}")));
        }
        if self.features.n_bins == 0 || self.model_input_res == 0 || !(self.canvas_extent_m > 0.0) {
            return Err(Error::InvalidConfig(
                "n_bins, model_input_res and canvas_extent_m must be positive".into(),
            ));
        }
        if !(1..=255).contains(&self.cd.binarize_threshold) {
            return Err(Error::InvalidConfig("binarize_threshold must be in [1, 255]".into()));
        }
        Ok(())
    }

    /// Final x position of the `k`-th of `n` positions.
    pub fn position_x(&self, k: usize, n: usize) -> f64 {
        if n <= 1 {
            return 0.0;
        }
        let span = self.motion.position_span_m;
        -span / 2.0 + span * k as f64 / (n - 1) as f64
    }
}
