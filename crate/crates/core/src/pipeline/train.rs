use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::pipeline::config::BinSelection;
use crate::pipeline::dataset::{BinRecord, Dataset, SampleRecord};
use crate::pipeline::profile::Split;
use crate::recon::model::{model_input, Dims, LinearReconstructor};
use crate::recon::train::{mean_loss, train_adam, TrainConfig, TrainOutcome, TrainSample};

/// Which representation of the wall feeds the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    /// Event time-surface features.
    E,
    /// Downsampled intensity frames.
    F,
}

impl Modality {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "e" | "event" | "events" => Ok(Modality::E),
            "f" | "frame" | "frames" => Ok(Modality::F),
            _ => Err(Error::InvalidConfig(format!("unknown modality {s:?}"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::E => "e",
            Modality::F => "f",
        }
    }
}

/// Model input for one bin of one sample.
pub fn model_input_for(dataset: &Dataset, bin: &BinRecord, modality: Modality) -> Result<Image> {
    let res = dataset.manifest.config.model_input_res;
    let dims = Dims::new(res, res);
    match modality {
        Modality::E => Ok(model_input(&dataset.read_feature(bin)?.merged(), dims)),
        Modality::F => Ok(model_input(&dataset.read_unit_image(&bin.frame)?, dims)),
    }
}

/// Bins of a sample that enter training and evaluation.
pub fn selected_bins(sample: &SampleRecord, selection: BinSelection) -> &[BinRecord] {
    match selection {
        BinSelection::Last => &sample.bins[sample.bins.len().saturating_sub(1)..],
        BinSelection::All => &sample.bins,
    }
}

/// Training pairs from one split, in manifest order.
pub fn load_samples(dataset: &Dataset, split: Split, modality: Modality) -> Result<Vec<TrainSample>> {
    let selection = dataset.manifest.config.features.train_bins;
    let mut out = Vec::new();
    for s in dataset.samples(split) {
        for bin in selected_bins(s, selection) {
            let input = model_input_for(dataset, bin, modality).map_err(|e| e.in_sample(&s.id))?;
            let target = dataset
                .read_unit_image(&bin.ground_truth)
                .map_err(|e| e.in_sample(&s.id))?;
            out.push(TrainSample { input, target });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSidecar {
    pub modality: Modality,
    pub train_config: TrainConfig,
    pub in_dims: Dims,
    pub out_dims: Dims,
    pub n_train: usize,
    pub loss_trace: Vec<f64>,
    pub final_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub model: LinearReconstructor,
    pub sidecar: TrainSidecar,
    pub model_path: PathBuf,
    pub sidecar_path: PathBuf,
}

pub fn sidecar_path(model_path: &Path) -> PathBuf {
    model_path.with_extension("json")
}

/// Train on the manifest's train split and write `<out_dir>/<name>.nlrw`
/// plus a JSON sidecar with the config and loss trace.
pub fn run_training(
    dataset: &Dataset,
    config: &TrainConfig,
    modality: Modality,
    out_dir: &Path,
    name: &str,
) -> Result<TrainingRun> {
    let train = load_samples(dataset, Split::Train, modality)?;
    if train.is_empty() {
        return Err(Error::InvalidConfig("train split is empty".into()));
    }
    let (model, TrainOutcome { loss_trace, final_loss }) = train_adam(&train, config)?;
    let val = load_samples(dataset, Split::Val, modality)?;
    let val_loss = if val.is_empty() {
        None
    } else {
        Some(mean_loss(&model, &val, config)?)
    };

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let model_path = out_dir.join(format!("{name}.nlrw"));
    model.save(&model_path)?;
    let sidecar = TrainSidecar {
        modality,
        train_config: *config,
        in_dims: model.in_dims(),
        out_dims: model.out_dims(),
        n_train: train.len(),
        loss_trace,
        final_loss,
        val_loss,
    };
    let sidecar_path = sidecar_path(&model_path);
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    std::fs::write(&sidecar_path, text).map_err(|e| Error::io(&sidecar_path, e))?;
    Ok(TrainingRun {
        model,
        sidecar,
        model_path,
        sidecar_path,
    })
}

/// Modality recorded next to a model file, if a sidecar exists.
pub fn sidecar_modality(model_path: &Path) -> Option<Modality> {
    let text = std::fs::read_to_string(sidecar_path(model_path)).ok()?;
    serde_json::from_str::<TrainSidecar>(&text).ok().map(|s| s.modality)
}
