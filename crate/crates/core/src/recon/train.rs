use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::metrics::SsimConfig;
use crate::recon::adam::Adam;
use crate::recon::linalg::Matrix;
use crate::recon::loss::loss_and_gradient;
use crate::recon::model::{Dims, LinearReconstructor};
use crate::recon::ridge::fit_ridge;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Closed-form ridge solution.
    Ridge,
    Zeros,
    /// Small uniform weights drawn from `seed`.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// MSE weight.
    pub alpha: f64,
    /// Weight of the `1 − SSIM` term.
    pub beta: f64,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub epochs: usize,
    pub ridge_lambda: f64,
    pub init: InitMode,
    pub ssim: SsimConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.1,
            lr: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            epochs: 200,
            ridge_lambda: 1e-2,
            init: InitMode::Ridge,
            ssim: SsimConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha >= 0.0
            && self.beta >= 0.0
            && (self.alpha > 0.0 || self.beta > 0.0)
            && self.lr > 0.0
            && (0.0..1.0).contains(&self.adam_beta1)
            && (0.0..1.0).contains(&self.adam_beta2)
            && self.adam_eps > 0.0
            && self.ridge_lambda >= 0.0;
        if !ok {
            return Err(Error::InvalidConfig(format!("invalid training config: {self:?}")));
        }
        Ok(())
    }
}

/// One training pair, both images already at the model's dimensions.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub input: Image,
    pub target: Image,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    /// Mean composite loss over the training set at the start of each epoch.
    pub loss_trace: Vec<f64>,
    pub final_loss: f64,
}

fn sample_dims(samples: &[TrainSample]) -> Result<(Dims, Dims)> {
    let first = samples
        .first()
        .ok_or_else(|| Error::DimMismatch("no training samples".into()))?;
    let (iw, ih) = first.input.dims();
    let (ow, oh) = first.target.dims();
    for (i, s) in samples.iter().enumerate() {
        if s.input.dims() != (iw, ih) || s.target.dims() != (ow, oh) {
            return Err(Error::DimMismatch(format!("sample {i} differs in shape from sample 0")));
        }
    }
    Ok((Dims::new(iw, ih), Dims::new(ow, oh)))
}

/// Closed-form ridge fit on the training pairs.
pub fn fit_ridge_samples(samples: &[TrainSample], lambda: f64) -> Result<LinearReconstructor> {
    let (in_dims, out_dims) = sample_dims(samples)?;
    let x = Matrix {
        rows: samples.len(),
        cols: in_dims.len(),
        data: samples.iter().flat_map(|s| s.input.data().iter().copied()).collect(),
    };
    let y = Matrix {
        rows: samples.len(),
        cols: out_dims.len(),
        data: samples.iter().flat_map(|s| s.target.data().iter().copied()).collect(),
    };
    fit_ridge(&x, &y, lambda, in_dims, out_dims)
}

pub fn initial_model(samples: &[TrainSample], config: &TrainConfig) -> Result<LinearReconstructor> {
    let (in_dims, out_dims) = sample_dims(samples)?;
    match config.init {
        InitMode::Ridge => fit_ridge_samples(samples, config.ridge_lambda),
        InitMode::Zeros => Ok(LinearReconstructor::zeros(in_dims, out_dims)),
        InitMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let bound = 1.0 / (in_dims.len() as f64).sqrt();
            let weights = (0..in_dims.len() * out_dims.len())
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            LinearReconstructor::from_parts(in_dims, out_dims, weights, vec![0.0; out_dims.len()])
        }
    }
}

/// Mean loss and full-batch gradients `(∂W, ∂b)` of the current model.
fn batch_gradient(
    model: &LinearReconstructor,
    samples: &[TrainSample],
    config: &TrainConfig,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let out = model.out_dims();
    let n_in = model.in_dims().len();
    let count = samples.len() as f64;
    let per_sample: Vec<(f64, Vec<f64>)> = samples
        .iter()
        .map(|s| {
            let pred = Image::from_vec(out.width, out.height, model.apply(s.input.data())?)?;
            let (loss, grad) = loss_and_gradient(&pred, &s.target, config.alpha, config.beta, &config.ssim)?;
            Ok((loss, grad.into_vec()))
        })
        .collect::<Result<_>>()?;
    let loss = per_sample.iter().map(|(l, _)| l).sum::<f64>() / count;
    let grad_b: Vec<f64> = (0..out.len())
        .map(|j| per_sample.iter().map(|(_, g)| g[j]).sum::<f64>() / count)
        .collect();
    // each output row accumulates over samples in a fixed order
    let mut grad_w = vec![0.0; out.len() * n_in];
    grad_w.par_chunks_mut(n_in).enumerate().for_each(|(j, row)| {
        for (s, (_, g)) in samples.iter().zip(&per_sample) {
            let gj = g[j] / count;
            if gj != 0.0 {
                for (r, x) in row.iter_mut().zip(s.input.data()) {
                    *r += gj * x;
                }
            }
        }
    });
    Ok((loss, grad_w, grad_b))
}

/// Full-batch Adam on `alpha·MSE + beta·(1 − SSIM)`, starting from
/// [`TrainConfig::init`].
pub fn train_adam(samples: &[TrainSample], config: &TrainConfig) -> Result<(LinearReconstructor, TrainOutcome)> {
    config.validate()?;
    let model = initial_model(samples, config)?;
    train_adam_from(model, samples, config)
}

pub fn train_adam_from(
    mut model: LinearReconstructor,
    samples: &[TrainSample],
    config: &TrainConfig,
) -> Result<(LinearReconstructor, TrainOutcome)> {
    config.validate()?;
    let (in_dims, out_dims) = sample_dims(samples)?;
    if in_dims != model.in_dims() || out_dims != model.out_dims() {
        return Err(Error::DimMismatch(format!(
            "samples {in_dims:?}->{out_dims:?}, model {:?}->{:?}",
            model.in_dims(),
            model.out_dims()
        )));
    }
    let n_w = model.weights().len();
    let mut opt_w = Adam::new(n_w, config.lr, config.adam_beta1, config.adam_beta2, config.adam_eps);
    let mut opt_b = Adam::new(
        out_dims.len(),
        config.lr,
        config.adam_beta1,
        config.adam_beta2,
        config.adam_eps,
    );
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (loss, gw, gb) = batch_gradient(&model, samples, config)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        trace.push(loss);
        let (w, b) = model.params_mut();
        opt_w.step(w, &gw);
        opt_b.step(b, &gb);
    }
    let (final_loss, _, _) = batch_gradient(&model, samples, config)?;
    if !final_loss.is_finite() {
        return Err(Error::NonFiniteLoss { epoch: config.epochs });
    }
    Ok((
        model,
        TrainOutcome {
            loss_trace: trace,
            final_loss,
        },
    ))
}

/// Mean composite loss of `model` over `samples` (unclipped outputs).
pub fn mean_loss(model: &LinearReconstructor, samples: &[TrainSample], config: &TrainConfig) -> Result<f64> {
    batch_gradient(model, samples, config).map(|(l, _, _)| l)
}
