use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureFrame;
use crate::image::Image;

pub const MODEL_MAGIC: &[u8; 4] = b"NLRW";
pub const MODEL_VERSION: u8 = 1;

/// Image shape as `(width, height)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub width: usize,
    pub height: usize,
}

impl Dims {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Affine map from a feature image to a target image: `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearReconstructor {
    in_dims: Dims,
    out_dims: Dims,
    /// `out_dims.len()` rows of `in_dims.len()` columns, row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl LinearReconstructor {
    pub fn zeros(in_dims: Dims, out_dims: Dims) -> Self {
        Self {
            in_dims,
            out_dims,
            weights: vec![0.0; in_dims.len() * out_dims.len()],
            bias: vec![0.0; out_dims.len()],
        }
    }

    pub fn from_parts(in_dims: Dims, out_dims: Dims, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != in_dims.len() * out_dims.len() || bias.len() != out_dims.len() {
            return Err(Error::DimMismatch(format!(
                "weights {} / bias {} do not fit {in_dims:?} -> {out_dims:?}",
                weights.len(),
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("model parameters must be finite".into()));
        }
        Ok(Self {
            in_dims,
            out_dims,
            weights,
            bias,
        })
    }

    pub fn in_dims(&self) -> Dims {
        self.in_dims
    }

    pub fn out_dims(&self) -> Dims {
        self.out_dims
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.weights, &mut self.bias)
    }

    /// Unclipped `W x + b`.
    pub fn apply(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.in_dims.len() {
            return Err(Error::DimMismatch(format!(
                "input has {} values, model expects {}",
                input.len(),
                self.in_dims.len()
            )));
        }
        let n_in = self.in_dims.len();
        Ok(self
            .weights
            .par_chunks(n_in)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>())
            .collect())
    }

    /// Prediction for an input image already at `in_dims`, clipped to [0, 1].
    pub fn predict_image(&self, input: &Image) -> Result<Image> {
        if input.dims() != (self.in_dims.width, self.in_dims.height) {
            return Err(Error::DimMismatch(format!(
                "input {:?}, model expects {:?}",
                input.dims(),
                self.in_dims
            )));
        }
        let out = self.apply(input.data())?;
        Image::from_vec(self.out_dims.width, self.out_dims.height, out).map(|img| img.clamped(0.0, 1.0))
    }

    /// Prediction from a feature frame: channels merged by max, then area
    /// resampled to the model's input size.
    pub fn predict(&self, feature: &FeatureFrame) -> Result<Image> {
        let input = model_input(&feature.merged(), self.in_dims);
        self.predict_image(&input)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(13 + 8 * (self.weights.len() + self.bias.len()));
        out.extend_from_slice(MODEL_MAGIC);
        out.push(MODEL_VERSION);
        for d in [
            self.in_dims.width,
            self.in_dims.height,
            self.out_dims.width,
            self.out_dims.height,
        ] {
            out.extend_from_slice(&(d as u16).to_le_bytes());
        }
        for v in self.weights.iter().chain(&self.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MODEL_MAGIC {
            return Err(Error::BadMagic { expected: "NLRW" });
        }
        if bytes.len() < 13 {
            return Err(Error::TruncatedRecord {
                index: 0,
                needed: 13,
                available: bytes.len(),
            });
        }
        if bytes[4] != MODEL_VERSION {
            return Err(Error::BadVersion(bytes[4]));
        }
        let dim = |i: usize| u16::from_le_bytes([bytes[5 + 2 * i], bytes[6 + 2 * i]]) as usize;
        let in_dims = Dims::new(dim(0), dim(1));
        let out_dims = Dims::new(dim(2), dim(3));
        let count = in_dims.len() * out_dims.len() + out_dims.len();
        let payload = &bytes[13..];
        if payload.len() != 8 * count {
            return Err(Error::CountMismatch {
                declared: count as u64,
                actual: (payload.len() / 8) as u64,
            });
        }
        let mut values: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let bias = values.split_off(in_dims.len() * out_dims.len());
        Self::from_parts(in_dims, out_dims, values, bias)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Resample an image to the model's input size (area average).
pub fn model_input(image: &Image, dims: Dims) -> Image {
    if image.dims() == (dims.width, dims.height) {
        image.clone()
    } else {
        image.downsample_area(dims.width, dims.height)
    }
}
