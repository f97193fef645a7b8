//! Hidden-target images: procedural block digits, MNIST-style IDX archives,
//! and directories of PGM files. All decode to 28×28 unit-range images.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::pgm::Pgm;

pub const TARGET_SIDE: usize = 28;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSource {
    #[default]
    BuiltinBlockDigits,
    /// IDX image archive (`...-images-idx3-ubyte`) and matching label file.
    IdxUbyteFile { images: PathBuf, labels: PathBuf },
    /// `*.pgm` files whose names start with the digit label, e.g. `7_arial.pgm`.
    PgmDirectory { dir: PathBuf },
}

impl TargetSource {
    /// Parse the CLI form: `builtin`, `idx:<images>,<labels>` or `pgm-dir:<dir>`.
    pub fn parse(spec: &str) -> Result<Self> {
        if spec == "builtin" {
            return Ok(TargetSource::BuiltinBlockDigits);
        }
        if let Some(rest) = spec.strip_prefix("idx:") {
            let (images, labels) = rest
                .split_once(',')
                .ok_or_else(|| Error::InvalidConfig("idx source needs `idx:<images>,<labels>`".into()))?;
            return Ok(TargetSource::IdxUbyteFile {
                images: images.into(),
                labels: labels.into(),
            });
        }
        if let Some(dir) = spec.strip_prefix("pgm-dir:") {
            return Ok(TargetSource::PgmDirectory { dir: dir.into() });
        }
        Err(Error::InvalidConfig(format!("unknown target source {spec:?}")))
    }
}

/// Loaded targets grouped by digit label.
#[derive(Debug, Clone)]
pub struct TargetPool {
    seed: u64,
    /// `None` for the builtin source, which generates variants on demand.
    by_digit: Option<BTreeMap<u8, Vec<Image>>>,
}

impl TargetPool {
    pub fn load(source: &TargetSource, seed: u64) -> Result<Self> {
        let by_digit = match source {
            TargetSource::BuiltinBlockDigits => None,
            TargetSource::IdxUbyteFile { images, labels } => {
                let imgs = read_idx_images(images)?;
                let labs = read_idx_labels(labels)?;
                if imgs.len() != labs.len() {
                    return Err(Error::CountMismatch {
                        declared: labs.len() as u64,
                        actual: imgs.len() as u64,
                    });
                }
                let mut map: BTreeMap<u8, Vec<Image>> = BTreeMap::new();
                for (img, lab) in imgs.into_iter().zip(labs) {
                    map.entry(lab).or_default().push(img);
                }
                Some(map)
            }
            TargetSource::PgmDirectory { dir } => Some(read_pgm_dir(dir)?),
        };
        Ok(Self { seed, by_digit })
    }

    /// Number of variants available for `digit`; `None` means unlimited.
    pub fn available(&self, digit: u8) -> Option<usize> {
        self.by_digit.as_ref().map(|m| m.get(&digit).map_or(0, Vec::len))
    }

    pub fn get(&self, digit: u8, variant: usize) -> Result<Image> {
        match &self.by_digit {
            None => block_digit(digit, variant, self.seed),
            Some(map) => map.get(&digit).and_then(|v| v.get(variant)).cloned().ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "target source has {} images of digit {digit}, variant {variant} requested",
                    self.available(digit).unwrap_or(0)
                ))
            }),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Glyph {
    width: f64,
    height: f64,
    stroke: f64,
    cx: f64,
    cy: f64,
    slant: f64,
}

const SEGMENTS: [[bool; 7]; 10] = [
    // a, b, c, d, e, f, g
    [true, true, true, true, true, true, false],
    [false, true, true, false, false, false, false],
    [true, true, false, true, true, false, true],
    [true, true, true, true, false, false, true],
    [false, true, true, false, false, true, true],
    [true, false, true, true, false, true, true],
    [true, false, true, true, true, true, true],
    [true, true, true, false, false, false, false],
    [true, true, true, true, true, true, true],
    [true, true, true, true, false, true, true],
];

fn glyph_for(digit: u8, variant: usize, seed: u64) -> Glyph {
    let canonical = Glyph {
        width: 13.0,
        height: 19.0,
        stroke: 3.0,
        cx: 14.0,
        cy: 14.0,
        slant: 0.0,
    };
    if variant == 0 {
        return canonical;
    }
    let stream = ((digit as u64) << 32) | variant as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    Glyph {
        width: rng.random_range(10.5..15.5),
        height: rng.random_range(16.0..21.0),
        stroke: rng.random_range(2.5..4.0),
        cx: 14.0 + rng.random_range(-1.5..1.5),
        cy: 14.0 + rng.random_range(-1.5..1.5),
        slant: rng.random_range(-0.15..0.15),
    }
}

fn inside(g: &Glyph, segs: &[bool; 7], x: f64, y: f64) -> bool {
    let x = x - g.slant * (y - g.cy);
    let (x0, y0) = (g.cx - g.width / 2.0, g.cy - g.height / 2.0);
    let (x1, y1) = (x0 + g.width, y0 + g.height);
    let ym = g.cy;
    let s = g.stroke;
    let rect = |ax: f64, bx: f64, ay: f64, by: f64| x >= ax && x < bx && y >= ay && y < by;
    let hits = [
        rect(x0, x1, y0, y0 + s),
        rect(x1 - s, x1, y0, ym + s / 2.0),
        rect(x1 - s, x1, ym - s / 2.0, y1),
        rect(x0, x1, y1 - s, y1),
        rect(x0, x0 + s, ym - s / 2.0, y1),
        rect(x0, x0 + s, y0, ym + s / 2.0),
        rect(x0, x1, ym - s / 2.0, ym + s / 2.0),
    ];
    hits.iter().zip(segs).any(|(&h, &on)| h && on)
}

/// Seven-segment style digit. Variant 0 is a fixed canonical glyph; other
/// variants perturb size, stroke, offset and slant from `seed`.
pub fn block_digit(digit: u8, variant: usize, seed: u64) -> Result<Image> {
    if digit > 9 {
        return Err(Error::InvalidConfig(format!("digit {digit} out of range")));
    }
    let g = glyph_for(digit, variant, seed);
    let segs = &SEGMENTS[digit as usize];
    const SS: usize = 4;
    Ok(Image::from_fn(TARGET_SIDE, TARGET_SIDE, |px, py| {
        let mut hits = 0;
        for sy in 0..SS {
            for sx in 0..SS {
                let x = px as f64 + (sx as f64 + 0.5) / SS as f64;
                let y = py as f64 + (sy as f64 + 0.5) / SS as f64;
                if inside(&g, segs, x, y) {
                    hits += 1;
                }
            }
        }
        hits as f64 / (SS * SS) as f64
    }))
}

fn idx_header(bytes: &[u8], path: &Path, want_dims: usize) -> Result<Vec<usize>> {
    let bad = |msg: String| Error::ImageFormat(format!("{}: {msg}", path.display()));
    if bytes.len() < 4 || bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::BadMagic { expected: "IDX" });
    }
    if bytes[2] != 0x08 {
        return Err(bad(format!(
            "element type {:#04x}, only unsigned bytes supported",
            bytes[2]
        )));
    }
    let ndim = bytes[3] as usize;
    if ndim != want_dims {
        return Err(bad(format!("{ndim} dimensions, expected {want_dims}")));
    }
    let header = 4 + 4 * ndim;
    if bytes.len() < header {
        return Err(Error::TruncatedRecord {
            index: 0,
            needed: header,
            available: bytes.len(),
        });
    }
    let dims: Vec<usize> = (0..ndim)
        .map(|i| u32::from_be_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize)
        .collect();
    let expected = header + dims.iter().product::<usize>();
    if bytes.len() != expected {
        return Err(Error::CountMismatch {
            declared: expected as u64,
            actual: bytes.len() as u64,
        });
    }
    Ok(dims)
}

pub fn decode_idx_images(bytes: &[u8], path: &Path) -> Result<Vec<Image>> {
    let dims = idx_header(bytes, path, 3)?;
    if dims[1] != TARGET_SIDE || dims[2] != TARGET_SIDE {
        return Err(Error::ImageFormat(format!(
            "{}: images are {}x{}, expected 28x28",
            path.display(),
            dims[2],
            dims[1]
        )));
    }
    let px = TARGET_SIDE * TARGET_SIDE;
    let body = &bytes[16..];
    Ok(body
        .chunks_exact(px)
        .map(|c| {
            Image::from_vec(TARGET_SIDE, TARGET_SIDE, c.iter().map(|&b| b as f64 / 255.0).collect())
                .expect("chunk is one image")
        })
        .collect())
}

pub fn decode_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    idx_header(bytes, path, 1)?;
    let labels = bytes[8..].to_vec();
    if let Some(bad) = labels.iter().find(|&&l| l > 9) {
        return Err(Error::ImageFormat(format!(
            "{}: label {bad} is not a digit",
            path.display()
        )));
    }
    Ok(labels)
}

pub fn read_idx_images(path: &Path) -> Result<Vec<Image>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_idx_images(&bytes, path)
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_idx_labels(&bytes, path)
}

/// Encode unit-range 28×28 images as an IDX image archive.
pub fn encode_idx_images(images: &[Image]) -> Vec<u8> {
    let mut out = vec![0, 0, 0x08, 3];
    for d in [images.len(), TARGET_SIDE, TARGET_SIDE] {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    for img in images {
        out.extend(img.data().iter().map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
    }
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = vec![0, 0, 0x08, 1];
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

fn read_pgm_dir(dir: &Path) -> Result<BTreeMap<u8, Vec<Image>>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    let mut map: BTreeMap<u8, Vec<Image>> = BTreeMap::new();
    for p in paths {
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let digit = name
            .chars()
            .next()
            .and_then(|c| c.to_digit(10))
            .ok_or_else(|| Error::ImageFormat(format!("{}: name must start with the digit label", p.display())))?;
        let img = Pgm::read(&p)?.to_unit_image();
        if img.dims() != (TARGET_SIDE, TARGET_SIDE) {
            return Err(Error::ImageFormat(format!(
                "{}: expected 28x28, got {:?}",
                p.display(),
                img.dims()
            )));
        }
        map.entry(digit as u8).or_default().push(img);
    }
    Ok(map)
}
