//! Binary PGM (P5) encoding and decoding.
//!
//! Writing always produces the canonical header `P5\n<w> <h>\n<maxval>\n`
//! followed by raw samples (one byte for maxval < 256, otherwise two bytes,
//! most significant first). The reader also accepts comments and arbitrary
//! whitespace in the header.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

impl Pgm {
    pub fn encode(&self) -> Vec<u8> {
        let header = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval);
        let wide = self.maxval > 255;
        let mut out = Vec::with_capacity(header.len() + self.samples.len() * if wide { 2 } else { 1 });
        out.extend_from_slice(header.as_bytes());
        if wide {
            for s in &self.samples {
                out.extend_from_slice(&s.to_be_bytes());
            }
        } else {
            out.extend(self.samples.iter().map(|&s| s as u8));
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cursor = HeaderCursor { bytes, pos: 0 };
        if cursor.bytes.len() < 2 || &cursor.bytes[..2] != b"P5" {
            return Err(Error::ImageFormat("not a binary PGM (missing P5)".into()));
        }
        cursor.pos = 2;
        let width = cursor.number()?;
        let height = cursor.number()?;
        let maxval = cursor.number()?;
        if width == 0 || height == 0 {
            return Err(Error::ImageFormat(format!("empty image {width}x{height}")));
        }
        if maxval == 0 || maxval > 65535 {
            return Err(Error::ImageFormat(format!("maxval {maxval} out of range")));
        }
        // exactly one whitespace byte separates header and raster
        match cursor.bytes.get(cursor.pos) {
            Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
            _ => return Err(Error::ImageFormat("missing whitespace after maxval".into())),
        }
        let raster = &bytes[cursor.pos..];
        let n = width * height;
        let samples: Vec<u16> = if maxval > 255 {
            if raster.len() < 2 * n {
                return Err(Error::ImageFormat(format!(
                    "raster holds {} bytes, need {}",
                    raster.len(),
                    2 * n
                )));
            }
            raster[..2 * n]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect()
        } else {
            if raster.len() < n {
                return Err(Error::ImageFormat(format!(
                    "raster holds {} bytes, need {n}",
                    raster.len()
                )));
            }
            raster[..n].iter().map(|&b| b as u16).collect()
        };
        if let Some(bad) = samples.iter().find(|&&s| s as usize > maxval) {
            return Err(Error::ImageFormat(format!("sample {bad} exceeds maxval {maxval}")));
        }
        Ok(Self {
            width,
            height,
            maxval: maxval as u16,
            samples,
        })
    }

    /// Quantize `image * scale` to 16-bit (round to nearest, saturating).
    pub fn from_image_u16(image: &Image, scale: f64) -> Self {
        Self::quantize(image, scale, 65535)
    }

    /// Quantize `image * scale` to 8-bit.
    pub fn from_image_u8(image: &Image, scale: f64) -> Self {
        Self::quantize(image, scale, 255)
    }

    fn quantize(image: &Image, scale: f64, maxval: u16) -> Self {
        let top = maxval as f64;
        Self {
            width: image.width(),
            height: image.height(),
            maxval,
            samples: image
                .data()
                .iter()
                .map(|&v| (v * scale).round().clamp(0.0, top) as u16)
                .collect(),
        }
    }

    /// Samples divided by `scale`.
    pub fn to_image(&self, scale: f64) -> Image {
        let data = self.samples.iter().map(|&s| s as f64 / scale).collect();
        Image::from_vec(self.width, self.height, data).expect("sample count matches dims")
    }

    /// Samples divided by maxval, i.e. unit range.
    pub fn to_unit_image(&self) -> Image {
        self.to_image(self.maxval as f64)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::ImageFormat(format!("bad header number at byte {start}")))
    }
}
