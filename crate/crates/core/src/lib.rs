//! Synthetic event-based passive non-line-of-sight imaging.
//!
//! A hidden emitter is rendered onto a diffuse wall ([`forward`]), the wall
//! video is turned into events ([`sim`]), events become time-surface images
//! ([`features`]), and the target is recovered either by deconvolution or by
//! a trained linear map ([`recon`]). [`pipeline`] ties the stages together.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod event;
pub mod features;
pub mod fft;
pub mod forward;
pub mod image;
pub mod metrics;
pub mod pgm;
pub mod pipeline;
pub mod recon;
pub mod sim;
pub mod targets;

pub use error::{Error, Result};
pub use event::{Event, EventStream, Polarity, SensorGeometry};
pub use image::Image;
