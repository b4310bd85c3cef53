//! Rotation-aware Siamese template-matching tracker.
//!
//! The tracker correlates a fixed-geometry template feature map against a
//! small set of scale/angle candidate patches per frame, picks the
//! penalized best response, and accumulates position, size and in-plane
//! angle. Around it sit OTB- and VOT-style evaluation metrics, a
//! synthetic sequence generator with exact ground truth, and an ablation
//! runner.

pub mod error;
pub mod features;
pub mod geometry;
pub mod image;
pub mod matching;
pub mod tracker;
pub mod eval;
pub mod synth;
pub mod ablation;
pub mod plot;

pub use error::{Error, Result};
pub use geometry::{AxisBox, OrientedBox};
pub use image::Image;
