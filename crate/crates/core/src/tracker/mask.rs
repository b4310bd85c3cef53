use serde::{Deserialize, Serialize};

use crate::features::{FeaturePair, Level};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskOrientation {
    /// `h / w` above the threshold: outer columns are zeroed.
    Tall,
    /// `w / h` above the threshold: outer rows are zeroed.
    Wide,
    None,
}

impl MaskOrientation {
    /// Gate on the aspect ratio; strict inequality.
    pub fn for_box(w: f64, h: f64, threshold: f64) -> Self {
        if h / w > threshold {
            MaskOrientation::Tall
        } else if w / h > threshold {
            MaskOrientation::Wide
        } else {
            MaskOrientation::None
        }
    }
}

/// Square binary mask of side `size`, row-major, with `band` cells zeroed
/// on each side across the masked axis.
pub fn make_mask(size: usize, orientation: MaskOrientation, band: usize) -> Vec<f64> {
    let mut m = vec![1.0; size * size];
    let outer = |i: usize| i < band || i + band >= size;
    for r in 0..size {
        for c in 0..size {
            let zero = match orientation {
                MaskOrientation::Tall => outer(c),
                MaskOrientation::Wide => outer(r),
                MaskOrientation::None => false,
            };
            if zero {
                m[r * size + c] = 0.0;
            }
        }
    }
    m
}

/// Per-level masks for the template geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSet {
    pub orientation: MaskOrientation,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Whether each level is masked at all.
    pub levels: [bool; 2],
}

impl MaskSet {
    pub fn new(orientation: MaskOrientation, sizes: [usize; 2], band: [usize; 2], levels: [bool; 2]) -> Self {
        Self {
            orientation,
            lo: make_mask(sizes[0], orientation, band[0]),
            hi: make_mask(sizes[1], orientation, band[1]),
            levels,
        }
    }

    pub fn level(&self, level: Level) -> Option<&[f64]> {
        match level {
            Level::Lo if self.levels[0] => Some(&self.lo),
            Level::Hi if self.levels[1] => Some(&self.hi),
            _ => None,
        }
    }

    /// Zero masked cells of the flagged template levels.
    pub fn apply(&self, template: &mut FeaturePair) -> crate::Result<()> {
        for level in Level::ALL {
            if let Some(mask) = self.level(level) {
                template.level_mut(level).apply_mask(mask)?;
            }
        }
        Ok(())
    }
}
