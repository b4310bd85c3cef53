use std::f64::consts::PI;

use super::{cells, FeatureMap, FeaturePair, Level, STRIDE};
use crate::error::{Error, Result};
use crate::image::Image;

pub const ORIENTATION_BINS: usize = 8;

/// Orientation-binned gradient magnitudes plus a centered intensity
/// channel, box-pooled onto the lo/hi cell grids.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientChannels {
    lo_radius: usize,
    hi_radius: usize,
    intensity_weight: f64,
    cell_norm: f64,
}

impl GradientChannels {
    /// `cell_norm > 0` divides each cell's orientation histogram by its L2
    /// norm plus `cell_norm`, which makes responses insensitive to contrast
    /// and to the gradient gain of resized crops; 0 disables it.
    pub fn new(lo_radius: usize, hi_radius: usize, intensity_weight: f64, cell_norm: f64) -> Result<Self> {
        // pooling windows must stay inside the patch for the first cell
        let lo_center = (Level::Lo.field() - 1) / 2;
        let hi_center = (Level::Hi.field() - 1) / 2;
        if lo_radius > lo_center || hi_radius > hi_center {
            return Err(Error::Config(format!(
                "pooling radii ({lo_radius}, {hi_radius}) exceed ({lo_center}, {hi_center})"
            )));
        }
        if !intensity_weight.is_finite() {
            return Err(Error::Config("intensity weight must be finite".into()));
        }
        if !(cell_norm >= 0.0 && cell_norm.is_finite()) {
            return Err(Error::Config("cell_norm must be a non-negative number".into()));
        }
        Ok(Self {
            lo_radius,
            hi_radius,
            intensity_weight,
            cell_norm,
        })
    }

    pub fn channels(&self) -> usize {
        ORIENTATION_BINS + 1
    }

    pub fn embed(&self, patch: &Image) -> FeaturePair {
        let n = patch.width();
        let planes = self.pixel_channels(&patch.to_gray());
        let tables: Vec<Integral> = planes.iter().map(|p| Integral::new(p, n)).collect();
        let mut pair = FeaturePair {
            lo: pool(&tables, n, Level::Lo, self.lo_radius),
            hi: pool(&tables, n, Level::Hi, self.hi_radius),
        };
        if self.cell_norm > 0.0 {
            normalize_cells(&mut pair.lo, self.cell_norm);
            normalize_cells(&mut pair.hi, self.cell_norm);
        }
        pair
    }

    /// Per-pixel channel planes: 8 soft-binned unsigned orientations, then
    /// intensity minus 0.5.
    fn pixel_channels(&self, gray: &Image) -> Vec<Vec<f64>> {
        let (w, h) = (gray.width(), gray.height());
        let px = gray.data();
        let mut planes = vec![vec![0.0; w * h]; ORIENTATION_BINS + 1];
        let bin_width = PI / ORIENTATION_BINS as f64;
        for y in 0..h {
            let (ya, yb) = (y.saturating_sub(1), (y + 1).min(h - 1));
            for x in 0..w {
                let (xa, xb) = (x.saturating_sub(1), (x + 1).min(w - 1));
                let gx = (px[y * w + xb] - px[y * w + xa]) / (xb - xa).max(1) as f64;
                let gy = (px[yb * w + x] - px[ya * w + x]) / (yb - ya).max(1) as f64;
                let mag = gx.hypot(gy);
                let i = y * w + x;
                planes[ORIENTATION_BINS][i] = self.intensity_weight * (px[i] - 0.5);
                if mag == 0.0 {
                    continue;
                }
                let mut angle = gy.atan2(gx);
                if angle < 0.0 {
                    angle += PI;
                }
                // bin k is centered on (k + 0.5)·π/8
                let pos = angle / bin_width - 0.5;
                let lower = pos.floor();
                let frac = pos - lower;
                let b0 = (lower as isize).rem_euclid(ORIENTATION_BINS as isize) as usize;
                let b1 = (b0 + 1) % ORIENTATION_BINS;
                planes[b0][i] += mag * (1.0 - frac);
                planes[b1][i] += mag * frac;
            }
        }
        planes
    }
}

fn normalize_cells(map: &mut FeatureMap, eps: f64) {
    for r in 0..map.height() {
        for c in 0..map.width() {
            let norm = (0..ORIENTATION_BINS)
                .map(|k| map.get(k, r, c).powi(2))
                .sum::<f64>()
                .sqrt();
            for k in 0..ORIENTATION_BINS {
                let v = map.get(k, r, c) / (norm + eps);
                map.set(k, r, c, v);
            }
        }
    }
}

struct Integral {
    n: usize,
    sums: Vec<f64>,
}

impl Integral {
    fn new(plane: &[f64], n: usize) -> Self {
        let stride = n + 1;
        let mut sums = vec![0.0; stride * stride];
        for y in 0..n {
            let mut row = 0.0;
            for x in 0..n {
                row += plane[y * n + x];
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Self { n, sums }
    }

    /// Sum over the inclusive pixel rectangle.
    fn rect(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        let s = self.n + 1;
        self.sums[(y1 + 1) * s + x1 + 1] - self.sums[y0 * s + x1 + 1] - self.sums[(y1 + 1) * s + x0]
            + self.sums[y0 * s + x0]
    }
}

fn pool(tables: &[Integral], n: usize, level: Level, radius: usize) -> FeatureMap {
    let count = cells(n, level.field());
    let first = (level.field() - 1) / 2;
    let area = ((2 * radius + 1) * (2 * radius + 1)) as f64;
    let mut map = FeatureMap::zeros(tables.len(), count, count, STRIDE as f64);
    for (c, table) in tables.iter().enumerate() {
        for r in 0..count {
            let cy = first + STRIDE * r;
            for col in 0..count {
                let cx = first + STRIDE * col;
                let sum = table.rect(cx - radius, cy - radius, cx + radius, cy + radius);
                map.set(c, r, col, sum / area);
            }
        }
    }
    map
}
