//! Embedding functions producing two-level feature maps.
//!
//! Every extractor maps a 127-px patch to an 8×8 (lo) / 6×6 (hi) pair and
//! a 255-px patch to 24×24 / 22×22, at a shared stride of 8 px per cell.
//! Cell `i` of the lo level is centered on patch pixel `8i + 35`, cell `i`
//! of the hi level on `8i + 43`.

mod file;
mod gradient;
mod random_conv;

pub use file::{read_fmap, write_fmap, FeatureManifest, ManifestEntry};
pub use gradient::GradientChannels;
pub use random_conv::RandomConv;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

pub const TEMPLATE_SIZE: usize = 127;
pub const SEARCH_SIZE: usize = 255;
pub const STRIDE: usize = 8;
/// Receptive field (px) spanned by one lo cell.
pub const LO_FIELD: usize = 71;
/// Receptive field (px) spanned by one hi cell.
pub const HI_FIELD: usize = 87;

/// Number of cells a level yields on a patch of `size` px.
pub const fn cells(size: usize, field: usize) -> usize {
    (size - field) / STRIDE + 1
}

/// Real-valued `channels × height × width` array.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    stride: f64,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(
        channels: usize,
        height: usize,
        width: usize,
        stride: f64,
        data: Vec<f64>,
    ) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::Shape(format!(
                "{} values for {channels}x{height}x{width}",
                data.len()
            )));
        }
        if !(stride > 0.0) {
            return Err(Error::Shape(format!("stride {stride}")));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Shape("non-finite feature value".into()));
        }
        Ok(Self {
            channels,
            height,
            width,
            stride,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize, stride: f64) -> Self {
        Self {
            channels,
            height,
            width,
            stride,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn stride(&self) -> f64 {
        self.stride
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Channel plane, row-major.
    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, row: usize, col: usize) -> f64 {
        self.data[(c * self.height + row) * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, c: usize, row: usize, col: usize, v: f64) {
        self.data[(c * self.height + row) * self.width + col] = v;
    }

    pub fn same_shape(&self, other: &FeatureMap) -> bool {
        self.channels == other.channels && self.height == other.height && self.width == other.width
    }

    fn check_shape(&self, other: &FeatureMap) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.channels, self.height, self.width, other.channels, other.height, other.width
            )))
        }
    }

    /// `a·self + b·other`, elementwise.
    pub fn blend(&self, a: f64, other: &FeatureMap, b: f64) -> Result<FeatureMap> {
        self.check_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(FeatureMap { data, ..*self })
    }

    /// Zero every cell where `mask` (height × width, row-major) is zero.
    pub fn apply_mask(&mut self, mask: &[f64]) -> Result<()> {
        let n = self.height * self.width;
        if mask.len() != n {
            return Err(Error::Shape(format!("mask of {} cells for {n}", mask.len())));
        }
        for plane in self.data.chunks_exact_mut(n) {
            for (v, m) in plane.iter_mut().zip(mask) {
                *v *= m;
            }
        }
        Ok(())
    }
}

/// conv4-like (`lo`) and conv5-like (`hi`) levels of one patch.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePair {
    pub lo: FeatureMap,
    pub hi: FeatureMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Lo,
    Hi,
}

impl Level {
    pub const ALL: [Level; 2] = [Level::Lo, Level::Hi];

    pub fn field(self) -> usize {
        match self {
            Level::Lo => LO_FIELD,
            Level::Hi => HI_FIELD,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Level::Lo => "lo",
            Level::Hi => "hi",
        }
    }
}

impl FeaturePair {
    pub fn level(&self, level: Level) -> &FeatureMap {
        match level {
            Level::Lo => &self.lo,
            Level::Hi => &self.hi,
        }
    }

    pub fn level_mut(&mut self, level: Level) -> &mut FeatureMap {
        match level {
            Level::Lo => &mut self.lo,
            Level::Hi => &mut self.hi,
        }
    }

    pub fn blend(&self, a: f64, other: &FeaturePair, b: f64) -> Result<FeaturePair> {
        Ok(FeaturePair {
            lo: self.lo.blend(a, &other.lo, b)?,
            hi: self.hi.blend(a, &other.hi, b)?,
        })
    }

    /// Geometry check against the expected cell counts for a patch size.
    pub fn check_geometry(&self, patch_size: usize) -> Result<()> {
        for level in Level::ALL {
            let n = cells(patch_size, level.field());
            let m = self.level(level);
            if m.height != n || m.width != n {
                return Err(Error::Shape(format!(
                    "{} level is {}x{}, expected {n}x{n} for a {patch_size}-px patch",
                    level.name(),
                    m.height,
                    m.width
                )));
            }
        }
        if self.lo.channels == 0 || self.hi.channels == 0 {
            return Err(Error::Shape("empty channel set".into()));
        }
        Ok(())
    }
}

/// Which patch an embedding is requested for; only the file-backed
/// extractor uses it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PatchKey {
    Template { frame: usize },
    Search { frame: usize, scale: f64, angle: f64 },
}

impl PatchKey {
    pub fn frame(&self) -> usize {
        match *self {
            PatchKey::Template { frame } | PatchKey::Search { frame, .. } => frame,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExtractorSpec {
    GradientChannels {
        /// Half-width (px) of the lo-level pooling window.
        lo_radius: usize,
        /// Half-width (px) of the hi-level pooling window.
        hi_radius: usize,
        intensity_weight: f64,
        /// Per-cell orientation normalization epsilon; 0 disables.
        cell_norm: f64,
    },
    RandomConv {
        seed: u64,
        channels: [usize; 3],
    },
    File {
        manifest: PathBuf,
    },
}

impl Default for ExtractorSpec {
    fn default() -> Self {
        ExtractorSpec::GradientChannels {
            lo_radius: 1,
            hi_radius: 4,
            intensity_weight: 0.1,
            cell_norm: 0.01,
        }
    }
}

impl ExtractorSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ExtractorSpec::GradientChannels { .. } => "gradient",
            ExtractorSpec::RandomConv { .. } => "random-conv",
            ExtractorSpec::File { .. } => "file",
        }
    }
}

/// A constructed, immutable embedding function.
#[derive(Debug, Clone)]
pub enum Extractor {
    Gradient(GradientChannels),
    RandomConv(RandomConv),
    File(FeatureManifest),
}

impl Extractor {
    pub fn from_spec(spec: &ExtractorSpec) -> Result<Self> {
        Ok(match spec {
            ExtractorSpec::GradientChannels {
                lo_radius,
                hi_radius,
                intensity_weight,
                cell_norm,
            } => Extractor::Gradient(GradientChannels::new(*lo_radius, *hi_radius, *intensity_weight, *cell_norm)?),
            ExtractorSpec::RandomConv { seed, channels } => {
                Extractor::RandomConv(RandomConv::new(*seed, *channels)?)
            }
            ExtractorSpec::File { manifest } => Extractor::File(FeatureManifest::load(manifest)?),
        })
    }

    pub fn embed(&self, patch: &Image, key: &PatchKey) -> Result<FeaturePair> {
        let size = patch.width();
        if patch.height() != size || (size != TEMPLATE_SIZE && size != SEARCH_SIZE) {
            return Err(Error::PatchSize(if patch.height() != size { patch.height() } else { size }));
        }
        let pair = match self {
            Extractor::Gradient(g) => g.embed(patch),
            Extractor::RandomConv(r) => r.embed(patch),
            Extractor::File(m) => m.lookup(key)?,
        };
        pair.check_geometry(size)?;
        Ok(pair)
    }
}

/// Build the extractor for `spec` and embed one patch.
pub fn embed(spec: &ExtractorSpec, patch: &Image) -> Result<FeaturePair> {
    Extractor::from_spec(spec)?.embed(patch, &PatchKey::Template { frame: 0 })
}

/// Sub-window of `search` of size `out_hw`, centered on `peak_cell` and
/// clamped inside the map.
pub fn crop_feature(
    search: &FeatureMap,
    peak_cell: (usize, usize),
    out_hw: (usize, usize),
) -> Result<FeatureMap> {
    let (oh, ow) = out_hw;
    if oh > search.height || ow > search.width || oh == 0 || ow == 0 {
        return Err(Error::Shape(format!(
            "crop {oh}x{ow} from {}x{}",
            search.height, search.width
        )));
    }
    let r0 = peak_cell.0.saturating_sub(oh / 2).min(search.height - oh);
    let c0 = peak_cell.1.saturating_sub(ow / 2).min(search.width - ow);
    let mut data = Vec::with_capacity(search.channels * oh * ow);
    for c in 0..search.channels {
        for r in r0..r0 + oh {
            let start = (c * search.height + r) * search.width + c0;
            data.extend_from_slice(&search.data[start..start + ow]);
        }
    }
    FeatureMap::new(search.channels, oh, ow, search.stride, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(c: usize, h: usize, w: usize) -> FeatureMap {
        let data = (0..c * h * w).map(|i| i as f64).collect();
        FeatureMap::new(c, h, w, 8.0, data).unwrap()
    }

    #[test]
    fn level_geometry() {
        assert_eq!(cells(127, LO_FIELD), 8);
        assert_eq!(cells(127, HI_FIELD), 6);
        assert_eq!(cells(255, LO_FIELD), 24);
        assert_eq!(cells(255, HI_FIELD), 22);
    }

    #[test]
    fn center_crop() {
        let m = ramp(2, 24, 24);
        let crop = crop_feature(&m, (12, 12), (8, 8)).unwrap();
        assert_eq!((crop.height(), crop.width()), (8, 8));
        for c in 0..2 {
            for r in 0..8 {
                for col in 0..8 {
                    assert_eq!(crop.get(c, r, col), m.get(c, r + 8, col + 8));
                }
            }
        }
    }

    #[test]
    fn corner_crop_is_clamped() {
        let m = ramp(1, 24, 24);
        let top_left = crop_feature(&m, (0, 0), (8, 8)).unwrap();
        assert_eq!(top_left.get(0, 0, 0), m.get(0, 0, 0));
        let bottom_right = crop_feature(&m, (23, 23), (8, 8)).unwrap();
        assert_eq!((bottom_right.height(), bottom_right.width()), (8, 8));
        assert_eq!(bottom_right.get(0, 7, 7), m.get(0, 23, 23));
    }

    #[test]
    fn oversized_crop_rejected() {
        let m = ramp(1, 6, 6);
        assert!(crop_feature(&m, (3, 3), (8, 8)).is_err());
    }

    #[test]
    fn wrong_patch_size_rejected() {
        let img = Image::filled(100, 100, 1, 0.5);
        assert!(matches!(
            embed(&ExtractorSpec::default(), &img),
            Err(Error::PatchSize(100))
        ));
    }

    #[test]
    fn non_finite_rejected() {
        assert!(FeatureMap::new(1, 1, 1, 8.0, vec![f64::NAN]).is_err());
        assert!(FeatureMap::new(1, 1, 2, 8.0, vec![0.0]).is_err());
    }

    #[test]
    fn masking_zeroes_cells_in_every_channel() {
        let mut m = ramp(3, 2, 2);
        m.apply_mask(&[1.0, 0.0, 0.0, 1.0]).unwrap();
        for c in 0..3 {
            assert_eq!(m.get(c, 0, 1), 0.0);
            assert_eq!(m.get(c, 1, 0), 0.0);
            assert_ne!(m.get(c, 1, 1), 0.0);
        }
    }
}
