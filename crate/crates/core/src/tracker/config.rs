//! Tracker configuration and its flat `key = value` file format.
//!
//! Keys are the field names of [`TrackerConfig`]; `M`, `N` and `th_r` are
//! accepted as aliases of `scale_count`, `angle_count` and
//! `aspect_threshold`. Unlisted keys keep their defaults.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::ExtractorSpec;
use crate::geometry::{BorderFill, Interpolation, PatchSampling};

/// How candidate maps are brought to a common range before selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// One affine rescale shared by all candidate maps of a frame.
    Joint,
    /// Each map rescaled to `[0, 1]` on its own.
    PerMap,
}

/// Where the scale/angle penalties enter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyStage {
    /// Normalize, window, then penalize; select over all candidates.
    Windowed,
    /// Pick the candidate by penalized raw maximum, then normalize and
    /// window only the chosen map to locate the peak.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// Scale hypotheses per frame (odd).
    pub scale_count: usize,
    /// Angle hypotheses per frame (odd).
    pub angle_count: usize,
    pub scale_step: f64,
    pub angle_step: f64,
    pub angle_penalty: f64,
    pub scale_penalty: f64,
    /// Aspect ratio above which the spatial mask is used.
    pub aspect_threshold: f64,
    /// Weight of the first-frame template.
    pub lambda_s: f64,
    /// Moving-average update rate.
    pub lambda_u: f64,
    pub window_weight: f64,
    /// Fusion weights of the lo and hi response levels.
    pub fusion_weights: [f64; 2],
    pub extractor: ExtractorSpec,
    pub mask_enabled: bool,
    pub angle_enabled: bool,
    pub update_enabled: bool,
    /// Cells zeroed per side of the lo / hi template level.
    pub mask_band: [usize; 2],
    /// Whether the lo / hi level is masked.
    pub mask_levels: [bool; 2],
    pub upsample: usize,
    pub normalization: Normalization,
    pub penalty_stage: PenaltyStage,
    /// Rotate the measured displacement by the patch angle.
    pub rotate_displacement: bool,
    /// Subtract each channel's mean over the unmasked template cells before
    /// correlating, so responses track structure rather than brightness.
    pub center_template: bool,
    pub sampling: PatchSampling,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            scale_count: 3,
            angle_count: 3,
            scale_step: 1.0375,
            angle_step: PI / 8.0,
            angle_penalty: 0.975,
            scale_penalty: 0.973,
            aspect_threshold: 1.5,
            lambda_s: 0.5,
            lambda_u: 0.006,
            window_weight: 0.176,
            fusion_weights: [0.5, 0.5],
            extractor: ExtractorSpec::default(),
            mask_enabled: true,
            angle_enabled: true,
            update_enabled: true,
            mask_band: [2, 1],
            mask_levels: [true, true],
            upsample: 16,
            normalization: Normalization::Joint,
            penalty_stage: PenaltyStage::Windowed,
            rotate_displacement: true,
            center_template: true,
            sampling: PatchSampling::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.scale_count == 0 || self.scale_count % 2 == 0 {
            return fail(format!("scale_count {} must be odd", self.scale_count));
        }
        if self.angle_count == 0 || self.angle_count % 2 == 0 {
            return fail(format!("angle_count {} must be odd", self.angle_count));
        }
        if !(self.scale_step > 0.0) || !(self.angle_step > 0.0) {
            return fail("steps must be positive".into());
        }
        for (name, p) in [("angle_penalty", self.angle_penalty), ("scale_penalty", self.scale_penalty)] {
            if !(p > 0.0 && p <= 1.0) {
                return fail(format!("{name} {p} outside (0, 1]"));
            }
        }
        if !(self.aspect_threshold >= 1.0) {
            return fail(format!("aspect_threshold {} < 1", self.aspect_threshold));
        }
        for (name, l) in [
            ("lambda_s", self.lambda_s),
            ("lambda_u", self.lambda_u),
            ("window_weight", self.window_weight),
        ] {
            if !(0.0..=1.0).contains(&l) {
                return fail(format!("{name} {l} outside [0, 1]"));
            }
        }
        let [a, b] = self.fusion_weights;
        if a < 0.0 || b < 0.0 || (a + b - 1.0).abs() > 1e-9 {
            return fail(format!("fusion_weights {a}, {b} must be ≥ 0 and sum to 1"));
        }
        if self.upsample == 0 {
            return fail("upsample must be ≥ 1".into());
        }
        Ok(())
    }

    /// Effective angle hypothesis count (1 when angles are disabled).
    pub fn effective_angle_count(&self) -> usize {
        if self.angle_enabled {
            self.angle_count
        } else {
            1
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf);
        Self::parse(&text, base.as_deref()).map_err(|e| match e {
            Error::Parse { line, msg, .. } => Error::parse(path, line, msg),
            e => e,
        })
    }

    /// Parse the key-value format; relative extractor paths resolve
    /// against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg = TrackerConfig::default();
        let mut kind: Option<String> = None;
        let mut seed = 0u64;
        let mut conv_channels = [8, 16, 32];
        let ExtractorSpec::GradientChannels {
            lo_radius,
            hi_radius,
            mut intensity_weight,
            mut cell_norm,
        } = ExtractorSpec::default()
        else {
            unreachable!("the default extractor is gradient channels")
        };
        let mut radii = (lo_radius, hi_radius);
        let mut manifest: Option<PathBuf> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| Error::parse("<config>", i + 1, m);
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            let f = |v: &str| v.parse::<f64>().map_err(|_| err(format!("{key}: bad number {v:?}")));
            let u = |v: &str| v.parse::<usize>().map_err(|_| err(format!("{key}: bad count {v:?}")));
            let b = |v: &str| match v {
                "true" | "1" | "on" | "yes" => Ok(true),
                "false" | "0" | "off" | "no" => Ok(false),
                _ => Err(err(format!("{key}: bad flag {v:?}"))),
            };
            let pair = |v: &str| -> Result<(String, String)> {
                v.split_once(',')
                    .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
                    .ok_or_else(|| err(format!("{key}: expected two comma-separated values")))
            };
            match key {
                "scale_count" | "M" => cfg.scale_count = u(value)?,
                "angle_count" | "N" => cfg.angle_count = u(value)?,
                "scale_step" => cfg.scale_step = f(value)?,
                "angle_step" => cfg.angle_step = f(value)?,
                "angle_penalty" => cfg.angle_penalty = f(value)?,
                "scale_penalty" => cfg.scale_penalty = f(value)?,
                "aspect_threshold" | "th_r" => cfg.aspect_threshold = f(value)?,
                "lambda_s" | "lambda_S" => cfg.lambda_s = f(value)?,
                "lambda_u" | "lambda_U" => cfg.lambda_u = f(value)?,
                "window_weight" => cfg.window_weight = f(value)?,
                "fusion_weights" => {
                    let (a, b) = pair(value)?;
                    cfg.fusion_weights = [f(&a)?, f(&b)?];
                }
                "mask_enabled" => cfg.mask_enabled = b(value)?,
                "angle_enabled" => cfg.angle_enabled = b(value)?,
                "update_enabled" => cfg.update_enabled = b(value)?,
                "mask_band" => {
                    let (a, c) = pair(value)?;
                    cfg.mask_band = [u(&a)?, u(&c)?];
                }
                "mask_levels" => {
                    let (a, c) = pair(value)?;
                    cfg.mask_levels = [b(&a)?, b(&c)?];
                }
                "upsample" => cfg.upsample = u(value)?,
                "normalization" => {
                    cfg.normalization = match value {
                        "joint" => Normalization::Joint,
                        "per-map" => Normalization::PerMap,
                        v => return Err(err(format!("normalization: unknown {v:?}"))),
                    }
                }
                "penalty_stage" => {
                    cfg.penalty_stage = match value {
                        "windowed" => PenaltyStage::Windowed,
                        "raw" => PenaltyStage::Raw,
                        v => return Err(err(format!("penalty_stage: unknown {v:?}"))),
                    }
                }
                "rotate_displacement" => cfg.rotate_displacement = b(value)?,
                "border_fill" => {
                    cfg.sampling.fill = match value {
                        "mean" => BorderFill::Mean,
                        "zero" => BorderFill::Zero,
                        v => return Err(err(format!("border_fill: unknown {v:?}"))),
                    }
                }
                "interpolation" => {
                    cfg.sampling.interpolation = match value {
                        "bilinear" => Interpolation::Bilinear,
                        "nearest" => Interpolation::Nearest,
                        v => return Err(err(format!("interpolation: unknown {v:?}"))),
                    }
                }
                "extractor" => kind = Some(value.to_string()),
                "extractor_seed" => seed = value.parse().map_err(|_| err(format!("bad seed {value:?}")))?,
                "extractor_channels" => {
                    let v: Vec<&str> = value.split(',').map(str::trim).collect();
                    if v.len() != 3 {
                        return Err(err("extractor_channels: expected three counts".into()));
                    }
                    conv_channels = [u(v[0])?, u(v[1])?, u(v[2])?];
                }
                "pool_radius" => {
                    let (a, c) = pair(value)?;
                    radii = (u(&a)?, u(&c)?);
                }
                "intensity_weight" => intensity_weight = f(value)?,
                "cell_norm" => cell_norm = f(value)?,
                "center_template" => cfg.center_template = b(value)?,
                "extractor_manifest" => {
                    let p = PathBuf::from(value);
                    manifest = Some(match base {
                        Some(dir) if p.is_relative() => dir.join(p),
                        _ => p,
                    });
                }
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        cfg.extractor = match kind.as_deref().unwrap_or("gradient") {
            "gradient" => ExtractorSpec::GradientChannels {
                lo_radius: radii.0,
                hi_radius: radii.1,
                intensity_weight,
                cell_norm,
            },
            "random-conv" => ExtractorSpec::RandomConv {
                seed,
                channels: conv_channels,
            },
            "file" => ExtractorSpec::File {
                manifest: manifest
                    .ok_or_else(|| Error::Config("extractor = file needs extractor_manifest".into()))?,
            },
            k => return Err(Error::Config(format!("unknown extractor {k:?}"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serialize to the key-value format; `parse(to_kv())` is the identity.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let flag = |b: bool| if b { "true" } else { "false" };
        let _ = writeln!(s, "scale_count = {}", self.scale_count);
        let _ = writeln!(s, "angle_count = {}", self.angle_count);
        let _ = writeln!(s, "scale_step = {:?}", self.scale_step);
        let _ = writeln!(s, "angle_step = {:?}", self.angle_step);
        let _ = writeln!(s, "angle_penalty = {:?}", self.angle_penalty);
        let _ = writeln!(s, "scale_penalty = {:?}", self.scale_penalty);
        let _ = writeln!(s, "aspect_threshold = {:?}", self.aspect_threshold);
        let _ = writeln!(s, "lambda_s = {:?}", self.lambda_s);
        let _ = writeln!(s, "lambda_u = {:?}", self.lambda_u);
        let _ = writeln!(s, "window_weight = {:?}", self.window_weight);
        let _ = writeln!(
            s,
            "fusion_weights = {:?}, {:?}",
            self.fusion_weights[0], self.fusion_weights[1]
        );
        let _ = writeln!(s, "mask_enabled = {}", flag(self.mask_enabled));
        let _ = writeln!(s, "angle_enabled = {}", flag(self.angle_enabled));
        let _ = writeln!(s, "update_enabled = {}", flag(self.update_enabled));
        let _ = writeln!(s, "mask_band = {}, {}", self.mask_band[0], self.mask_band[1]);
        let _ = writeln!(
            s,
            "mask_levels = {}, {}",
            flag(self.mask_levels[0]),
            flag(self.mask_levels[1])
        );
        let _ = writeln!(s, "upsample = {}", self.upsample);
        let _ = writeln!(
            s,
            "normalization = {}",
            match self.normalization {
                Normalization::Joint => "joint",
                Normalization::PerMap => "per-map",
            }
        );
        let _ = writeln!(
            s,
            "penalty_stage = {}",
            match self.penalty_stage {
                PenaltyStage::Windowed => "windowed",
                PenaltyStage::Raw => "raw",
            }
        );
        let _ = writeln!(s, "rotate_displacement = {}", flag(self.rotate_displacement));
        let _ = writeln!(s, "center_template = {}", flag(self.center_template));
        let _ = writeln!(
            s,
            "border_fill = {}",
            match self.sampling.fill {
                BorderFill::Mean => "mean",
                BorderFill::Zero => "zero",
            }
        );
        let _ = writeln!(
            s,
            "interpolation = {}",
            match self.sampling.interpolation {
                Interpolation::Bilinear => "bilinear",
                Interpolation::Nearest => "nearest",
            }
        );
        match &self.extractor {
            ExtractorSpec::GradientChannels {
                lo_radius,
                hi_radius,
                intensity_weight,
                cell_norm,
            } => {
                let _ = writeln!(s, "extractor = gradient");
                let _ = writeln!(s, "pool_radius = {lo_radius}, {hi_radius}");
                let _ = writeln!(s, "intensity_weight = {intensity_weight:?}");
                let _ = writeln!(s, "cell_norm = {cell_norm:?}");
            }
            ExtractorSpec::RandomConv { seed, channels } => {
                let _ = writeln!(s, "extractor = random-conv");
                let _ = writeln!(s, "extractor_seed = {seed}");
                let _ = writeln!(
                    s,
                    "extractor_channels = {}, {}, {}",
                    channels[0], channels[1], channels[2]
                );
            }
            ExtractorSpec::File { manifest } => {
                let _ = writeln!(s, "extractor = file");
                let _ = writeln!(s, "extractor_manifest = {}", manifest.display());
            }
        }
        s
    }
}
