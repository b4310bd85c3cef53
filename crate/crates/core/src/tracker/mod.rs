//! The per-sequence tracking state machine.
//!
//! Each frame crops `M + N − 1` candidate patches around the current pose,
//! each varying either the scale or the angle (never both), correlates them
//! with the blended template, and moves the pose to the penalized best
//! response. The template is a fixed mix of the first-frame features and an
//! exponential moving average of tracked-object features.

mod config;
mod mask;

pub use config::{Normalization, PenaltyStage, TrackerConfig};
pub use mask::{make_mask, MaskOrientation, MaskSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    cells, crop_feature, Extractor, FeatureMap, FeaturePair, Level, PatchKey, SEARCH_SIZE,
    TEMPLATE_SIZE,
};
use crate::geometry::{context_side, extract_patch_with, normalize_angle, AxisBox, OrientedBox};
use crate::image::Image;
use crate::matching::{
    apply_window, cross_correlate, fuse, normalize, normalize_joint, patch_to_frame,
    peak_to_displacement, select_peak, CandidateSpec, Peak, ResponseMap,
};

/// Size limits relative to the initial box.
const MIN_SCALE: f64 = 0.2;
const MAX_SCALE: f64 = 5.0;

/// The `M + N − 1` scale/angle hypotheses, each changing at most one of
/// scale and angle.
pub fn candidate_set(cfg: &TrackerConfig) -> Vec<CandidateSpec> {
    let m = (cfg.scale_count / 2) as i32;
    let n = (cfg.effective_angle_count() / 2) as i32;
    let mut out = Vec::with_capacity((2 * m + 2 * n + 1) as usize);
    for i in 1..=m {
        for sign in [1, -1] {
            out.push(CandidateSpec {
                scale: cfg.scale_step.powi(sign * i),
                angle: 0.0,
                penalty: cfg.scale_penalty,
            });
        }
    }
    out.push(CandidateSpec::identity());
    for j in 1..=n {
        for sign in [1.0, -1.0] {
            out.push(CandidateSpec {
                scale: 1.0,
                angle: sign * j as f64 * cfg.angle_step,
                penalty: cfg.angle_penalty,
            });
        }
    }
    out
}

/// `λ_S·first + (1 − λ_S)·moving`, per level.
pub fn blend_template(first: &FeaturePair, moving: &FeaturePair, lambda_s: f64) -> Result<FeaturePair> {
    first.blend(lambda_s, moving, 1.0 - lambda_s)
}

/// One moving-average step: `(1 − λ_U)·moving + λ_U·tracked`.
pub fn update_moving(moving: &FeaturePair, tracked: &FeaturePair, lambda_u: f64) -> Result<FeaturePair> {
    moving.blend(1.0 - lambda_u, tracked, lambda_u)
}

/// New pose after selecting `cand` with a frame-space displacement.
pub fn advance_pose(pose: &OrientedBox, cand: &CandidateSpec, shift: (f64, f64)) -> OrientedBox {
    OrientedBox {
        x: pose.x + shift.0,
        y: pose.y + shift.1,
        w: pose.w * cand.scale,
        h: pose.h * cand.scale,
        theta: normalize_angle(pose.theta + cand.angle),
    }
}

/// What the tracker decided on the last frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub candidate: CandidateSpec,
    pub candidate_index: usize,
    pub cell: (usize, usize),
    pub score: f64,
    /// Displacement in frame pixels.
    pub shift: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerState {
    pub pose: OrientedBox,
    pub first_template: FeaturePair,
    pub moving_template: FeaturePair,
    pub mask: Option<MaskSet>,
    pub frame_index: usize,
    pub initial_size: (f64, f64),
    pub last_step: Option<StepInfo>,
}

/// Candidate scoring output for one frame.
struct Scored {
    maps: Vec<ResponseMap>,
    features: Vec<FeaturePair>,
    sides: Vec<f64>,
}

/// Immutable tracker: configuration plus a constructed extractor. Shared
/// across sequences; per-sequence state lives in [`TrackerState`].
#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    extractor: Extractor,
    candidates: Vec<CandidateSpec>,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        let extractor = Extractor::from_spec(&cfg.extractor)?;
        let candidates = candidate_set(&cfg);
        Ok(Self {
            cfg,
            extractor,
            candidates,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn candidates(&self) -> &[CandidateSpec] {
        &self.candidates
    }

    /// Start tracking an upright box on frame 0.
    pub fn init(&self, frame: &Image, bbox: &AxisBox) -> Result<TrackerState> {
        self.init_oriented(frame, &OrientedBox::from(*bbox), 0)
    }

    /// Start (or restart) tracking a possibly rotated box on `frame_index`.
    /// The template patch is cropped upright in the box's own frame.
    pub fn init_oriented(
        &self,
        frame: &Image,
        bbox: &OrientedBox,
        frame_index: usize,
    ) -> Result<TrackerState> {
        if !(bbox.w > 1.0 && bbox.h > 1.0) {
            return Err(Error::InvalidBox(format!(
                "target of {}x{} px is too small to track",
                bbox.w, bbox.h
            )));
        }
        let pose = OrientedBox {
            x: bbox.x.clamp(0.0, (frame.width() - 1) as f64),
            y: bbox.y.clamp(0.0, (frame.height() - 1) as f64),
            theta: normalize_angle(bbox.theta),
            ..*bbox
        };
        let side = context_side(&pose.axis());
        let patch = extract_patch_with(
            frame,
            pose.center(),
            side,
            pose.theta,
            TEMPLATE_SIZE,
            &self.cfg.sampling,
        )?;
        let first = self
            .extractor
            .embed(&patch, &PatchKey::Template { frame: frame_index })?;
        let mask = self.cfg.mask_enabled.then(|| {
            MaskOrientation::for_box(pose.w, pose.h, self.cfg.aspect_threshold)
        });
        let mask = match mask {
            Some(o) if o != MaskOrientation::None => Some(MaskSet::new(
                o,
                [first.lo.height(), first.hi.height()],
                self.cfg.mask_band,
                self.cfg.mask_levels,
            )),
            _ => None,
        };
        Ok(TrackerState {
            pose,
            moving_template: first.clone(),
            first_template: first,
            mask,
            frame_index,
            initial_size: (pose.w, pose.h),
            last_step: None,
        })
    }

    /// Template used for correlation on the next frame, mask applied.
    pub fn correlation_template(&self, state: &TrackerState) -> Result<FeaturePair> {
        let mut t = if self.cfg.update_enabled {
            blend_template(&state.first_template, &state.moving_template, self.cfg.lambda_s)?
        } else {
            state.first_template.clone()
        };
        if self.cfg.center_template {
            for level in Level::ALL {
                let mask = state.mask.as_ref().and_then(|m| m.level(level));
                center_channels(t.level_mut(level), mask);
            }
        }
        if let Some(mask) = &state.mask {
            mask.apply(&mut t)?;
        }
        Ok(t)
    }

    /// Fold the features of the tracked object into the moving average and
    /// return the blended template for the next frame.
    pub fn update_template(&self, state: &mut TrackerState, tracked: &FeaturePair) -> Result<FeaturePair> {
        tracked.check_geometry(TEMPLATE_SIZE)?;
        if !state.moving_template.lo.same_shape(&tracked.lo) || !state.moving_template.hi.same_shape(&tracked.hi) {
            return Err(Error::Shape("tracked features do not match the template geometry".into()));
        }
        state.moving_template = update_moving(&state.moving_template, tracked, self.cfg.lambda_u)?;
        blend_template(&state.first_template, &state.moving_template, self.cfg.lambda_s)
    }

    /// Response maps for the given template against every candidate patch
    /// around `state.pose`, in candidate order.
    fn score(&self, state: &TrackerState, frame: &Image, template: &FeaturePair) -> Result<Scored> {
        let base = context_side(&state.pose.axis()) * SEARCH_SIZE as f64 / TEMPLATE_SIZE as f64;
        let frame_index = state.frame_index + 1;
        let results: Vec<Result<(ResponseMap, FeaturePair, f64)>> = self
            .candidates
            .par_iter()
            .map(|c| {
                let side = base * c.scale;
                let patch = extract_patch_with(
                    frame,
                    state.pose.center(),
                    side,
                    state.pose.theta + c.angle,
                    SEARCH_SIZE,
                    &self.cfg.sampling,
                )?;
                let key = PatchKey::Search {
                    frame: frame_index,
                    scale: c.scale,
                    angle: c.angle,
                };
                let feats = self.extractor.embed(&patch, &key)?;
                let lo = cross_correlate(&template.lo, &feats.lo)?;
                let hi = cross_correlate(&template.hi, &feats.hi)?;
                let fused = fuse(&[lo, hi], &self.cfg.fusion_weights)?;
                Ok((fused, feats, side))
            })
            .collect();
        let mut scored = Scored {
            maps: Vec::with_capacity(results.len()),
            features: Vec::with_capacity(results.len()),
            sides: Vec::with_capacity(results.len()),
        };
        for r in results {
            let (m, f, s) = r?;
            scored.maps.push(m);
            scored.features.push(f);
            scored.sides.push(s);
        }
        Ok(scored)
    }

    /// Pick the candidate and cell from raw fused maps.
    fn choose(&self, raw: &[ResponseMap]) -> Result<(Peak, ResponseMap)> {
        let w = self.cfg.window_weight;
        match self.cfg.penalty_stage {
            PenaltyStage::Windowed => {
                let normalized = match self.cfg.normalization {
                    Normalization::Joint => normalize_joint(raw),
                    Normalization::PerMap => raw.iter().map(normalize).collect(),
                };
                let cands: Vec<(CandidateSpec, ResponseMap)> = self
                    .candidates
                    .iter()
                    .zip(normalized)
                    .map(|(c, m)| (*c, apply_window(&m, w)))
                    .collect();
                let peak = select_peak(&cands)?;
                let map = cands[peak.index].1.clone();
                Ok((peak, map))
            }
            PenaltyStage::Raw => {
                let cands: Vec<(CandidateSpec, ResponseMap)> = self
                    .candidates
                    .iter()
                    .zip(raw)
                    .map(|(c, m)| (*c, m.clone()))
                    .collect();
                let pick = select_peak(&cands)?;
                let map = apply_window(&normalize(&raw[pick.index]), w);
                let cell = map.argmax();
                Ok((
                    Peak {
                        cell,
                        score: map.get(cell.0, cell.1),
                        ..pick
                    },
                    map,
                ))
            }
        }
    }

    /// Advance one frame. Always yields a pose; only extractor failures
    /// (e.g. a missing precomputed feature file) surface as errors.
    pub fn track(&self, state: &mut TrackerState, frame: &Image) -> Result<OrientedBox> {
        let template = self.correlation_template(state)?;
        let scored = self.score(state, frame, &template)?;
        let (peak, map) = self.choose(&scored.maps)?;
        let cand = self.candidates[peak.index];
        let disp = peak_to_displacement(peak.cell, &map, self.cfg.upsample);
        let ratio = scored.sides[peak.index] / SEARCH_SIZE as f64;
        let angle = if self.cfg.rotate_displacement {
            state.pose.theta + cand.angle
        } else {
            0.0
        };
        let shift = patch_to_frame(disp, ratio, angle);
        let mut pose = advance_pose(&state.pose, &cand, shift);
        let (w0, h0) = state.initial_size;
        let k = (pose.w / w0).clamp(MIN_SCALE, MAX_SCALE);
        pose.w = w0 * k;
        pose.h = h0 * k;
        pose.x = pose.x.clamp(0.0, (frame.width() - 1) as f64);
        pose.y = pose.y.clamp(0.0, (frame.height() - 1) as f64);

        if self.cfg.update_enabled {
            let tracked = tracked_features(&scored.features[peak.index], peak.cell, &state.first_template)?;
            self.update_template(state, &tracked)?;
        }
        state.pose = pose;
        state.frame_index += 1;
        state.last_step = Some(StepInfo {
            candidate: cand,
            candidate_index: peak.index,
            cell: peak.cell,
            score: peak.score,
            shift,
        });
        Ok(pose)
    }
}

/// Template-sized crops of the search features at a response cell; the
/// cell is the template's top-left offset on both levels.
fn tracked_features(search: &FeaturePair, cell: (usize, usize), like: &FeaturePair) -> Result<FeaturePair> {
    let crop = |s: &FeatureMap, t: &FeatureMap| {
        let (h, w) = (t.height(), t.width());
        crop_feature(s, (cell.0 + h / 2, cell.1 + w / 2), (h, w))
    };
    Ok(FeaturePair {
        lo: crop(&search.lo, &like.lo)?,
        hi: crop(&search.hi, &like.hi)?,
    })
}

/// Subtract from every channel its mean over the cells the mask keeps.
fn center_channels(map: &mut FeatureMap, mask: Option<&[f64]>) {
    let cells = map.height() * map.width();
    let keep = |i: usize| mask.map_or(true, |m| m[i] != 0.0);
    let kept = (0..cells).filter(|&i| keep(i)).count();
    if kept == 0 {
        return;
    }
    for plane in map.data_mut().chunks_mut(cells) {
        let mean = (0..cells).filter(|&i| keep(i)).map(|i| plane[i]).sum::<f64>() / kept as f64;
        plane.iter_mut().for_each(|v| *v -= mean);
    }
}

/// Expected template cell counts, lo and hi.
pub fn template_cells() -> [usize; 2] {
    [
        cells(TEMPLATE_SIZE, Level::Lo.field()),
        cells(TEMPLATE_SIZE, Level::Hi.field()),
    ]
}

#[cfg(test)]
mod tests;
