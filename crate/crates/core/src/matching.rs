//! Response maps: correlation, normalization, windowing, level fusion and
//! penalized peak selection across scale/angle candidates.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMap;

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
    pub upsample_factor: usize,
    /// Patch pixels per response cell (before upsampling).
    pub stride: f64,
}

impl ResponseMap {
    pub fn new(height: usize, width: usize, data: Vec<f64>, stride: f64) -> Result<Self> {
        if data.len() != height * width || height == 0 || width == 0 {
            return Err(Error::Shape(format!("{} values for {height}x{width}", data.len())));
        }
        Ok(Self {
            height,
            width,
            data,
            upsample_factor: 1,
            stride,
        })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// First maximal cell in row-major order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        (best / self.width, best % self.width)
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> ResponseMap {
        ResponseMap {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    pub fn scaled(&self, k: f64) -> ResponseMap {
        self.map(|v| v * k)
    }
}

/// One scale/angle hypothesis and its selection penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateSpec {
    pub scale: f64,
    pub angle: f64,
    pub penalty: f64,
}

impl CandidateSpec {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            angle: 0.0,
            penalty: 1.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.scale == 1.0 && self.angle == 0.0
    }
}

/// Valid sliding inner product over all channels.
pub fn cross_correlate(template: &FeatureMap, search: &FeatureMap) -> Result<ResponseMap> {
    if template.channels() != search.channels() {
        return Err(Error::Shape(format!(
            "template has {} channels, search {}",
            template.channels(),
            search.channels()
        )));
    }
    if template.height() > search.height() || template.width() > search.width() {
        return Err(Error::Shape(format!(
            "template {}x{} larger than search {}x{}",
            template.height(),
            template.width(),
            search.height(),
            search.width()
        )));
    }
    if template.stride() != search.stride() {
        return Err(Error::Shape(format!(
            "stride {} vs {}",
            template.stride(),
            search.stride()
        )));
    }
    let (th, tw) = (template.height(), template.width());
    let (sh, sw) = (search.height(), search.width());
    let (oh, ow) = (sh - th + 1, sw - tw + 1);
    let mut out = vec![0.0; oh * ow];
    for c in 0..template.channels() {
        let t = template.plane(c);
        let s = search.plane(c);
        for r in 0..oh {
            for col in 0..ow {
                let mut acc = 0.0;
                for i in 0..th {
                    let trow = &t[i * tw..(i + 1) * tw];
                    let srow = &s[(r + i) * sw + col..(r + i) * sw + col + tw];
                    acc += trow.iter().zip(srow).map(|(a, b)| a * b).sum::<f64>();
                }
                out[r * ow + col] += acc;
            }
        }
    }
    ResponseMap::new(oh, ow, out, search.stride())
}

/// Affine rescale to `[0, 1]`; a constant map becomes all zeros.
pub fn normalize(r: &ResponseMap) -> ResponseMap {
    let (lo, hi) = (r.min(), r.max());
    if hi <= lo {
        return r.map(|_| 0.0);
    }
    r.map(|v| (v - lo) / (hi - lo))
}

/// One shared affine rescale for a set of maps: the global minimum goes to
/// 0 and the global maximum to 1, preserving relative heights across maps.
pub fn normalize_joint(maps: &[ResponseMap]) -> Vec<ResponseMap> {
    let lo = maps.iter().map(ResponseMap::min).fold(f64::INFINITY, f64::min);
    let hi = maps.iter().map(ResponseMap::max).fold(f64::NEG_INFINITY, f64::max);
    maps.iter()
        .map(|m| {
            if hi <= lo {
                m.map(|_| 0.0)
            } else {
                m.map(|v| (v - lo) / (hi - lo))
            }
        })
        .collect()
}

fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let w: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
        .collect();
    let peak = w.iter().copied().fold(0.0, f64::max);
    w.into_iter().map(|v| v / peak).collect()
}

/// Outer product of 1-D Hann windows, peak-normalized to 1.
pub fn hann_window(height: usize, width: usize) -> Vec<f64> {
    let (wy, wx) = (hann(height), hann(width));
    let mut w: Vec<f64> = wy.iter().flat_map(|a| wx.iter().map(move |b| a * b)).collect();
    let peak = w.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        w.iter_mut().for_each(|v| *v /= peak);
    }
    w
}

/// `(1 − weight)·r + weight·W` with `W` the Hann surface.
pub fn apply_window(r: &ResponseMap, weight: f64) -> ResponseMap {
    let w = hann_window(r.height, r.width);
    ResponseMap {
        data: r
            .data
            .iter()
            .zip(&w)
            .map(|(v, h)| (1.0 - weight) * v + weight * h)
            .collect(),
        ..*r
    }
}

fn cubic(x: f64) -> f64 {
    // Keys kernel, a = -0.5
    let a = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0
    } else if x < 2.0 {
        a * x * x * x - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a
    } else {
        0.0
    }
}

/// Separable bicubic interpolation at `src` coordinates (border-clamped).
fn bicubic_sample(r: &ResponseMap, y: f64, x: f64) -> f64 {
    let (y0, x0) = (y.floor() as isize, x.floor() as isize);
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut acc = 0.0;
    for dy in -1..=2 {
        let wy = cubic(y - (y0 + dy) as f64);
        if wy == 0.0 {
            continue;
        }
        let row = clamp(y0 + dy, r.height);
        for dx in -1..=2 {
            let wx = cubic(x - (x0 + dx) as f64);
            acc += wy * wx * r.get(row, clamp(x0 + dx, r.width));
        }
    }
    acc
}

/// Bicubic resize with pixel-center alignment, used to bring levels with
/// different response sizes onto one grid.
pub fn resample(r: &ResponseMap, height: usize, width: usize) -> ResponseMap {
    if height == r.height && width == r.width {
        return r.clone();
    }
    let sy = r.height as f64 / height as f64;
    let sx = r.width as f64 / width as f64;
    let mut data = Vec::with_capacity(height * width);
    for i in 0..height {
        let y = (i as f64 + 0.5) * sy - 0.5;
        for j in 0..width {
            let x = (j as f64 + 0.5) * sx - 0.5;
            data.push(bicubic_sample(r, y, x));
        }
    }
    ResponseMap {
        height,
        width,
        data,
        upsample_factor: r.upsample_factor,
        stride: r.stride * r.height as f64 / height as f64,
    }
}

/// Bicubic upsampling with corner alignment: `(n−1)·factor + 1` samples per
/// axis, so sample `k·factor` coincides with source cell `k`.
pub fn upsample(r: &ResponseMap, factor: usize) -> ResponseMap {
    let factor = factor.max(1);
    if factor == 1 {
        return r.clone();
    }
    let (h, w) = ((r.height - 1) * factor + 1, (r.width - 1) * factor + 1);
    let f = factor as f64;
    let mut data = Vec::with_capacity(h * w);
    for i in 0..h {
        for j in 0..w {
            data.push(bicubic_sample(r, i as f64 / f, j as f64 / f));
        }
    }
    ResponseMap {
        height: h,
        width: w,
        data,
        upsample_factor: r.upsample_factor * factor,
        stride: r.stride,
    }
}

/// Weighted sum of level responses, resampled onto the first map's grid.
pub fn fuse(levels: &[ResponseMap], weights: &[f64]) -> Result<ResponseMap> {
    let first = levels.first().ok_or(Error::Empty("fuse: no response maps"))?;
    if levels.len() != weights.len() {
        return Err(Error::Shape(format!(
            "{} maps, {} weights",
            levels.len(),
            weights.len()
        )));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 || weights.iter().any(|w| *w < 0.0) {
        return Err(Error::Config(format!("fusion weights {weights:?} must be ≥ 0 and sum to 1")));
    }
    let mut data = vec![0.0; first.data.len()];
    for (m, &wt) in levels.iter().zip(weights) {
        let m = resample(m, first.height, first.width);
        for (d, v) in data.iter_mut().zip(&m.data) {
            *d += wt * v;
        }
    }
    Ok(ResponseMap { data, ..*first })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub cell: (usize, usize),
    pub score: f64,
}

/// Maximize `penalty · R_k(row, col)` over candidates and cells. Ties go to
/// the smaller |angle|, then the scale nearer 1, then row-major order.
pub fn select_peak(cands: &[(CandidateSpec, ResponseMap)]) -> Result<Peak> {
    let (_, first) = cands.first().ok_or(Error::Empty("select_peak: no candidates"))?;
    if cands
        .iter()
        .any(|(_, m)| m.height != first.height || m.width != first.width)
    {
        return Err(Error::Shape("candidate maps differ in size".into()));
    }
    let rank = |k: usize| {
        let c = &cands[k].0;
        (c.angle.abs(), c.scale.ln().abs())
    };
    let mut best: Option<Peak> = None;
    for (k, (spec, map)) in cands.iter().enumerate() {
        for (i, &v) in map.data.iter().enumerate() {
            let score = spec.penalty * v;
            let cell = (i / map.width, i % map.width);
            let better = match &best {
                None => true,
                Some(b) => match score.partial_cmp(&b.score).unwrap_or(Ordering::Less) {
                    Ordering::Greater => true,
                    Ordering::Less => false,
                    Ordering::Equal => {
                        let (ra, rb) = (rank(k), rank(b.index));
                        match ra.partial_cmp(&rb).unwrap_or(Ordering::Equal) {
                            Ordering::Less => true,
                            Ordering::Greater => false,
                            Ordering::Equal => cell < b.cell,
                        }
                    }
                },
            };
            if better {
                best = Some(Peak {
                    index: k,
                    cell,
                    score,
                });
            }
        }
    }
    best.ok_or(Error::Empty("select_peak: empty maps"))
}

/// Refine a coarse peak by bicubic upsampling and return its offset from
/// the map center in patch pixels, `(dx, dy)`.
pub fn peak_to_displacement(cell: (usize, usize), map: &ResponseMap, upsample_by: usize) -> (f64, f64) {
    let f = upsample_by.max(1);
    let (r, c) = (cell.0.min(map.height - 1), cell.1.min(map.width - 1));
    // only the ±1-cell neighbourhood of the upsampled map is searched, so
    // sample it directly instead of upsampling everything
    let r0 = r.saturating_sub(1) * f;
    let r1 = ((r + 1).min(map.height - 1)) * f;
    let c0 = c.saturating_sub(1) * f;
    let c1 = ((c + 1).min(map.width - 1)) * f;
    let at = |i: usize, j: usize| bicubic_sample(map, i as f64 / f as f64, j as f64 / f as f64);
    let (mut br, mut bc) = (r * f, c * f);
    let mut best = at(br, bc);
    for i in r0..=r1 {
        for j in c0..=c1 {
            let v = at(i, j);
            if v > best {
                best = v;
                br = i;
                bc = j;
            }
        }
    }
    let cy = (map.height as f64 - 1.0) / 2.0;
    let cx = (map.width as f64 - 1.0) / 2.0;
    let dy = (br as f64 / f as f64 - cy) * map.stride;
    let dx = (bc as f64 / f as f64 - cx) * map.stride;
    (dx, dy)
}

/// Map a displacement measured in candidate-patch pixels back to frame
/// pixels: undo the crop scaling, then rotate by the patch angle.
pub fn patch_to_frame(d: (f64, f64), crop_ratio: f64, theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    let (x, y) = (d.0 * crop_ratio, d.1 * crop_ratio);
    (c * x - s * y, s * x + c * y)
}
