//! Synthetic sequences with exact ground truth: a textured rectangle moved
//! by a per-frame motion script over a flat, textured or cluttered
//! background.

use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{write_groundtruth_polygons, FrameRef, SequenceRecord};
use crate::geometry::{normalize_angle, OrientedBox};
use crate::image::Image;

/// Largest per-frame scale change, `|ds − 1|`.
pub const MAX_SCALE_STEP: f64 = 0.05;
/// Largest per-frame rotation, `|dθ|`.
pub const MAX_ANGLE_STEP: f64 = PI / 8.0;

/// Subsamples per axis when anti-aliasing target and distractor edges.
const SUPERSAMPLE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Background {
    #[default]
    Flat,
    Textured,
    /// Textured background plus a static, differently textured rectangle.
    Distractor,
}

impl FromStr for Background {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(Self::Flat),
            "textured" => Ok(Self::Textured),
            "distractor" => Ok(Self::Distractor),
            _ => Err(Error::Script(format!("unknown background {s:?}"))),
        }
    }
}

impl Background {
    pub fn name(self) -> &'static str {
        match self {
            Self::Flat => "flat",
            Self::Textured => "textured",
            Self::Distractor => "distractor",
        }
    }
}

/// Motion from one frame to the next, in canvas pixels and radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Motion {
    pub dx: f64,
    pub dy: f64,
    pub ds: f64,
    pub dtheta: f64,
}

impl Motion {
    pub const ZERO: Motion = Motion {
        dx: 0.0,
        dy: 0.0,
        ds: 1.0,
        dtheta: 0.0,
    };

    fn check(&self, frame: usize) -> Result<()> {
        let finite = [self.dx, self.dy, self.ds, self.dtheta].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Script(format!("frame {frame}: non-finite motion")));
        }
        if (self.ds - 1.0).abs() > MAX_SCALE_STEP + 1e-12 {
            return Err(Error::Script(format!("frame {frame}: scale step {} out of range", self.ds)));
        }
        if self.dtheta.abs() > MAX_ANGLE_STEP + 1e-12 {
            return Err(Error::Script(format!("frame {frame}: rotation step {} out of range", self.dtheta)));
        }
        Ok(())
    }
}

impl Default for Motion {
    fn default() -> Self {
        Self::ZERO
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionScript {
    pub init: OrientedBox,
    /// `steps[t − 1]` moves the target from frame `t − 1` to frame `t`;
    /// frames past the end use `default_step`.
    pub steps: Vec<Motion>,
    pub default_step: Motion,
    pub background: Background,
    pub seed: u64,
    /// Standard deviation of additive Gaussian pixel noise.
    pub noise_sigma: f64,
    /// Distractor center distance from the initial target center, in
    /// initial target widths.
    pub distractor_separation: f64,
    /// Direction of the distractor from the target, radians.
    pub distractor_direction: f64,
    /// 1 (gray) or 3 (RGB).
    pub channels: usize,
    /// Texture amplitude of the target around its mean brightness.
    pub target_contrast: f64,
    /// Texture amplitude of the distractor.
    pub distractor_contrast: f64,
}

impl MotionScript {
    pub fn new(init: OrientedBox) -> Self {
        Self {
            init,
            steps: Vec::new(),
            default_step: Motion::ZERO,
            background: Background::Flat,
            seed: 0,
            noise_sigma: 0.0,
            distractor_separation: 2.0,
            distractor_direction: 0.0,
            channels: 1,
            target_contrast: 0.3,
            distractor_contrast: 0.3,
        }
    }

    pub fn step(&self, t: usize) -> Motion {
        self.steps.get(t).copied().unwrap_or(self.default_step)
    }

    /// Ground-truth pose on every frame.
    pub fn poses(&self, n_frames: usize) -> Result<Vec<OrientedBox>> {
        let mut pose = self.init;
        let mut out = Vec::with_capacity(n_frames);
        for t in 0..n_frames {
            if t > 0 {
                let m = self.step(t - 1);
                m.check(t)?;
                pose = OrientedBox {
                    x: pose.x + m.dx,
                    y: pose.y + m.dy,
                    w: pose.w * m.ds,
                    h: pose.h * m.ds,
                    theta: normalize_angle(pose.theta + m.dtheta),
                };
            }
            out.push(pose);
        }
        Ok(out)
    }

    /// Static distractor box, if the background has one.
    pub fn distractor(&self) -> Option<OrientedBox> {
        (self.background == Background::Distractor).then(|| {
            let d = self.distractor_separation * self.init.w;
            OrientedBox {
                x: self.init.x + d * self.distractor_direction.cos(),
                y: self.init.y + d * self.distractor_direction.sin(),
                ..self.init
            }
        })
    }

    fn validate(&self, n_frames: usize, canvas: (usize, usize)) -> Result<Vec<OrientedBox>> {
        if n_frames == 0 {
            return Err(Error::Script("at least one frame is required".into()));
        }
        if canvas.0 < 16 || canvas.1 < 16 {
            return Err(Error::Script(format!("canvas {}x{} is too small", canvas.0, canvas.1)));
        }
        if !(self.init.w > 1.0 && self.init.h > 1.0) {
            return Err(Error::Script("initial target must be larger than one pixel".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Script("noise_sigma must be a non-negative number".into()));
        }
        if !matches!(self.channels, 1 | 3) {
            return Err(Error::Script(format!("channels must be 1 or 3, got {}", self.channels)));
        }
        let contrast = [self.target_contrast, self.distractor_contrast];
        if !contrast.iter().all(|c| (0.0..=0.5).contains(c)) {
            return Err(Error::Script("contrasts must lie in [0, 0.5]".into()));
        }
        if !(self.distractor_separation.is_finite() && self.distractor_direction.is_finite()) {
            return Err(Error::Script("distractor placement must be finite".into()));
        }
        let poses = self.poses(n_frames)?;
        let inside = |b: &OrientedBox| {
            b.corners()
                .iter()
                .all(|&(x, y)| x >= 0.0 && y >= 0.0 && x <= canvas.0 as f64 && y <= canvas.1 as f64)
        };
        if let Some(t) = poses.iter().position(|b| !inside(b)) {
            return Err(Error::Script(format!("target leaves the canvas on frame {t}")));
        }
        if let Some(d) = self.distractor() {
            if !inside(&d) {
                return Err(Error::Script("distractor does not fit on the canvas".into()));
            }
        }
        Ok(poses)
    }

    /// Parse the flat key-value script format followed by an optional
    /// `[frames]` CSV block (`frame,dx,dy,ds,dtheta`). Unlisted frames move
    /// by the `motion` default. Keys `frames` and `canvas` are returned
    /// separately since they describe the rendering rather than the motion.
    pub fn parse(text: &str) -> Result<ScriptFile> {
        let mut init = None;
        let mut script = MotionScript::new(OrientedBox {
            x: 0.0,
            y: 0.0,
            w: 2.0,
            h: 2.0,
            theta: 0.0,
        });
        let mut frames = None;
        let mut canvas = None;
        let mut rows: Vec<(usize, Motion)> = Vec::new();
        let mut in_frames = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| Error::Script(format!("line {}: {m}", i + 1));
            if line == "[frames]" {
                in_frames = true;
                continue;
            }
            if in_frames {
                if line.starts_with("frame") {
                    continue;
                }
                let v = numbers(line).map_err(err)?;
                if v.len() != 5 || v[0] < 1.0 || v[0].fract() != 0.0 {
                    return Err(err("expected frame,dx,dy,ds,dtheta with frame ≥ 1".into()));
                }
                rows.push((v[0] as usize, Motion { dx: v[1], dy: v[2], ds: v[3], dtheta: v[4] }));
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected key = value, found {line:?}")))?;
            let num = |v: &str| v.parse::<f64>().map_err(|_| err(format!("bad number {v:?}")));
            match key {
                "init" => {
                    let v = numbers(value).map_err(err)?;
                    let theta = match v.len() {
                        4 => 0.0,
                        5 => v[4],
                        _ => return Err(err("init takes x,y,w,h[,theta]".into())),
                    };
                    init = Some(OrientedBox::new(v[0], v[1], v[2], v[3], theta).map_err(|e| err(e.to_string()))?);
                }
                "motion" => {
                    let v = numbers(value).map_err(err)?;
                    if v.len() != 4 {
                        return Err(err("motion takes dx,dy,ds,dtheta".into()));
                    }
                    script.default_step = Motion { dx: v[0], dy: v[1], ds: v[2], dtheta: v[3] };
                }
                "background" => script.background = value.parse().map_err(|e: Error| err(e.to_string()))?,
                "seed" => script.seed = value.parse().map_err(|_| err(format!("bad seed {value:?}")))?,
                "noise_sigma" => script.noise_sigma = num(value)?,
                "distractor_separation" => script.distractor_separation = num(value)?,
                "distractor_direction" => script.distractor_direction = num(value)?,
                "target_contrast" => script.target_contrast = num(value)?,
                "distractor_contrast" => script.distractor_contrast = num(value)?,
                "channels" => script.channels = value.parse().map_err(|_| err(format!("bad channel count {value:?}")))?,
                "frames" => frames = Some(value.parse().map_err(|_| err(format!("bad frame count {value:?}")))?),
                "canvas" => {
                    let (w, h) = value
                        .split_once('x')
                        .and_then(|(w, h)| Some((w.trim().parse().ok()?, h.trim().parse().ok()?)))
                        .ok_or_else(|| err(format!("canvas must be WxH, got {value:?}")))?;
                    canvas = Some((w, h));
                }
                _ => return Err(err(format!("unknown key {key:?}"))),
            }
        }
        script.init = init.ok_or_else(|| Error::Script("missing init".into()))?;
        if let Some(last) = rows.iter().map(|r| r.0).max() {
            script.steps = vec![script.default_step; last];
            for (f, m) in rows {
                script.steps[f - 1] = m;
            }
        }
        Ok(ScriptFile {
            script,
            frames: frames.unwrap_or(60),
            canvas: canvas.unwrap_or((320, 240)),
        })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<ScriptFile> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// A parsed script plus its rendering parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptFile {
    pub script: MotionScript,
    pub frames: usize,
    pub canvas: (usize, usize),
}

fn numbers(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad number {:?}", v.trim())))
        .collect()
}

/// Smooth random texture: a sum of plane waves with random direction,
/// wavelength and phase, mapped into `[mean − amp, mean + amp]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Texture {
    waves: Vec<[f64; 4]>,
    mean: f64,
    amplitude: f64,
    norm: f64,
}

impl Texture {
    pub fn random(rng: &mut impl Rng, waves: usize, wavelength: (f64, f64), mean: f64, amplitude: f64) -> Self {
        let waves = (0..waves)
            .map(|_| {
                let dir = rng.gen_range(0.0..PI);
                let lambda = rng.gen_range(wavelength.0..wavelength.1);
                let k = TAU / lambda;
                [k * dir.cos(), k * dir.sin(), rng.gen_range(0.0..TAU), rng.gen_range(0.5..1.0)]
            })
            .collect::<Vec<[f64; 4]>>();
        let norm = waves.iter().map(|w| w[3]).sum();
        Self {
            waves,
            mean,
            amplitude,
            norm,
        }
    }

    pub fn sample(&self, x: f64, y: f64) -> f64 {
        if self.norm == 0.0 {
            return self.mean;
        }
        let s: f64 = self.waves.iter().map(|w| w[3] * (w[0] * x + w[1] * y + w[2]).cos()).sum();
        // sums of many waves rarely approach the bound, so stretch a little
        self.mean + self.amplitude * (2.0 * s / self.norm).clamp(-1.0, 1.0)
    }
}

/// Per-channel tint so RGB output stays a fixed function of luminance.
const TINT: [f64; 3] = [1.0, 0.85, 0.7];

struct Scene {
    canvas: (usize, usize),
    channels: usize,
    /// Background and distractor luminance; neither moves.
    still: Vec<f64>,
    target: Texture,
    init_w: f64,
}

impl Scene {
    fn new(script: &MotionScript, canvas: (usize, usize)) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
        let target = Texture::random(&mut rng, 12, (6.0, 24.0), 0.6, script.target_contrast);
        let background = Texture::random(&mut rng, 8, (16.0, 64.0), 0.35, 0.15);
        let distractor = Texture::random(&mut rng, 12, (6.0, 24.0), 0.6, script.distractor_contrast);
        let (w, h) = canvas;
        let textured = script.background != Background::Flat;
        let bg = |x: f64, y: f64| if textured { background.sample(x, y) } else { 0.35 };
        let mut still = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                still[y * w + x] = bg(x as f64 + 0.5, y as f64 + 0.5);
            }
        }
        if let Some(d) = script.distractor() {
            supersample(&mut still, canvas, &d, |px, py| {
                on_box(&d, &distractor, 1.0, px, py).unwrap_or_else(|| bg(px, py))
            });
        }
        Self {
            canvas,
            channels: script.channels,
            still,
            target,
            init_w: script.init.w,
        }
    }

    fn render(&self, pose: &OrientedBox, frame: usize, noise_sigma: f64, seed: u64) -> Image {
        let (w, h) = self.canvas;
        let mut lum = self.still.clone();
        let scale = pose.w / self.init_w;
        supersample(&mut lum, self.canvas, pose, |px, py| {
            on_box(pose, &self.target, scale, px, py)
                .unwrap_or_else(|| self.still[(py as usize).min(h - 1) * w + (px as usize).min(w - 1)])
        });
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (frame as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let noise = Normal::new(0.0, noise_sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
        let mut data = Vec::with_capacity(w * h * self.channels);
        for &l in &lum {
            for c in 0..self.channels {
                let tint = if self.channels == 3 { TINT[c] } else { 1.0 };
                let mut v = l * tint;
                if noise_sigma > 0.0 {
                    v += noise.sample(&mut rng);
                }
                // quantize so in-memory frames equal their 8-bit files
                data.push((v.clamp(0.0, 1.0) * 255.0).round() / 255.0);
            }
        }
        Image::from_vec(w, h, self.channels, data).expect("consistent frame size")
    }
}

/// Texture value if `(x, y)` falls on `b`, sampled in the box frame divided
/// by `scale` so the pattern moves, turns and scales with the box.
fn on_box(b: &OrientedBox, tex: &Texture, scale: f64, x: f64, y: f64) -> Option<f64> {
    let (s, c) = b.theta.sin_cos();
    let (px, py) = (x - b.x, y - b.y);
    let u = c * px + s * py;
    let v = -s * px + c * py;
    (u.abs() <= b.w / 2.0 && v.abs() <= b.h / 2.0).then(|| tex.sample(u / scale, v / scale))
}

/// Overwrite the pixels around `b` with the mean of a subsample grid of `f`.
fn supersample(lum: &mut [f64], canvas: (usize, usize), b: &OrientedBox, f: impl Fn(f64, f64) -> f64) {
    let c = b.corners();
    let lo = |g: fn(&(f64, f64)) -> f64| c.iter().map(g).fold(f64::INFINITY, f64::min);
    let hi = |g: fn(&(f64, f64)) -> f64| c.iter().map(g).fold(f64::NEG_INFINITY, f64::max);
    let x0 = (lo(|p| p.0).floor() - 1.0).max(0.0) as usize;
    let y0 = (lo(|p| p.1).floor() - 1.0).max(0.0) as usize;
    let x1 = ((hi(|p| p.0).ceil() + 1.0).max(0.0) as usize).min(canvas.0);
    let y1 = ((hi(|p| p.1).ceil() + 1.0).max(0.0) as usize).min(canvas.1);
    let n = SUPERSAMPLE as f64;
    for y in y0..y1 {
        for x in x0..x1 {
            let mut acc = 0.0;
            for sy in 0..SUPERSAMPLE {
                for sx in 0..SUPERSAMPLE {
                    acc += f(x as f64 + (sx as f64 + 0.5) / n, y as f64 + (sy as f64 + 0.5) / n);
                }
            }
            lum[y * canvas.0 + x] = acc / (n * n);
        }
    }
}

/// Render `n_frames` frames of `script` on a `canvas = (width, height)`
/// canvas. Ground truth is the scripted pose, exact by construction.
pub fn synth_sequence(script: &MotionScript, n_frames: usize, canvas: (usize, usize)) -> Result<SequenceRecord> {
    let poses = script.validate(n_frames, canvas)?;
    let scene = Scene::new(script, canvas);
    let frames = poses
        .iter()
        .enumerate()
        .map(|(t, p)| FrameRef::Memory(Arc::new(scene.render(p, t, script.noise_sigma, script.seed))))
        .collect();
    SequenceRecord::new(format!("synth-{}", script.seed), frames, poses)
}

/// Write frames as `%08d.png` (1-based) and ground truth as corner
/// polygons in `groundtruth.txt`.
pub fn write_sequence_dir(seq: &SequenceRecord, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, f) in seq.frames.iter().enumerate() {
        f.load()?.save_png(dir.join(format!("{:08}.png", i + 1)))?;
    }
    write_groundtruth_polygons(dir.join("groundtruth.txt"), &seq.groundtruth)
}
