//! On/off grid over the angle, mask and update mechanisms.
//!
//! A grid file has grid keys first and a `[base]` section of tracker keys:
//!
//! ```text
//! axes = angle, mask, update
//! eao_interval = 10, 40
//! skip = 5
//! burn_in = 10
//! aspect_split = false
//! [base]
//! lambda_u = 0.006
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{
    accuracy, eao, otb_run, robustness, robustness_per_frames, summarize, vot_run, FrameKind,
    Protocol, RunTrace, SequenceRecord, Session, VotProtocol,
};
use crate::tracker::{Tracker, TrackerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Angle,
    Mask,
    Update,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Angle => "angle",
            Axis::Mask => "mask",
            Axis::Update => "update",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "angle" => Axis::Angle,
            "mask" => Axis::Mask,
            "update" => Axis::Update,
            _ => return None,
        })
    }

    fn set(self, cfg: &mut TrackerConfig, on: bool) {
        match self {
            Axis::Angle => cfg.angle_enabled = on,
            Axis::Mask => cfg.mask_enabled = on,
            Axis::Update => cfg.update_enabled = on,
        }
    }
}

/// One labelled configuration of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationConfig {
    pub label: String,
    pub config: TrackerConfig,
}

impl AblationConfig {
    pub fn new(label: impl Into<String>, config: TrackerConfig) -> Self {
        Self {
            label: label.into(),
            config,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationGrid {
    pub base: TrackerConfig,
    pub axes: Vec<Axis>,
    pub protocol: VotProtocol,
    pub eao_interval: [usize; 2],
    /// Also report the elongated and mediocre subsets separately.
    pub aspect_split: bool,
}

impl Default for AblationGrid {
    fn default() -> Self {
        Self {
            base: TrackerConfig::default(),
            axes: vec![Axis::Angle, Axis::Mask, Axis::Update],
            protocol: VotProtocol::default(),
            eao_interval: [10, 40],
            aspect_split: false,
        }
    }
}

impl AblationGrid {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent()).map_err(|e| match e {
            Error::Parse { line, msg, .. } => Error::parse(path, line, msg),
            e => e,
        })
    }

    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut grid = AblationGrid::default();
        let (head, body) = match text.find("[base]") {
            Some(at) => (&text[..at], &text[at + "[base]".len()..]),
            None => (text, ""),
        };
        for (i, raw) in head.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| Error::parse("<grid>", i + 1, m);
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            let u = |v: &str| v.trim().parse::<usize>().map_err(|_| err(format!("{key}: bad count {v:?}")));
            match key {
                "axes" => {
                    grid.axes = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| Axis::parse(s).ok_or_else(|| err(format!("unknown axis {s:?}"))))
                        .collect::<Result<_>>()?;
                }
                "eao_interval" => {
                    let (a, b) = value
                        .split_once(',')
                        .ok_or_else(|| err("eao_interval: expected lo, hi".into()))?;
                    grid.eao_interval = [u(a)?, u(b)?];
                }
                "skip" => grid.protocol.skip = u(value)?,
                "burn_in" => grid.protocol.burn_in = u(value)?,
                "aspect_split" => {
                    grid.aspect_split = match value {
                        "true" | "1" | "on" | "yes" => true,
                        "false" | "0" | "off" | "no" => false,
                        v => return Err(err(format!("aspect_split: bad flag {v:?}"))),
                    }
                }
                other => return Err(err(format!("unknown grid key {other:?}"))),
            }
        }
        let offset = head.lines().count();
        grid.base = TrackerConfig::parse(body, base_dir).map_err(|e| match e {
            Error::Parse { path, line, msg } => Error::Parse {
                path,
                line: line + offset,
                msg,
            },
            e => e,
        })?;
        if grid.eao_interval[0] > grid.eao_interval[1] {
            return Err(Error::Config("eao_interval lower bound exceeds upper bound".into()));
        }
        Ok(grid)
    }

    /// Every on/off combination of the axes, all-off first, the first axis
    /// varying slowest. Axes not listed keep their base values.
    pub fn configs(&self) -> Vec<AblationConfig> {
        let k = self.axes.len();
        (0..1usize << k)
            .map(|bits| {
                let mut cfg = self.base.clone();
                let mut parts = Vec::with_capacity(k);
                for (j, axis) in self.axes.iter().enumerate() {
                    let on = bits >> (k - 1 - j) & 1 == 1;
                    axis.set(&mut cfg, on);
                    parts.push(format!("{}{}", if on { '+' } else { '-' }, axis.name()));
                }
                let label = if parts.is_empty() { "base".to_string() } else { parts.join("") };
                AblationConfig::new(label, cfg)
            })
            .collect()
    }

    pub fn run(&self, seqs: &[SequenceRecord]) -> Result<Vec<AblationRow>> {
        let all: Vec<usize> = (0..seqs.len()).collect();
        let mut sets = vec![("all", all)];
        if self.aspect_split {
            let (elongated, mediocre): (Vec<usize>, Vec<usize>) =
                (0..seqs.len()).partition(|&i| seqs[i].aspect_ratio() > self.base.aspect_threshold);
            sets.extend([("elongated", elongated), ("mediocre", mediocre)].into_iter().filter(|(_, v)| !v.is_empty()));
        }
        let mut rows = Vec::new();
        for cfg in self.configs() {
            let runs = run_config(&cfg.config, seqs, &self.protocol)?;
            for (subset, members) in &sets {
                let picked: Vec<&(RunTrace, RunTrace)> = members.iter().map(|&i| &runs[i]).collect();
                rows.push(aggregate(&cfg, subset, &picked, self.eao_interval));
            }
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub label: String,
    pub subset: String,
    pub angle: bool,
    pub mask: bool,
    pub update: bool,
    pub sequences: usize,
    pub accuracy: f64,
    /// Failures per sequence.
    pub robustness: f64,
    pub failures_per_100_frames: f64,
    pub eao: f64,
    pub auc: f64,
    pub precision_20: f64,
    /// Mean one-pass IoU over tracked frames.
    pub mean_iou: f64,
}

/// Evaluate each configuration on all sequences, reset-based for A/R/EAO
/// and one-pass for AUC and precision.
pub fn run_ablation(
    configs: &[AblationConfig],
    seqs: &[SequenceRecord],
    protocol: &VotProtocol,
    eao_interval: [usize; 2],
) -> Result<Vec<AblationRow>> {
    configs
        .iter()
        .map(|c| {
            let runs = run_config(&c.config, seqs, protocol)?;
            Ok(aggregate(c, "all", &runs.iter().collect::<Vec<_>>(), eao_interval))
        })
        .collect()
}

/// Reset-based and one-pass traces per sequence. A reset run without
/// failures already is the one-pass run, the tracker being deterministic.
fn run_config(cfg: &TrackerConfig, seqs: &[SequenceRecord], protocol: &VotProtocol) -> Result<Vec<(RunTrace, RunTrace)>> {
    let tracker = Tracker::new(cfg.clone())?;
    seqs.par_iter()
        .map(|seq| {
            let vot = vot_run(&mut Session::new(&tracker), seq, protocol)?;
            let otb = if vot.failures.is_empty() {
                as_one_pass(&vot)
            } else {
                otb_run(&mut Session::new(&tracker), seq)?
            };
            Ok((vot, otb))
        })
        .collect()
}

fn as_one_pass(vot: &RunTrace) -> RunTrace {
    let mut t = vot.clone();
    t.protocol = Protocol::Otb;
    for (i, (kind, counted)) in t.kinds.iter_mut().zip(t.counted.iter_mut()).enumerate() {
        if i > 0 {
            *kind = FrameKind::Tracked;
            *counted = true;
        }
    }
    t
}

fn aggregate(cfg: &AblationConfig, subset: &str, runs: &[&(RunTrace, RunTrace)], eao_interval: [usize; 2]) -> AblationRow {
    let vot: Vec<RunTrace> = runs.iter().map(|r| r.0.clone()).collect();
    let otb: Vec<&RunTrace> = runs.iter().map(|r| &r.1).collect();
    let mean = |v: Vec<f64>| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let otb_summaries: Vec<(f64, f64)> = otb.iter().map(|t| summarize(t)).collect();
    AblationRow {
        label: cfg.label.clone(),
        subset: subset.to_string(),
        angle: cfg.config.angle_enabled,
        mask: cfg.config.mask_enabled,
        update: cfg.config.update_enabled,
        sequences: runs.len(),
        accuracy: mean(vot.iter().map(accuracy).collect()),
        robustness: robustness(&vot),
        failures_per_100_frames: robustness_per_frames(&vot, 100.0),
        eao: eao(&vot, eao_interval[0], eao_interval[1]),
        auc: mean(otb_summaries.iter().map(|s| s.0).collect()),
        precision_20: mean(otb_summaries.iter().map(|s| s.1).collect()),
        mean_iou: mean(otb.iter().map(|t| tracked_iou(t)).collect()),
    }
}

fn tracked_iou(trace: &RunTrace) -> f64 {
    let v: Vec<f64> = trace
        .overlaps
        .iter()
        .zip(&trace.counted)
        .filter(|(_, &c)| c)
        .map(|(o, _)| *o)
        .collect();
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub const ABLATION_HEADER: &str =
    "label,subset,angle,mask,update,sequences,accuracy,robustness,failures_per_100_frames,eao,auc,precision_20,mean_iou";

/// Fixed-precision CSV, so identical runs give identical bytes.
pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{ABLATION_HEADER}");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.label,
            r.subset,
            u8::from(r.angle),
            u8::from(r.mask),
            u8::from(r.update),
            r.sequences,
            r.accuracy,
            r.robustness,
            r.failures_per_100_frames,
            r.eao,
            r.auc,
            r.precision_20,
            r.mean_iou,
        );
    }
    s
}
