//! Ground-truth files, per-frame trace CSV and the JSON run summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{accuracy, eao, robustness, robustness_per_frames, summarize};
use super::{FrameKind, FrameRef, Protocol, RunTrace, SequenceRecord};
use crate::error::{Error, Result};
use crate::geometry::{min_area_rect, AxisBox, OrientedBox};
use crate::image::is_image_file;

/// Read OTB (`x,y,w,h`, top-left) or VOT (8-number polygon) ground truth;
/// commas, tabs and spaces all separate fields.
pub fn read_groundtruth(path: impl AsRef<Path>) -> Result<Vec<OrientedBox>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut boxes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |m: String| Error::parse(path, i + 1, m);
        let vals: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|_| err(format!("bad number {s:?}"))))
            .collect::<Result<_>>()?;
        let b = match vals.len() {
            4 => AxisBox::from_top_left(vals[0], vals[1], vals[2], vals[3])
                .map(OrientedBox::from)
                .map_err(|e| err(e.to_string()))?,
            8 => {
                let pts: Vec<(f64, f64)> = vals.chunks(2).map(|p| (p[0], p[1])).collect();
                min_area_rect(&pts).ok_or_else(|| err("degenerate polygon".into()))?
            }
            n => return Err(err(format!("expected 4 or 8 numbers, found {n}"))),
        };
        boxes.push(b);
    }
    Ok(boxes)
}

/// Write one 8-number corner polygon per line (VOT layout).
pub fn write_groundtruth_polygons(path: impl AsRef<Path>, boxes: &[OrientedBox]) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::new();
    for b in boxes {
        let c = b.corners();
        let _ = writeln!(
            s,
            "{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            c[0].0, c[0].1, c[1].0, c[1].1, c[2].0, c[2].1, c[3].0, c[3].1
        );
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image_file(p))
        .collect();
    files.sort();
    Ok(files)
}

/// Load an image-sequence directory: frames in `dir` (or `dir/img`) sorted
/// by name, ground truth from `groundtruth.txt` or `groundtruth_rect.txt`.
pub fn load_sequence_dir(dir: impl AsRef<Path>) -> Result<SequenceRecord> {
    let dir = dir.as_ref();
    let gt_path = ["groundtruth.txt", "groundtruth_rect.txt"]
        .iter()
        .map(|f| dir.join(f))
        .find(|p| p.is_file())
        .ok_or_else(|| Error::Format(format!("{}: no ground-truth file", dir.display())))?;
    load_sequence(dir, gt_path)
}

/// Load frames from `dir` (or `dir/img`) with ground truth from `gt_path`.
pub fn load_sequence(dir: impl AsRef<Path>, gt_path: impl AsRef<Path>) -> Result<SequenceRecord> {
    let dir = dir.as_ref();
    let mut frames = frame_files(dir)?;
    if frames.is_empty() && dir.join("img").is_dir() {
        frames = frame_files(&dir.join("img"))?;
    }
    if frames.is_empty() {
        return Err(Error::Format(format!("{}: no image frames", dir.display())));
    }
    let gt = read_groundtruth(gt_path)?;
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".into());
    SequenceRecord::new(name, frames.into_iter().map(FrameRef::Path).collect(), gt)
}

const TRACE_HEADER: &str =
    "frame,kind,counted,x,y,w,h,theta,gt_x,gt_y,gt_w,gt_h,gt_theta,iou,center_error";

/// Render a trace as CSV, one row per frame.
pub fn trace_csv(trace: &RunTrace) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{TRACE_HEADER}");
    let errors = trace.center_errors();
    for i in 0..trace.len() {
        let g = &trace.groundtruth[i];
        let pred = match trace.predictions[i] {
            Some(p) => format!("{:.6},{:.6},{:.6},{:.6},{:.6}", p.x, p.y, p.w, p.h, p.theta),
            None => ",,,,".into(),
        };
        let err = errors[i].map(|e| format!("{e:.6}")).unwrap_or_default();
        let _ = writeln!(
            s,
            "{i},{},{},{pred},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{err}",
            trace.kinds[i].as_str(),
            u8::from(trace.counted[i]),
            g.x,
            g.y,
            g.w,
            g.h,
            g.theta,
            trace.overlaps[i],
        );
    }
    s
}

pub fn write_trace_csv(path: impl AsRef<Path>, trace: &RunTrace) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, trace_csv(trace)).map_err(|e| Error::io(path, e))
}

/// Parse a trace CSV; overlaps are recomputed from the stored boxes.
pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<RunTrace> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut trace = RunTrace::with_capacity(&name, Protocol::Otb, 0);
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line.trim() != TRACE_HEADER {
                return Err(Error::parse(path, 1, "unexpected trace header"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let err = |m: String| Error::parse(path, i + 1, m);
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 15 {
            return Err(err(format!("expected 15 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number {s:?}")));
        let kind = FrameKind::parse(f[1]).ok_or_else(|| err(format!("unknown kind {:?}", f[1])))?;
        let counted = f[2] == "1";
        let pred = if f[3].is_empty() {
            None
        } else {
            Some(
                OrientedBox::new(num(f[3])?, num(f[4])?, num(f[5])?, num(f[6])?, num(f[7])?)
                    .map_err(|e| err(e.to_string()))?,
            )
        };
        let gt = OrientedBox::new(num(f[8])?, num(f[9])?, num(f[10])?, num(f[11])?, num(f[12])?)
            .map_err(|e| err(e.to_string()))?;
        let frame = trace.len();
        match kind {
            FrameKind::Init => trace.inits.push(frame),
            FrameKind::Failure => trace.failures.push(frame),
            FrameKind::Skipped => trace.protocol = Protocol::Vot,
            FrameKind::Tracked => {}
        }
        if !trace.failures.is_empty() || trace.inits.len() > 1 {
            trace.protocol = Protocol::Vot;
        }
        trace.push(pred, gt, kind, counted);
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSummary {
    pub name: String,
    pub frames: usize,
    pub auc: f64,
    pub precision_20: f64,
    pub accuracy: f64,
    pub failures: usize,
}

/// Metrics over a set of traces. Robustness is reported both as raw
/// failures per sequence and as failures per 100 frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub protocol: Protocol,
    pub sequences: Vec<SequenceSummary>,
    pub auc: f64,
    pub precision_20: f64,
    pub accuracy: f64,
    pub robustness_failures_per_sequence: f64,
    pub robustness_failures_per_100_frames: f64,
    pub eao: Option<f64>,
    pub eao_interval: Option<[usize; 2]>,
}

impl Summary {
    pub fn from_traces(protocol: Protocol, traces: &[RunTrace], eao_interval: [usize; 2]) -> Self {
        let sequences: Vec<SequenceSummary> = traces
            .iter()
            .map(|t| {
                let (auc, precision_20) = summarize(t);
                SequenceSummary {
                    name: t.name.clone(),
                    frames: t.len(),
                    auc,
                    precision_20,
                    accuracy: accuracy(t),
                    failures: t.failures.len(),
                }
            })
            .collect();
        let mean = |f: fn(&SequenceSummary) -> f64| {
            if sequences.is_empty() {
                0.0
            } else {
                sequences.iter().map(f).sum::<f64>() / sequences.len() as f64
            }
        };
        let vot = protocol == Protocol::Vot;
        Summary {
            protocol,
            auc: mean(|s| s.auc),
            precision_20: mean(|s| s.precision_20),
            accuracy: mean(|s| s.accuracy),
            robustness_failures_per_sequence: robustness(traces),
            robustness_failures_per_100_frames: robustness_per_frames(traces, 100.0),
            eao: vot.then(|| eao(traces, eao_interval[0], eao_interval[1])),
            eao_interval: vot.then_some(eao_interval),
            sequences,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}
