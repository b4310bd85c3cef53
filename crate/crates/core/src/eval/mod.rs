//! OTB- and VOT-style evaluation: one-pass and reset-based runs, success
//! and precision curves, accuracy, robustness and expected average overlap.

mod io;
mod metrics;

pub use io::{
    load_sequence, load_sequence_dir, read_groundtruth, read_trace_csv, trace_csv, write_groundtruth_polygons,
    write_trace_csv, Summary, SequenceSummary,
};
pub use metrics::{
    accuracy, aspect_split, auc, eao, eao_curve, otb_thresholds, precision_at, robustness,
    robustness_per_frames, success_curve, summarize,
};

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{center_distance, rotated_iou, OrientedBox};
use crate::image::Image;
use crate::tracker::{Tracker, TrackerState};

#[derive(Debug, Clone)]
pub enum FrameRef {
    Memory(Arc<Image>),
    Path(PathBuf),
}

impl FrameRef {
    pub fn load(&self) -> Result<Arc<Image>> {
        match self {
            FrameRef::Memory(img) => Ok(Arc::clone(img)),
            FrameRef::Path(p) => Image::load(p).map(Arc::new),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SequenceRecord {
    pub name: String,
    pub frames: Vec<FrameRef>,
    pub groundtruth: Vec<OrientedBox>,
}

impl SequenceRecord {
    pub fn new(name: impl Into<String>, frames: Vec<FrameRef>, groundtruth: Vec<OrientedBox>) -> Result<Self> {
        if frames.len() != groundtruth.len() {
            return Err(Error::Shape(format!(
                "{} frames but {} ground-truth boxes",
                frames.len(),
                groundtruth.len()
            )));
        }
        if let Some(b) = groundtruth.first() {
            if !(b.w > 0.0 && b.h > 0.0) {
                return Err(Error::InvalidBox("first ground-truth box is degenerate".into()));
            }
        }
        Ok(Self {
            name: name.into(),
            frames,
            groundtruth,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Aspect ratio `max(w/h, h/w)` of the first box.
    pub fn aspect_ratio(&self) -> f64 {
        self.groundtruth.first().map_or(1.0, OrientedBox::aspect_ratio)
    }
}

/// Anything that can be (re)started from a box and stepped frame by frame.
pub trait SequenceTracker {
    fn start(&mut self, frame: &Image, init: &OrientedBox, frame_index: usize) -> Result<()>;
    fn step(&mut self, frame: &Image, frame_index: usize) -> Result<OrientedBox>;
}

/// A [`Tracker`] bound to one sequence.
pub struct Session<'a> {
    tracker: &'a Tracker,
    state: Option<TrackerState>,
}

impl<'a> Session<'a> {
    pub fn new(tracker: &'a Tracker) -> Self {
        Self {
            tracker,
            state: None,
        }
    }

    pub fn state(&self) -> Option<&TrackerState> {
        self.state.as_ref()
    }
}

impl SequenceTracker for Session<'_> {
    fn start(&mut self, frame: &Image, init: &OrientedBox, frame_index: usize) -> Result<()> {
        self.state = Some(self.tracker.init_oriented(frame, init, frame_index)?);
        Ok(())
    }

    fn step(&mut self, frame: &Image, _frame_index: usize) -> Result<OrientedBox> {
        let state = self
            .state
            .as_mut()
            .ok_or_else(|| Error::Config("tracker stepped before start".into()))?;
        self.tracker.track(state, frame)
    }
}

/// Plays back a fixed list of boxes, one per frame, ignoring the images.
/// Replaying the ground truth gives the perfect reference run.
#[derive(Debug, Clone)]
pub struct Replay {
    boxes: Vec<OrientedBox>,
}

impl Replay {
    pub fn new(boxes: Vec<OrientedBox>) -> Self {
        Self { boxes }
    }
}

impl SequenceTracker for Replay {
    fn start(&mut self, _frame: &Image, _init: &OrientedBox, _frame_index: usize) -> Result<()> {
        Ok(())
    }

    fn step(&mut self, _frame: &Image, frame_index: usize) -> Result<OrientedBox> {
        self.boxes
            .get(frame_index)
            .copied()
            .ok_or_else(|| Error::Shape(format!("no replay box for frame {frame_index}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameKind {
    /// Tracker (re)initialized from ground truth on this frame.
    Init,
    Tracked,
    /// Zero overlap under the reset protocol.
    Failure,
    /// Waiting period between a failure and re-initialization.
    Skipped,
}

impl FrameKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FrameKind::Init => "init",
            FrameKind::Tracked => "tracked",
            FrameKind::Failure => "failure",
            FrameKind::Skipped => "skipped",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "init" => FrameKind::Init,
            "tracked" => FrameKind::Tracked,
            "failure" => FrameKind::Failure,
            "skipped" => FrameKind::Skipped,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Otb,
    Vot,
}

/// Per-frame outcome of one run over one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub name: String,
    pub protocol: Protocol,
    pub predictions: Vec<Option<OrientedBox>>,
    pub groundtruth: Vec<OrientedBox>,
    /// IoU per frame; 0 for skipped frames.
    pub overlaps: Vec<f64>,
    pub kinds: Vec<FrameKind>,
    /// Frames that count towards accuracy (tracked, past burn-in).
    pub counted: Vec<bool>,
    pub failures: Vec<usize>,
    pub inits: Vec<usize>,
}

impl RunTrace {
    fn with_capacity(name: &str, protocol: Protocol, n: usize) -> Self {
        Self {
            name: name.to_string(),
            protocol,
            predictions: Vec::with_capacity(n),
            groundtruth: Vec::with_capacity(n),
            overlaps: Vec::with_capacity(n),
            kinds: Vec::with_capacity(n),
            counted: Vec::with_capacity(n),
            failures: Vec::new(),
            inits: Vec::new(),
        }
    }

    fn push(&mut self, pred: Option<OrientedBox>, gt: OrientedBox, kind: FrameKind, counted: bool) {
        let overlap = pred.map_or(0.0, |p| rotated_iou(&p, &gt));
        self.predictions.push(pred);
        self.groundtruth.push(gt);
        self.overlaps.push(overlap);
        self.kinds.push(kind);
        self.counted.push(counted);
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn reinit_count(&self) -> usize {
        self.inits.len().saturating_sub(1)
    }

    /// Center error per frame with a prediction.
    pub fn center_errors(&self) -> Vec<Option<f64>> {
        self.predictions
            .iter()
            .zip(&self.groundtruth)
            .map(|(p, g)| p.map(|p| center_distance(&p, g)))
            .collect()
    }
}

/// Reset-protocol parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VotProtocol {
    /// Frames skipped after a failure before re-initializing.
    pub skip: usize,
    /// Frames after each (re)initialization excluded from accuracy.
    pub burn_in: usize,
}

impl Default for VotProtocol {
    fn default() -> Self {
        Self { skip: 5, burn_in: 10 }
    }
}

/// One-pass evaluation: initialize on frame 0 and never reset.
pub fn otb_run(tracker: &mut dyn SequenceTracker, seq: &SequenceRecord) -> Result<RunTrace> {
    let mut trace = RunTrace::with_capacity(&seq.name, Protocol::Otb, seq.len());
    let Some(first) = seq.groundtruth.first() else {
        return Ok(trace);
    };
    tracker.start(&seq.frames[0].load()?.as_ref(), first, 0)?;
    trace.inits.push(0);
    trace.push(Some(*first), *first, FrameKind::Init, false);
    for i in 1..seq.len() {
        let pred = tracker.step(&seq.frames[i].load()?.as_ref(), i)?;
        trace.push(Some(pred), seq.groundtruth[i], FrameKind::Tracked, true);
    }
    Ok(trace)
}

/// Reset-based evaluation: a zero-overlap frame is a failure, the next
/// `skip` frames are ignored and the tracker restarts from ground truth on
/// the frame after that.
pub fn vot_run(
    tracker: &mut dyn SequenceTracker,
    seq: &SequenceRecord,
    protocol: &VotProtocol,
) -> Result<RunTrace> {
    let n = seq.len();
    let mut trace = RunTrace::with_capacity(&seq.name, Protocol::Vot, n);
    let mut i = 0;
    while i < n {
        let gt = seq.groundtruth[i];
        tracker.start(&seq.frames[i].load()?.as_ref(), &gt, i)?;
        trace.inits.push(i);
        trace.push(Some(gt), gt, FrameKind::Init, false);
        let init = i;
        i += 1;
        while i < n {
            let gt = seq.groundtruth[i];
            let pred = tracker.step(&seq.frames[i].load()?.as_ref(), i)?;
            if rotated_iou(&pred, &gt) > 0.0 {
                trace.push(Some(pred), gt, FrameKind::Tracked, i - init > protocol.burn_in);
                i += 1;
                continue;
            }
            trace.push(Some(pred), gt, FrameKind::Failure, false);
            trace.failures.push(i);
            i += 1;
            for _ in 0..protocol.skip {
                if i >= n {
                    break;
                }
                trace.push(None, seq.groundtruth[i], FrameKind::Skipped, false);
                i += 1;
            }
            break;
        }
    }
    Ok(trace)
}
