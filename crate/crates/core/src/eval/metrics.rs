use super::{FrameKind, RunTrace, SequenceRecord};
use crate::geometry::{center_distance, OrientedBox};

/// IoU values this close to 1 count as a perfect overlap.
const PERFECT: f64 = 1.0 - 1e-9;

/// The 101-point threshold grid `0.00, 0.01, …, 1.00`.
pub fn otb_thresholds() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

/// Fraction of frames whose overlap exceeds each threshold. A perfect
/// overlap passes every threshold, including 1.
pub fn success_curve(overlaps: &[f64], thresholds: &[f64]) -> Vec<f64> {
    if overlaps.is_empty() {
        return vec![0.0; thresholds.len()];
    }
    let n = overlaps.len() as f64;
    thresholds
        .iter()
        .map(|&t| {
            overlaps.iter().filter(|&&o| o > t || o >= PERFECT).count() as f64 / n
        })
        .collect()
}

/// Mean of the curve over its (uniform) threshold grid.
pub fn auc(curve: &[f64]) -> f64 {
    if curve.is_empty() {
        return 0.0;
    }
    curve.iter().sum::<f64>() / curve.len() as f64
}

/// Fraction of frames whose center error is at most `radius` px.
pub fn precision_at(pred: &[OrientedBox], gt: &[OrientedBox], radius: f64) -> f64 {
    let n = pred.len().min(gt.len());
    if n == 0 {
        return 0.0;
    }
    pred.iter()
        .zip(gt)
        .filter(|(p, g)| center_distance(p, g) <= radius)
        .count() as f64
        / n as f64
}

/// Mean overlap over counted frames; 0 when no frame counts.
pub fn accuracy(trace: &RunTrace) -> f64 {
    let (sum, n) = trace
        .overlaps
        .iter()
        .zip(&trace.counted)
        .filter(|(_, &c)| c)
        .fold((0.0, 0usize), |(s, n), (o, _)| (s + o, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Mean number of failures per sequence.
pub fn robustness(traces: &[RunTrace]) -> f64 {
    if traces.is_empty() {
        return 0.0;
    }
    traces.iter().map(|t| t.failures.len()).sum::<usize>() as f64 / traces.len() as f64
}

/// Failures per `per` frames, pooled over all sequences.
pub fn robustness_per_frames(traces: &[RunTrace], per: f64) -> f64 {
    let frames: usize = traces.iter().map(RunTrace::len).sum();
    if frames == 0 {
        return 0.0;
    }
    per * traces.iter().map(|t| t.failures.len()).sum::<usize>() as f64 / frames as f64
}

/// Overlap runs following each initialization, and whether each run ended
/// in a failure.
fn segments(trace: &RunTrace) -> Vec<(Vec<f64>, bool)> {
    let mut out = Vec::new();
    let mut current: Option<Vec<f64>> = None;
    for (kind, &o) in trace.kinds.iter().zip(&trace.overlaps) {
        match kind {
            FrameKind::Init => {
                if let Some(seg) = current.take() {
                    out.push((seg, false));
                }
                current = Some(Vec::new());
            }
            FrameKind::Tracked => {
                if let Some(seg) = current.as_mut() {
                    seg.push(o);
                }
            }
            FrameKind::Failure => {
                if let Some(mut seg) = current.take() {
                    seg.push(0.0);
                    out.push((seg, true));
                }
            }
            FrameKind::Skipped => {}
        }
    }
    if let Some(seg) = current {
        out.push((seg, false));
    }
    out
}

/// Expected average overlap for each sequence length in `lo..=hi`.
///
/// Segments ending in a failure are zero-padded to the length; segments
/// that reach the end of their sequence are averaged over the frames they
/// have.
pub fn eao_curve(traces: &[RunTrace], lo: usize, hi: usize) -> Vec<(usize, f64)> {
    let segs: Vec<(Vec<f64>, bool)> = traces
        .iter()
        .flat_map(segments)
        .filter(|(s, failed)| *failed || !s.is_empty())
        .collect();
    (lo.max(1)..=hi)
        .map(|len| {
            if segs.is_empty() {
                return (len, 0.0);
            }
            let total: f64 = segs
                .iter()
                .map(|(s, failed)| {
                    let take = s.len().min(len);
                    let sum: f64 = s[..take].iter().sum();
                    if *failed {
                        sum / len as f64
                    } else {
                        sum / take as f64
                    }
                })
                .sum();
            (len, total / segs.len() as f64)
        })
        .collect()
}

/// Mean of the expected-average-overlap curve over `lo..=hi`.
pub fn eao(traces: &[RunTrace], lo: usize, hi: usize) -> f64 {
    let curve = eao_curve(traces, lo, hi);
    if curve.is_empty() {
        return 0.0;
    }
    curve.iter().map(|(_, v)| v).sum::<f64>() / curve.len() as f64
}

/// Split sequences into elongated (`r > th_r`) and mediocre targets by the
/// first-frame aspect ratio.
pub fn aspect_split(seqs: &[SequenceRecord], th_r: f64) -> (Vec<&SequenceRecord>, Vec<&SequenceRecord>) {
    seqs.iter().partition(|s| s.aspect_ratio() > th_r)
}

/// Per-trace AUC and precision@20 over frames with a prediction.
pub fn summarize(trace: &RunTrace) -> (f64, f64) {
    let mut overlaps = Vec::new();
    let mut pred = Vec::new();
    let mut gt = Vec::new();
    for ((p, g), o) in trace.predictions.iter().zip(&trace.groundtruth).zip(&trace.overlaps) {
        if let Some(p) = p {
            overlaps.push(*o);
            pred.push(*p);
            gt.push(*g);
        }
    }
    (
        auc(&success_curve(&overlaps, &otb_thresholds())),
        precision_at(&pred, &gt, 20.0),
    )
}
