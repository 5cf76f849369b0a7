//! Pixel-level OoD metrics (AUROC, AP, FPR95) pooled over a dataset, and
//! segmentation mIoU.
//!
//! Every non-excluded pixel of every image goes into one pool; metrics are
//! not averaged per image.

mod curve;
mod histogram;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use curve::{auroc, average_precision, fpr_at_95_tpr, Group, RankedCounts};
pub use histogram::{Quantizer, ScoreHistogram, DEFAULT_BINS};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::labels::{EvalGt, GtState, LabelMap};
use crate::scoring::ScoreMap;
use crate::tensor_io::ProbMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalMode {
    Exact,
    Streaming { bins: usize, quantizer: Quantizer },
}

impl EvalMode {
    pub fn streaming_default() -> Self {
        EvalMode::Streaming {
            bins: DEFAULT_BINS,
            quantizer: Quantizer::default(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            EvalMode::Exact => "exact".into(),
            EvalMode::Streaming { bins, .. } => format!("streaming({bins})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub mode: String,
    pub auroc: f64,
    pub ap: f64,
    pub fpr95: f64,
    pub n_obstacle: u64,
    pub n_not_obstacle: u64,
    pub n_excluded: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub miou: Option<f64>,
    /// Settings that produced the report, printed as header lines.
    #[serde(default)]
    pub config: BTreeMap<String, String>,
}

impl EvalReport {
    pub fn n_total(&self) -> u64 {
        self.n_obstacle + self.n_not_obstacle + self.n_excluded
    }

    /// `key=value` lines, config first as `# key=value` comments.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.config {
            let _ = writeln!(out, "# {k}={v}");
        }
        let _ = writeln!(out, "method={}", self.method);
        let _ = writeln!(out, "mode={}", self.mode);
        let _ = writeln!(out, "auroc={:.6}", self.auroc);
        let _ = writeln!(out, "ap={:.6}", self.ap);
        let _ = writeln!(out, "fpr95={:.6}", self.fpr95);
        let _ = writeln!(out, "n_obstacle={}", self.n_obstacle);
        let _ = writeln!(out, "n_not_obstacle={}", self.n_not_obstacle);
        let _ = writeln!(out, "n_excluded={}", self.n_excluded);
        if let Some(m) = self.miou {
            let _ = writeln!(out, "miou={m:.6}");
        }
        out
    }

    /// One JSON object on a single line.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        serde_json::from_str(line).map_err(|e| Error::Format(format!("bad report record: {e}")))
    }
}

/// Dataset-level pool of scored pixels, fed one image at a time.
#[derive(Debug, Clone)]
pub struct MetricAccumulator {
    mode: EvalMode,
    pairs: Vec<(f64, bool)>,
    hist: Option<ScoreHistogram>,
    n_excluded: u64,
}

impl MetricAccumulator {
    pub fn new(mode: EvalMode) -> Result<Self> {
        let hist = match mode {
            EvalMode::Exact => None,
            EvalMode::Streaming { bins, quantizer } => Some(ScoreHistogram::new(bins, quantizer)?),
        };
        Ok(MetricAccumulator {
            mode,
            pairs: Vec::new(),
            hist,
            n_excluded: 0,
        })
    }

    pub fn add(&mut self, s: &ScoreMap, gt: &EvalGt) -> Result<()> {
        if (s.height(), s.width()) != gt.shape() {
            return Err(Error::Shape(format!(
                "scores {}x{} vs ground truth {}x{}",
                s.height(),
                s.width(),
                gt.height(),
                gt.width()
            )));
        }
        self.n_excluded += gt
            .as_slice()
            .iter()
            .filter(|&&g| g == GtState::Excluded)
            .count() as u64;
        match &mut self.hist {
            None => {
                for (i, &g) in gt.as_slice().iter().enumerate() {
                    if g != GtState::Excluded {
                        self.pairs.push((s.rank_value(i), g == GtState::Obstacle));
                    }
                }
            }
            Some(total) => {
                let mut hist = ScoreHistogram::new(total.bins(), total.quantizer())?;
                accumulate(&mut hist, s, gt);
                total.merge(&hist)?;
            }
        }
        Ok(())
    }

    pub fn finish(self, method: &str) -> Result<EvalReport> {
        let counts = match self.hist {
            None => RankedCounts::from_pairs(self.pairs),
            Some(h) => h.ranked_counts(),
        };
        if counts.n_pos == 0 {
            return Err(Error::Degenerate(
                "no obstacle pixels inside the evaluation region".into(),
            ));
        }
        if counts.n_neg == 0 {
            return Err(Error::Degenerate(
                "no non-obstacle pixels inside the evaluation region".into(),
            ));
        }
        Ok(EvalReport {
            method: method.to_string(),
            mode: self.mode.label(),
            auroc: counts.auroc()?,
            ap: counts.average_precision()?,
            fpr95: counts.fpr_at_95_tpr()?,
            n_obstacle: counts.n_pos,
            n_not_obstacle: counts.n_neg,
            n_excluded: self.n_excluded,
            miou: None,
            config: BTreeMap::new(),
        })
    }
}

/// Pools all non-excluded pixels of `score_maps` and computes AUROC, AP and
/// FPR95 with obstacle pixels as positives.
pub fn evaluate(
    score_maps: &[ScoreMap],
    gts: &[EvalGt],
    mode: EvalMode,
    method: &str,
) -> Result<EvalReport> {
    if score_maps.len() != gts.len() {
        return Err(Error::Shape(format!(
            "{} score maps vs {} ground truths",
            score_maps.len(),
            gts.len()
        )));
    }
    let mut acc = MetricAccumulator::new(mode)?;
    for (i, (s, gt)) in score_maps.iter().zip(gts).enumerate() {
        acc.add(s, gt).map_err(|e| match e {
            Error::Shape(msg) => Error::Shape(format!("image {i}: {msg}")),
            other => other,
        })?;
    }
    acc.finish(method)
}

/// Adds one image's non-excluded pixels to a histogram.
pub fn accumulate(hist: &mut ScoreHistogram, s: &ScoreMap, gt: &EvalGt) {
    let values = s.values();
    match s.log_values() {
        Some(logs) => {
            for (i, &g) in gt.as_slice().iter().enumerate() {
                if g != GtState::Excluded {
                    hist.add_with_log(values[i] as f64, logs[i], g == GtState::Obstacle);
                }
            }
        }
        None => {
            for (i, &g) in gt.as_slice().iter().enumerate() {
                if g != GtState::Excluded {
                    hist.add(values[i] as f64, g == GtState::Obstacle);
                }
            }
        }
    }
}

/// Class id marking pixels excluded from mIoU.
pub const IGNORE_CLASS: u8 = 255;
/// Class id for a pixel that belongs to none of the predefined classes. It
/// is never scored itself but counts as a miss or false alarm for the other
/// side.
pub const NO_CLASS: u8 = 254;

/// Mean intersection-over-union over classes `0..k`, with confusion counts
/// pooled over all images. Classes absent from both prediction and ground
/// truth are skipped.
pub fn miou(pred_ids: &[Grid<u8>], gt_ids: &[Grid<u8>], k: usize) -> Result<f64> {
    if pred_ids.len() != gt_ids.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} ground truths",
            pred_ids.len(),
            gt_ids.len()
        )));
    }
    let mut tp = vec![0u64; k];
    let mut fp = vec![0u64; k];
    let mut fneg = vec![0u64; k];
    for (pred, gt) in pred_ids.iter().zip(gt_ids) {
        pred.ensure_same_shape(gt, "prediction vs ground truth")?;
        for (&p, &g) in pred.as_slice().iter().zip(gt.as_slice()) {
            if g == IGNORE_CLASS {
                continue;
            }
            for id in [p, g] {
                if id != NO_CLASS && id as usize >= k {
                    return Err(Error::Validation(format!("class id {id} outside 0..{k}")));
                }
            }
            if p == g {
                if p != NO_CLASS {
                    tp[p as usize] += 1;
                }
                continue;
            }
            if p != NO_CLASS {
                fp[p as usize] += 1;
            }
            if g != NO_CLASS {
                fneg[g as usize] += 1;
            }
        }
    }
    let ious: Vec<f64> = (0..k)
        .filter(|&c| tp[c] + fp[c] + fneg[c] > 0)
        .map(|c| tp[c] as f64 / (tp[c] + fp[c] + fneg[c]) as f64)
        .collect();
    if ious.is_empty() {
        return Err(Error::Degenerate(
            "no class present in prediction or ground truth".into(),
        ));
    }
    Ok(ious.iter().sum::<f64>() / ious.len() as f64)
}

/// Arg-max over the predefined channels (first index wins ties).
pub fn argmax_predefined(p: &ProbMap) -> Grid<u8> {
    let k = p.k();
    let ids = (0..p.pixels())
        .map(|i| {
            let px = &p.pixel(i)[..k];
            let mut best = 0;
            for c in 1..k {
                if px[c] > px[best] {
                    best = c;
                }
            }
            best as u8
        })
        .collect();
    Grid::from_vec(p.height(), p.width(), ids).expect("map shape is valid")
}

/// Single-class ground truth from a label map: the lowest predefined bit, or
/// [`IGNORE_CLASS`] for ignored and object-only pixels.
pub fn label_class_ids(labels: &LabelMap) -> Grid<u8> {
    let k = labels.k();
    labels.bits().map(|&b| {
        let predefined = b & ((1u32 << k) - 1);
        if predefined == 0 || b & crate::labels::IGNORE_BIT != 0 {
            IGNORE_CLASS
        } else {
            predefined.trailing_zeros() as u8
        }
    })
}
