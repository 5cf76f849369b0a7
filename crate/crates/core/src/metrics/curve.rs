//! Threshold sweeps over tie-grouped operating points.
//!
//! Both the exact path (sort) and the histogram path (bins) reduce to a list
//! of [`Group`]s in descending score order; all three metrics are computed
//! from that list and nothing else, which makes them invariant under any
//! strictly increasing transform of the scores.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Positive and negative counts sharing one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Group {
    pub pos: u64,
    pub neg: u64,
}

/// Descending-ordered groups with class totals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedCounts {
    pub groups: Vec<Group>,
    pub n_pos: u64,
    pub n_neg: u64,
}

impl RankedCounts {
    pub fn from_groups(groups: Vec<Group>) -> Self {
        let n_pos = groups.iter().map(|g| g.pos).sum();
        let n_neg = groups.iter().map(|g| g.neg).sum();
        RankedCounts {
            groups,
            n_pos,
            n_neg,
        }
    }

    /// Sorts `(score, is_positive)` pairs descending and merges equal scores.
    pub fn from_pairs(mut pairs: Vec<(f64, bool)>) -> Self {
        pairs.sort_unstable_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));
        let mut groups: Vec<Group> = Vec::new();
        let mut last: Option<f64> = None;
        for (score, positive) in pairs {
            if last != Some(score) {
                groups.push(Group::default());
                last = Some(score);
            }
            let g = groups.last_mut().unwrap();
            if positive {
                g.pos += 1;
            } else {
                g.neg += 1;
            }
        }
        RankedCounts::from_groups(groups)
    }

    pub fn from_scores(scores: &[f64], labels: &[bool]) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} scores vs {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if let Some(pos) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite score at index {pos}"
            )));
        }
        Ok(RankedCounts::from_pairs(
            scores.iter().copied().zip(labels.iter().copied()).collect(),
        ))
    }

    fn require_both(&self) -> Result<()> {
        if self.n_pos == 0 {
            return Err(Error::Degenerate("no positive samples".into()));
        }
        if self.n_neg == 0 {
            return Err(Error::Degenerate("no negative samples".into()));
        }
        Ok(())
    }

    /// Trapezoidal ROC area; equals the Mann-Whitney statistic with ties
    /// counted as one half.
    pub fn auroc(&self) -> Result<f64> {
        self.require_both()?;
        // 2 * area * P * N = Σ Δfp (tp_prev + tp_cur), accumulated exactly
        let mut tp: u128 = 0;
        let mut twice_area: u128 = 0;
        for g in &self.groups {
            let tp_next = tp + g.pos as u128;
            twice_area += g.neg as u128 * (tp + tp_next);
            tp = tp_next;
        }
        Ok(twice_area as f64 / (2.0 * self.n_pos as f64 * self.n_neg as f64))
    }

    /// Non-interpolated average precision, one step per distinct threshold.
    pub fn average_precision(&self) -> Result<f64> {
        if self.n_pos == 0 {
            return Err(Error::Degenerate("no positive samples".into()));
        }
        let mut tp = 0u64;
        let mut fp = 0u64;
        let mut ap = 0.0;
        for g in &self.groups {
            tp += g.pos;
            fp += g.neg;
            if g.pos > 0 {
                ap += ap_step(g.pos, tp, fp, self.n_pos);
            }
        }
        Ok(ap)
    }

    /// False-positive rate at the first threshold where TPR reaches 95%.
    pub fn fpr_at_95_tpr(&self) -> Result<f64> {
        self.require_both()?;
        let mut tp = 0u64;
        let mut fp = 0u64;
        for g in &self.groups {
            tp += g.pos;
            fp += g.neg;
            if reaches_95(tp, self.n_pos) {
                return Ok(fp as f64 / self.n_neg as f64);
            }
        }
        unreachable!("the last group always reaches TPR = 1")
    }
}

/// `(R_n - R_{n-1}) · P_n` for one threshold.
#[inline]
pub(crate) fn ap_step(new_pos: u64, tp: u64, fp: u64, n_pos: u64) -> f64 {
    (new_pos as f64 / n_pos as f64) * (tp as f64 / (tp + fp) as f64)
}

/// `tp / n_pos >= 0.95`, evaluated in integers.
#[inline]
pub(crate) fn reaches_95(tp: u64, n_pos: u64) -> bool {
    100 * tp as u128 >= 95 * n_pos as u128
}

pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    RankedCounts::from_scores(scores, labels)?.auroc()
}

pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    RankedCounts::from_scores(scores, labels)?.average_precision()
}

pub fn fpr_at_95_tpr(scores: &[f64], labels: &[bool]) -> Result<f64> {
    RankedCounts::from_scores(scores, labels)?.fpr_at_95_tpr()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split(pos: &[f64], neg: &[f64]) -> (Vec<f64>, Vec<bool>) {
        let scores = pos.iter().chain(neg).copied().collect();
        let labels = pos
            .iter()
            .map(|_| true)
            .chain(neg.iter().map(|_| false))
            .collect();
        (scores, labels)
    }

    #[test]
    fn auroc_examples() {
        let (s, l) = split(&[0.9, 0.8], &[0.1, 0.2]);
        assert_eq!(auroc(&s, &l).unwrap(), 1.0);
        let (s, l) = split(&[0.1, 0.2], &[0.9, 0.8]);
        assert_eq!(auroc(&s, &l).unwrap(), 0.0);
        let (s, l) = split(&[0.9, 0.6], &[0.7, 0.2]);
        assert_eq!(auroc(&s, &l).unwrap(), 0.75);
    }

    #[test]
    fn auroc_ties_count_half() {
        let (s, l) = split(&[0.5], &[0.5]);
        assert_eq!(auroc(&s, &l).unwrap(), 0.5);
    }

    #[test]
    fn ap_examples() {
        let (s, l) = split(&[0.9, 0.8], &[0.1, 0.2]);
        assert_eq!(average_precision(&s, &l).unwrap(), 1.0);
        let (s, l) = split(&[0.9, 0.6], &[0.7, 0.2]);
        let ap = average_precision(&s, &l).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-15);
        let (s, l) = split(&[0.3], &[0.6]);
        assert_eq!(average_precision(&s, &l).unwrap(), 0.5);
    }

    #[test]
    fn ap_positives_only() {
        assert_eq!(average_precision(&[0.3, 0.1], &[true, true]).unwrap(), 1.0);
        assert!(matches!(
            average_precision(&[0.3], &[false]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn fpr95_examples() {
        let (s, l) = split(&[0.9, 0.8], &[0.1, 0.2]);
        assert_eq!(fpr_at_95_tpr(&s, &l).unwrap(), 0.0);
        let (s, l) = split(&[0.9, 0.6], &[0.7, 0.2]);
        assert_eq!(fpr_at_95_tpr(&s, &l).unwrap(), 0.5);
        let (s, l) = split(&[0.4, 0.4, 0.4], &[0.4, 0.4]);
        assert_eq!(fpr_at_95_tpr(&s, &l).unwrap(), 1.0);
    }

    #[test]
    fn fpr95_exact_crossing() {
        // 20 positives: 19 of them (TPR = 0.95 exactly) sit above every negative
        let mut pos: Vec<f64> = (0..19).map(|i| 10.0 + i as f64).collect();
        pos.push(-1.0);
        let neg: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let (s, l) = split(&pos, &neg);
        assert_eq!(fpr_at_95_tpr(&s, &l).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(auroc(&[0.1], &[true]), Err(Error::Degenerate(_))));
        assert!(matches!(
            fpr_at_95_tpr(&[0.1], &[false]),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            auroc(&[0.1], &[true, false]),
            Err(Error::Shape(_))
        ));
        assert!(auroc(&[f64::NAN, 0.1], &[true, false]).is_err());
    }
}
