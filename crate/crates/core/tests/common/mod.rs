//! Reference implementations used as test oracles. They share no code with
//! the library and favour obviousness over speed.

#![allow(dead_code)]

/// AUROC over all positive/negative pairs, ties counting one half.
pub fn brute_auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|p| *p.1)
        .map(|p| *p.0)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|p| !*p.1)
        .map(|p| *p.0)
        .collect();
    let mut twice_wins = 0u64;
    for &p in &pos {
        for &n in &neg {
            twice_wins += if p > n {
                2
            } else if p == n {
                1
            } else {
                0
            };
        }
    }
    twice_wins as f64 / (2.0 * pos.len() as f64 * neg.len() as f64)
}

/// `(tp, fp)` at every distinct threshold, highest first, counted by a full
/// scan per threshold.
pub fn threshold_counts(scores: &[f64], labels: &[bool]) -> Vec<(u64, u64)> {
    let mut thresholds = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    thresholds
        .iter()
        .map(|&t| {
            let mut tp = 0;
            let mut fp = 0;
            for (&s, &y) in scores.iter().zip(labels) {
                if s >= t {
                    if y {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
            (tp, fp)
        })
        .collect()
}

/// Step-wise AP: sum over thresholds of recall increment times precision.
pub fn enumerated_ap(counts: &[(u64, u64)], n_pos: u64) -> f64 {
    let mut ap = 0.0;
    let mut prev_tp = 0;
    for &(tp, fp) in counts {
        if tp > prev_tp {
            ap += ((tp - prev_tp) as f64 / n_pos as f64) * (tp as f64 / (tp + fp) as f64);
        }
        prev_tp = tp;
    }
    ap
}

/// FPR at the first threshold whose TPR reaches 0.95.
pub fn enumerated_fpr95(counts: &[(u64, u64)], n_pos: u64, n_neg: u64) -> f64 {
    for &(tp, fp) in counts {
        if 100 * tp >= 95 * n_pos {
            return fp as f64 / n_neg as f64;
        }
    }
    1.0
}

/// `(auroc, ap, fpr95)` from the brute-force oracles.
pub fn oracle_metrics(scores: &[f64], labels: &[bool]) -> (f64, f64, f64) {
    let n_pos = labels.iter().filter(|&&y| y).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    let counts = threshold_counts(scores, labels);
    (
        brute_auroc(scores, labels),
        enumerated_ap(&counts, n_pos),
        enumerated_fpr95(&counts, n_pos, n_neg),
    )
}

/// Direct per-pixel product `prod_k clamp(1 - p_k)`, optionally with the
/// clamped object probability as leading factor.
pub fn naive_product(px: &[f32], k: usize, with_object: bool) -> f64 {
    let mut s = if with_object {
        (px[k] as f64).clamp(1e-7, 1.0)
    } else {
        1.0
    };
    for &p in &px[..k] {
        s *= (1.0 - p as f64).clamp(1e-7, 1.0);
    }
    s
}
