//! Fixed-bin score histograms for bounded-memory evaluation.

use crate::error::{Error, Result};
use crate::metrics::curve::{Group, RankedCounts};
use crate::scoring::Method;

pub const DEFAULT_BINS: usize = 65_536;

/// Monotone score-to-bin rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quantizer {
    /// Affine on the log-odds `ln s - ln(1 - s)` of a score in `[0, 1]`,
    /// clamped to `[lo, hi]`. Resolves both tails: relative resolution near
    /// 0 and resolution in `1 - s` near 1.
    LogOdds { lo: f64, hi: f64 },
    /// Affine on the natural-log score clamped to `[lo, hi]`. Linear inputs
    /// are converted with `ln` (zero maps to `lo`).
    Log { lo: f64, hi: f64 },
    /// Affine on the raw score clamped to `[lo, hi]`.
    Linear { lo: f64, hi: f64 },
}

impl Default for Quantizer {
    /// Probability-valued scores: log-odds range `[-28, 28]`, i.e. scores
    /// from about 7e-13 up to `1 - 7e-13` are resolved.
    fn default() -> Self {
        Quantizer::LogOdds {
            lo: -28.0,
            hi: 28.0,
        }
    }
}

/// `ln(s / (1 - s))` for `s` in `[0, 1]`, infinite at the ends.
#[inline]
fn log_odds(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s.ln() - (-s).ln_1p()
}

/// Log-odds from a log-score `l = ln s <= 0`.
#[inline]
fn log_odds_from_log(l: f64) -> f64 {
    let l = l.min(0.0);
    l - (-l.exp_m1()).ln()
}

impl Quantizer {
    /// Range suited to a scoring method's output: the default log-odds range
    /// for the product scores, log range `[-46, ln ln K]` for entropy (which
    /// spans many decades on confident predictions) and `[-64, 64]` on the
    /// negated max-logit.
    pub fn for_method(method: Method, k: usize) -> Quantizer {
        match method {
            Method::Unknown | Method::UnknownObjectness => Quantizer::default(),
            Method::Entropy => Quantizer::Log {
                lo: -46.0,
                hi: (k.max(3) as f64).ln().ln(),
            },
            Method::MaxLogit => Quantizer::Linear {
                lo: -64.0,
                hi: 64.0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = match *self {
            Quantizer::LogOdds { lo, hi }
            | Quantizer::Log { lo, hi }
            | Quantizer::Linear { lo, hi } => (lo, hi),
        };
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!(
                "invalid quantizer range [{lo}, {hi}]"
            )));
        }
        Ok(())
    }

    #[inline]
    fn position(lo: f64, hi: f64, x: f64, bins: usize) -> usize {
        if x.is_nan() {
            return 0;
        }
        let t = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
        ((t * bins as f64) as usize).min(bins - 1)
    }

    /// Bin for a linear-domain score.
    #[inline]
    pub fn bin_linear(&self, score: f64, bins: usize) -> usize {
        match *self {
            Quantizer::LogOdds { lo, hi } => Self::position(lo, hi, log_odds(score), bins),
            Quantizer::Log { lo, hi } => {
                let x = if score > 0.0 { score.ln() } else { lo };
                Self::position(lo, hi, x, bins)
            }
            Quantizer::Linear { lo, hi } => Self::position(lo, hi, score, bins),
        }
    }

    /// Bin for a score given together with its log companion.
    #[inline]
    pub fn bin_with_log(&self, score: f64, log_score: f64, bins: usize) -> usize {
        match *self {
            Quantizer::LogOdds { lo, hi } => {
                Self::position(lo, hi, log_odds_from_log(log_score), bins)
            }
            Quantizer::Log { lo, hi } => Self::position(lo, hi, log_score, bins),
            Quantizer::Linear { lo, hi } => Self::position(lo, hi, score, bins),
        }
    }
}

/// Per-bin positive and negative counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreHistogram {
    quantizer: Quantizer,
    pos: Vec<u64>,
    neg: Vec<u64>,
}

impl ScoreHistogram {
    pub fn new(bins: usize, quantizer: Quantizer) -> Result<Self> {
        if bins < 2 {
            return Err(Error::Config(format!("need at least 2 bins, got {bins}")));
        }
        quantizer.validate()?;
        Ok(ScoreHistogram {
            quantizer,
            pos: vec![0; bins],
            neg: vec![0; bins],
        })
    }

    pub fn bins(&self) -> usize {
        self.pos.len()
    }

    pub fn quantizer(&self) -> Quantizer {
        self.quantizer
    }

    #[inline]
    fn add_bin(&mut self, bin: usize, positive: bool) {
        if positive {
            self.pos[bin] += 1;
        } else {
            self.neg[bin] += 1;
        }
    }

    #[inline]
    pub fn add(&mut self, score: f64, positive: bool) {
        let bin = self.quantizer.bin_linear(score, self.bins());
        self.add_bin(bin, positive);
    }

    #[inline]
    pub fn add_with_log(&mut self, score: f64, log_score: f64, positive: bool) {
        let bin = self.quantizer.bin_with_log(score, log_score, self.bins());
        self.add_bin(bin, positive);
    }

    /// Adds another histogram's counts. Integer merges commute, so any merge
    /// order gives the same result.
    pub fn merge(&mut self, other: &ScoreHistogram) -> Result<()> {
        if self.bins() != other.bins() || self.quantizer != other.quantizer {
            return Err(Error::Config(
                "cannot merge histograms with different binning".into(),
            ));
        }
        for (a, b) in self.pos.iter_mut().zip(&other.pos) {
            *a += b;
        }
        for (a, b) in self.neg.iter_mut().zip(&other.neg) {
            *a += b;
        }
        Ok(())
    }

    pub fn total_pos(&self) -> u64 {
        self.pos.iter().sum()
    }

    pub fn total_neg(&self) -> u64 {
        self.neg.iter().sum()
    }

    /// Non-empty bins from the highest score down, each bin one threshold.
    pub fn ranked_counts(&self) -> RankedCounts {
        let groups = (0..self.bins())
            .rev()
            .filter(|&b| self.pos[b] + self.neg[b] > 0)
            .map(|b| Group {
                pos: self.pos[b],
                neg: self.neg[b],
            })
            .collect();
        RankedCounts::from_groups(groups)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization_is_monotone() {
        let q = Quantizer::Log { lo: -28.0, hi: 0.0 };
        let mut last = 0;
        for i in 0..10_000 {
            let s = (i as f64 / 10_000.0).powi(3);
            let b = q.bin_linear(s, DEFAULT_BINS);
            assert!(b >= last);
            last = b;
        }
        assert_eq!(q.bin_linear(1.0, DEFAULT_BINS), DEFAULT_BINS - 1);
        assert_eq!(q.bin_linear(0.0, DEFAULT_BINS), 0);
        let lin = Quantizer::Linear { lo: -1.0, hi: 1.0 };
        assert_eq!(lin.bin_linear(-5.0, 4), 0);
        assert_eq!(lin.bin_linear(0.0, 4), 2);
        assert_eq!(lin.bin_linear(5.0, 4), 3);
    }

    #[test]
    fn log_odds_resolves_both_tails() {
        let q = Quantizer::default();
        assert!(q.bin_linear(1.0 - 1e-6, DEFAULT_BINS) < q.bin_linear(1.0 - 1e-7, DEFAULT_BINS));
        assert!(q.bin_linear(1e-7, DEFAULT_BINS) < q.bin_linear(1e-6, DEFAULT_BINS));
        assert_eq!(q.bin_linear(0.5, 2), 1);
        assert_eq!(q.bin_linear(1.0, 8), 7);
        for s in [1e-9, 0.01, 0.3, 0.999, 1.0] {
            let l: f64 = f64::ln(s);
            assert_eq!(
                q.bin_with_log(s, l, DEFAULT_BINS),
                q.bin_linear(s, DEFAULT_BINS)
            );
        }
    }

    #[test]
    fn totals_track_inserts() {
        let mut h = ScoreHistogram::new(16, Quantizer::Linear { lo: 0.0, hi: 1.0 }).unwrap();
        for i in 0..100 {
            h.add(i as f64 / 100.0, i % 3 == 0);
        }
        assert_eq!(h.total_pos(), 34);
        assert_eq!(h.total_neg(), 66);
        let rc = h.ranked_counts();
        assert_eq!(rc.n_pos + rc.n_neg, 100);
    }

    #[test]
    fn merge_matches_single_pass() {
        let q = Quantizer::Linear { lo: 0.0, hi: 1.0 };
        let mut whole = ScoreHistogram::new(32, q).unwrap();
        let mut a = ScoreHistogram::new(32, q).unwrap();
        let mut b = ScoreHistogram::new(32, q).unwrap();
        for i in 0..200 {
            let s = ((i * 37) % 200) as f64 / 200.0;
            whole.add(s, i % 2 == 0);
            if i < 80 { &mut a } else { &mut b }.add(s, i % 2 == 0);
        }
        let mut merged = b.clone();
        merged.merge(&a).unwrap();
        assert_eq!(merged, whole);
        a.merge(&b).unwrap();
        assert_eq!(a, whole);
    }

    #[test]
    fn separated_bins_give_exact_metrics() {
        let mut h = ScoreHistogram::new(8, Quantizer::Linear { lo: 0.0, hi: 1.0 }).unwrap();
        h.add(0.95, true);
        h.add(0.65, true);
        h.add(0.80, false);
        h.add(0.20, false);
        let rc = h.ranked_counts();
        assert_eq!(rc.auroc().unwrap(), 0.75);
        assert_eq!(rc.fpr_at_95_tpr().unwrap(), 0.5);
    }

    #[test]
    fn invalid_configs() {
        assert!(ScoreHistogram::new(1, Quantizer::default()).is_err());
        assert!(ScoreHistogram::new(8, Quantizer::Linear { lo: 1.0, hi: 1.0 }).is_err());
    }
}
