//! Per-pixel anomaly scores. Every scorer returns "higher = more anomalous".
//!
//! * unknown score: `S = Π_k (1 - p_k)` over the predefined channels,
//! * unknown objectness score: `S = p_o · Π_k (1 - p_k)`,
//! * softmax entropy over the predefined logits,
//! * negated maximum predefined logit.
//!
//! The product scores clamp each factor to `[PROB_EPS, 1]`. The product is
//! accumulated in `f64` (at most 31 factors of at least 1e-7, far above the
//! `f64` underflow limit) and the log-score is `ln` of that product.

use crate::error::{Error, Result};
use crate::tensor_io::{LogitMap, ProbMap, Tensor};
use crate::PROB_EPS;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    height: usize,
    width: usize,
    values: Vec<f32>,
    /// Natural-log companion, present for the product scores.
    log_values: Option<Vec<f64>>,
}

impl ScoreMap {
    pub fn new(height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::Shape(format!(
                "{height}x{width} score map needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite score at pixel {pos}"
            )));
        }
        Ok(ScoreMap {
            height,
            width,
            values,
            log_values: None,
        })
    }

    /// Reads a `[H, W]` real32 tensor of linear scores.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let [h, w] = t.dims() else {
            return Err(Error::Shape(format!(
                "score map must be 2-D, got {:?}",
                t.dims()
            )));
        };
        ScoreMap::new(*h, *w, t.as_real32()?.to_vec())
    }

    /// Linear-domain values as a `[H, W]` real32 tensor.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::real32(vec![self.height, self.width], self.values.clone())
            .expect("validated score map")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn log_values(&self) -> Option<&[f64]> {
        self.log_values.as_deref()
    }

    /// Value used for ranking: the log-score when available (no underflow
    /// ties), otherwise the linear score. Both orderings agree.
    #[inline]
    pub fn rank_value(&self, index: usize) -> f64 {
        match &self.log_values {
            Some(logs) => logs[index],
            None => self.values[index] as f64,
        }
    }
}

/// Returns `(linear, log)` for a clamped product over the predefined
/// channels, optionally scaled by a leading factor.
#[inline(always)]
fn clamped_product(predefined: &[f32], lead: f64) -> f64 {
    let mut prod = lead;
    for &p in predefined {
        prod *= (1.0 - p as f64).clamp(PROB_EPS, 1.0);
    }
    prod
}

fn product_score(p: &ProbMap, with_object: bool) -> ScoreMap {
    let n = p.pixels();
    let c = p.channels();
    let k = p.k();
    let mut values = Vec::with_capacity(n);
    let mut log_values = Vec::with_capacity(n);
    for px in p.values().chunks_exact(c) {
        let lead = if with_object {
            (px[k] as f64).clamp(PROB_EPS, 1.0)
        } else {
            1.0
        };
        let prod = clamped_product(&px[..k], lead);
        values.push(prod as f32);
        log_values.push(prod.ln());
    }
    ScoreMap {
        height: p.height(),
        width: p.width(),
        values,
        log_values: Some(log_values),
    }
}

/// Probability that no predefined class claims the pixel.
pub fn unknown_score(p: &ProbMap) -> ScoreMap {
    product_score(p, false)
}

/// Unknown score weighted by the object-class probability.
pub fn unknown_objectness_score(p: &ProbMap) -> Result<ScoreMap> {
    if !p.has_object() {
        return Err(Error::Validation(
            "unknown objectness score needs an object channel".into(),
        ));
    }
    Ok(product_score(p, true))
}

/// Entropy (nats) of the softmax over the predefined logits.
pub fn softmax_entropy(l: &LogitMap) -> ScoreMap {
    let k = l.k();
    let values = (0..l.pixels())
        .map(|i| {
            let z = &l.pixel(i)[..k];
            let max = z.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v as f64));
            let mut sum = 0.0;
            let mut weighted = 0.0;
            for &v in z {
                let d = v as f64 - max;
                let e = d.exp();
                sum += e;
                weighted += e * d;
            }
            // H = ln Σe^d - Σ e^d d / Σ e^d
            (sum.ln() - weighted / sum).max(0.0) as f32
        })
        .collect();
    ScoreMap {
        height: l.height(),
        width: l.width(),
        values,
        log_values: None,
    }
}

/// Negated maximum predefined logit.
pub fn max_logit(l: &LogitMap) -> ScoreMap {
    let k = l.k();
    let values = (0..l.pixels())
        .map(|i| {
            let m = l.pixel(i)[..k]
                .iter()
                .fold(f32::NEG_INFINITY, |m, &v| m.max(v));
            // +0.0 folds a negative zero into the same tie group as 0.0
            -m + 0.0
        })
        .collect();
    ScoreMap {
        height: l.height(),
        width: l.width(),
        values,
        log_values: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Unknown,
    UnknownObjectness,
    Entropy,
    MaxLogit,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Unknown,
        Method::UnknownObjectness,
        Method::Entropy,
        Method::MaxLogit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Unknown => "us",
            Method::UnknownObjectness => "uos",
            Method::Entropy => "entropy",
            Method::MaxLogit => "maxlogit",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scoring method `{s}`")))
    }

    pub fn needs_logits(self) -> bool {
        matches!(self, Method::Entropy | Method::MaxLogit)
    }

    /// Product scores live in `(0, 1]` and carry a log companion.
    pub fn is_probability(self) -> bool {
        matches!(self, Method::Unknown | Method::UnknownObjectness)
    }
}
