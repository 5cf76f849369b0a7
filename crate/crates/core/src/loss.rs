//! Boundary-aware binary cross-entropy over the predefined channels and the
//! object channel:
//!
//! ```text
//! L = 1/N Σ_i Σ_c bce(y_ic, p_ic) + λ/Σδ Σ_i δ_i Σ_c bce(y_ic, p_ic)
//! ```
//!
//! `N` counts non-ignored pixels and `Σδ` counts non-ignored boundary pixels.
//! The boundary term is zero when no counted pixel lies on a boundary.
//!
//! All reductions run sequentially in pixel order, so results are
//! bit-reproducible.

use crate::error::{Error, Result};
use crate::labels::{BoundaryMask, LabelMap};
use crate::tensor_io::{LogitMap, ProbMap};
use crate::PROB_EPS;

/// Which per-element cross-entropy to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BceForm {
    /// `-[y ln p + (1-y) ln(1-p)]`.
    #[default]
    Standard,
    /// `-[y ln p + (1-y)(1 - ln p)]`, the alternative formula kept for
    /// comparison only. It is not minimized at `p = y` for `y = 0`.
    Alternative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub lambda: f64,
    pub clamp_eps: f64,
    pub form: BceForm,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            lambda: 3.0,
            clamp_eps: PROB_EPS,
            form: BceForm::Standard,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.clamp_eps > 0.0 && self.clamp_eps < 0.5) {
            return Err(Error::Config(format!(
                "clamp_eps must lie in (0, 0.5), got {}",
                self.clamp_eps
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub total: f64,
    pub base_term: f64,
    pub boundary_term: f64,
    pub n_counted: usize,
}

/// Binary cross-entropy of one element; `p` is clamped to `[eps, 1 - eps]`.
pub fn bce_elementwise(y: bool, p: f64, eps: f64) -> f64 {
    bce_with_form(y, p, eps, BceForm::Standard)
}

#[inline]
fn bce_with_form(y: bool, p: f64, eps: f64, form: BceForm) -> f64 {
    let p = p.clamp(eps, 1.0 - eps);
    match (form, y) {
        (_, true) => -p.ln(),
        (BceForm::Standard, false) => -(1.0 - p).ln(),
        (BceForm::Alternative, false) => -(1.0 - p.ln()),
    }
}

#[inline]
fn sigmoid64(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Per-pixel weights `1/N + λ δ_i / Σδ`; zero for ignored pixels.
fn pixel_weights(
    labels: &LabelMap,
    delta: &BoundaryMask,
    cfg: &LossConfig,
) -> Result<(Vec<f64>, usize, usize)> {
    labels
        .bits()
        .ensure_same_shape(delta, "boundary mask vs labels")?;
    let n_pixels = labels.bits().len();
    let mut n = 0usize;
    let mut n_boundary = 0usize;
    for i in 0..n_pixels {
        if !labels.is_ignored(i) {
            n += 1;
            n_boundary += delta.as_slice()[i] as usize;
        }
    }
    if n == 0 {
        return Err(Error::Degenerate("every pixel is ignored".into()));
    }
    let base = 1.0 / n as f64;
    let boundary = if n_boundary > 0 {
        cfg.lambda / n_boundary as f64
    } else {
        0.0
    };
    let weights = (0..n_pixels)
        .map(|i| {
            if labels.is_ignored(i) {
                0.0
            } else if delta.as_slice()[i] {
                base + boundary
            } else {
                base
            }
        })
        .collect();
    Ok((weights, n, n_boundary))
}

fn check_channels(channels: usize, labels: &LabelMap) -> Result<()> {
    if channels != labels.k() + 1 {
        return Err(Error::Shape(format!(
            "{channels} channels but labels need K+1 = {}",
            labels.k() + 1
        )));
    }
    Ok(())
}

fn check_len(len: usize, channels: usize, labels: &LabelMap) -> Result<()> {
    if len != labels.bits().len() * channels {
        return Err(Error::Shape(format!(
            "{len} values for {} pixels x {channels} channels",
            labels.bits().len()
        )));
    }
    Ok(())
}

/// Loss from probabilities laid out pixel-major with `labels.k() + 1`
/// channels.
pub fn loss_from_probs(
    probs: &[f64],
    labels: &LabelMap,
    delta: &BoundaryMask,
    cfg: &LossConfig,
) -> Result<LossValue> {
    cfg.validate()?;
    let channels = labels.k() + 1;
    check_len(probs.len(), channels, labels)?;
    labels
        .bits()
        .ensure_same_shape(delta, "boundary mask vs labels")?;
    let mut n = 0usize;
    let mut n_boundary = 0usize;
    let mut base_sum = 0.0;
    let mut boundary_sum = 0.0;
    for (i, px) in probs.chunks_exact(channels).enumerate() {
        if labels.is_ignored(i) {
            continue;
        }
        let pixel_loss: f64 = px
            .iter()
            .enumerate()
            .map(|(c, &p)| bce_with_form(labels.target(i, c), p, cfg.clamp_eps, cfg.form))
            .sum();
        n += 1;
        base_sum += pixel_loss;
        if delta.as_slice()[i] {
            n_boundary += 1;
            boundary_sum += pixel_loss;
        }
    }
    if n == 0 {
        return Err(Error::Degenerate("every pixel is ignored".into()));
    }
    let base_term = base_sum / n as f64;
    let boundary_term = if n_boundary > 0 {
        cfg.lambda * boundary_sum / n_boundary as f64
    } else {
        0.0
    };
    Ok(LossValue {
        total: base_term + boundary_term,
        base_term,
        boundary_term,
        n_counted: n,
    })
}

/// Loss from pre-sigmoid activations.
pub fn loss_from_logits(
    logits: &[f64],
    labels: &LabelMap,
    delta: &BoundaryMask,
    cfg: &LossConfig,
) -> Result<LossValue> {
    let probs: Vec<f64> = logits.iter().map(|&z| sigmoid64(z)).collect();
    loss_from_probs(&probs, labels, delta, cfg)
}

/// Analytic gradient of [`loss_from_logits`] with respect to the logits.
///
/// For the standard form this is `w_i (p_ic - y_ic)`. The clamp is treated as
/// inactive.
pub fn loss_grad_from_logits(
    logits: &[f64],
    labels: &LabelMap,
    delta: &BoundaryMask,
    cfg: &LossConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let channels = labels.k() + 1;
    check_len(logits.len(), channels, labels)?;
    let (weights, _, _) = pixel_weights(labels, delta, cfg)?;
    let mut grad = vec![0.0; logits.len()];
    for (i, (g, z)) in grad
        .chunks_exact_mut(channels)
        .zip(logits.chunks_exact(channels))
        .enumerate()
    {
        let w = weights[i];
        if w == 0.0 {
            continue;
        }
        for c in 0..channels {
            let p = sigmoid64(z[c]);
            let y = labels.target(i, c);
            g[c] = w * match (cfg.form, y) {
                (BceForm::Standard, true) => p - 1.0,
                (BceForm::Standard, false) => p,
                // d/dz [-ln p] = p - 1 ; d/dz [-(1 - ln p)] = 1 - p
                (BceForm::Alternative, true) => p - 1.0,
                (BceForm::Alternative, false) => 1.0 - p,
            };
        }
    }
    Ok(grad)
}

pub fn boundary_aware_loss(
    p: &ProbMap,
    labels: &LabelMap,
    delta: &BoundaryMask,
    cfg: &LossConfig,
) -> Result<LossValue> {
    check_map(p.height(), p.width(), p.k(), p.has_object(), labels)?;
    let probs: Vec<f64> = p.values().iter().map(|&v| v as f64).collect();
    loss_from_probs(&probs, labels, delta, cfg)
}

/// Gradient map with the same layout as `z`.
pub fn boundary_aware_loss_grad(
    z: &LogitMap,
    labels: &LabelMap,
    delta: &BoundaryMask,
    cfg: &LossConfig,
) -> Result<Vec<f32>> {
    check_map(z.height(), z.width(), z.k(), z.has_object(), labels)?;
    let logits: Vec<f64> = z.values().iter().map(|&v| v as f64).collect();
    Ok(loss_grad_from_logits(&logits, labels, delta, cfg)?
        .into_iter()
        .map(|g| g as f32)
        .collect())
}

fn check_map(h: usize, w: usize, k: usize, has_object: bool, labels: &LabelMap) -> Result<()> {
    if labels.shape() != (h, w) {
        return Err(Error::Shape(format!(
            "map {h}x{w} vs labels {}x{}",
            labels.shape().0,
            labels.shape().1
        )));
    }
    if !has_object {
        return Err(Error::Shape("loss needs the object channel".into()));
    }
    check_channels(k + 1, labels)
}
