//! Per-pixel multilayer perceptron with a sigmoid head.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::features::{FeatureMap, FEATURE_DIM};
use crate::tensor_io::{sigmoid, LogitMap, ProbMap};

pub const DEFAULT_HIDDEN: [usize; 2] = [32, 32];

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `inputs × outputs`
    pub weights: Array2<f32>,
    pub bias: Array1<f32>,
}

/// Inputs are standardized with a stored per-feature mean and scale, then
/// pass through ReLU hidden layers into `k + 1` sigmoid outputs (predefined
/// classes followed by the object class).
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    k: usize,
    pub input_mean: Array1<f32>,
    pub input_scale: Array1<f32>,
    pub layers: Vec<Dense>,
    /// Free-form provenance (training settings), saved with the weights.
    pub meta: BTreeMap<String, String>,
}

/// Activations kept for back-propagation: the standardized input followed by
/// every layer output (ReLU applied to hidden layers, raw logits last).
pub(crate) struct ForwardCache {
    pub activations: Vec<Array2<f32>>,
}

impl ToyModel {
    /// He-initialized weights, zero biases, identity standardization.
    pub fn new(k: usize, hidden: &[usize], rng: &mut impl Rng) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config(
                "model needs at least one predefined class".into(),
            ));
        }
        if hidden.contains(&0) {
            return Err(Error::Config("hidden layers must be non-empty".into()));
        }
        let mut sizes = vec![FEATURE_DIM];
        sizes.extend_from_slice(hidden);
        sizes.push(k + 1);
        let layers = sizes
            .windows(2)
            .map(|io| {
                let std = (2.0 / io[0] as f64).sqrt() as f32;
                let normal = Normal::new(0.0f32, std).expect("positive std");
                Dense {
                    weights: Array2::from_shape_fn((io[0], io[1]), |_| normal.sample(rng)),
                    bias: Array1::zeros(io[1]),
                }
            })
            .collect();
        Ok(ToyModel {
            k,
            input_mean: Array1::zeros(FEATURE_DIM),
            input_scale: Array1::ones(FEATURE_DIM),
            layers,
            meta: BTreeMap::new(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn outputs(&self) -> usize {
        self.k + 1
    }

    /// Layer widths from input to output.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].weights.nrows()];
        sizes.extend(self.layers.iter().map(|l| l.weights.ncols()));
        sizes
    }

    fn standardize(&self, raw: ArrayView2<f32>) -> Array2<f32> {
        (&raw - &self.input_mean) * &self.input_scale
    }

    pub(crate) fn forward_cached(&self, raw: ArrayView2<f32>) -> ForwardCache {
        let mut activations = vec![self.standardize(raw)];
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = activations.last().unwrap().dot(&layer.weights) + &layer.bias;
            if i + 1 < self.layers.len() {
                out.mapv_inplace(|v| v.max(0.0));
            }
            activations.push(out);
        }
        ForwardCache { activations }
    }

    /// Logits for a `pixels × FEATURE_DIM` batch of raw features.
    pub fn logits(&self, raw: ArrayView2<f32>) -> Array2<f32> {
        self.forward_cached(raw).activations.pop().unwrap()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(&ModelFile::from(self)).expect("model serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("bad model file {}: {e}", path.display())))?;
        file.try_into()
    }

    /// All parameters in a fixed order, for bitwise comparisons.
    pub fn parameters(&self) -> Vec<f32> {
        let mut out: Vec<f32> = self
            .input_mean
            .iter()
            .chain(self.input_scale.iter())
            .copied()
            .collect();
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }
}

/// Logits and sigmoid probabilities for every pixel of a feature map.
pub fn predict(model: &ToyModel, features: &FeatureMap) -> Result<(ProbMap, LogitMap)> {
    if features.data.len() != features.pixels() * FEATURE_DIM {
        return Err(Error::Shape(format!(
            "feature map holds {} values, expected {} x {FEATURE_DIM}",
            features.data.len(),
            features.pixels()
        )));
    }
    if model.layer_sizes()[0] != FEATURE_DIM {
        return Err(Error::Shape(
            "model input width does not match features".into(),
        ));
    }
    let x = ArrayView2::from_shape((features.pixels(), FEATURE_DIM), &features.data)
        .expect("checked length");
    let z = model.logits(x);
    let values: Vec<f32> = z.into_iter().collect();
    let logits = LogitMap::new(features.height, features.width, model.k, true, values)?;
    let probs = ProbMap::new(
        features.height,
        features.width,
        model.k,
        true,
        logits.values().iter().map(|&v| sigmoid(v)).collect(),
    )?;
    Ok((probs, logits))
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    k: usize,
    layer_sizes: Vec<usize>,
    input_mean: Vec<f32>,
    input_scale: Vec<f32>,
    weights: Vec<Vec<f32>>,
    biases: Vec<Vec<f32>>,
    #[serde(default)]
    meta: BTreeMap<String, String>,
}

impl From<&ToyModel> for ModelFile {
    fn from(m: &ToyModel) -> Self {
        ModelFile {
            k: m.k,
            layer_sizes: m.layer_sizes(),
            input_mean: m.input_mean.to_vec(),
            input_scale: m.input_scale.to_vec(),
            weights: m
                .layers
                .iter()
                .map(|l| l.weights.iter().copied().collect())
                .collect(),
            biases: m.layers.iter().map(|l| l.bias.to_vec()).collect(),
            meta: m.meta.clone(),
        }
    }
}

impl TryFrom<ModelFile> for ToyModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        let bad = |msg: &str| Error::Format(format!("model file: {msg}"));
        let sizes = &f.layer_sizes;
        if sizes.len() < 2 || sizes[0] != FEATURE_DIM || *sizes.last().unwrap() != f.k + 1 {
            return Err(bad("layer sizes do not match feature and class counts"));
        }
        if f.weights.len() != sizes.len() - 1 || f.biases.len() != sizes.len() - 1 {
            return Err(bad("layer count mismatch"));
        }
        if f.input_mean.len() != FEATURE_DIM || f.input_scale.len() != FEATURE_DIM {
            return Err(bad("standardization vectors have the wrong length"));
        }
        let layers = sizes
            .windows(2)
            .zip(f.weights.into_iter().zip(f.biases))
            .map(|(io, (w, b))| {
                let weights = Array2::from_shape_vec((io[0], io[1]), w)
                    .map_err(|_| bad("weight matrix has the wrong size"))?;
                if b.len() != io[1] {
                    return Err(bad("bias has the wrong size"));
                }
                Ok(Dense {
                    weights,
                    bias: Array1::from(b),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ToyModel {
            k: f.k,
            input_mean: Array1::from(f.input_mean),
            input_scale: Array1::from(f.input_scale),
            layers,
            meta: f.meta,
        })
    }
}

/// Column sums, used for bias gradients.
pub(crate) fn column_sums(a: &Array2<f32>) -> Array1<f32> {
    a.sum_axis(Axis(0))
}
