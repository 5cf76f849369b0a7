//! Mini-batch SGD for the toy model with the boundary-aware loss.

use ndarray::{Array1, Array2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::labels::{
    assign_ood_labels, boundary_mask, build_schema, remap_labels, BoundaryMask, LabelMap,
    SchemaPreset, DEFAULT_BOUNDARY_RADIUS, IGNORE_BIT,
};
use crate::loss::{loss_from_logits, loss_grad_from_logits, LossConfig};
use crate::synth::features::{extract_features, FeatureMap, FEATURE_DIM};
use crate::synth::model::{column_sums, ToyModel, DEFAULT_HIDDEN};
use crate::synth::scene::{generate_scene, Scene, SceneConfig};

/// Polynomial decay `lr0 · (1 - iter / max_iter)^power`; zero once
/// `iter >= max_iter`.
pub fn poly_lr(iter: usize, max_iter: usize, lr0: f64, power: f64) -> f64 {
    if iter >= max_iter {
        return 0.0;
    }
    lr0 * (1.0 - iter as f64 / max_iter as f64).powf(power)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub schema: SchemaPreset,
    pub hidden: Vec<usize>,
    pub lr0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub poly_power: f64,
    pub max_iters: usize,
    /// Pixels per mini-batch.
    pub batch_pixels: usize,
    pub loss: LossConfig,
    pub boundary_radius: usize,
    /// Label the obstacles of the OoD training scenes as object-only. When
    /// false those pixels stay void and are ignored.
    pub use_ood: bool,
    /// Share of training scenes that contain obstacles.
    pub ood_fraction: f64,
    pub train_scenes: usize,
    pub seed: u64,
    /// Record the batch loss every this many iterations.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            schema: SchemaPreset::Grouped7,
            hidden: DEFAULT_HIDDEN.to_vec(),
            lr0: 0.01,
            momentum: 0.9,
            weight_decay: 1e-4,
            poly_power: 0.9,
            max_iters: 5000,
            batch_pixels: 4096,
            loss: LossConfig::default(),
            boundary_radius: DEFAULT_BOUNDARY_RADIUS,
            use_ood: true,
            ood_fraction: 0.2,
            train_scenes: 64,
            seed: 11,
            log_every: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad(format!("lr0 must be positive, got {}", self.lr0));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return bad(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            ));
        }
        if self.poly_power.is_nan() || self.poly_power < 0.0 {
            return bad(format!("poly_power must be >= 0, got {}", self.poly_power));
        }
        if self.max_iters == 0 || self.batch_pixels == 0 || self.train_scenes == 0 {
            return bad("max_iters, batch_pixels and train_scenes must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.ood_fraction) {
            return bad(format!(
                "ood_fraction must be in [0, 1], got {}",
                self.ood_fraction
            ));
        }
        if self.log_every == 0 {
            return bad("log_every must be positive".into());
        }
        Ok(())
    }

    /// Number of training scenes that contain obstacles.
    pub fn ood_scenes(&self) -> usize {
        (self.ood_fraction * self.train_scenes as f64).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub iter: usize,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: ToyModel,
    pub curve: Vec<CurvePoint>,
    /// Labelled (non-ignored) training pixels.
    pub n_train_pixels: usize,
    /// Training pixels labelled object-only.
    pub n_object_only_pixels: usize,
}

/// Training scene `index`; only the first `ood_scenes` scenes carry obstacles.
pub fn training_scene(scene_cfg: &SceneConfig, cfg: &TrainConfig, index: usize) -> Result<Scene> {
    let mut sc = scene_cfg.clone();
    if index >= cfg.ood_scenes() {
        sc.obstacle_density = 0.0;
    }
    generate_scene(&sc, index as u64)
}

/// Training labels of a scene under `cfg`.
pub fn training_labels(scene: &Scene, cfg: &TrainConfig) -> Result<LabelMap> {
    let schema = build_schema(&cfg.schema)?;
    let labels = remap_labels(&scene.semantic_ids, &schema)?;
    if cfg.use_ood {
        assign_ood_labels(&labels, &scene.obstacle_mask)
    } else {
        Ok(labels)
    }
}

/// Every labelled training pixel, flattened.
struct PixelPool {
    features: Vec<f32>,
    bits: Vec<u32>,
    boundary: Vec<bool>,
}

impl PixelPool {
    fn len(&self) -> usize {
        self.bits.len()
    }

    fn push_scene(&mut self, f: &FeatureMap, labels: &LabelMap, delta: &BoundaryMask) {
        for i in 0..f.pixels() {
            if labels.is_ignored(i) {
                continue;
            }
            self.features.extend_from_slice(f.pixel(i));
            self.bits.push(labels.bits().as_slice()[i]);
            self.boundary.push(delta.as_slice()[i]);
        }
    }
}

fn build_pool(scene_cfg: &SceneConfig, cfg: &TrainConfig) -> Result<PixelPool> {
    let mut pool = PixelPool {
        features: Vec::new(),
        bits: Vec::new(),
        boundary: Vec::new(),
    };
    for index in 0..cfg.train_scenes {
        let scene = training_scene(scene_cfg, cfg, index)?;
        let labels = training_labels(&scene, cfg)?;
        let delta = boundary_mask(&labels, cfg.boundary_radius);
        pool.push_scene(&extract_features(&scene.image)?, &labels, &delta);
    }
    if pool.len() == 0 {
        return Err(Error::Degenerate("no labelled training pixels".into()));
    }
    Ok(pool)
}

/// Per-feature mean and inverse standard deviation over the pool.
fn standardization(pool: &PixelPool) -> (Array1<f32>, Array1<f32>) {
    let n = pool.len() as f64;
    let mut sum = [0.0f64; FEATURE_DIM];
    let mut sq = [0.0f64; FEATURE_DIM];
    for px in pool.features.chunks_exact(FEATURE_DIM) {
        for d in 0..FEATURE_DIM {
            let v = px[d] as f64;
            sum[d] += v;
            sq[d] += v * v;
        }
    }
    let mean: Array1<f32> = sum.iter().map(|s| (s / n) as f32).collect();
    let scale: Array1<f32> = (0..FEATURE_DIM)
        .map(|d| {
            let m = sum[d] / n;
            let std = (sq[d] / n - m * m).max(0.0).sqrt();
            if std > 1e-6 {
                (1.0 / std) as f32
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

struct Batch {
    x: Array2<f32>,
    labels: LabelMap,
    delta: BoundaryMask,
}

fn sample_batch(pool: &PixelPool, k: usize, size: usize, rng: &mut ChaCha8Rng) -> Batch {
    let mut x = Vec::with_capacity(size * FEATURE_DIM);
    let mut bits = Vec::with_capacity(size);
    let mut delta = Vec::with_capacity(size);
    for _ in 0..size {
        let j = rng.random_range(0..pool.len());
        x.extend_from_slice(&pool.features[j * FEATURE_DIM..(j + 1) * FEATURE_DIM]);
        bits.push(pool.bits[j]);
        delta.push(pool.boundary[j]);
    }
    Batch {
        x: Array2::from_shape_vec((size, FEATURE_DIM), x).expect("batch shape"),
        labels: LabelMap::new(k, Grid::from_vec(1, size, bits).expect("batch shape"))
            .expect("pool bits are valid"),
        delta: Grid::from_vec(1, size, delta).expect("batch shape"),
    }
}

/// Weight and bias gradient of one layer.
type LayerGrad = (Array2<f32>, Array1<f32>);

/// Loss and parameter gradients (weights, biases per layer) on one batch.
fn loss_and_grads(
    model: &ToyModel,
    batch: &Batch,
    loss_cfg: &LossConfig,
) -> Result<(f64, Vec<LayerGrad>)> {
    let cache = model.forward_cached(batch.x.view());
    let acts = &cache.activations;
    let logits: Vec<f64> = acts.last().unwrap().iter().map(|&v| v as f64).collect();
    let loss = loss_from_logits(&logits, &batch.labels, &batch.delta, loss_cfg)?.total;
    let g = loss_grad_from_logits(&logits, &batch.labels, &batch.delta, loss_cfg)?;
    let mut upstream = Array2::from_shape_vec(
        acts.last().unwrap().raw_dim(),
        g.into_iter().map(|v| v as f32).collect(),
    )
    .expect("gradient shape");
    let mut grads = Vec::with_capacity(model.layers.len());
    for (l, layer) in model.layers.iter().enumerate().rev() {
        let input = &acts[l];
        grads.push((input.t().dot(&upstream), column_sums(&upstream)));
        if l > 0 {
            let mut down = upstream.dot(&layer.weights.t());
            Zip::from(&mut down).and(input).for_each(|d, &a| {
                if a <= 0.0 {
                    *d = 0.0;
                }
            });
            upstream = down;
        }
    }
    grads.reverse();
    Ok((loss, grads))
}

/// Trains a fresh model on the training split of `scene_cfg`.
pub fn train_toy(scene_cfg: &SceneConfig, cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    scene_cfg.validate()?;
    let schema = build_schema(&cfg.schema)?;
    let k = schema.k();
    let pool = build_pool(scene_cfg, cfg)?;
    let n_object_only_pixels = pool
        .bits
        .iter()
        .filter(|&&b| b == crate::labels::OBJECT_BIT)
        .count();
    debug_assert!(pool.bits.iter().all(|&b| b & IGNORE_BIT == 0));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = ToyModel::new(k, &cfg.hidden, &mut rng)?;
    let (mean, scale) = standardization(&pool);
    model.input_mean = mean;
    model.input_scale = scale;

    let mut velocity: Vec<(Array2<f32>, Array1<f32>)> = model
        .layers
        .iter()
        .map(|l| {
            (
                Array2::zeros(l.weights.raw_dim()),
                Array1::zeros(l.bias.len()),
            )
        })
        .collect();
    let mut curve = Vec::new();
    let (mu, wd) = (cfg.momentum as f32, cfg.weight_decay as f32);
    for iter in 0..cfg.max_iters {
        let lr = poly_lr(iter, cfg.max_iters, cfg.lr0, cfg.poly_power);
        let batch = sample_batch(&pool, k, cfg.batch_pixels, &mut rng);
        let (loss, grads) = loss_and_grads(&model, &batch, &cfg.loss)?;
        if !loss.is_finite() {
            return Err(Error::Training(format!(
                "loss became {loss} at iteration {iter}"
            )));
        }
        if iter % cfg.log_every == 0 || iter + 1 == cfg.max_iters {
            curve.push(CurvePoint { iter, lr, loss });
        }
        let lr = lr as f32;
        for ((layer, (vw, vb)), (gw, gb)) in model.layers.iter_mut().zip(&mut velocity).zip(grads) {
            Zip::from(&mut *vw)
                .and(&gw)
                .and(&layer.weights)
                .for_each(|v, &g, &p| {
                    *v = mu * *v + g + wd * p;
                });
            Zip::from(&mut *vb)
                .and(&gb)
                .and(&layer.bias)
                .for_each(|v, &g, &p| {
                    *v = mu * *v + g + wd * p;
                });
            layer.weights.scaled_add(-lr, vw);
            layer.bias.scaled_add(-lr, vb);
        }
        if model.parameters().iter().any(|v| !v.is_finite()) {
            return Err(Error::Training(format!(
                "parameters became non-finite at iteration {iter}"
            )));
        }
    }
    Ok(TrainOutput {
        model,
        curve,
        n_train_pixels: pool.len(),
        n_object_only_pixels,
    })
}
