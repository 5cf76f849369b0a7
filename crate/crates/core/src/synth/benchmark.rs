//! Train-and-evaluate runs on the synthetic scenes, with and without OoD
//! supervision.

use serde::Serialize;

use crate::error::Result;
use crate::labels::{build_schema, make_eval_gt, remap_labels};
use crate::metrics::{
    argmax_predefined, label_class_ids, miou, EvalMode, EvalReport, MetricAccumulator, Quantizer,
};
use crate::scoring::{
    max_logit, softmax_entropy, unknown_objectness_score, unknown_score, Method, ScoreMap,
};
use crate::synth::features::extract_features;
use crate::synth::model::{predict, ToyModel};
use crate::synth::scene::{generate_scene, Scene, SceneConfig};
use crate::synth::train::{train_toy, CurvePoint, TrainConfig};

/// Test scenes use indices from here on, far from the training indices.
pub const TEST_INDEX_BASE: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub scene: SceneConfig,
    pub train: TrainConfig,
    pub test_scenes: usize,
    pub mode: EvalMode,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            scene: SceneConfig::default(),
            train: TrainConfig::default(),
            test_scenes: 200,
            mode: EvalMode::Exact,
        }
    }
}

/// Test scene `i`.
pub fn test_scene(scene_cfg: &SceneConfig, i: usize) -> Result<Scene> {
    generate_scene(scene_cfg, TEST_INDEX_BASE + i as u64)
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelEvaluation {
    /// One report per method, in [`Method::ALL`] order.
    pub reports: Vec<EvalReport>,
    pub miou: f64,
    /// Pixels where the unknown-objectness score exceeds the unknown score.
    pub dominance_violations: u64,
    pub pixels_checked: u64,
    /// Mean object probability over obstacle pixels.
    pub mean_object_prob_on_obstacles: f64,
}

impl ModelEvaluation {
    pub fn report(&self, method: Method) -> &EvalReport {
        let i = Method::ALL
            .iter()
            .position(|&m| m == method)
            .expect("known method");
        &self.reports[i]
    }
}

fn mode_for(mode: EvalMode, method: Method, k: usize) -> EvalMode {
    match mode {
        EvalMode::Exact => EvalMode::Exact,
        EvalMode::Streaming { bins, .. } => EvalMode::Streaming {
            bins,
            quantizer: Quantizer::for_method(method, k),
        },
    }
}

/// Scores every test scene with `model` and pools the metrics.
pub fn evaluate_model(
    model: &ToyModel,
    scene_cfg: &SceneConfig,
    train_cfg: &TrainConfig,
    test_scenes: usize,
    mode: EvalMode,
) -> Result<ModelEvaluation> {
    let schema = build_schema(&train_cfg.schema)?;
    let k = schema.k();
    let mut accs = Method::ALL
        .iter()
        .map(|&m| MetricAccumulator::new(mode_for(mode, m, k)))
        .collect::<Result<Vec<_>>>()?;
    let mut preds = Vec::with_capacity(test_scenes);
    let mut truths = Vec::with_capacity(test_scenes);
    let mut dominance_violations = 0u64;
    let mut pixels_checked = 0u64;
    let mut obstacle_prob_sum = 0.0f64;
    let mut obstacle_pixels = 0u64;
    for i in 0..test_scenes {
        let scene = test_scene(scene_cfg, i)?;
        let gt = make_eval_gt(&scene.obstacle_mask, &scene.roi_mask)?;
        let (probs, logits) = predict(model, &extract_features(&scene.image)?)?;
        let us = unknown_score(&probs);
        let uos = unknown_objectness_score(&probs)?;
        let scores: [ScoreMap; 4] = [us, uos, softmax_entropy(&logits), max_logit(&logits)];
        for (acc, s) in accs.iter_mut().zip(&scores) {
            acc.add(s, &gt)?;
        }
        let (us, uos) = (&scores[0], &scores[1]);
        for j in 0..us.len() {
            if uos.values()[j] > us.values()[j] || uos.rank_value(j) > us.rank_value(j) {
                dominance_violations += 1;
            }
        }
        pixels_checked += us.len() as u64;
        for (j, &o) in scene.obstacle_mask.as_slice().iter().enumerate() {
            if o {
                obstacle_prob_sum += probs.pixel(j)[k] as f64;
                obstacle_pixels += 1;
            }
        }
        preds.push(argmax_predefined(&probs));
        truths.push(label_class_ids(&remap_labels(
            &scene.semantic_ids,
            &schema,
        )?));
    }
    let reports = accs
        .into_iter()
        .zip(Method::ALL)
        .map(|(acc, m)| acc.finish(m.name()))
        .collect::<Result<Vec<_>>>()?;
    Ok(ModelEvaluation {
        reports,
        miou: miou(&preds, &truths, k)?,
        dominance_violations,
        pixels_checked,
        mean_object_prob_on_obstacles: if obstacle_pixels > 0 {
            obstacle_prob_sum / obstacle_pixels as f64
        } else {
            f64::NAN
        },
    })
}

#[derive(Debug, Clone)]
pub struct SettingResult {
    pub use_ood: bool,
    pub model: ToyModel,
    pub curve: Vec<CurvePoint>,
    pub evaluation: ModelEvaluation,
}

/// Trains one model (`use_ood` overrides the config) and evaluates it.
pub fn run_setting(cfg: &BenchmarkConfig, use_ood: bool) -> Result<SettingResult> {
    let train = TrainConfig {
        use_ood,
        ..cfg.train.clone()
    };
    let out = train_toy(&cfg.scene, &train)?;
    let evaluation = evaluate_model(&out.model, &cfg.scene, &train, cfg.test_scenes, cfg.mode)?;
    Ok(SettingResult {
        use_ood,
        model: out.model,
        curve: out.curve,
        evaluation,
    })
}

#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    pub with_ood: SettingResult,
    pub without_ood: SettingResult,
}

pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkResult> {
    Ok(BenchmarkResult {
        with_ood: run_setting(cfg, true)?,
        without_ood: run_setting(cfg, false)?,
    })
}
