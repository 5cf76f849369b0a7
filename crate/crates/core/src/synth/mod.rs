//! Deterministic synthetic driving scenes with road obstacles, and a small
//! per-pixel classifier trained on them.

pub mod benchmark;
pub mod features;
pub mod model;
pub mod scene;
pub mod train;

pub use benchmark::{
    evaluate_model, run_benchmark, run_setting, test_scene, BenchmarkConfig, BenchmarkResult,
    ModelEvaluation, SettingResult, TEST_INDEX_BASE,
};
pub use features::{extract_features, FeatureMap, FEATURE_DIM};
pub use model::{predict, ToyModel};
pub use scene::{generate_scene, Image, Scene, SceneConfig, Shape};
pub use train::{poly_lr, train_toy, CurvePoint, TrainConfig, TrainOutput};
