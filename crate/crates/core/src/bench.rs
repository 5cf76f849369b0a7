//! Wall-clock measurements of the scoring and metric kernels.

use std::hint::black_box;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::labels::{EvalGt, GtState};
use crate::metrics::{EvalMode, MetricAccumulator};
use crate::scoring::{unknown_objectness_score, unknown_score, Method, ScoreMap};
use crate::tensor_io::ProbMap;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub label: String,
    pub reps: usize,
    pub pixels: usize,
    pub mean_ms: f64,
    /// Sample standard deviation over repetitions.
    pub std_ms: f64,
    pub pixels_per_sec: f64,
}

impl Timing {
    fn from_samples(label: &str, pixels: usize, samples_ms: &[f64]) -> Timing {
        let n = samples_ms.len() as f64;
        let mean = samples_ms.iter().sum::<f64>() / n;
        let var = if samples_ms.len() > 1 {
            samples_ms
                .iter()
                .map(|s| (s - mean) * (s - mean))
                .sum::<f64>()
                / (n - 1.0)
        } else {
            0.0
        };
        Timing {
            label: label.to_string(),
            reps: samples_ms.len(),
            pixels,
            mean_ms: mean,
            std_ms: var.sqrt(),
            pixels_per_sec: pixels as f64 / (mean / 1000.0),
        }
    }

    pub fn summary(&self) -> String {
        format!(
            "{}: {} px, {} reps, mean {:.2} ms, std {:.2} ms, {:.3e} px/s",
            self.label, self.pixels, self.reps, self.mean_ms, self.std_ms, self.pixels_per_sec
        )
    }
}

/// Uniform random probabilities, object channel included.
pub fn random_probs(height: usize, width: usize, k: usize, seed: u64) -> Result<ProbMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..height * width * (k + 1))
        .map(|_| rng.random::<f32>())
        .collect();
    ProbMap::new(height, width, k, true, values)
}

fn time_reps(reps: usize, mut f: impl FnMut()) -> Result<Vec<f64>> {
    if reps == 0 {
        return Err(Error::Config("reps must be positive".into()));
    }
    // warm-up
    f();
    Ok((0..reps)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64() * 1000.0
        })
        .collect())
}

/// Times the unknown or unknown-objectness score over `p`.
pub fn time_scoring(p: &ProbMap, method: Method, reps: usize) -> Result<Timing> {
    let samples = match method {
        Method::Unknown => time_reps(reps, || {
            black_box(unknown_score(black_box(p)));
        })?,
        Method::UnknownObjectness => {
            unknown_objectness_score(p)?;
            time_reps(reps, || {
                black_box(unknown_objectness_score(black_box(p)).expect("object channel"));
            })?
        }
        other => {
            return Err(Error::Config(format!(
                "scoring benchmark covers us and uos, not {}",
                other.name()
            )))
        }
    };
    Ok(Timing::from_samples(method.name(), p.pixels(), &samples))
}

/// Times pooling one score map into an evaluation and computing all three
/// metrics.
pub fn time_metrics(scores: &ScoreMap, gt: &EvalGt, mode: EvalMode, reps: usize) -> Result<Timing> {
    let run = || -> Result<()> {
        let mut acc = MetricAccumulator::new(mode)?;
        acc.add(scores, gt)?;
        black_box(acc.finish("bench")?);
        Ok(())
    };
    run()?;
    let samples = time_reps(reps, || run().expect("validated above"))?;
    Ok(Timing::from_samples(
        &format!("metrics {}", mode.label()),
        scores.len(),
        &samples,
    ))
}

/// Random ground truth with about `obstacle_share` obstacle pixels and no
/// exclusions.
pub fn random_gt(height: usize, width: usize, obstacle_share: f64, seed: u64) -> Result<EvalGt> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = (0..height * width)
        .map(|_| {
            if rng.random_bool(obstacle_share) {
                GtState::Obstacle
            } else {
                GtState::NotObstacle
            }
        })
        .collect();
    Grid::from_vec(height, width, cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timing_statistics() {
        let t = Timing::from_samples("x", 1000, &[1.0, 3.0]);
        assert_eq!(t.mean_ms, 2.0);
        assert!((t.std_ms - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(t.pixels_per_sec, 500_000.0);
    }

    #[test]
    fn scoring_and_metric_timings_run() {
        let p = random_probs(16, 16, 4, 1).unwrap();
        let t = time_scoring(&p, Method::UnknownObjectness, 3).unwrap();
        assert_eq!((t.reps, t.pixels), (3, 256));
        assert!(time_scoring(&p, Method::Entropy, 3).is_err());
        let s = unknown_score(&p);
        let gt = random_gt(16, 16, 0.3, 2).unwrap();
        let m = time_metrics(&s, &gt, EvalMode::Exact, 2).unwrap();
        assert_eq!(m.pixels, 256);
    }
}
