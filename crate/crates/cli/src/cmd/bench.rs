use uos_core::bench::{random_gt, random_probs, time_metrics, time_scoring, Timing};
use uos_core::metrics::{EvalMode, Quantizer, DEFAULT_BINS};
use uos_core::scoring::{unknown_objectness_score, Method};
use uos_core::{Error, Result};

use super::write_text;
use crate::settings::{path, value, Key, Settings};

pub const ABOUT: &str = "Measure scoring and metric throughput on a random probability map";

pub const KEYS: &[Key] = &[
    value("height", Some("1024"), "Map height"),
    value("width", Some("2048"), "Map width"),
    value(
        "channels",
        Some("20"),
        "Channels including the object channel",
    ),
    value("reps", Some("100"), "Timed repetitions per kernel"),
    value("metric-mode", Some("streaming"), "exact or streaming"),
    value("seed", Some("1"), "Seed of the random map"),
    path("out", "Optional JSON-lines output"),
];

pub fn run(s: &Settings) -> Result<()> {
    let (h, w): (usize, usize) = (s.parse("height")?, s.parse("width")?);
    let channels: usize = s.parse("channels")?;
    if channels < 2 {
        return Err(Error::Config(
            "need at least one predefined and the object channel".into(),
        ));
    }
    let reps: usize = s.parse("reps")?;
    let seed: u64 = s.parse("seed")?;
    let mode = match s.required("metric-mode")? {
        "exact" => EvalMode::Exact,
        "streaming" => EvalMode::Streaming {
            bins: DEFAULT_BINS,
            quantizer: Quantizer::default(),
        },
        other => return Err(Error::Config(format!("unknown metric-mode `{other}`"))),
    };
    let probs = random_probs(h, w, channels - 1, seed)?;
    let gt = random_gt(h, w, 0.05, seed.wrapping_add(1))?;
    let uos = unknown_objectness_score(&probs)?;
    let timings: Vec<Timing> = vec![
        time_scoring(&probs, Method::Unknown, reps)?,
        time_scoring(&probs, Method::UnknownObjectness, reps)?,
        time_metrics(&uos, &gt, mode, reps)?,
    ];
    println!("map {h}x{w}x{channels}, single thread");
    for t in &timings {
        println!("{}", t.summary());
    }
    if let Some(p) = s.path_opt("out") {
        let lines: Vec<String> = timings
            .iter()
            .map(|t| serde_json::to_string(t).expect("timing serializes"))
            .collect();
        write_text(&p, &(lines.join("\n") + "\n"))?;
    }
    Ok(())
}
