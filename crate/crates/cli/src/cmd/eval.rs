use std::fs::OpenOptions;
use std::io::Write as _;

use uos_core::grid::Mask;
use uos_core::labels::{eval_gt_from_tensor, make_eval_gt, EvalGt};
use uos_core::metrics::{EvalMode, MetricAccumulator, Quantizer};
use uos_core::scoring::{Method, ScoreMap};
use uos_core::{Error, Result};

use super::{ensure_parent, read, schema, write_text, SCHEMA_KEY};
use crate::manifest::Manifest;
use crate::settings::{path, switch, value, Key, Settings};

pub const ABOUT: &str = "Pool score maps over a manifest and report AUROC, AP and FPR95";

pub const KEYS: &[Key] = &[
    path(
        "manifest",
        "One record per image: score field plus gt, or obstacle (+ roi)",
    ),
    value(
        "method",
        Some("uos"),
        "Record field holding the score map (falls back to `score`)",
    ),
    value("mode", Some("exact"), "exact or streaming"),
    value("bins", Some("65536"), "Histogram bins in streaming mode"),
    value(
        "quantizer",
        Some("auto"),
        "Streaming bin rule: auto, logodds, log or linear",
    ),
    value(
        "range",
        None,
        "Streaming bin range `lo,hi` in the quantizer's domain",
    ),
    switch(
        "roi",
        "Build ground truth from obstacle and roi masks (outside roi is excluded)",
    ),
    value(
        "k",
        None,
        "Predefined class count, sets the entropy bin range (default: schema)",
    ),
    SCHEMA_KEY,
    path("out", "Write the key=value report here"),
    path("jsonl", "Append the report as one JSON line here"),
];

fn ground_truth(m: &Manifest, i: usize, roi: bool) -> Result<EvalGt> {
    if roi {
        let obstacle = Mask::from_tensor(&read(&m.require_path(i, "obstacle")?)?)?;
        let roi = Mask::from_tensor(&read(&m.require_path(i, "roi")?)?)?;
        return make_eval_gt(&obstacle, &roi);
    }
    if let Some(p) = m.path(i, "gt")? {
        return eval_gt_from_tensor(&read(&p)?);
    }
    let obstacle = Mask::from_tensor(&read(&m.require_path(i, "obstacle")?)?)?;
    let everywhere = obstacle.map(|_| true);
    make_eval_gt(&obstacle, &everywhere)
}

fn quantizer(s: &Settings, auto: Quantizer) -> Result<Quantizer> {
    let range = match s.get("range") {
        None => None,
        Some(r) => {
            let parsed = r
                .split_once(',')
                .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
            Some(
                parsed
                    .ok_or_else(|| Error::Config(format!("invalid range `{r}`, expected lo,hi")))?,
            )
        }
    };
    let q = match (s.required("quantizer")?, range) {
        ("auto", None) => auto,
        ("auto", Some(_)) => return Err(Error::Config("range needs an explicit quantizer".into())),
        ("logodds", r) => {
            let (lo, hi) = r.unwrap_or((-28.0, 28.0));
            Quantizer::LogOdds { lo, hi }
        }
        ("log", r) => {
            let (lo, hi) = r.unwrap_or((-28.0, 0.0));
            Quantizer::Log { lo, hi }
        }
        ("linear", r) => {
            let (lo, hi) = r.unwrap_or((0.0, 1.0));
            Quantizer::Linear { lo, hi }
        }
        (other, _) => return Err(Error::Config(format!("unknown quantizer `{other}`"))),
    };
    q.validate()?;
    Ok(q)
}

pub fn run(s: &Settings) -> Result<()> {
    let manifest_path = s.path("manifest")?;
    let manifest = Manifest::read(&manifest_path)?;
    if manifest.records.is_empty() {
        return Err(Error::Degenerate("manifest has no records".into()));
    }
    let field = s.required("method")?.to_string();
    let method = Method::parse(&field).ok();
    let mode = match s.required("mode")? {
        "exact" => EvalMode::Exact,
        "streaming" => {
            let k = match s.parse_opt::<usize>("k")? {
                Some(k) => k,
                None => schema(s)?.k(),
            };
            let auto = method.map_or(Quantizer::default(), |m| Quantizer::for_method(m, k));
            EvalMode::Streaming {
                bins: s.parse("bins")?,
                quantizer: quantizer(s, auto)?,
            }
        }
        other => return Err(Error::Config(format!("unknown mode `{other}`"))),
    };
    let roi = s.flag("roi")?;
    let mut acc = MetricAccumulator::new(mode)?;
    for i in 0..manifest.records.len() {
        let score_path = match manifest.path(i, &field)? {
            Some(p) => p,
            None => manifest.require_path(i, "score")?,
        };
        let scores = ScoreMap::from_tensor(&read(&score_path)?)?;
        let gt = ground_truth(&manifest, i, roi)?;
        acc.add(&scores, &gt).map_err(|e| match e {
            Error::Shape(msg) => Error::Shape(format!("record {}: {msg}", i + 1)),
            other => other,
        })?;
    }
    let mut report = acc.finish(&field)?;
    report.config = manifest.header.clone();
    report
        .config
        .insert("eval.manifest".into(), manifest_path.display().to_string());
    report
        .config
        .insert("eval.mode".into(), report.mode.clone());
    report.config.insert("eval.roi".into(), roi.to_string());
    report
        .config
        .insert("eval.images".into(), manifest.records.len().to_string());

    let text = report.to_key_value();
    print!("{text}");
    if let Some(p) = s.path_opt("out") {
        write_text(&p, &text)?;
    }
    if let Some(p) = s.path_opt("jsonl") {
        ensure_parent(&p)?;
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&p)
            .map_err(|e| Error::Config(format!("cannot open {}: {e}", p.display())))?;
        writeln!(f, "{}", report.to_json_line())
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", p.display())))?;
    }
    Ok(())
}
