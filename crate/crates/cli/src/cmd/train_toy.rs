use std::fmt::Write as _;

use uos_core::loss::{BceForm, LossConfig};
use uos_core::synth::{train_toy, TrainConfig};
use uos_core::{Error, Result};

use super::{scene_config, schema_preset, with_scene_keys, write_text, SCHEMA_KEY};
use crate::settings::{path, value, Key, Settings};

pub const ABOUT: &str = "Train the per-pixel toy model on synthetic scenes";

pub const OWN_KEYS: &[Key] = &[
    path("out-model", "Output model file (JSON)"),
    path("out-curve", "Optional training curve (CSV: iter,lr,loss)"),
    SCHEMA_KEY,
    value("hidden", Some("32,32"), "Hidden layer widths"),
    value("lr0", Some("0.01"), "Initial learning rate"),
    value("momentum", Some("0.9"), "SGD momentum"),
    value("weight-decay", Some("0.0001"), "L2 weight decay"),
    value("poly-power", Some("0.9"), "Poly schedule power"),
    value("max-iters", Some("5000"), "Training iterations"),
    value("batch-pixels", Some("4096"), "Pixels per mini-batch"),
    value("lambda", Some("3"), "Boundary term weight"),
    value("eps", Some("1e-7"), "Probability clamp in the loss"),
    value(
        "bce-form",
        Some("standard"),
        "standard, or alternative (printed variant, comparison only)",
    ),
    value("boundary-radius", Some("2"), "Boundary region radius"),
    value(
        "use-ood",
        Some("true"),
        "Supervise obstacle pixels as object-only",
    ),
    value(
        "ood-fraction",
        Some("0.2"),
        "Share of training scenes containing obstacles",
    ),
    value("train-scenes", Some("64"), "Number of training scenes"),
    value("seed", Some("11"), "Initialization and sampling seed"),
    value("log-every", Some("50"), "Curve sampling interval"),
];

pub fn keys() -> Vec<Key> {
    with_scene_keys(OWN_KEYS)
}

pub fn train_config(s: &Settings) -> Result<TrainConfig> {
    let hidden = s
        .required("hidden")?
        .split(',')
        .map(|w| {
            w.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("invalid hidden width `{w}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let form = match s.required("bce-form")? {
        "standard" => BceForm::Standard,
        "alternative" => BceForm::Alternative,
        other => return Err(Error::Config(format!("unknown bce-form `{other}`"))),
    };
    let cfg = TrainConfig {
        schema: schema_preset(s)?,
        hidden,
        lr0: s.parse("lr0")?,
        momentum: s.parse("momentum")?,
        weight_decay: s.parse("weight-decay")?,
        poly_power: s.parse("poly-power")?,
        max_iters: s.parse("max-iters")?,
        batch_pixels: s.parse("batch-pixels")?,
        loss: LossConfig {
            lambda: s.parse("lambda")?,
            clamp_eps: s.parse("eps")?,
            form,
        },
        boundary_radius: s.parse("boundary-radius")?,
        use_ood: s.flag("use-ood")?,
        ood_fraction: s.parse("ood-fraction")?,
        train_scenes: s.parse("train-scenes")?,
        seed: s.parse("seed")?,
        log_every: s.parse("log-every")?,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(s: &Settings) -> Result<()> {
    let scene = scene_config(s)?;
    let cfg = train_config(s)?;
    let out_model = s.path("out-model")?;
    let out = train_toy(&scene, &cfg)?;
    let mut model = out.model;
    for (k, v) in s.entries() {
        if !k.starts_with("out-") {
            model.meta.insert(format!("train.{k}"), v.clone());
        }
    }
    super::ensure_parent(&out_model)?;
    model.save(&out_model)?;
    if let Some(p) = s.path_opt("out-curve") {
        let mut csv = String::from("iter,lr,loss\n");
        for pt in &out.curve {
            let _ = writeln!(csv, "{},{},{}", pt.iter, pt.lr, pt.loss);
        }
        write_text(&p, &csv)?;
    }
    let first = out.curve.first().map_or(f64::NAN, |p| p.loss);
    let last = out.curve.last().map_or(f64::NAN, |p| p.loss);
    println!(
        "trained on {} labelled pixels ({} object-only), loss {first:.4} -> {last:.4}, model {}",
        out.n_train_pixels,
        out.n_object_only_pixels,
        out_model.display()
    );
    Ok(())
}
