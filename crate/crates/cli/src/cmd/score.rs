use std::path::{Path, PathBuf};

use uos_core::scoring::{
    max_logit, softmax_entropy, unknown_objectness_score, unknown_score, Method, ScoreMap,
};
use uos_core::synth::{extract_features, predict, Image, ToyModel};
use uos_core::tensor_io::{LogitMap, ProbMap};
use uos_core::{Error, Result};

use super::{read, schema, write, SCHEMA_KEY};
use crate::manifest::{Manifest, Record};
use crate::settings::{path, value, Key, Settings};

pub const ABOUT: &str = "Compute per-pixel anomaly score maps";

pub const KEYS: &[Key] = &[
    path("probs", "Sigmoid probability map (H x W x C real32)"),
    path(
        "logits",
        "Logit map (H x W x C real32); probabilities follow by sigmoid",
    ),
    path("model", "Toy model file; scores `image` inputs"),
    path(
        "image",
        "RGB image tensor (H x W x 3 real32), used with --model",
    ),
    path(
        "manifest",
        "Batch mode: one record per image with probs/logits/image fields",
    ),
    value(
        "methods",
        Some("us,uos"),
        "Comma-separated methods: us, uos, entropy, maxlogit",
    ),
    value(
        "k",
        None,
        "Predefined class count (default: from the schema or model)",
    ),
    SCHEMA_KEY,
    path("out-dir", "Directory for score maps"),
];

/// Model outputs for one image.
struct Outputs {
    probs: ProbMap,
    logits: Option<LogitMap>,
}

struct Source<'a> {
    model: Option<&'a ToyModel>,
    k: usize,
}

impl Source<'_> {
    fn load(
        &self,
        probs: Option<PathBuf>,
        logits: Option<PathBuf>,
        image: Option<PathBuf>,
    ) -> Result<Outputs> {
        if let Some(model) = self.model {
            let image =
                image.ok_or_else(|| Error::Config("--model needs an image input".into()))?;
            let t = read(&image)?;
            let [h, w, 3] = t.dims() else {
                return Err(Error::Shape(format!(
                    "image must be H x W x 3, got {:?}",
                    t.dims()
                )));
            };
            let img = Image {
                height: *h,
                width: *w,
                data: t.as_real32()?.to_vec(),
            };
            let (probs, logits) = predict(model, &extract_features(&img)?)?;
            return Ok(Outputs {
                probs,
                logits: Some(logits),
            });
        }
        let logits = logits
            .map(|p| LogitMap::from_tensor(&read(&p)?, self.k))
            .transpose()?;
        let probs = match (probs, &logits) {
            (Some(p), _) => ProbMap::from_tensor(&read(&p)?, self.k)?,
            (None, Some(l)) => l.sigmoid(),
            (None, None) => {
                return Err(Error::Config(
                    "no input: give probs, logits or model + image".into(),
                ))
            }
        };
        Ok(Outputs { probs, logits })
    }
}

fn score(method: Method, out: &Outputs) -> Result<ScoreMap> {
    let logits = || {
        out.logits
            .as_ref()
            .ok_or_else(|| Error::Config(format!("method {} needs a logit map", method.name())))
    };
    match method {
        Method::Unknown => Ok(unknown_score(&out.probs)),
        Method::UnknownObjectness => unknown_objectness_score(&out.probs),
        Method::Entropy => Ok(softmax_entropy(logits()?)),
        Method::MaxLogit => Ok(max_logit(logits()?)),
    }
}

pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let methods = list
        .split(',')
        .map(str::trim)
        .filter(|m| !m.is_empty())
        .map(Method::parse)
        .collect::<Result<Vec<_>>>()?;
    if methods.is_empty() {
        return Err(Error::Config("no scoring method given".into()));
    }
    Ok(methods)
}

fn write_scores(
    methods: &[Method],
    out: &Outputs,
    dir: &Path,
    stem: &str,
) -> Result<Vec<(Method, String)>> {
    let mut written = Vec::new();
    for &m in methods {
        let name = format!("{stem}{}.pxt", m.name());
        write(&score(m, out)?.to_tensor(), &dir.join(&name))?;
        written.push((m, name));
    }
    Ok(written)
}

fn absolute(p: &Path) -> Result<String> {
    let p = std::path::absolute(p)
        .map_err(|e| Error::Config(format!("cannot resolve {}: {e}", p.display())))?;
    Ok(p.to_string_lossy().into_owned())
}

pub fn run(s: &Settings) -> Result<()> {
    let methods = parse_methods(s.required("methods")?)?;
    let out_dir = s.path("out-dir")?;
    let model = s.path_opt("model").map(ToyModel::load).transpose()?;
    let k = match (&model, s.parse_opt::<usize>("k")?) {
        (Some(m), _) => m.k(),
        (None, Some(k)) => k,
        (None, None) => schema(s)?.k(),
    };
    let source = Source {
        model: model.as_ref(),
        k,
    };

    let Some(manifest_path) = s.path_opt("manifest") else {
        let out = source.load(
            s.path_opt("probs"),
            s.path_opt("logits"),
            s.path_opt("image"),
        )?;
        for (m, name) in write_scores(&methods, &out, &out_dir, "")? {
            println!("{}={}", m.name(), out_dir.join(name).display());
        }
        return Ok(());
    };

    let input = Manifest::read(&manifest_path)?;
    let mut output = Manifest::new(&out_dir);
    output.header = input.header.clone();
    if let Some(m) = &model {
        output.header.extend(m.meta.clone());
    }
    output
        .header
        .insert("methods".into(), s.required("methods")?.to_string());
    for i in 0..input.records.len() {
        let out = source.load(
            input.path(i, "probs")?,
            input.path(i, "logits")?,
            input.path(i, "image")?,
        )?;
        let rec = &input.records[i];
        let stem = match rec.get("name").or(rec.get("index")) {
            Some(n) => format!("{n}_"),
            None => format!("{i:05}_"),
        };
        let mut r = Record::default();
        for key in ["name", "index", "seed"] {
            if let Some(v) = rec.get(key) {
                r.set(key, v);
            }
        }
        for key in ["gt", "obstacle", "roi"] {
            if let Some(p) = input.path(i, key)? {
                r.set(key, absolute(&p)?);
            }
        }
        for (m, name) in write_scores(&methods, &out, &out_dir, &stem)? {
            r.set(m.name(), name);
        }
        output.records.push(r);
    }
    let path = out_dir.join("scores.txt");
    output.write(&path)?;
    println!(
        "scored {} images, manifest {}",
        output.records.len(),
        path.display()
    );
    Ok(())
}
