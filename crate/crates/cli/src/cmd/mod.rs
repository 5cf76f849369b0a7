pub mod bench;
pub mod eval;
pub mod gen_synth;
pub mod prepare_labels;
pub mod score;
pub mod train_toy;

use std::fs;
use std::path::Path;

use uos_core::labels::{build_schema, ClassSchema, CustomTable, SchemaPreset};
use uos_core::synth::SceneConfig;
use uos_core::tensor_io::{read_tensor, write_tensor, Tensor};
use uos_core::{Error, Result};

use crate::settings::{value, Key, Settings};

pub const SCHEMA_KEY: Key = value(
    "schema",
    Some("grouped7"),
    "Class schema: grouped7, fine19, or a custom table file",
);

pub const SCENE_KEYS: &[Key] = &[
    value("scene-seed", Some("7"), "Scene generator seed"),
    value("height", Some("128"), "Scene height in pixels"),
    value("width", Some("128"), "Scene width in pixels"),
    value(
        "obstacle-density",
        Some("2"),
        "Expected obstacles per scene",
    ),
    value(
        "stain-density",
        Some("1.5"),
        "Expected road stains per scene",
    ),
    value("noise", Some("0.01"), "Sensor noise standard deviation"),
];

pub fn with_scene_keys(keys: &[Key]) -> Vec<Key> {
    [keys, SCENE_KEYS].concat()
}

pub fn schema_preset(s: &Settings) -> Result<SchemaPreset> {
    match s.required("schema")? {
        "grouped7" => Ok(SchemaPreset::Grouped7),
        "fine19" => Ok(SchemaPreset::Fine19),
        file => {
            let text = fs::read_to_string(file).map_err(|e| {
                Error::Config(format!(
                    "schema `{file}` is neither a preset nor a readable file: {e}"
                ))
            })?;
            Ok(SchemaPreset::Custom(CustomTable::parse(&text)?))
        }
    }
}

pub fn schema(s: &Settings) -> Result<ClassSchema> {
    build_schema(&schema_preset(s)?)
}

pub fn scene_config(s: &Settings) -> Result<SceneConfig> {
    let cfg = SceneConfig {
        seed: s.parse("scene-seed")?,
        height: s.parse("height")?,
        width: s.parse("width")?,
        obstacle_density: s.parse("obstacle-density")?,
        stain_density: s.parse("stain-density")?,
        noise: s.parse("noise")?,
        ..SceneConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn read(path: &Path) -> Result<Tensor> {
    read_tensor(path)
}

/// Writes `t`, creating missing parent directories.
pub fn write(t: &Tensor, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    write_tensor(t, path)
}

pub fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir)
            .map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display()))),
        _ => Ok(()),
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}
