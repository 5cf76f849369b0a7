use uos_core::labels::{eval_gt_to_tensor, make_eval_gt};
use uos_core::synth::{generate_scene, TEST_INDEX_BASE};
use uos_core::tensor_io::Tensor;
use uos_core::Result;

use super::{scene_config, with_scene_keys, write};
use crate::manifest::{Manifest, Record};
use crate::settings::{path, value, Key, Settings};

pub const ABOUT: &str = "Write synthetic evaluation scenes and a manifest";

const START: &str = "1000000";

pub const OWN_KEYS: &[Key] = &[
    path("out-dir", "Output directory"),
    value("count", Some("200"), "Number of scenes"),
    value(
        "start",
        Some(START),
        "First scene index (training uses 0..train-scenes)",
    ),
];

pub fn keys() -> Vec<Key> {
    with_scene_keys(OWN_KEYS)
}

pub fn run(s: &Settings) -> Result<()> {
    debug_assert_eq!(START.parse::<u64>().ok(), Some(TEST_INDEX_BASE));
    let cfg = scene_config(s)?;
    let out_dir = s.path("out-dir")?;
    let count: u64 = s.parse("count")?;
    let start: u64 = s.parse("start")?;
    let mut manifest = Manifest::new(&out_dir);
    for (k, v) in s.entries() {
        if k != "out-dir" {
            manifest.header.insert(format!("synth.{k}"), v.clone());
        }
    }
    for index in start..start + count {
        let scene = generate_scene(&cfg, index)?;
        let image = Tensor::real32(vec![cfg.height, cfg.width, 3], scene.image.data.clone())?;
        let gt = make_eval_gt(&scene.obstacle_mask, &scene.roi_mask)?;
        let files = [
            ("image", image),
            ("ids", scene.semantic_ids.to_tensor()),
            ("obstacle", scene.obstacle_mask.to_tensor()),
            ("roi", scene.roi_mask.to_tensor()),
            ("gt", eval_gt_to_tensor(&gt)),
        ];
        let mut rec = Record::default();
        rec.set("index", index.to_string());
        rec.set("seed", cfg.seed.to_string());
        for (field, t) in files {
            let name = format!("{index}_{field}.pxt");
            write(&t, &out_dir.join(&name))?;
            rec.set(field, name);
        }
        manifest.records.push(rec);
    }
    let path = out_dir.join("manifest.txt");
    manifest.write(&path)?;
    println!("wrote {count} scenes, manifest {}", path.display());
    Ok(())
}
