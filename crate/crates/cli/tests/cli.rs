use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use uos_core::grid::{Grid, Mask};
use uos_core::labels::{
    eval_gt_to_tensor, make_eval_gt, LabelMap, IGNORE_BIT, OBJECT_BIT, VOID_ID,
};
use uos_core::tensor_io::{read_tensor, write_tensor, Tensor, TensorData};

fn uos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uos"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = uos(args);
    assert!(
        out.status.success(),
        "uos {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str]) -> String {
    let out = uos(args);
    assert!(!out.status.success(), "uos {args:?} unexpectedly succeeded");
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(!err.trim().is_empty(), "no diagnostic on stderr");
    err
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn value(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in report"))
        .parse()
        .unwrap()
}

fn real32(path: &Path, dims: Vec<usize>, v: Vec<f32>) {
    write_tensor(&Tensor::real32(dims, v).unwrap(), path).unwrap();
}

#[test]
fn prepare_labels_grouped7_and_ood_from_void() {
    let dir = tempfile::tempdir().unwrap();
    let ids = dir.path().join("ids.pxt");
    // road, sidewalk, person, car, void, sky
    let t = Tensor::new(
        vec![2, 3],
        TensorData::Uint8(vec![0, 1, 11, 13, VOID_ID as u8, 10]),
    )
    .unwrap();
    write_tensor(&t, &ids).unwrap();
    let (labels, boundary) = (dir.path().join("l.pxt"), dir.path().join("b.pxt"));
    let out = ok(&[
        "prepare-labels",
        "--ids",
        s(&ids),
        "--out-labels",
        s(&labels),
        "--out-boundary",
        s(&boundary),
    ]);
    assert!(out.contains("classes K=7"));
    let l = LabelMap::from_tensor(&read_tensor(&labels).unwrap(), 7).unwrap();
    let bits = l.bits().as_slice();
    assert_eq!(bits[0], 1 << 0);
    assert_eq!(bits[1], 1 << 1);
    assert_eq!(bits[2], (1 << 2) | OBJECT_BIT);
    assert_eq!(bits[3], (1 << 3) | OBJECT_BIT);
    assert_eq!(bits[4], IGNORE_BIT);
    assert_eq!(bits[5], 1 << 6);
    assert_eq!(
        Mask::from_tensor(&read_tensor(&boundary).unwrap())
            .unwrap()
            .shape(),
        (2, 3)
    );

    ok(&[
        "prepare-labels",
        "--ids",
        s(&ids),
        "--out-labels",
        s(&labels),
        "--out-boundary",
        s(&boundary),
        "--ood-from-void",
    ]);
    let l = LabelMap::from_tensor(&read_tensor(&labels).unwrap(), 7).unwrap();
    assert_eq!(l.bits().as_slice()[4], OBJECT_BIT);
}

#[test]
fn prepare_labels_with_void_mask_and_custom_schema() {
    let dir = tempfile::tempdir().unwrap();
    let ids = dir.path().join("ids.pxt");
    write_tensor(
        &Grid::from_vec(1, 3, vec![4u32, 9, 4]).unwrap().to_tensor(),
        &ids,
    )
    .unwrap();
    let mask = dir.path().join("void.pxt");
    write_tensor(
        &Grid::from_vec(1, 3, vec![false, false, true])
            .unwrap()
            .to_tensor(),
        &mask,
    )
    .unwrap();
    let table = dir.path().join("schema.txt");
    fs::write(&table, "4 = thing\n9 = stuff\nobject_members = thing\n").unwrap();
    let (labels, boundary) = (dir.path().join("l.pxt"), dir.path().join("b.pxt"));
    ok(&[
        "prepare-labels",
        "--ids",
        s(&ids),
        "--void-mask",
        s(&mask),
        "--schema",
        s(&table),
        "--out-labels",
        s(&labels),
        "--out-boundary",
        s(&boundary),
        "--ood-from-void",
    ]);
    let l = LabelMap::from_tensor(&read_tensor(&labels).unwrap(), 2).unwrap();
    assert_eq!(l.bits().as_slice(), &[1 | OBJECT_BIT, 2, OBJECT_BIT]);
}

#[test]
fn missing_input_path_fails_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let err = fails(&[
        "prepare-labels",
        "--ids",
        "/nonexistent/ids.pxt",
        "--out-labels",
        s(&dir.path().join("l.pxt")),
        "--out-boundary",
        s(&dir.path().join("b.pxt")),
    ]);
    assert!(err.contains("/nonexistent/ids.pxt"), "{err}");
    let err = fails(&["prepare-labels", "--ids", "/nonexistent/ids.pxt"]);
    assert!(
        err.contains("out-labels") || err.contains("nonexistent"),
        "{err}"
    );
}

#[test]
fn score_methods_and_dominance() {
    let dir = tempfile::tempdir().unwrap();
    let probs = dir.path().join("p.pxt");
    let (h, w, k) = (4, 5, 3);
    let v: Vec<f32> = (0..h * w * (k + 1))
        .map(|i| ((i * 37) % 101) as f32 / 100.0)
        .collect();
    real32(&probs, vec![h, w, k + 1], v);
    let out_dir = dir.path().join("scores");
    ok(&[
        "score",
        "--probs",
        s(&probs),
        "--k",
        "3",
        "--methods",
        "us,uos",
        "--out-dir",
        s(&out_dir),
    ]);
    let us = read_tensor(out_dir.join("us.pxt")).unwrap();
    let uos_t = read_tensor(out_dir.join("uos.pxt")).unwrap();
    assert_eq!(us.dims(), &[h, w]);
    for (a, b) in uos_t
        .as_real32()
        .unwrap()
        .iter()
        .zip(us.as_real32().unwrap())
    {
        assert!(a <= b);
    }

    // K channels only: no object channel
    let plain = dir.path().join("plain.pxt");
    real32(&plain, vec![h, w, k], vec![0.5; h * w * k]);
    let err = fails(&[
        "score",
        "--probs",
        s(&plain),
        "--k",
        "3",
        "--methods",
        "uos",
        "--out-dir",
        s(&out_dir),
    ]);
    assert!(err.contains("object"), "{err}");
    ok(&[
        "score",
        "--probs",
        s(&plain),
        "--k",
        "3",
        "--methods",
        "us",
        "--out-dir",
        s(&out_dir),
    ]);

    // baselines need logits
    fails(&[
        "score",
        "--probs",
        s(&probs),
        "--k",
        "3",
        "--methods",
        "entropy",
        "--out-dir",
        s(&out_dir),
    ]);
    let logits = dir.path().join("z.pxt");
    real32(
        &logits,
        vec![h, w, k + 1],
        (0..h * w * (k + 1)).map(|i| (i % 7) as f32 - 3.0).collect(),
    );
    ok(&[
        "score",
        "--logits",
        s(&logits),
        "--k",
        "3",
        "--methods",
        "us,uos,entropy,maxlogit",
        "--out-dir",
        s(&out_dir),
    ]);
    assert!(out_dir.join("maxlogit.pxt").exists());
    fails(&[
        "score",
        "--probs",
        s(&probs),
        "--k",
        "3",
        "--methods",
        "bogus",
        "--out-dir",
        s(&out_dir),
    ]);
}

/// Three 2x3 images with per-image scores and obstacle/roi masks.
fn toy_eval_set(dir: &Path) -> (PathBuf, Vec<(u64, u64, u64)>) {
    let images: [(&[f32], &[bool], &[bool]); 3] = [
        (
            &[0.9, 0.8, 0.1, 0.2, 0.3, 0.7],
            &[true, false, false, false, false, true],
            &[true, true, true, true, true, false],
        ),
        (
            &[0.6, 0.5, 0.4, 0.95, 0.05, 0.15],
            &[false, false, true, true, false, false],
            &[true; 6],
        ),
        (
            &[0.33, 0.66, 0.99, 0.11, 0.22, 0.44],
            &[false, true, false, false, false, false],
            &[false, true, true, true, true, false],
        ),
    ];
    let mut lines = String::new();
    let mut counts = Vec::new();
    for (i, (scores, obstacle, roi)) in images.iter().enumerate() {
        let score = format!("s{i}.pxt");
        real32(&dir.join(&score), vec![2, 3], scores.to_vec());
        let ob = Grid::from_vec(2, 3, obstacle.to_vec()).unwrap();
        let ro = Grid::from_vec(2, 3, roi.to_vec()).unwrap();
        write_tensor(&ob.to_tensor(), dir.join(format!("o{i}.pxt"))).unwrap();
        write_tensor(&ro.to_tensor(), dir.join(format!("r{i}.pxt"))).unwrap();
        let gt = make_eval_gt(&ob, &ro).unwrap();
        write_tensor(&eval_gt_to_tensor(&gt), dir.join(format!("g{i}.pxt"))).unwrap();
        lines += &format!("score={score} obstacle=o{i}.pxt roi=r{i}.pxt gt=g{i}.pxt\n");
        let pos = (0..6).filter(|&j| obstacle[j] && roi[j]).count() as u64;
        let neg = (0..6).filter(|&j| !obstacle[j] && roi[j]).count() as u64;
        counts.push((pos, neg, 6 - pos - neg));
    }
    let manifest = dir.join("m.txt");
    fs::write(&manifest, format!("# dataset=toy\n{lines}")).unwrap();
    (manifest, counts)
}

#[test]
fn eval_pools_counts_and_modes_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, counts) = toy_eval_set(dir.path());
    let jsonl = dir.path().join("r.jsonl");
    let exact = ok(&[
        "eval",
        "--manifest",
        s(&manifest),
        "--method",
        "score",
        "--roi",
        "--jsonl",
        s(&jsonl),
    ]);
    let sum = counts
        .iter()
        .fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
    assert_eq!(value(&exact, "n_obstacle") as u64, sum.0);
    assert_eq!(value(&exact, "n_not_obstacle") as u64, sum.1);
    assert_eq!(value(&exact, "n_excluded") as u64, sum.2);
    assert!(exact.contains("# dataset=toy"));

    // the gt field gives the same result as obstacle + roi
    let via_gt = ok(&["eval", "--manifest", s(&manifest), "--method", "score"]);
    assert_eq!(value(&via_gt, "auroc"), value(&exact, "auroc"));

    let streaming = ok(&[
        "eval",
        "--manifest",
        s(&manifest),
        "--method",
        "score",
        "--roi",
        "--mode",
        "streaming",
    ]);
    assert!(streaming.contains("mode=streaming(65536)"));
    for key in ["auroc", "ap", "fpr95"] {
        assert!(
            (value(&exact, key) - value(&streaming, key)).abs() <= 0.002,
            "{key}"
        );
    }
    let record = fs::read_to_string(&jsonl).unwrap();
    assert_eq!(record.lines().count(), 1);
    let parsed = uos_core::metrics::EvalReport::from_json_line(record.trim()).unwrap();
    assert!((parsed.auroc - value(&exact, "auroc")).abs() < 1e-6);
}

#[test]
fn eval_roi_without_positives_fails() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    real32(&d.join("s.pxt"), vec![1, 3], vec![0.9, 0.1, 0.2]);
    let ob = Grid::from_vec(1, 3, vec![true, false, false]).unwrap();
    let roi = Grid::from_vec(1, 3, vec![false, true, true]).unwrap();
    write_tensor(&ob.to_tensor(), d.join("o.pxt")).unwrap();
    write_tensor(&roi.to_tensor(), d.join("r.pxt")).unwrap();
    fs::write(d.join("m.txt"), "score=s.pxt obstacle=o.pxt roi=r.pxt\n").unwrap();
    let err = fails(&[
        "eval",
        "--manifest",
        s(&d.join("m.txt")),
        "--method",
        "score",
        "--roi",
    ]);
    assert!(err.contains("degenerate"), "{err}");
}

#[test]
fn config_file_with_flag_override_and_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = toy_eval_set(dir.path());
    let cfg = dir.path().join("eval.cfg");
    fs::write(
        &cfg,
        "# evaluation settings\nmanifest = m.txt\nmethod = score\nroi = true\nmode = streaming\n",
    )
    .unwrap();
    let from_file = ok(&["eval", "--config", s(&cfg)]);
    assert!(from_file.contains("mode=streaming(65536)"));
    let overridden = ok(&["eval", "--config", s(&cfg), "--mode", "exact"]);
    assert!(overridden.contains("mode=exact"));
    let direct = ok(&[
        "eval",
        "--manifest",
        s(&manifest),
        "--method",
        "score",
        "--roi",
    ]);
    assert_eq!(value(&overridden, "ap"), value(&direct, "ap"));

    fs::write(&cfg, "manifest = m.txt\nmethdo = score\n").unwrap();
    let err = fails(&["eval", "--config", s(&cfg)]);
    assert!(err.contains("methdo"), "{err}");
}

#[test]
fn synthetic_pipeline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let scene = ["--height", "32", "--width", "32", "--obstacle-density", "4"];
    let run = |tag: &str| -> (String, Vec<u8>, Vec<u8>) {
        let test = d.join(format!("{tag}_test"));
        let model = d.join(format!("{tag}_model.json"));
        let scores = d.join(format!("{tag}_scores"));
        let mut args = vec!["gen-synth", "--out-dir", s(&test), "--count", "6"];
        args.extend(scene);
        ok(&args);
        let curve = d.join(format!("{tag}_curve.csv"));
        let mut args = vec![
            "train-toy",
            "--out-model",
            s(&model),
            "--out-curve",
            s(&curve),
            "--max-iters",
            "60",
            "--batch-pixels",
            "256",
            "--train-scenes",
            "4",
            "--ood-fraction",
            "0.5",
        ];
        args.extend(scene);
        ok(&args);
        let curve_text = fs::read_to_string(&curve).unwrap();
        assert!(curve_text.starts_with("iter,lr,loss\n0,0.01,"));
        ok(&[
            "score",
            "--model",
            s(&model),
            "--manifest",
            s(&test.join("manifest.txt")),
            "--methods",
            "us,uos,entropy,maxlogit",
            "--out-dir",
            s(&scores),
        ]);
        let report = ok(&[
            "eval",
            "--manifest",
            s(&scores.join("scores.txt")),
            "--method",
            "uos",
            "--roi",
        ]);
        (
            report
                .lines()
                .filter(|l| !l.starts_with("# eval.manifest"))
                .collect::<Vec<_>>()
                .join("\n"),
            fs::read(&model).unwrap(),
            fs::read(scores.join("1000000_uos.pxt")).unwrap(),
        )
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b);
    assert!(a.0.contains("# train.lambda=3"));
    assert!(a.0.contains("# train.lr0=0.01"));
    assert!(a.0.contains("# synth.count=6"));
}

#[test]
fn training_divergence_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let err = fails(&[
        "train-toy",
        "--out-model",
        s(&dir.path().join("m.json")),
        "--lr0",
        "1e30",
        "--max-iters",
        "20",
        "--batch-pixels",
        "64",
        "--train-scenes",
        "2",
        "--height",
        "32",
        "--width",
        "32",
    ]);
    assert!(err.contains("training failed"), "{err}");
    assert!(!dir.path().join("m.json").exists());
}

#[test]
fn bench_reports_mean_and_std_over_reps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.jsonl");
    let text = ok(&[
        "bench",
        "--height",
        "64",
        "--width",
        "64",
        "--reps",
        "100",
        "--out",
        s(&out),
    ]);
    for label in ["us:", "uos:", "metrics streaming"] {
        let line = text.lines().find(|l| l.starts_with(label)).unwrap();
        assert!(
            line.contains("100 reps") && line.contains("mean") && line.contains("std"),
            "{line}"
        );
    }
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 3);
}

#[test]
fn usage_errors() {
    assert!(!uos(&[]).status.success());
    assert!(!uos(&["frobnicate"]).status.success());
    fails(&["eval", "--manifest", "/nonexistent/m.txt"]);
}
