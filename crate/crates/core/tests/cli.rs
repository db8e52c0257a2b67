use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use specklenet::model::Parameters;
use specklenet::pipeline::{synth_speckle, SpeckleParams};
use specklenet::{canonical_spec, save_weights, Model, Taxonomy};

fn specklenet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specklenet"))
        .args(args)
        .env_remove("SPECKLENET_TAXONOMY")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn error_line(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|_| panic!("stderr: {}", String::from_utf8_lossy(&o.stderr)))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Weights whose output is always `class`, whatever the input.
fn constant_model(dir: &Path, class: usize, bias: f32) -> PathBuf {
    let spec = canonical_spec();
    let mut model = Model::<f32>::from_parts(spec.clone(), Parameters::zeros(&spec).unwrap()).unwrap();
    let (key, _) = model.params().iter().last().unwrap();
    model.params_mut().get_mut(key).unwrap().data_mut()[class] = bias;
    let path = dir.join(format!("class{class}.spkn"));
    save_weights(&model, &path).unwrap();
    path
}

fn write_images(dir: &Path, class: &str, count: u64) -> PathBuf {
    let mut manifest = String::new();
    for i in 0..count {
        let params = SpeckleParams {
            seed: i,
            ..Default::default()
        };
        let name = format!("{class}_{i}.pgm");
        synth_speckle(&params, 24, 24).unwrap().save(dir.join(&name)).unwrap();
        manifest.push_str(&format!("{name}\t{class}\n"));
    }
    let path = dir.join(format!("{class}.tsv"));
    fs::write(&path, manifest).unwrap();
    path
}

fn tree_bytes(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn inspect_reports_canonical_budget() {
    let o = specklenet(&["inspect", "canonical"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("total parameters: 341307"), "{text}");
    assert!(text.contains("weight payload: 1365228 bytes"));

    let j: Value = serde_json::from_str(&stdout(&specklenet(&[
        "--json",
        "inspect",
        "canonical",
        "--side",
        "128",
    ])))
    .unwrap();
    assert_eq!(j["total_parameters"], 341307);
    assert_eq!(j["layers"].as_array().unwrap().len(), 17);
}

#[test]
fn help_and_usage_errors() {
    for sub in ["synth", "train", "eval", "classify", "bench", "inspect"] {
        let o = specklenet(&[sub, "--help"]);
        assert!(o.status.success(), "{sub}");
        assert!(stdout(&o).contains("Usage"), "{sub}");
    }
    let o = specklenet(&["inspect", "canonical", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_line(&o)["kind"], "usage");
    assert_eq!(
        specklenet(&["inspect", "canonical", "--side", "2"]).status.code(),
        Some(2)
    );
    assert_eq!(specklenet(&[]).status.code(), Some(2));
}

#[test]
fn missing_and_malformed_inputs_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = specklenet(&[
        "classify",
        "--weights",
        "/nonexistent.spkn",
        "--image",
        "/nonexistent.pgm",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_line(&o)["exit_code"], 3);

    let weights = constant_model(dir.path(), 0, 1.0);
    let manifest = dir.path().join("bad.tsv");
    fs::write(&manifest, "a.pgm\tunobtainium\n").unwrap();
    let o = specklenet(&[
        "eval",
        "--weights",
        s(&weights),
        "--manifest",
        s(&manifest),
        "--side",
        "16",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(error_line(&o)["error"].as_str().unwrap().contains("unobtainium"));

    let garbage = dir.path().join("garbage.spkn");
    fs::write(&garbage, b"not a weight file").unwrap();
    assert_eq!(specklenet(&["inspect", s(&garbage)]).status.code(), Some(3));
}

#[test]
fn nonfinite_weights_are_numeric_errors() {
    let dir = tempfile::tempdir().unwrap();
    let weights = constant_model(dir.path(), 0, f32::NAN);
    write_images(dir.path(), "pvc", 1);
    let image = dir.path().join("pvc_0.pgm");
    let o = specklenet(&[
        "classify",
        "--weights",
        s(&weights),
        "--image",
        s(&image),
        "--side",
        "16",
    ]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(error_line(&o)["kind"], "numeric");
}

#[test]
fn classify_prints_decision_with_refusal_for_hazards() {
    let dir = tempfile::tempdir().unwrap();
    let taxonomy = Taxonomy::default_config();
    let pvc = taxonomy.class_id("pvc").unwrap();
    let weights = constant_model(dir.path(), pvc, 20.0);
    write_images(dir.path(), "pvc", 1);
    let o = specklenet(&[
        "classify",
        "--weights",
        s(&weights),
        "--image",
        s(&dir.path().join("pvc_0.pgm")),
        "--side",
        "32",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1);
    let d: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(d["class"], "pvc");
    assert_eq!(d["class_id"], pvc);
    assert_eq!(d["family5"], "hazardous");
    assert_eq!(d["allowed"], false);
    assert_eq!(d["refusal_reason"], "hazardous_material");
    assert!(d["confidence"].as_f64().unwrap() > 0.99);
    for key in ["family9", "preset"] {
        assert!(!d[key].is_null(), "{key}");
    }
}

#[test]
fn eval_of_perfect_predictions_at_every_granularity() {
    let dir = tempfile::tempdir().unwrap();
    let taxonomy = Taxonomy::default_config();
    let weights = constant_model(dir.path(), taxonomy.class_id("hardwood_walnut").unwrap(), 10.0);
    let manifest = write_images(dir.path(), "hardwood_walnut", 6);
    for g in ["fine", "nine", "five"] {
        let report = dir.path().join(format!("{g}.csv"));
        let o = specklenet(&[
            "--json",
            "eval",
            "--weights",
            s(&weights),
            "--manifest",
            s(&manifest),
            "--granularity",
            g,
            "--side",
            "16",
            "--report-out",
            s(&report),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let j: Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(j["accuracy"], 1.0, "{g}");
        assert_eq!(j["samples"], 6);
        assert!(fs::read_to_string(&report)
            .unwrap()
            .starts_with("label,support,precision,recall,f1,"));
    }
    let o = specklenet(&[
        "eval",
        "--weights",
        s(&weights),
        "--manifest",
        s(&manifest),
        "--granularity",
        "seven",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn synth_and_train_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let synth = |name: &str| {
        let out = dir.path().join(name);
        let o = specklenet(&[
            "synth",
            "--out-dir",
            s(&out),
            "--classes",
            "3",
            "--per-class",
            "5",
            "--resolution",
            "16",
            "--seed",
            "9",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (synth("a"), synth("b"));
    assert_eq!(tree_bytes(&a), tree_bytes(&b));

    let config = dir.path().join("train.json");
    fs::write(&config, r#"{"max_epochs": 2, "batch_size": 4}"#).unwrap();
    let train = |root: &Path| {
        let weights = root.join("model.spkn");
        let o = specklenet(&[
            "--json",
            "train",
            "--manifest-train",
            s(&root.join("train.tsv")),
            "--manifest-val",
            s(&root.join("val.tsv")),
            "--config",
            s(&config),
            "--out-weights",
            s(&weights),
            "--side",
            "16",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let j: Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(j["epochs_run"], 2);
        assert_eq!(j["seed"], 42);
        (
            fs::read(&weights).unwrap(),
            fs::read_to_string(root.join("model.spkn.history.csv")).unwrap(),
        )
    };
    let (wa, ha) = train(&a);
    assert_eq!((wa, ha.clone()), train(&b));
    assert_eq!(ha.lines().count(), 3);

    let image = fs::read_dir(a.join(&Taxonomy::default_config().classes()[0].name))
        .unwrap()
        .map(|e| e.unwrap().path())
        .min()
        .unwrap();
    let o = specklenet(&[
        "classify",
        "--weights",
        s(&a.join("model.spkn")),
        "--image",
        s(&image),
        "--side",
        "16",
    ]);
    assert!(o.status.success());
    let d: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    for key in ["class", "confidence", "family9", "family5", "preset", "allowed"] {
        assert!(!d[key].is_null(), "{key} missing from {d}");
    }
}
