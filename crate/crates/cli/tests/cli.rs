use std::path::Path;
use std::process::{Command, Output};

use rand::SeedableRng;
use receipt_core::synthgen::{procedural_background, procedural_receipt, BackgroundKind};
use receipt_core::RasterImage;

fn receipt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_receipt")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_corpora(root: &Path) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    std::fs::create_dir_all(root.join("r")).unwrap();
    std::fs::create_dir_all(root.join("b")).unwrap();
    for i in 0..2 {
        procedural_receipt(&mut rng, 120, 300).save(&root.join(format!("r/{i}.png"))).unwrap();
    }
    // Landscape receipts are reported and skipped.
    RasterImage::rgb(300, 100, [255, 255, 255]).save(&root.join("r/wide.png")).unwrap();
    procedural_background(&mut rng, BackgroundKind::Textured, 90, 160)
        .save(&root.join("b/bg.jpg"))
        .unwrap();
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    write_corpora(dir.path());
    let p = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    for out in ["o1", "o2"] {
        let o = receipt(&[
            "generate", "--receipts", &p("r"), "--backgrounds", &p("b"), "--out", &p(out), "--seed", "7",
            "--variants", "2", "--threads", "2",
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stderr).contains("wide.png"));
    }
    for f in ["manifest.jsonl", "ground_truth.jsonl", "summary.json", "images/000005.png"] {
        assert_eq!(std::fs::read(dir.path().join("o1").join(f)).unwrap(), std::fs::read(dir.path().join("o2").join(f)).unwrap(), "{f}");
    }
    let manifest = std::fs::read_to_string(dir.path().join("o1/manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 6);
}

#[test]
fn detect_then_evaluate_and_mismatched_ids() {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    std::fs::create_dir_all(dir.path().join("img")).unwrap();
    let img = RasterImage::from_fn_gray(300, 400, |x, y| {
        if (60..=240).contains(&x) && (50..=350).contains(&y) { 255 } else { 0 }
    });
    img.to_rgb().save(&dir.path().join("img/a.png")).unwrap();
    let gt = r#"{"image_id":"a","corners":[{"label":"tl","x":60,"y":50},{"label":"tr","x":240,"y":50},{"label":"br","x":240,"y":350},{"label":"bl","x":60,"y":350}]}"#;
    std::fs::write(dir.path().join("gt.jsonl"), format!("{gt}\n")).unwrap();

    let o = receipt(&["detect", "--method", "baseline", "--images", &p("img"), "--out", &p("pred.jsonl")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = receipt(&[
        "evaluate", "--ground-truth", &p("gt.jsonl"), "--predictions", &p("pred.jsonl"), "--out", &p("r.json"),
        "--csv", &p("r.csv"),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["rows"][0]["receipt_accuracy"], 1.0);

    let o = receipt(&["rectify", "--images", &p("img"), "--corners", &p("gt.jsonl"), "--out", &p("rect")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rect = RasterImage::load(&dir.path().join("rect/a.png")).unwrap();
    assert_eq!((rect.width(), rect.height()), (180, 300));

    let other = gt.replace("\"a\"", "\"b\"");
    std::fs::write(dir.path().join("gt2.jsonl"), format!("{other}\n")).unwrap();
    let o = receipt(&["evaluate", "--ground-truth", &p("gt2.jsonl"), "--predictions", &p("pred.jsonl")]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("without prediction: b") && err.contains("without ground truth: a"), "{err}");
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&receipt(&["evaluate", "--bogus"])), 1);
    assert_eq!(code(&receipt(&["frobnicate"])), 1);
    assert_eq!(code(&receipt(&["--help"])), 0);
    let o = receipt(&["evaluate", "--ground-truth", "/nonexistent/gt.jsonl", "--predictions", "/nonexistent/p.jsonl"]);
    assert_eq!(code(&o), 1);
    let o = receipt(&["evaluate", "--ground-truth", "x", "--predictions", "y", "--thresholds", "10,abc"]);
    assert_eq!(code(&o), 1);
    let o = receipt(&["detect", "--images", "/tmp", "--params", "/nonexistent.json", "--out", "/tmp/x.jsonl"]);
    assert_eq!(code(&o), 1);
}
