use std::path::Path;
use std::process::Command;

fn psyseg(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_psyseg")).args(args).output().unwrap();
    (out.status.success(), String::from_utf8_lossy(&out.stdout).into(), String::from_utf8_lossy(&out.stderr).into())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_init_simulate_evaluate_render() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let (ok, out, err) = psyseg(&["synth", "--out", s(&data), "--seed", "3"]);
    assert!(ok, "{err}");
    assert_eq!(out.lines().count(), 4);
    for f in ["image.png", "classes.png", "class_names.json", "oracle_color_first.json", "oracle_texture_first.json"] {
        assert!(data.join(f).exists(), "{f}");
    }

    let session = tmp.path().join("run");
    let config = data.join("config_texture_first.json");
    let (ok, out, err) = psyseg(&[
        "init", "--session-dir", s(&session), "--config", s(&config), "--iterations", "1", "--quota", "40",
    ]);
    assert!(ok, "{err}");
    let status: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(status["quota"], 40);

    let (ok, _, err) = psyseg(&["simulate", "--session-dir", s(&session)]);
    assert!(ok, "{err}");
    assert!(err.contains("iteration 0: 40 answered, 40 enhanced"), "{err}");
    for f in ["responses.jsonl", "hierarchy.json", "report.json", "curve.csv", "segmentation_L0.png"] {
        assert!(session.join(f).exists(), "{f}");
    }

    let (ok, out, err) = psyseg(&["evaluate", "--session-dir", s(&session)]);
    assert!(ok, "{err}");
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    let purity = report["dendrogram_purity"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&purity));

    let png = tmp.path().join("level0.png");
    let (ok, _, err) = psyseg(&["render", "--session-dir", s(&session), "--level", "0", "--out", s(&png)]);
    assert!(ok, "{err}");
    assert!(png.exists());
}

#[test]
fn errors_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let (ok, _, err) = psyseg(&["evaluate", "--session-dir", s(tmp.path())]);
    assert!(!ok);
    assert!(err.starts_with("error:"), "{err}");
    let (ok, _, err) = psyseg(&["init", "--session-dir", s(tmp.path()), "--preset", "histology"]);
    assert!(!ok);
    assert!(err.contains("--image"), "{err}");
    let (ok, _, err) = psyseg(&["simulate", "--session-dir", s(tmp.path())]);
    assert!(!ok);
    assert!(err.contains("--config"), "{err}");
}
