use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wicnode(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wicnode")).args(args).env("WICNODE_THREADS", "1").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL_TOY: &str = r#"{"steps":20,"optimizer":"cocob","loss":"det_residual","T":1.0,"epsilon":0.05,"p":"1",
    "width":8,"activation":"sin_split","weight_mode":"diag_positive","safety_every":10,"safety_samples":50,
    "data":{"kind":"toy","n":10}}"#;

#[test]
fn train_then_certify_and_reproduce() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, SMALL_TOY).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = wicnode(&["train", "--config", s(&cfg), "--out", s(out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["train_data.json", "history.csv", "field.json", "portrait.svg", "certificate.json", "manifest.json"] {
        assert!(a.join(f).exists(), "missing {f}");
    }
    assert_eq!(fs::read(a.join("field.json")).unwrap(), fs::read(b.join("field.json")).unwrap());
    assert_eq!(fs::read(a.join("history.csv")).unwrap(), fs::read(b.join("history.csv")).unwrap());
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["exit_code"], 0);

    let field = a.join("field.json");
    let cert = dir.path().join("cert");
    let o = wicnode(&["certify", "--field", s(&field), "--samples", "500", "--box", "5", "--out", s(&cert)]);
    assert_eq!(code(&o), 0);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(report["max_mu"].as_f64().unwrap() <= -0.05 + 1e-9);
    assert!(cert.join("certificate.json").exists() && cert.join("manifest.json").exists());

    let o = wicnode(&["certify", "--field", s(&field), "--samples", "100", "--tol=-1"]);
    assert_eq!(code(&o), 3);

    let o = wicnode(&["decompose", "--field", s(&field), "--samples", "200"]);
    assert_eq!(code(&o), 0);
    let dec: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(dec["gamma"].as_f64().unwrap() > 0.05);

    let sim = dir.path().join("sim");
    let o = wicnode(&["simulate", "--field", s(&field), "--x0", "1,-1", "--x1", "-2,0.5", "--T", "1", "--out", s(&sim)]);
    assert_eq!(code(&o), 0);
    let monitor = fs::read_to_string(sim.join("monitor.csv")).unwrap();
    assert_eq!(monitor.lines().count(), 1 + 201);
    assert!(sim.join("trajectory.csv").exists());
}

#[test]
fn opinion_data_and_system_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data");
    let o = wicnode(&["gen-data", "--kind", "opinion", "--n", "6", "--n-test", "3", "--seed", "5", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let train: serde_json::Value = serde_json::from_slice(&fs::read(out.join("train.json")).unwrap()).unwrap();
    assert_eq!(train["pairs"].as_array().unwrap().len(), 6);
    assert_eq!(train["dim"], 4);
    let o = wicnode(&["certify", "--system", s(&out.join("system.json")), "--samples", "300"]);
    assert_eq!(code(&o), 0);
    let rep: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(rep["max_mu"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn cone_scan_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, svg) = (dir.path().join("scan.csv"), dir.path().join("scan.svg"));
    let o = wicnode(&[
        "cone-scan", "--tau", "-2:0:0.5", "--delta", "0:2:0.5", "--stride", "2", "--budget", "200", "--out", s(&csv),
        "--svg", s(&svg),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "tau,delta,region,witness_mu");
    assert_eq!(text.lines().count(), 1 + 25);
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    assert!(dir.path().join("scan.csv.manifest.json").exists());
}

#[test]
fn usage_and_input_errors() {
    assert_eq!(code(&wicnode(&[])), 1);
    assert_eq!(code(&wicnode(&["certify"])), 1);
    assert_eq!(code(&wicnode(&["certify", "--field", "x", "--p", "3"])), 1);
    assert_eq!(code(&wicnode(&["certify", "--field", "/nonexistent/field.json"])), 1);
    assert_eq!(code(&wicnode(&["--help"])), 0);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"steps\": 1").unwrap();
    assert_eq!(code(&wicnode(&["train", "--config", s(&bad), "--out", s(dir.path())])), 1);
}
