use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robust-sos")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = bin(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_corrupt_estimate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("clean.csv");
    let dirty = dir.path().join("dirty.csv");
    ok(&["gen", "--dist", "gaussian:mean=1", "--n", "12", "--d", "1", "--seed", "3", "--out", s(&clean)]);
    let text = std::fs::read_to_string(&clean).unwrap();
    assert!(text.starts_with("x0\n"));
    assert_eq!(text.lines().count(), 13);
    let meta = json(&dir.path().join("clean.csv.json"));
    assert_eq!(meta["true_mean"], serde_json::json!([1.0]));
    assert_eq!(meta["seed"], 3);

    ok(&["corrupt", "--in", s(&clean), "--eps", "0.25", "--strategy", "point:40", "--seed", "4", "--out", s(&dirty)]);
    let side = json(&dir.path().join("dirty.csv.json"));
    assert_eq!(side["eps"], 0.25);
    let mask = side["mask_wstar"].as_array().unwrap();
    assert_eq!(mask.iter().filter(|b| !b.as_bool().unwrap()).count(), 3);

    let mean_out = dir.path().join("mean.json");
    ok(&["estimate", "--in", s(&dirty), "--estimator", "mean", "--out", s(&mean_out)]);
    let mean_err = json(&mean_out)["report"]["error"].as_f64().unwrap();
    assert!(mean_err > 5.0, "three points at 40 drag the mean: {mean_err}");

    let sos_out = dir.path().join("sos.json");
    let trace = dir.path().join("trace.csv");
    ok(&[
        "estimate", "--in", s(&dirty), "--estimator", "sos", "--sigma", "1.5", "--k", "2", "--r", "2", "--trace", s(&trace),
        "--out", s(&sos_out),
    ]);
    let rep = json(&sos_out);
    let sos_err = rep["report"]["error"].as_f64().unwrap();
    assert!(sos_err < 1.0, "{rep}");
    assert!(rep["report"]["residuals"]["equality"].as_f64().unwrap() <= 1e-6);
    assert!(rep["extra"]["bound_check"]["status"].is_string());
    let trace_text = std::fs::read_to_string(&trace).unwrap();
    assert!(trace_text.starts_with("iteration,fixed_point_residual"));
    assert!(trace_text.lines().count() > 1);
}

#[test]
fn estimate_rejects_unknown_estimator() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("c.csv");
    ok(&["gen", "--dist", "gaussian", "--n", "5", "--d", "2", "--out", s(&clean)]);
    let out = bin(&["estimate", "--in", s(&clean), "--estimator", "mode", "--eps", "0.1", "--out", "/dev/null"]);
    assert!(!out.status.success());
}

#[test]
fn verify_lb_reports_and_exits() {
    let out = ok(&["verify-lb", "--family", "moment", "--eps", "0.3", "--k", "4"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert!((v["tv"].as_f64().unwrap() - 0.6).abs() < 1e-9);

    let out = ok(&["verify-lb", "--family", "gauss-vs-cov", "--eps", "0.01", "--regime", "small"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], true);

    // The Gaussian pair needs eps > 1/4.
    assert!(!bin(&["verify-lb", "--family", "gaussian", "--eps", "0.2"]).status.success());
}

#[test]
fn verify_toolkit_emits_json() {
    let out = ok(&["verify-toolkit", "--trials", "300", "--seed", "1"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["trials"], 300);
    assert!(v["results"].as_array().unwrap().iter().all(|r| r["violations"] == 0));
}

#[test]
fn sweep_writes_deterministic_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    std::fs::write(
        &cfg,
        "# small sweep\neps = 0.0, 0.2\nn = 20\nd = 2\ntrials = 4\nseed = 11\nadversary = point:30\nestimators = mean, median, geomedian\ntiming = false\n",
    )
    .unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["sweep", "--config", s(&cfg), "--out", s(&a)]);
    ok(&["sweep", "--config", s(&cfg), "--out", s(&b)]);
    let csv_a = std::fs::read(a.join("report.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read(b.join("report.csv")).unwrap());
    let text = String::from_utf8(csv_a).unwrap();
    assert!(text.starts_with("eps,trial,estimator,error,bound_optimal,bound_breakdown,residual_eq,residual_psd,seconds"));
    assert_eq!(text.lines().count(), 1 + 2 * 4 * 3);
    let summary = json(&a.join("summary.json"));
    assert_eq!(summary["groups"].as_array().unwrap().len(), 6);
    assert_eq!(summary["config"]["trials"], "4");
}

#[test]
fn sweep_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "eps = 0.7\n").unwrap();
    let out = bin(&["sweep", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert!(!out.status.success());
}
