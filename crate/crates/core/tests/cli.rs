use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn nanocone(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nanocone"));
    c.args(args).env("RUST_LOG", "warn");
    for (k, v) in envs {
        c.env(k, v);
    }
    c.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn only_subdir(base: &Path) -> PathBuf {
    let dirs: Vec<PathBuf> = fs::read_dir(base).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs[0].clone()
}

fn error_json(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).unwrap_or_else(|| panic!("no error json in {text}"));
    serde_json::from_str(line).unwrap()
}

const SMALL: &str = r#"{
    "geometry": { "h_nm": 400, "rt_nm": 300 },
    "dipole": { "dz_nm": 300 },
    "solver": { "points_per_wavelength": 10 },
    "seed": 5
}"#;

#[test]
fn schema_errors_exit_with_2() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("runs");
    let cases = [
        r#"{"geometry": {"h_nm": 635, "rt_nm": 391}, "dipole": {"dz_nm": 635}}"#,
        r#"{"geometry": {"h_nm": 635, "rt_nm": 391, "colour": "red"}}"#,
        r#"{"geometry": {"h_um": 0.635, "rt_nm": 391}}"#,
        r#"{"geometry": {"h_nm": 635, "rt_nm": 391}, "task": {"kind": "optimize", "fom": "fib", "budget": 0}}"#,
        "not json",
    ];
    for (i, text) in cases.iter().enumerate() {
        let cfg = write(t.path(), &format!("c{i}.json"), text);
        let o = nanocone(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
        assert_eq!(o.status.code(), Some(2), "case {i}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(error_json(&o)["error"]["kind"], "config");
    }
    let o = nanocone(&["run", t.path().join("missing.json").to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists() || fs::read_dir(&out).unwrap().next().is_none());
}

#[test]
fn unconverged_run_exits_with_3() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write(
        t.path(),
        "c.json",
        r#"{"geometry": {"h_nm": 400, "rt_nm": 300}, "solver": {"points_per_wavelength": 10, "max_steps": 20}}"#,
    );
    let o = nanocone(&["run", cfg.to_str().unwrap(), "--out", t.path().join("runs").to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(error_json(&o)["error"]["kind"], "numerical");
}

#[test]
fn simulate_reports_are_reproducible() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write(t.path(), "c.json", SMALL);
    let mut bodies = vec![];
    for run in ["a", "b"] {
        let base = t.path().join(run);
        let o = nanocone(&["run", cfg.to_str().unwrap(), "--out", base.to_str().unwrap()], &[("NANOCONE_THREADS", "1")]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let stdout = String::from_utf8_lossy(&o.stdout);
        for key in ["eta_fs", "eta_fib", "purcell_F", "rate_R"] {
            assert!(stdout.lines().any(|l| l.starts_with(key)), "{key} missing from {stdout}");
        }
        let dir = only_subdir(&base);
        let report: Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
        assert_eq!(report["schema_version"], 1);
        assert_eq!(report["code_version"], env!("CARGO_PKG_VERSION"));
        assert_eq!(report["config"]["geometry"]["h_nm"], 400.0);
        assert_eq!(report["config"]["dipole"]["wavelength_nm"], 619.0);
        let r = &report["result"];
        let (fs_, fib) = (r["eta_fs"].as_f64().unwrap(), r["eta_fib"].as_f64().unwrap());
        assert!(0.0 <= fib && fib <= fs_ && fs_ <= 1.0);
        let run: Value = serde_json::from_str(&fs::read_to_string(dir.join("run.json")).unwrap()).unwrap();
        assert_eq!(run["threads"], 1);
        bodies.push(fs::read(dir.join("report.json")).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn optimize_resumes_from_a_trace() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write(
        t.path(),
        "c.json",
        r#"{
            "geometry": { "h_nm": 400, "rt_nm": 300 },
            "solver": { "points_per_wavelength": 10 },
            "task": { "kind": "optimize", "fom": "fs", "initial_points": 2, "search_ppw": 10, "verify_ppw": 10 }
        }"#,
    );
    let bounds = write(t.path(), "b.json", r#"{"h_nm": [300, 450], "rt_nm": [200, 350]}"#);
    let run = |base: &str, budget: &str, resume: Option<&Path>| {
        let base = t.path().join(base);
        let mut args = vec![
            "optimize", "--config", cfg.to_str().unwrap(), "--fom", "fs", "--budget", budget, "--seed", "11",
            "--bounds-file", bounds.to_str().unwrap(), "--out", base.to_str().unwrap(),
        ];
        if let Some(r) = resume {
            args.extend(["--resume", r.to_str().unwrap()]);
        }
        let o = nanocone(&args, &[]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        only_subdir(&base)
    };
    let first = run("a", "3", None);
    let trace = first.join("trace.jsonl");
    let lines: Vec<String> = fs::read_to_string(&trace).unwrap().lines().map(String::from).collect();
    assert_eq!(lines.len(), 4);
    let report: Value = serde_json::from_str(&fs::read_to_string(first.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["result"]["evaluations"], 3);
    assert!(first.join("curves/incumbent.csv").exists());

    let second = run("b", "4", Some(&trace));
    let resumed: Vec<String> = fs::read_to_string(second.join("trace.jsonl")).unwrap().lines().map(String::from).collect();
    assert_eq!(resumed.len(), 5);
    assert_eq!(resumed[1..4], lines[1..4]);
}

#[test]
fn mismatched_trace_is_rejected() {
    let t = tempfile::tempdir().unwrap();
    let trace = write(
        t.path(),
        "t.jsonl",
        "{\"record\":\"header\",\"schema_version\":1,\"code_version\":\"0\",\"objective\":\"x\",\"space\":{\"dims\":[],\"constraints\":[]},\"settings\":{}}\n",
    );
    let o = nanocone(&["optimize", "--fom", "fib", "--resume", trace.to_str().unwrap(), "--out", t.path().to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn export_farfield_writes_csv_and_sidecar() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write(t.path(), "c.json", SMALL);
    let base = t.path().join("runs");
    let o = nanocone(
        &["export-farfield", cfg.to_str().unwrap(), "--n-theta", "19", "--n-phi", "37", "--out", base.to_str().unwrap()],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = only_subdir(&base);
    let csv = fs::read_to_string(dir.join("farfield/farfield.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "theta_deg,phi_deg,re_e_theta,im_e_theta,re_e_phi,im_e_phi");
    assert_eq!(lines.count(), 19 * 37);
    let side: Value = serde_json::from_str(&fs::read_to_string(dir.join("farfield/farfield.json")).unwrap()).unwrap();
    assert_eq!(side["wavelength_nm"], 619.0);
    assert!(side["total_emitted_power"].as_f64().unwrap() > 0.0);
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["task"], "export_farfield");
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write(t.path(), "c.json", SMALL);
    let o = nanocone(&["run", cfg.to_str().unwrap(), "--out", t.path().to_str().unwrap()], &[("NANOCONE_THREADS", "0")]);
    assert_eq!(o.status.code(), Some(2));
}
