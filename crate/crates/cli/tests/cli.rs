use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn baseline() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/baseline.toml")
}

fn solidflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_solidflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn edited(dir: &Path, from: &str, to: &str) -> PathBuf {
    let text = std::fs::read_to_string(baseline()).unwrap();
    assert!(text.contains(from), "baseline lacks {from:?}");
    let path = dir.join("edited.toml");
    std::fs::write(&path, text.replace(from, to)).unwrap();
    path
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

#[test]
fn validate_baseline_passes_every_check() {
    let o = solidflow(&["validate", "--config", baseline().to_str().unwrap()]);
    let out = text(&o);
    assert!(o.status.success(), "{out}");
    assert!(out.lines().filter(|l| l.starts_with("PASS")).count() >= 10, "{out}");
    assert!(!out.contains("FAIL"), "{out}");
}

#[test]
fn wall_inside_clearance_is_rejected_at_parse_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited(dir.path(), "delta = 1.0", "delta = 12.0");
    let o = solidflow(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
    assert!(text(&o).contains("rejecting"), "{}", text(&o));
}

#[test]
fn disk_rotation_request_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text_in = std::fs::read_to_string(baseline()).unwrap();
    let disk = text_in.replace(
        "kind = \"joukowski\"   # disk | joukowski | conformal\nc = 0.3",
        "kind = \"disk\"\nradius = 1.0",
    );
    assert_ne!(disk, text_in);
    let cfg = dir.path().join("disk.toml");
    std::fs::write(&cfg, disk).unwrap();
    let o = solidflow(&["validate", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(text(&o).contains("disk cannot be steered in rotation"), "{}", text(&o));
}

#[test]
fn toy_run_writes_deterministic_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = baseline();
    let mut csvs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let o = solidflow(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--mode",
            "toy",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", text(&o));
        csvs.push((
            std::fs::read(out.join("trajectory.csv")).unwrap(),
            std::fs::read(out.join("control.csv")).unwrap(),
        ));
        let m: serde_json::Value =
            serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["mode"], "toy");
        assert!(m["terminal_error"].as_f64().unwrap() <= 1e-2);
        assert!(m["tolerances"]["ode.rtol"].as_f64().is_some());
        assert!(m["tolerances"]["dynamics_tolerance"].as_f64().is_some());

        let echoed: solidflow::simulate::Scenario = serde_json::from_value(m["scenario"].clone()).unwrap();
        let mut parsed: solidflow::simulate::Scenario = toml::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
        parsed.simulate.mode = solidflow::simulate::Mode::Toy;
        assert_eq!(echoed, parsed);
        let again: solidflow::simulate::Scenario = toml::from_str(&toml::to_string(&echoed).unwrap()).unwrap();
        assert_eq!(again, parsed);
    }
    assert_eq!(csvs[0], csvs[1]);
    let header = String::from_utf8(csvs[0].0.clone()).unwrap();
    assert!(header.starts_with("t,h1,h2,theta,h1_dot,h2_dot,theta_dot,energy,clearance\n"));
}

#[test]
fn empty_sweep_is_an_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = solidflow(&[
        "sweep",
        "--config",
        baseline().to_str().unwrap(),
        "--axis",
        "epsilon",
        "--out",
        dir.path().to_str().unwrap(),
        "--values",
    ]);
    assert!(o.status.success(), "{}", text(&o));
    let table = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 1);
}

#[test]
fn toy_sweep_errors_decrease() {
    let dir = tempfile::tempdir().unwrap();
    let o = solidflow(&[
        "sweep",
        "--config",
        baseline().to_str().unwrap(),
        "--axis",
        "epsilon",
        "--values",
        "0.2,0.1,0.05",
        "--mode",
        "toy",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o));
    let mut r = csv::Reader::from_path(dir.path().join("sweep.csv")).unwrap();
    let errs: Vec<f64> = r.records().map(|x| x.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(errs.len(), 3);
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn full_run_records_error_and_flux() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("full");
    let o = solidflow(&[
        "run",
        "--config",
        baseline().to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o));
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["mode"], "full");
    assert!(m["terminal_error"].as_f64().unwrap() < 5e-2);
    assert!(m["flux"]["inflow"].as_f64().unwrap() > 0.0);
    assert!(m["control"]["first"]["coeffs"].as_array().unwrap().len() > 0);
    let ctl = std::fs::read_to_string(out.join("control.csv")).unwrap();
    assert!(ctl.starts_with("t,beta_first,beta_second\n"));
}
