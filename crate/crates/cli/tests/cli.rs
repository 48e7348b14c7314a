use std::process::{Command, Output};

fn softpulse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_softpulse")).args(args).env_remove("SOFTPULSE_THREADS").output().expect("spawn softpulse")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn verify_exit_codes() {
    let ok = softpulse(&["verify", "--shape", "S1"]);
    assert_eq!(ok.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout(&ok)).unwrap();
    assert_eq!(report["passes"], true);
    assert_eq!(report["claimed_k"], 1);

    // the Gaussian claims no order, so it is checked at order 1 and fails
    let gauss = softpulse(&["verify", "--shape", "gauss"]);
    assert_eq!(gauss.status.code(), Some(2));
    assert!(!stdout(&gauss).is_empty(), "report is still written");

    assert_eq!(softpulse(&["verify", "--shape", "nope"]).status.code(), Some(1));
    assert_eq!(softpulse(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(softpulse(&["--help"]).status.code(), Some(0));
}

#[test]
fn classify_formats_and_parse_errors() {
    let o = softpulse(&["classify", "--sequence", "X1 X1", "--shape", "S1"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["order"], 1);

    let csv = softpulse(&["classify", "--sequence", "X1 ~X1", "--shape", "S1", "--format", "csv"]);
    assert!(stdout(&csv).starts_with("k,cluster,residual\n1,"));

    let bad = softpulse(&["classify", "--sequence", "X1 Q3"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("error"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"shape": "S1", "sequence": "X1 X1", "format": "csv"}"#).unwrap();
    let cfg = cfg.to_str().unwrap();
    let o = softpulse(&["--config", cfg, "classify"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("k,cluster"));
    let o = softpulse(&["--config", cfg, "--format", "json", "classify"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["shape"], "S1");

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, r#"{"unknown_key": 1}"#).unwrap();
    assert_eq!(softpulse(&["--config", broken.to_str().unwrap(), "classify"]).status.code(), Some(1));
}

#[test]
fn thread_variable_is_validated() {
    let run = |v: &str| Command::new(env!("CARGO_BIN_EXE_softpulse")).args(["verify", "--shape", "S1"]).env("SOFTPULSE_THREADS", v).output().unwrap();
    assert_eq!(run("2").status.code(), Some(0));
    assert_eq!(run("0").status.code(), Some(1));
    assert_eq!(run("many").status.code(), Some(1));
}

#[test]
fn design_writes_shape_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let shape = dir.path().join("p.json");
    let log = dir.path().join("p.csv");
    let o = softpulse(&["design", "--K", "1", "--L", "1", "--M", "3", "--seed", "2", "--out", shape.to_str().unwrap(), "--log", log.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(&log).unwrap().starts_with("iteration,temperature,objective\n"));
    let v = softpulse(&["verify", "--shape", shape.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(0));

    // M < K + L leaves no feasible coefficients
    assert_eq!(softpulse(&["design", "--K", "2", "--L", "1", "--M", "2"]).status.code(), Some(1));
}

#[test]
fn sweeps_report_slopes() {
    let o = softpulse(&["--format", "json", "sweep", "--experiment", "bb1", "--eps", "0.02:0.1:4"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let slope = v["slope"].as_f64().unwrap();
    assert!((slope - 3.0).abs() < 0.2, "{slope}");
    assert_eq!(v["points"].as_array().unwrap().len(), 4);

    let o = softpulse(&["sweep", "--experiment", "scaling", "--sequence", "X1", "--shape", "S1", "--sites", "2", "--jz-tau", "0.05:0.2:4"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("jz_tau,error\n"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("slope 2.0"));

    assert_eq!(softpulse(&["sweep", "--experiment", "bb1", "--eps", "0.1:0.01:3"]).status.code(), Some(1));
    assert_eq!(softpulse(&["sweep", "--experiment", "bb1", "--eps", "0.1:0.5:3"]).status.code(), Some(1));
}

#[test]
fn search_and_budget() {
    let o = softpulse(&["search", "--length", "2", "--alphabet", "X1,~X1", "--shape", "S1", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "sequence,order,cell\nX1 ~X1,2,2\n");
    assert_eq!(softpulse(&["search", "--length", "4", "--budget", "10"]).status.code(), Some(1));
}

#[test]
fn harmonics_csv_and_atomic_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h.csv");
    let o = softpulse(&["--out", out.to_str().unwrap(), "harmonics", "--sequence", "X1 X1", "--m-max", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next(), Some("m,xx,xy,xz,yx,yy,yz,zx,zy,zz"));
    assert_eq!(text.lines().count(), 5);
    assert!(std::fs::read_dir(dir.path()).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".partial")));
    // Nyquist: more harmonics than samples can carry
    assert_eq!(softpulse(&["harmonics", "--sequence", "X1", "--samples", "64", "--m-max", "40"]).status.code(), Some(1));
}
