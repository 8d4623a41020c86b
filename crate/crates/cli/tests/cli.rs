use std::process::{Command, Output};

use serde_json::Value;

fn circkep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_circkep")).args(args).env_remove("CIRCKEP_JOBS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn simulate_without_flags_prints_usage() {
    let o = circkep(&["simulate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn excluded_parameters_are_rejected() {
    let o = circkep(&["simulate", "--alpha", "0", "--beta", "0", "--delta", "1", "--ic", "1,0,0.9,0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("excluded"), "{}", stderr(&o));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(circkep(&["classify", "--alpha", "1", "--speed", "2"]).status.code(), Some(1));
}

#[test]
fn help_lists_defaults() {
    let o = circkep(&["simulate", "--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for flag in ["--alpha", "--ic", "--frame", "--tau-end", "--rtol", "--atol", "--out", "default: 1e-9"] {
        assert!(text.contains(flag), "missing {flag}");
    }
}

#[test]
fn chart_frame_circularizes() {
    let args = [
        "simulate", "--alpha", "0", "--beta", "1", "--delta", "0.1", "--ic", "1,0,0.9,0", "--frame", "chart", "--tau-end",
        "1000",
    ];
    let o = circkep(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("tau,t,theta,c1,c2,c3,ecc_sq"));
    let ecc: Vec<f64> = lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(ecc.len() > 100);
    assert!(ecc.last().unwrap() < &1e-4 && ecc.last().unwrap() < &ecc[0]);
    // byte-stable
    assert_eq!(circkep(&args).stdout, o.stdout);
}

#[test]
fn reduced_frame_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    let o = circkep(&[
        "simulate", "--alpha", "1", "--beta", "1", "--delta", "0.3", "--ic", "1.5625,-0.48,1,0", "--t-end", "1", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("t,r,p,l,theta,ecc_sq,energy\n"));
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((last[0] - 1.0).abs() < 1e-12);
    // on the critical equilibrium ecc_sq stays at 4δ²
    assert!((last[5] - 0.36).abs() < 1e-6, "{}", last[5]);
}

#[test]
fn step_budget_exhaustion_exits_2() {
    let o = circkep(&["simulate", "--alpha", "0", "--beta", "1", "--delta", "0.1", "--ic", "1,0,0.9,0", "--max-steps", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn classify_critical_sub_half() {
    let o = circkep(&["classify", "--alpha", "1", "--beta", "1", "--delta", "0.3", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert!((v["ecc_sq_limit"].as_f64().unwrap() - 0.36).abs() < 1e-4);
    assert_eq!(v["regime_predicted"], "CriticalSubHalf");
    assert_eq!(v["params"]["gamma"], 0.0);
}

#[test]
fn classify_infinite_collision_time() {
    let o = circkep(&["classify", "--alpha", "0", "--beta", "4", "--delta", "0.1", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["omega"]["verdict"], "Infinite");
}

#[test]
fn classify_finite_collision_time() {
    let o = circkep(&["classify", "--alpha", "2", "--beta", "2", "--delta", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("observed: EccToOneFiniteTime"));
}

#[test]
fn undetermined_classification_exits_3() {
    // δ = ½ sits on the critical split, where convergence is too slow to decide
    let o = circkep(&["classify", "--alpha", "1", "--beta", "1", "--delta", "0.5"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "alpha = 2\nbeta = 2\ndelta = 0.5 # attractor case\n").unwrap();
    let o = circkep(&["classify", "--config", cfg.to_str().unwrap(), "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(json(&o)["params"]["alpha"], 2.0);
    let o = circkep(&["classify", "--config", cfg.to_str().unwrap(), "--alpha", "1", "--json"]);
    assert_eq!(json(&o)["params"]["alpha"], 1.0);
    std::fs::write(&cfg, "colour = red\n").unwrap();
    assert_eq!(circkep(&["classify", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn sweep_is_deterministic_across_job_counts() {
    let args = ["sweep", "--alphas", "0,1", "--betas", "1,2", "--delta", "0.2"];
    let one = circkep(&[&args[..], &["--jobs", "1"]].concat());
    assert_eq!(one.status.code(), Some(0), "{}", stderr(&one));
    let env = Command::new(env!("CARGO_BIN_EXE_circkep")).args(args).env("CIRCKEP_JOBS", "3").output().unwrap();
    assert_eq!(one.stdout, env.stdout);
    let text = stdout(&one);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "alpha,beta,delta,gamma,predicted,observed,agree,flags");
    assert_eq!(rows.len(), 5);
    assert!(rows[1].contains("Circularizing,Circularizing,true"));
}

#[test]
fn sweep_rejects_origin() {
    let o = circkep(&["sweep", "--alphas", "0,1", "--betas", "0,1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("(0, 0)"));
}

#[test]
fn equilibria_json_shape() {
    let o = circkep(&["equilibria", "--alpha", "1", "--beta", "1", "--delta", "0.2"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let first = &v.as_array().unwrap()[0];
    for key in ["chart", "location", "eigenvalues", "stability", "exists", "extras"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
    assert!((first["extras"]["det_j"].as_f64().unwrap() - 0.49787136).abs() < 1e-8);
}

#[test]
fn chart_transform_round_trips() {
    let o = circkep(&["chart", "--alpha", "0", "--beta", "1", "--delta", "0.1", "--state", "1.2,-0.3,0.8,0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["chart"], "gamma-neg");
    let c = &v["coords"];
    let inv = format!("{},{},{},0.5", c["r1"], c["v"], c["x"]);
    let back = json(&circkep(&["chart", "--alpha", "0", "--beta", "1", "--delta", "0.1", "--inverse", &inv]));
    assert!((back["reduced"]["r"].as_f64().unwrap() - 1.2).abs() < 1e-12);
    assert!((back["reduced"]["p"].as_f64().unwrap() + 0.3).abs() < 1e-12);
}

#[test]
fn verify_filter_and_quick() {
    let o = circkep(&["verify", "--filter", "critical*"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 2);
    let o = circkep(&["verify", "--quick"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("regime-diagram"));
    assert_eq!(circkep(&["verify", "--filter", "nothing*"]).status.code(), Some(1));
}
