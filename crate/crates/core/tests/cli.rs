use std::process::{Command, Output};

const PAIR: &str = r#"{"kind":"AAGA","q":0.5,"graph":{"n":2,"weights":[[0,0.5],[0.5,0]]}}"#;
const DEGENERATE: &str =
    r#"{"kind":"AAGA","q":1.0,"allow_degenerate":true,"graph":{"n":2,"weights":[[0,0.5],[0.5,0]]}}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_consensus-accuracy")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn certify_theorem_and_minimal() {
    let o = run(&["certify", "--model", PAIR, "--theorem", "auto", "--x0", "0,1"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["gamma"], 1.0);
    assert_eq!(v["method"], "thm_limited");
    assert_eq!(v["valid"], true);
    assert!((v["bound_for"]["bound"].as_f64().unwrap() - 1.0 / 12.0).abs() < 1e-15);

    let o = run(&["certify", "--model", PAIR, "--minimal"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["gamma"].as_f64().unwrap() - 1.0).abs() < 1e-8);
}

#[test]
fn certify_infeasible_exit_code() {
    let o = run(&["certify", "--model", DEGENERATE, "--minimal"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("infeasible"));
    assert!(stdout(&o).contains(r#""gamma": null"#));
}

#[test]
fn config_and_capacity_exit_codes() {
    assert_eq!(run(&["certify", "--model", "{not json"]).status.code(), Some(4));
    assert_eq!(run(&["nonsense"]).status.code(), Some(4));
    assert_eq!(run(&["scaling", "--family", "bga_cycle", "--n-list", "16,8"]).status.code(), Some(4));
    let big = r#"{"kind":"SAGA","q":0.5,"graph":{"family":"cycle","n":40,"weight":0.5}}"#;
    assert_eq!(run(&["oracle", "--model", big, "--x0", "alternating", "--steps", "2"]).status.code(), Some(3));
}

#[test]
fn oracle_csv() {
    let o = run(&["oracle", "--model", PAIR, "--x0", "0,1", "--steps", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,mse,disagreement,lyapunov");
    assert_eq!(lines.len(), 4);
    let row: Vec<f64> = lines[2].split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(row, vec![1.0, 0.0625, 0.0625, 2.0]);
}

#[test]
fn simulate_is_reproducible_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = run(&[
            "simulate", "--model", PAIR, "--x0", "0,1", "--steps", "30", "--trials", "300", "--seed", "9",
            "--out", p.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    let text = std::fs::read(&a).unwrap();
    assert_eq!(text, std::fs::read(&b).unwrap());
    let text = String::from_utf8(text).unwrap();
    assert!(text.starts_with("t,mse_mean,mse_ci,v_mean,bound,oracle_mse\n"));
    assert_eq!(text.lines().count(), 32);
}

#[test]
fn compare_bounds_flags_vacuous() {
    let model = r#"{"kind":"BGA","q":0.5,"graph":{"family":"cycle","n":32}}"#;
    let o = run(&["compare-bounds", "--model", model, "--x0", "alternating"]);
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("bga_ffpf,") && l.contains(",true,")));
    assert!(text.lines().any(|l| l.starts_with("ours,5.88") && l.contains(",false,")));
}

#[test]
fn scaling_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"family":"pbga_complete","n_list":[4,8],"q":0.5,"trials":20,"seed":3}"#).unwrap();
    let o = run(&["scaling", "--config", cfg.to_str().unwrap(), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["gamma"], 4.0);
    assert_eq!(v[0]["bound_over_v0"], 0.5);
    assert_eq!(v[1]["n"], 8);
}
