use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"{
  "bs_positions": [[10, 0, 4], [50, 0, 4]],
  "ris_positions": [[30, 60, 8], [70, 60, 8]],
  "user_positions": [[30, 50, 1.5], [35, 50, 1.5]],
  "eve_position": [35, 40, 1.5],
  "antennas_per_bs": 2,
  "elements_per_ris": 4,
  "power_budget_dbm": 0,
  "noise_user_dbm": -80,
  "noise_eve_dbm": -80,
  "pathloss_exponents": {"bu": 3.5, "be": 3.5, "ru": 2.5, "re": 2.5, "br": 2.0},
  "rician_factors": {"bu": 0, "be": 0, "ru": 3, "re": 3, "br": 3},
  "reference_path_loss_db": -30,
  "solver": {"max_ao_iters": 4}
}"#;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ris-wssr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.json");
    fs::write(&path, SMALL).unwrap();
    path.to_str().unwrap().to_string()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn optimize_writes_trace_and_result() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("run");
    let o = bin(&[
        "optimize",
        "--config",
        &cfg,
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next().unwrap(),
        "iter,wssr_nats,wssr_clamped_nats,rate_user_1,rate_user_2,admm_iters,qp_iters,sdp_gap,wall_ms"
    );
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty() && rows.len() <= 4);
    assert!(rows.iter().all(|r| r.ends_with(",0")), "timings are off by default");

    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(json["w"]["dims"], serde_json::json!([2, 4]));
    assert_eq!(json["mu"]["dims"], serde_json::json!([9]));
    assert!(json["l"].is_null());
}

#[test]
fn assign_reports_assignment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().to_str().unwrap();
    let o = bin(&[
        "assign",
        "--config",
        &cfg,
        "--out",
        out,
        "--r-assign",
        "1",
        "--phase-bits",
        "2",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("result.json")).unwrap()).unwrap();
    assert_eq!(json["l"]["dims"], serde_json::json!([2, 2]));
    let data: Vec<u64> = json["l"]["data"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert_eq!(data.iter().sum::<u64>(), 2, "one RIS per user");
}

#[test]
fn schedule_writes_block_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().to_str().unwrap();
    let o = bin(&["schedule", "--config", &cfg, "--out", out, "--blocks", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sched = fs::read_to_string(tmp.path().join("schedule.csv")).unwrap();
    let kinds: Vec<&str> = sched.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(kinds, ["large", "small", "small"]);
    assert!(tmp.path().join("trace.csv").exists());
    assert!(tmp.path().join("result.json").exists());
}

#[test]
fn sweep_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let run = |name: &str, extra: &[&str]| {
        let out = tmp.path().join(name);
        let mut args = vec![
            "sweep",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--sweep-param",
            "power_dbm",
            "--sweep-values",
            "-10,0",
            "--seeds",
            "1,2",
        ];
        args.extend_from_slice(extra);
        let o = bin(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out.join("sweep.csv")).unwrap()
    };
    let a = run("a", &[]);
    let b = run("b", &[]);
    let c = run("c", &["--sequential"]);
    assert_eq!(a, b);
    assert_eq!(a, c);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with("param_value,seed,final_wssr_nats,final_wssr_clamped_nats,iters,total_ms\n-10,1,"));
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().to_str().unwrap();

    assert_eq!(code(&bin(&["optimize", "--no-such-flag"])), 2);
    assert_eq!(code(&bin(&["optimize", "--algorithm", "greedy"])), 2);
    assert_eq!(code(&bin(&["optimize", "--config", "/nonexistent/cfg.json"])), 2);
    assert_eq!(
        code(&bin(&["optimize", "--config", &cfg, "--r-assign", "5", "--out", out])),
        2
    );
    let o = bin(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        out,
        "--sweep-param",
        "bandwidth",
        "--sweep-values",
        "1",
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown sweep parameter"));

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, SMALL.replace("\"antennas_per_bs\"", "\"antennas\"")).unwrap();
    assert_eq!(
        code(&bin(&["optimize", "--config", bad.to_str().unwrap(), "--out", out])),
        2
    );
}
