use std::path::PathBuf;
use std::process::{Command, Output};

fn registry() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/jansen.json")
}

fn hopfid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hopfid"))
        .args(args)
        .env_remove("HOPFID_REGISTRY")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn separable_raw_state_exits_two() {
    let out = hopfid(&["mincopy", "--w0", "0.85", "--ell", "9", "--pth", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("raw Werner parameter 0.2316 ≤ 1/3"), "{}", stdout(&out));
}

#[test]
fn out_of_domain_flags_exit_one_and_name_the_flag() {
    let cases: &[(&[&str], &str)] = &[
        (&["mincopy", "--w0", "1.2", "--ell", "9", "--pth", "0.5"], "--w0"),
        (&["mincopy", "--w0", "0.9", "--ell", "0", "--pth", "0.5"], "--ell"),
        (&["mincopy", "--w0", "0.9", "--ell", "3", "--pth", "0"], "--pth"),
        (&["sweep", "--w0", "0.5:1.5:0.1"], "--w0"),
        (&["sweep", "--pth", "0.5,1.2"], "--pth"),
        (&["validate", "--n0", "10", "--r", "1", "--p", "0.5"], "--r"),
        (&["validate", "--n0", "10", "--r", "2", "--p", "0.5,1.5"], "--p"),
        (&["boundary", "--ell", "5:2"], "--ell"),
    ];
    for (args, flag) in cases {
        let out = hopfid(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(stderr(&out).contains(flag), "{args:?}: {}", stderr(&out));
        assert!(stdout(&out).is_empty(), "{args:?} computed something");
    }
}

#[test]
fn unknown_flags_are_usage_errors() {
    assert_eq!(hopfid(&["mincopy", "--w0", "0.9", "--ell", "2", "--pth", "0.5", "--bogus"]).status.code(), Some(1));
    assert_eq!(hopfid(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(hopfid(&["--help"]).status.code(), Some(0));
    assert_eq!(hopfid(&["--version"]).status.code(), Some(0));
    assert_eq!(hopfid(&["sweep", "--help"]).status.code(), Some(0));
}

#[test]
fn missing_registry_is_reported() {
    let out = hopfid(&["mincopy", "--w0", "0.9", "--ell", "2", "--pth", "0.5", "--registry", "/nonexistent.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("/nonexistent.json"));
}

#[test]
fn mincopy_report_has_both_neighbouring_probabilities() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    let reg = registry();
    let out = hopfid(&[
        "mincopy", "--w0", "0.95", "--ell", "4", "--pth", "0.9",
        "--registry", reg.to_str().unwrap(), "--out", json.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    let n0 = report["n0_min"].as_u64().unwrap();
    let at = report["p_succ_at_min"].as_f64().unwrap();
    let below = report["p_succ_below_min"].as_f64().unwrap();
    assert!(at >= 0.9 && below < 0.9, "{report}");
    assert!(report["trace"]["w_levels"].as_array().unwrap().len() >= 2);
    assert!(stdout(&out).contains(&format!("P_succ({n0})")));
    assert!(stdout(&out).contains(&format!("P_succ({})", n0 - 1)));
}

#[test]
fn registry_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_hopfid"))
        .args(["mincopy", "--w0", "0.95", "--ell", "4", "--pth", "0.9", "--family", "jansen"])
        .env("HOPFID_REGISTRY", registry())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("jansen-r"));

    // Without a registry no Jansen protocol exists.
    let bare = hopfid(&["mincopy", "--w0", "0.95", "--ell", "4", "--pth", "0.9", "--family", "jansen"]);
    assert_eq!(bare.status.code(), Some(1));
}

#[test]
fn single_point_sweep_matches_mincopy() {
    let dir = tempfile::tempdir().unwrap();
    let reg = registry();
    let csv = dir.path().join("point.csv");
    let json = dir.path().join("point.json");
    let sweep = hopfid(&[
        "sweep", "--ell", "9:9", "--w0", "0.9327:0.9327:1", "--pth", "0.75", "--family", "jansen",
        "--registry", reg.to_str().unwrap(), "--out", csv.to_str().unwrap(),
    ]);
    assert_eq!(sweep.status.code(), Some(0), "{}", stderr(&sweep));
    let mincopy = hopfid(&[
        "mincopy", "--w0", "0.9327", "--ell", "9", "--pth", "0.75", "--family", "jansen",
        "--registry", reg.to_str().unwrap(), "--out", json.to_str().unwrap(),
    ]);
    assert_eq!(mincopy.status.code(), Some(0));

    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "ell,w0,pth,family,status,n0_min,r,k,w_out,p_succ,boundary_w0");
    assert_eq!(lines.len(), 2);
    let cells: Vec<&str> = lines[1].split(',').collect();
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    assert_eq!(cells[5], report["n0_min"].to_string());
    assert_eq!(cells[6], report["selected"]["r"].to_string());
    assert_eq!(cells[7], report["selected"]["k"].to_string());
}

#[test]
fn below_boundary_sweep_is_all_fidelity_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("low.csv");
    let out = hopfid(&["sweep", "--w0", "0.4:0.45:0.01", "--ell", "10:10", "--pth", "0.5", "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.contains(",fidelity-infeasible,")), "{text}");
}

#[test]
fn json_sweep_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let reg = registry();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = hopfid(&[
            "sweep", "--ell", "3:5", "--w0", "0.85:1:0.01", "--pth", "0.5,0.9",
            "--registry", reg.to_str().unwrap(), "--out", path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        std::fs::read(path).unwrap()
    };
    let a = run("a.json");
    assert_eq!(a, run("b.json"));
    let doc: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert!(doc["points"].is_array() && doc["summary"].is_object());
}

#[test]
fn boundary_table() {
    let out = hopfid(&["boundary", "--ell", "1:10"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("1    0.33333"));
    assert!(text.contains("2    0.57735"));
    assert!(text.contains("9    0.88509"));
}

#[test]
fn validate_examples() {
    let ok = |args: &[&str]| {
        let out = hopfid(args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", stdout(&out));
        stdout(&out)
    };
    let certain = ok(&["validate", "--n0", "3", "--r", "3", "--p", "1", "--trials", "1000"]);
    assert!(certain.contains("mc         1.000000"));
    let worked = ok(&["validate", "--n0", "216", "--r", "4", "--p", "0.2318,0.4188"]);
    assert!(worked.contains("dp         0.7526"));
    ok(&["validate", "--n0", "4", "--r", "2", "--p", "0.6,0.7", "--seed", "3"]);
}

#[test]
fn fixedpoint_reports_target() {
    let reg = registry();
    let out = hopfid(&[
        "fixedpoint", "--wth", "0.95", "--ell", "8", "--pth", "0.75", "--family", "jansen",
        "--registry", reg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("n0_min     42"), "{}", stdout(&out));

    let below = hopfid(&["fixedpoint", "--wth", "0.8", "--ell", "9", "--pth", "0.5"]);
    assert_eq!(below.status.code(), Some(2));
}
