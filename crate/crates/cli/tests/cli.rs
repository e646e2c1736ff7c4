use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radial-blowup"))
        .args(args)
        .current_dir(dir)
        .env_remove("RADIAL_BLOWUP_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn classify_grid_matches_region_formulas() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["classify", "--p", "0.25:5:20", "--q", "1:8:15"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(
        rows[0],
        [
            "p",
            "q",
            "plain",
            "weighted",
            "verdict",
            "region",
            "method",
            "tail_exponent"
        ]
    );
    assert_eq!(rows.len(), 1 + 20 * 15);
    for row in &rows[1..] {
        let p: f64 = row[0].parse().unwrap();
        let q: f64 = row[1].parse().unwrap();
        let expected = if p * q <= 1.0 {
            "A"
        } else if q > 2.0 * (1.0 + 1.0 / p) {
            "B"
        } else {
            "C"
        };
        if (p * q - 1.0).abs() > 1e-9 && (q - 2.0 * (1.0 + 1.0 / p)).abs() > 1e-9 {
            assert_eq!(row[5], expected, "p = {p}, q = {q}");
        }
    }
}

#[test]
fn classify_single_point_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["classify", "--p", "4", "--q", "3", "--format", "json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["region"], "B");
    assert_eq!(v[0]["verdict"], "v_blows_up");
    for key in ["p", "q", "plain", "weighted", "method", "tail_exponent"] {
        assert!(v[0].get(key).is_some(), "{key}");
    }
}

#[test]
fn exp_verdict_is_independent_of_p() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["classify", "--p", "0.1:10:12", "--f", "exp"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&stdout(&o));
    assert!(rows[1..].iter().all(|r| r[4] == rows[1][4] && r[1].is_empty()));
    assert_eq!(rows[1][7], "inf");
}

#[test]
fn custom_nonlinearity_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut table = String::from("t,f\n");
    for i in 0..=400 {
        let t = i as f64 * 0.25;
        table.push_str(&format!("{t},{}\n", t * t * t));
    }
    fs::write(dir.path().join("cube.csv"), table).unwrap();
    let o = run(&["classify", "--p", "4", "--f", "custom:cube.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&stdout(&o))[1][5], "B");
    let missing = run(&["classify", "--p", "4", "--f", "custom:nope.csv"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn solve_writes_solution_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["solve", "--p", "2", "--q", "3", "--out", "run"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert!(csv.starts_with("r,u,w,v,psi\n"));
    let meta: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("run.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["termination"], "blow_up");
    assert!(meta["R_max"].as_f64().unwrap() > 0.0);
    assert!(meta.get("fit_beta").is_some());
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(&["solve", "--p", "2", "--q", "3", "--N", "3"], dir.path());
    let b = run(&["solve", "--p", "2", "--q", "3", "--N", "3"], dir.path());
    assert_eq!(a.stdout, b.stdout);
    let a = run(&["report", "--p", "2", "--q", "3"], dir.path());
    let b = run(&["report", "--p", "2", "--q", "3"], dir.path());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn full_precision_and_rounding() {
    let dir = tempfile::tempdir().unwrap();
    let full = stdout(&run(&["classify", "--p", "3", "--q", "1"], dir.path()));
    assert!(full.lines().nth(1).unwrap().starts_with("3.0000000000000000e0,"));
    let short = stdout(&run(&["classify", "--p", "3", "--q", "1", "--round", "3"], dir.path()));
    assert!(short.lines().nth(1).unwrap().starts_with("3.00e0,"));
}

#[test]
fn rates_report_all_quantities() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["rates", "--p", "2", "--q", "2", "--format", "json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let names: Vec<&str> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["quantity"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["v", "w", "psi", "u_power_rate"]);
    for c in v["checks"].as_array().unwrap() {
        assert!(c["rel_err"].as_f64().unwrap() < 0.05);
    }
}

#[test]
fn whole_space_checks_and_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["whole-space", "--p", "0.5", "--q", "1", "--N", "3", "--out", "ws"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let checks = fs::read_to_string(dir.path().join("ws.csv")).unwrap();
    assert_eq!(csv_rows(&checks).len(), 7);
    let traj = fs::read_to_string(dir.path().join("ws.trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,X,Y,Z,W\n"));
    let bad = run(&["whole-space", "--p", "2", "--q", "3"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn dynsys_ball_equilibria() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["dynsys", "--p", "2", "--q", "3", "--format", "json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let eq = v["equilibria"].as_array().unwrap();
    assert_eq!(eq.len(), 3);
    assert_eq!(eq[0]["class"], "asymptotically_stable");
    assert_eq!(eq[1]["class"]["saddle"]["dim_stable"], 2);
    assert_eq!(eq[1]["eigenvalues"][0].as_array().unwrap().len(), 2);
}

#[test]
fn dynsys_trajectory_needs_out() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["dynsys", "--p", "2", "--q", "3", "--m", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = run(
        &["dynsys", "--p", "2", "--q", "3", "--m", "1", "--out", "d"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(fs::read_to_string(dir.path().join("d.trajectory.csv"))
        .unwrap()
        .starts_with("t,X,Y,Z\n"));
}

#[test]
fn figures_emit_six_curves() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["figures", "fig3", "--out", "f3"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "f3_u_N2.csv",
            "f3_u_N20.csv",
            "f3_u_N40.csv",
            "f3_v_N2.csv",
            "f3_v_N20.csv",
            "f3_v_N40.csv"
        ]
    );
    let v = fs::read_to_string(dir.path().join("f3_v_N20.csv")).unwrap();
    let max = csv_rows(&v)[1..]
        .iter()
        .map(|r| r[1].parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert_eq!(max, 50.0);
}

#[test]
fn report_sections() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["report", "--p", "2", "--q", "3", "--N", "2", "--m", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["classification"]["ball"]["verdict"], "both_blow_up");
    assert_eq!(v["ball_rates"]["status"], "ok");
    assert!(v["solve"]["fit"]["beta"].as_f64().is_some());
    assert_eq!(v["whole_space"]["status"], "not_applicable");

    let o = run(&["report", "--p", "0.5", "--q", "1", "--N", "3"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["whole_space"]["status"], "ok");
    assert!(v["whole_space"]["field"]["zeta2"]["all_negative"].as_bool().unwrap());
    assert_eq!(v["whole_space"]["checks"].as_array().unwrap().len(), 6);
}

#[test]
fn usage_errors_exit_2_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["report", "--p", "-1", "--q", "3", "--out", "x"],
        &["report", "--p", "2", "--out", "x"],
        &["solve", "--p", "2", "--q", "3", "--R", "0", "--out", "x"],
        &["solve", "--p", "2", "--q", "3", "--rtol", "2", "--out", "x"],
        &["classify", "--p", "1:2", "--q", "1", "--out", "x"],
        &["classify", "--p", "1", "--f", "exp", "--q", "2", "--out", "x"],
        &["rates", "--p", "0.5", "--q", "1", "--out", "x"],
        &["figures", "fig9", "--out", "x"],
        &["figures", "fig2", "--N", "1", "--out", "x"],
        &["solve", "--p", "2", "--q", "3", "--out", "missing/x"],
        &["solve", "--p", "2", "--q", "3", "--format", "xml", "--out", "x"],
        &["bogus"],
    ];
    for args in cases {
        let o = run(args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn thread_cap_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_radial-blowup"))
        .args(["classify", "--p", "1:2:3", "--q", "1:2:3"])
        .env("RADIAL_BLOWUP_THREADS", "1")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_radial-blowup"))
        .args(["classify", "--p", "1", "--q", "1"])
        .env("RADIAL_BLOWUP_THREADS", "many")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn computational_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    // with the blow-up test out of reach there are no rates to read
    let o = run(&["rates", "--p", "2", "--q", "3", "--v-ceiling", "1e300"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}
