use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use parab2_cli::SolveOutput;
use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run_with(cmd: &str, config: &Path, out: &Path, threads: Option<&str>) -> i32 {
    let mut c = Command::new(env!("CARGO_BIN_EXE_parab2"));
    c.arg(cmd).arg("--config").arg(config).arg("--out").arg(out);
    match threads {
        Some(t) => c.env("PARAB2_THREADS", t),
        None => c.env_remove("PARAB2_THREADS"),
    };
    c.output().expect("binary runs").status.code().expect("exit code")
}

fn run(cmd: &str, config: &Path, out: &Path) -> i32 {
    run_with(cmd, config, out, None)
}

fn write_config(dir: &TempDir, json: &str) -> PathBuf {
    let p = dir.path().join("config.json");
    fs::write(&p, json).unwrap();
    p
}

fn error_kind(out: &Path) -> String {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("error.json")).unwrap()).unwrap();
    v["error"]["kind"].as_str().unwrap().to_owned()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_owned()
}

#[test]
fn scalar_solve_smoke() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run("solve", &configs().join("scalar_solve.json"), dir.path()), 0);
    let text = fs::read_to_string(dir.path().join("solve_report.json")).unwrap();
    let out: SolveOutput = serde_json::from_str(&text).unwrap();
    let f_sup = out.contour.f.sup_norm();
    for r in [&out.contour, &out.timestep] {
        assert!(r.residual_inf.is_finite() && r.residual_inf <= 1e-2 * f_sup, "{}", r.residual_inf);
    }
    assert!(out.agreement < 1e-2);
    assert_eq!(header(&dir.path().join("contour_u.csv")), "t,re_1,im_1");
    assert!(dir.path().join("timestep_Au.csv").exists());
}

#[test]
fn solve_report_round_trips() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run("solve", &configs().join("strong_damping_solve.json"), dir.path()), 0);
    let text = fs::read_to_string(dir.path().join("solve_report.json")).unwrap();
    let parsed: SolveOutput = serde_json::from_str(&text).unwrap();
    assert_eq!(report_json(&parsed), text);
    let cols = header(&dir.path().join("contour_du.csv"));
    assert_eq!(cols.split(',').count(), 1 + 2 * 8);
}

fn report_json(v: &SolveOutput) -> String {
    parab2_core::io::to_json_string(v).unwrap()
}

#[test]
fn check_beyond_critical_angle_fails() {
    // λ² + λ + 1 has poles at arg ±2π/3 < 2.5.
    let dir = TempDir::new().unwrap();
    assert_eq!(run("check", &configs().join("scalar_check_fails.json"), dir.path()), 2);
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("check_report.json")).unwrap()).unwrap();
    assert_eq!(v["passes"], false);
    assert_eq!(v["report"]["certified_failure"], true);
    assert_eq!(header(&dir.path().join("check_samples.csv")), "re,im,norm_h,norm_l2h,norm_lbh,norm_ah");
}

#[test]
fn check_admissible_gallery_passes() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run("check", &configs().join("strong_damping_check.json"), dir.path()), 0);
}

#[test]
fn malformed_json_is_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "{ \"command\": \"solve\", ");
    let out = dir.path().join("out");
    assert_eq!(run("solve", &cfg, &out), 4);
    assert_eq!(error_kind(&out), "config");
}

#[test]
fn schema_violations_are_config_errors() {
    let cases = [
        r#"{ "problem": { "kind": "gallery", "name": "scalar(1.0)", "alpha": 1.0 }, "bogus": 1 }"#,
        r#"{ "command": "check", "problem": { "kind": "gallery", "name": "scalar(1.0)", "alpha": 1.0 } }"#,
        r#"{ "problem": { "kind": "gallery", "name": "no_such_instance", "alpha": 1.0 } }"#,
        r#"{ "problem": { "kind": "gallery", "name": "scalar(1.0)", "alpha": -1.0 } }"#,
        r#"{ "problem": { "kind": "gallery", "name": "scalar(1.0)", "alpha": 1.0 }, "u0": [1.0, 2.0] }"#,
        r#"{ "problem": { "kind": "gallery", "name": "scalar(1.0)", "alpha": 1.0 }, "mode": { "kind": "holder", "theta": 1.5 } }"#,
    ];
    for json in cases {
        let dir = TempDir::new().unwrap();
        let cfg = write_config(&dir, json);
        let out = dir.path().join("out");
        assert_eq!(run("solve", &cfg, &out), 4, "{json}");
        assert_eq!(error_kind(&out), "config");
    }
}

#[test]
fn incompatible_forcing_exits_3() {
    // f ≡ 1 with zero data violates f(0) = Lx₀(0) in Hölder mode.
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        r#"{ "problem": { "kind": "gallery", "name": "scalar(2.0)", "alpha": 1.0 },
             "forcing": { "kind": "constant", "value": 1.0 } }"#,
    );
    let out = dir.path().join("out");
    assert_eq!(run("solve", &cfg, &out), 3);
    assert_eq!(error_kind(&out), "compatibility");
}

#[test]
fn compatible_constant_forcing_solves() {
    // u0 = 1/2 makes Au0 = f(0) for A = 2, f ≡ 1.
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        r#"{ "problem": { "kind": "gallery", "name": "scalar(2.0)", "alpha": 1.0 },
             "forcing": { "kind": "constant", "value": 1.0 }, "u0": [0.5] }"#,
    );
    assert_eq!(run("solve", &cfg, dir.path()), 0);
}

#[test]
fn norms_from_samples_and_path_file() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run("norms", &configs().join("norms_samples.json"), dir.path()), 0);
    let table = fs::read_to_string(dir.path().join("norms.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "norm_kind,theta,p,q,value,N,T");
    assert_eq!(lines.len(), 4);
    // Tent of height 1: sup 1; the 1/2-Hölder quotient 0.25k/√(0.125k) over k
    // cells of one slope peaks at k = 4, giving seminorm √2.
    let value = |row: &str| row.split(',').nth(4).unwrap().parse::<f64>().unwrap();
    assert_eq!(value(lines[1]), 1.0);
    assert!((value(lines[2]) - (1.0 + 2f64.sqrt())).abs() < 1e-12);

    // The same norms through a solve report component.
    let solve_dir = TempDir::new().unwrap();
    assert_eq!(run("solve", &configs().join("scalar_solve.json"), solve_dir.path()), 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(solve_dir.path().join("solve_report.json")).unwrap()).unwrap();
    fs::write(solve_dir.path().join("u.json"), report["contour"]["u"].to_string()).unwrap();
    let cfg = write_config(
        &solve_dir,
        r#"{ "signal": { "kind": "path_file", "path": "u.json" }, "norms": [ { "kind": "sup" } ] }"#,
    );
    let out = solve_dir.path().join("norms");
    assert_eq!(run("norms", &cfg, &out), 0);
    let row = fs::read_to_string(out.join("norms.csv")).unwrap().lines().nth(1).unwrap().to_owned();
    let sup = report["contour"]["norm_table"][0]["value"].as_f64().unwrap();
    assert!((value(&row) - sup).abs() <= 1e-15 * sup);
}

#[test]
fn sweep_csv_schema() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run("sweep", &configs().join("phase_sweep.json"), dir.path()), 0);
    let table = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(table.lines().next().unwrap(), "eps,alpha,phi,predicted,certified,sup_H,sup_l2H,sup_lBH,sup_AH");
    assert_eq!(table.lines().count(), 1 + 3 * 3 * 4);
}

#[test]
fn artifacts_are_byte_identical_across_runs_and_thread_counts() {
    for (cmd, name) in [
        ("solve", "strong_damping_solve.json"),
        ("check", "strong_damping_check.json"),
        ("sweep", "phase_sweep.json"),
        ("norms", "norms_solution.json"),
    ] {
        let runs: Vec<TempDir> = (0..3).map(|_| TempDir::new().unwrap()).collect();
        let threads = [None, Some("1"), Some("3")];
        for (d, t) in runs.iter().zip(threads) {
            assert_eq!(run_with(cmd, &configs().join(name), d.path(), t), 0, "{name}");
        }
        let mut files: Vec<_> = fs::read_dir(runs[0].path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        files.sort();
        assert!(!files.is_empty());
        for f in &files {
            let first = fs::read(runs[0].path().join(f)).unwrap();
            for other in &runs[1..] {
                assert_eq!(first, fs::read(other.path().join(f)).unwrap(), "{name}: {f:?}");
            }
        }
    }
}

#[test]
fn bad_thread_count_is_config_error() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run_with("norms", &configs().join("norms_samples.json"), dir.path(), Some("zero")), 4);
}

#[test]
fn bundled_configs_finish_quickly() {
    let expected = [
        ("norms", "norms_samples.json", 0),
        ("norms", "norms_solution.json", 0),
        ("sweep", "phase_sweep.json", 0),
        ("check", "scalar_check_fails.json", 2),
        ("solve", "scalar_solve.json", 0),
        ("check", "strong_damping_check.json", 0),
        ("solve", "strong_damping_solve.json", 0),
    ];
    let mut bundled: Vec<_> = fs::read_dir(configs()).unwrap().map(|e| e.unwrap().file_name()).collect();
    bundled.sort();
    assert_eq!(bundled.len(), expected.len());
    for (cmd, name, code) in expected {
        let dir = TempDir::new().unwrap();
        let start = Instant::now();
        assert_eq!(run(cmd, &configs().join(name), dir.path()), code, "{name}");
        assert!(start.elapsed() < Duration::from_secs(60), "{name}");
    }
}
