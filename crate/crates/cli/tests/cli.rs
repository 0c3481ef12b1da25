use std::path::Path;
use std::process::{Command, Output};

use corot_cli::{parse_data, RunConfig};
use corot_ensemble::InitialData;
use serde_json::Value;

const SMALL: [&str; 4] = ["--set", "grid.r_max=3", "--set", "grid.n_points=256"];

fn corot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corot"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn help_documents_every_key() {
    let out = corot(&["--help"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    for key in [
        "[model]",
        "d ",
        "s ",
        "k ",
        "[grid]",
        "r_max",
        "n_points",
        "dt_factor",
        "[noise]",
        "c ",
        "beta",
        "modes",
        "[run]",
        "t_final",
        "horizon",
        "paths",
        "seed",
        "[detect]",
        "amp_threshold",
        "fit_window",
        "[lp]",
        "delta",
        "big_C",
        "N ",
        "omega_bar",
        "tau_max",
        "picard_tol",
        "[control]",
        "T1",
    ] {
        assert!(text.contains(key), "--help lacks {key}");
    }
}

#[test]
fn profile_check_passes_on_the_default_grid() {
    let out = corot(&["profile-check"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    assert_eq!(r["pass"], true);
    assert!(r["high_order_max"].as_f64().unwrap() <= 1e-4);
}

#[test]
fn profile_check_fails_on_a_coarse_grid() {
    let out = corot(&["profile-check", "--set", "grid.n_points=16"]);
    assert_eq!(code(&out), 1);
    assert_eq!(json(&out)["pass"], false);
    assert!(String::from_utf8_lossy(&out.stderr).contains("residual"));
}

#[test]
fn bad_configs_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        "[model]\nq = 1\n",
        "[model]\ns = 1.4\n",
        "[model]\nk = 5\n",
        "[grid]\ndt_factor = 0.9\n",
        "[run]\nhorizon = 3.0\n",
        "grid = [\n",
        "[bogus]\n",
    ];
    for (i, text) in cases.iter().enumerate() {
        let p = write(dir.path(), &format!("c{i}.toml"), text);
        let out = corot(&["-c", &p, "profile-check"]);
        assert_eq!(
            code(&out),
            2,
            "{text:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert_eq!(
        code(&corot(&["profile-check", "--set", "grid.n_points"])),
        2
    );
    assert_eq!(
        code(&corot(&["profile-check", "--set", "grid.n_points=\"x\""])),
        2
    );
    assert_eq!(code(&corot(&["no-such-command"])), 2);
    assert_eq!(
        code(&corot(&["simulate", "--data", "bump:1:2", "--out", "x"])),
        2
    );
}

#[test]
fn missing_files_are_io_errors() {
    assert_eq!(
        code(&corot(&["-c", "/nonexistent/corot.toml", "spectrum"])),
        3
    );
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--data", "/nonexistent/data.csv", "--out"];
    let out_dir = dir.path().to_str().unwrap();
    args.push(out_dir);
    args.extend(SMALL);
    assert_eq!(code(&corot(&args)), 3);
}

#[test]
fn data_selectors_parse() {
    assert_eq!(parse_data("zero").unwrap(), InitialData::Zero);
    assert_eq!(
        parse_data("self-similar").unwrap(),
        InitialData::SelfSimilar { t_blowup: 1.0 }
    );
    assert_eq!(
        parse_data("self-similar:1.5").unwrap(),
        InitialData::SelfSimilar { t_blowup: 1.5 }
    );
    assert_eq!(
        parse_data("perturbed:1:0.002").unwrap(),
        InitialData::SelfSimilarPerturbed {
            t_blowup: 1.0,
            eps: 0.002,
            center: 0.0,
            width: 0.5
        }
    );
    assert_eq!(
        parse_data("bump:0.1:0.5:0.25").unwrap(),
        InitialData::Bump {
            amp: 0.1,
            center: 0.5,
            width: 0.25
        }
    );
    assert!(matches!(
        parse_data("u0.csv").unwrap(),
        InitialData::Custom { .. }
    ));
    assert!(parse_data("self-similar:x").is_err());
    assert!(parse_data("bump:1").is_err());
}

#[test]
fn overrides_win_over_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "c.toml",
        "[grid]\nn_points = 100\n[run]\nseed = 4\n",
    );
    let cfg = RunConfig::load_with(Some(Path::new(&p)), &["grid.n_points=300".into()]).unwrap();
    assert_eq!(cfg.grid.n_points, 300);
    assert_eq!(cfg.run.seed, 4);
    assert_eq!(cfg.grid.r_max, 6.0);
}

#[test]
fn simulate_recovers_the_blowup_time_of_self_similar_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let mut args = vec![
        "simulate",
        "--data",
        "self-similar:1",
        "--out",
        d,
        "--set",
        "run.t_final=1.2",
    ];
    args.extend(["--set", "run.horizon=1.2"]);
    args.extend(SMALL);
    let out = corot(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    assert_eq!(r["blew_up"], true);
    assert!(
        (r["t_hat"].as_f64().unwrap() - 1.0).abs() <= 0.01,
        "{}",
        r["t_hat"]
    );
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,r,u,u_hat\n0,"));
    assert!(!csv.contains('\r'));
    let report: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report, r);
}

#[test]
fn simulate_zero_data_stays_global() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "simulate",
        "--data",
        "zero",
        "--out",
        dir.path().to_str().unwrap(),
    ];
    args.extend(SMALL);
    let r = json(&corot(&args));
    assert_eq!(r["blew_up"], false);
    assert_eq!(r["sup_amp"].as_f64().unwrap(), 0.0);
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let run = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        let mut args = vec![
            "simulate",
            "--data",
            "bump:0.5:0:0.4",
            "--seed",
            seed,
            "--out",
        ];
        args.push(dir.path().to_str().unwrap());
        args.extend(SMALL);
        args.extend([
            "--set",
            "noise.c=1.0",
            "--set",
            "run.t_final=0.5",
            "--set",
            "run.horizon=0.5",
        ]);
        assert_eq!(code(&corot(&args)), 0);
        std::fs::read(dir.path().join("trajectory.csv")).unwrap()
    };
    let a = run("7");
    assert_eq!(a, run("7"));
    assert_ne!(a, run("8"));
}

#[test]
fn demo_ensemble_is_reproducible() {
    let demo = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/demo.toml");
    let run = |threads: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = corot(&[
            "-c",
            demo,
            "ensemble",
            "--no-timing",
            "--threads",
            threads,
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let stats = json(&out);
        assert_eq!(stats["paths"], 16);
        (
            std::fs::read(dir.path().join("records.csv")).unwrap(),
            std::fs::read(dir.path().join("manifest.json")).unwrap(),
        )
    };
    let (records, manifest) = run("1");
    assert_eq!((records.clone(), manifest), run("1"));
    assert_eq!(records, run("2").0);
}

#[test]
fn ensemble_sweep_writes_one_row_per_amplitude() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "ensemble",
        "--data",
        "zero",
        "--sweep",
        "0,0.5",
        "--paths",
        "3",
        "--no-timing",
    ];
    args.extend([
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "run.t_final=0.3",
        "--set",
        "run.horizon=0.3",
    ]);
    args.extend(SMALL);
    let out = corot(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = json(&out);
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert_eq!(rows[0]["blowups"], 0);
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn lp_solve_returns_the_blowup_time_of_exact_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = corot(&[
        "lp-solve",
        "--data",
        "self-similar:1",
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "grid.r_max=3",
        "--set",
        "grid.n_points=384",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    assert!((r["t_tilde"].as_f64().unwrap() - 1.0).abs() <= 1e-6);
    assert_eq!(r["within_ball"], true);
    assert!(dir.path().join("lp_diagnostics.json").exists());
}

#[test]
fn spectrum_reports_the_unstable_eigenvalue() {
    let out = corot(&["spectrum"]);
    assert_eq!(code(&out), 0);
    let r = json(&out);
    assert!((r["eigenvalue"].as_f64().unwrap() - 1.0).abs() < 1e-3);
    assert!(r["gauge_residual"].as_f64().unwrap() <= 1e-3);
    assert!(r["projection_defect"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn steer_reaches_a_bump_target() {
    let dir = tempfile::tempdir().unwrap();
    let out = corot(&[
        "steer",
        "--target",
        "bump:0.1:0.5:0.25",
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "grid.r_max=2",
        "--set",
        "grid.n_points=256",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    assert!(r["endpoint_error"].as_f64().unwrap() <= 1e-3);
    assert_eq!(r["continuity"].as_array().unwrap().len(), 3);
    assert!(dir.path().join("steer.json").exists());
    let tight = corot(&[
        "steer",
        "--target",
        "bump:0.1:0.5:0.25",
        "--tol",
        "1e-12",
        "--set",
        "grid.r_max=2",
        "--set",
        "grid.n_points=256",
    ]);
    assert_eq!(code(&tight), 1);
}
