use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lamperti::config::ExperimentConfig;
use lamperti::presets;
use tempfile::TempDir;

fn lamperti(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lamperti"))
        .args(args)
        .env_remove("LAMPERTI_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    lamperti(args).status.code().expect("exit code")
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&["check", "--preset", "cir-ladder"]), 0);
    assert_eq!(code(&["--self-test"]), 0);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["check", "--preset", "cir-feller-violated"]), 3);
    assert_eq!(code(&["check", "--preset", "no-such-preset"]), 3);
    assert_eq!(
        code(&["check", "--preset", "cir-ladder", "--set", "model.gamma=1"]),
        3
    );
    assert_eq!(
        code(&[
            "check",
            "--preset",
            "ait-sahalia",
            "--set",
            "model.alpha_0=10",
            "--set",
            "grid.dt=0.5"
        ]),
        4
    );
    assert_eq!(
        code(&[
            "simulate",
            "--preset",
            "wright-fisher",
            "--set",
            "scheme.max_iterations=1",
            "--set",
            "scheme.residual_tol=1e-300",
            "--out",
            out,
        ]),
        5
    );
    let file = dir.path().join("plain-file");
    fs::write(&file, "").unwrap();
    let nested = file.join("sub");
    assert_eq!(
        code(&[
            "simulate",
            "--preset",
            "cir-ladder",
            "--out",
            nested.to_str().unwrap()
        ]),
        6
    );
}

#[test]
fn single_cir_path_has_one_row_per_grid_point() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let status = lamperti(&["simulate", "--preset", "cir-ladder", "--out", out]);
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let csv = read(&dir.path().join("trajectory_00000.csv"));
    let header = csv.lines().next().unwrap();
    assert_eq!(header, "k,t,state");
    let rows = rows(&csv);
    assert_eq!(rows.len(), 257);
    assert_eq!(rows[256][1].parse::<f64>().unwrap(), 1.0);
    assert!(rows.iter().all(|r| r[2].parse::<f64>().unwrap() > 0.0));
}

#[test]
fn simulate_is_bit_identical_across_runs_and_worker_counts() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = |dir: &TempDir, workers: &'static str| {
        let out = dir.path().to_str().unwrap().to_string();
        lamperti(&[
            "simulate",
            "--preset",
            "heston32",
            "--paths",
            "3",
            "--workers",
            workers,
            "--dump-brownian",
            "binary",
            "--out",
            &out,
        ])
    };
    assert!(args(&a, "1").status.success());
    assert!(args(&b, "4").status.success());
    for name in [
        "trajectory_00000.csv",
        "trajectory_00002.csv",
        "brownian_00001.bin",
    ] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn milstein_column_dominates_lbe_rowwise() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = lamperti(&[
        "simulate",
        "--preset",
        "cir-ladder",
        "--paths",
        "5",
        "--schemes",
        "lbe,milstein-cir",
        "--set",
        "grid.dt=2^-6",
        "--out",
        out,
    ]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    for i in 0..5 {
        let csv = read(&dir.path().join(format!("trajectory_{i:05}.csv")));
        assert!(
            csv.starts_with("k,t,lbe,lbe_transformed,milstein-cir\n"),
            "{csv:.60}"
        );
        for r in rows(&csv) {
            let (y, z): (f64, f64) = (r[2].parse().unwrap(), r[4].parse().unwrap());
            assert!(
                !lamperti::core::error_lab::below_with_slack(z, y),
                "{z} < {y}"
            );
        }
    }
}

#[test]
fn converge_writes_four_ladder_points() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = lamperti(&[
        "converge",
        "--preset",
        "cir-ladder",
        "--n-paths",
        "16",
        "--out",
        out,
    ]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let csv = read(&dir.path().join("convergence.csv"));
    assert!(csv.starts_with("dt,metric,p,value,std_error\n"));
    assert_eq!(rows(&csv).len(), 4);
    assert_eq!(rows(&read(&dir.path().join("loglog.csv"))).len(), 4);
    let json: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("convergence.json"))).unwrap();
    assert_eq!(json["estimates"].as_array().unwrap().len(), 4);
    assert!(json["fit"]["slope"].is_f64());
}

#[test]
fn converge_output_ignores_worker_count() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for (dir, w) in [(&a, "1"), (&b, "3")] {
        let out = dir.path().to_str().unwrap();
        let run = lamperti(&[
            "converge",
            "--preset",
            "wright-fisher",
            "--n-paths",
            "24",
            "--workers",
            w,
            "--set",
            "grid.dt_reference=2^-12",
            "--out",
            out,
        ]);
        assert!(
            run.status.success(),
            "{}",
            String::from_utf8_lossy(&run.stderr)
        );
    }
    for name in ["convergence.csv", "convergence.json", "loglog.csv"] {
        assert_eq!(
            read(&a.path().join(name)),
            read(&b.path().join(name)),
            "{name}"
        );
    }
}

#[test]
fn compare_reports_regime_and_nonnegative_gaps() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = lamperti(&[
        "compare",
        "--preset",
        "cir-compare",
        "--n-paths",
        "64",
        "--out",
        out,
    ]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let json: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("compare.json"))).unwrap();
    assert_eq!(json["in_guaranteed_regime"], serde_json::Value::Bool(true));
    let rows = json["rows"].as_array().unwrap();
    assert!(!rows.is_empty());
    for r in rows {
        assert!(r["l1_grid_gap"]["value"].as_f64().unwrap() >= 0.0);
        assert_eq!(r["domination_violations"], 0);
    }
    assert_eq!(
        code(&[
            "compare",
            "--preset",
            "heston32",
            "--n-paths",
            "4",
            "--out",
            out
        ]),
        3
    );
}

#[test]
fn printed_presets_load_back_unchanged() {
    let dir = TempDir::new().unwrap();
    for name in presets::NAMES {
        let run = lamperti(&["presets", name]);
        assert!(run.status.success());
        let text = String::from_utf8(run.stdout).unwrap();
        let parsed = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(parsed, presets::by_name(name).unwrap(), "{name}");

        let file = dir.path().join(format!("{name}.toml"));
        fs::write(&file, &text).unwrap();
        let expected = if name == "cir-feller-violated" { 3 } else { 0 };
        assert_eq!(
            code(&["check", "--config", file.to_str().unwrap()]),
            expected,
            "{name}"
        );
    }
}

#[test]
fn out_dir_falls_back_to_environment() {
    let dir = TempDir::new().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_lamperti"))
        .args(["simulate", "--preset", "cev"])
        .env("LAMPERTI_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(status.status.success());
    assert!(dir.path().join("trajectory_00000.csv").exists());
}
