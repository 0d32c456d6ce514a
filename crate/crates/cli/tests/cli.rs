use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bvqpco_core::design_objective::design_cost_classical;
use bvqpco_core::pde_model::{DesignPoint, HeatProblem};
use tempfile::TempDir;

const SMALL_LOOP: &str = r#"
mode = "bvqpco"
seed = 3

[bo]
n_init = 4
iterations = 2
n_mc = 32
acquisition_starts = 8
restarts = 1

[bo.inner]
max_iters = 15
gamma = 1e-5
adagrad_step = 0.05
ansatz = { layers = 2 }
"#;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bvqpco"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run_in(dir: &Path, verb: &str, config: &Path, out: &str) -> (Output, PathBuf) {
    let out = dir.join(out);
    let o = bin(&[
        verb,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    (o, out)
}

#[test]
fn verify_exits_zero() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("v");
    let o = bin(&["verify", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("[pass] all_bounds_satisfied"));
    for f in [
        "bounds.json",
        "bounds.txt",
        "complexity.csv",
        "config.toml",
        "report.json",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn validation_failures_exit_two() {
    let tmp = TempDir::new().unwrap();
    let unknown = write_config(
        tmp.path(),
        "unknown.toml",
        "mode = \"verify-bounds\"\nseed = 0\nbogus = 1\n",
    );
    let (o, _) = run_in(tmp.path(), "run", &unknown, "a");
    assert_eq!(code(&o), 2);

    let no_seed = write_config(tmp.path(), "noseed.toml", "mode = \"verify-bounds\"\n");
    let (o, _) = run_in(tmp.path(), "run", &no_seed, "b");
    assert_eq!(code(&o), 2);

    let bad_bounds = write_config(
        tmp.path(),
        "bounds.toml",
        "mode = \"classical-baseline\"\nseed = 0\n[problem]\nbounds = { l_min = 4.0, l_max = 2.0, alpha_min = 0.2, alpha_max = 0.3 }\n",
    );
    let (o, _) = run_in(tmp.path(), "run", &bad_bounds, "c");
    assert_eq!(code(&o), 2);

    let missing = tmp.path().join("missing.toml");
    let (o, _) = run_in(tmp.path(), "run", &missing, "d");
    assert_eq!(code(&o), 2);

    for shots in ["0", "-3", "many"] {
        let out = tmp.path().join("e");
        let o = bin(&["verify", "--shots", shots, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 2, "--shots {shots}");
    }
    assert_eq!(code(&bin(&["frobnicate"])), 2);
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let tmp = TempDir::new().unwrap();
    let file = tmp.path().join("occupied");
    fs::write(&file, "x").unwrap();
    let o = bin(&["verify", "--out", file.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn unconverged_vqls_exits_three() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "v.toml",
        "mode = \"vqls-only\"\nseed = 0\n[vqls]\ndesigns = [[4.0, 0.2]]\nseeds = 1\n[vqls.solver]\nmax_iters = 1\n",
    );
    let (o, out) = run_in(tmp.path(), "vqls", &cfg, "v");
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("[FAIL]"));
    assert!(out.join("cost_histories.csv").exists());
}

#[test]
fn baseline_passes_and_plots_landscape() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("b");
    let o = bin(&["baseline", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let grid = fs::read_to_string(out.join("baseline_grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 41 * 41 + 1);

    let o = bin(&["plot", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let land = fs::read_to_string(out.join("landscape.csv")).unwrap();
    assert_eq!(land.lines().count(), 41 * 41 + 1);
    assert_eq!(land.lines().next(), Some("l,alpha,cost"));
}

#[test]
fn design_loop_is_deterministic_and_plottable() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "loop.toml", SMALL_LOOP);
    let (o1, a) = run_in(tmp.path(), "run", &cfg, "a");
    let (o2, b) = run_in(tmp.path(), "run", &cfg, "b");
    // the tiny budget is not expected to meet the 1% bar
    assert!(matches!(code(&o1), 0 | 3), "{}", String::from_utf8_lossy(&o1.stderr));
    assert_eq!(code(&o1), code(&o2));
    for f in [
        "trace.csv",
        "evaluations.csv",
        "vqls/iter_000.csv",
        "vqls/iter_005.csv",
        "best.json",
    ] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let trace = fs::read_to_string(a.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 6 + 1);

    let o = bin(&["plot", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let best: Vec<f64> = fs::read_to_string(a.join("best_so_far.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(1).and_then(|v| v.parse().ok()))
        .collect();
    assert_eq!(best.len(), 6);
    assert!(best.windows(2).all(|w| w[1] <= w[0]));
    for svg in ["best_so_far.svg", "inner_histories.svg"] {
        let text = fs::read_to_string(a.join(svg)).unwrap();
        roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{svg}: {e}"));
    }
    let surrogate = fs::read_to_string(a.join("surrogate_grid.csv")).unwrap();
    assert_eq!(surrogate.lines().count(), 41 * 41 + 1);
}

#[test]
fn oracle_injection_reproduces_classical_costs() {
    let tmp = TempDir::new().unwrap();
    let text = SMALL_LOOP.replace("restarts = 1", "restarts = 1\noracle_injection = true");
    let cfg = write_config(tmp.path(), "oracle.toml", &text);
    let (o, out) = run_in(tmp.path(), "run", &cfg, "o");
    assert!(matches!(code(&o), 0 | 3), "{}", String::from_utf8_lossy(&o.stderr));
    let p = HeatProblem::reference();
    let evals = fs::read_to_string(out.join("evaluations.csv")).unwrap();
    let mut rows = 0;
    for line in evals.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let d = DesignPoint::new(f[0].parse().unwrap(), f[1].parse().unwrap());
        let cost: f64 = f[3].parse().unwrap();
        let want = design_cost_classical(&d, &p).unwrap();
        assert!((cost - want).abs() <= 1e-9 * want.abs(), "{line}");
        rows += 1;
    }
    assert_eq!(rows, 6);
    assert!(!out.join("vqls").exists());
}

#[test]
fn vqls_study_writes_histories_and_chart() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "v.toml",
        "mode = \"vqls-only\"\nseed = 0\n[vqls]\ndesigns = [[4.0, 0.2]]\nseeds = 2\n",
    );
    let (o, out) = run_in(tmp.path(), "vqls", &cfg, "v");
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let hist = fs::read_to_string(out.join("cost_histories.csv")).unwrap();
    assert_eq!(hist.lines().next(), Some("design,seed,iter,cost"));
    let profiles = fs::read_to_string(out.join("vqls_design0_profiles.csv")).unwrap();
    assert_eq!(profiles.lines().count(), 8 * 4 + 1);
    let o = bin(&[
        "plot",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let svg = fs::read_to_string(out.join("cost_histories.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 2);
}
