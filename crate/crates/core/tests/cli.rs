use std::path::Path;

use enslab::cli::{main as cli, EXIT_CONFIG, EXIT_OK, EXIT_VERIFY};

fn run(args: &[&str]) -> i32 {
    cli(std::iter::once("enslab").chain(args.iter().copied()))
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn torus_shear_config_verifies() {
    let out = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/torus_linear.json");
    let code = run(&["--config", cfg.to_str().unwrap(), "--out", out.path().to_str().unwrap(), "--verify"]);
    assert_eq!(code, EXIT_OK);
    let r = report(out.path());
    let shear = r["checks"].as_array().unwrap().iter().find(|c| c["name"] == "shear_decay").unwrap();
    assert!(shear["value"].as_f64().unwrap() <= 1e-10);
    assert!(out.path().join("ledger.csv").exists());
    let resolved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("resolved_config.json")).unwrap()).unwrap();
    assert_eq!(resolved["initial"]["field"], "shear");
}

#[test]
fn configuration_errors_exit_one_and_write_nothing() {
    let out = tempfile::tempdir().unwrap();
    let dir = out.path().join("run");
    let o = dir.to_str().unwrap();
    assert_eq!(run(&["--set", "scheme.dt=-1", "--out", o]), EXIT_CONFIG);
    assert_eq!(run(&["--set", "no.such.key=1", "--out", o]), EXIT_CONFIG);
    assert_eq!(run(&["--set", "missing_equals", "--out", o]), EXIT_CONFIG);
    assert_eq!(run(&["--config", "/definitely/not/here.json", "--out", o]), EXIT_CONFIG);
    assert_eq!(run(&["--set", "experiment=counterexample", "--set", "domain.kind=torus", "--out", o]), EXIT_CONFIG);
    // One bad sweep value rejects the whole sweep before any run starts.
    assert_eq!(run(&["--sweep", "scheme.dt=1e-3,-1", "--out", o]), EXIT_CONFIG);
    assert_eq!(run(&["--bogus"]), EXIT_CONFIG);
    assert!(!dir.exists());
}

#[test]
fn failed_invariant_exits_three() {
    let out = tempfile::tempdir().unwrap();
    let o = out.path().to_str().unwrap();
    // A coercivity target this strict cannot be violated.
    let code = run(&[
        "--set",
        "experiment=counterexample",
        "--set",
        "domain.n_angular=64",
        "--set",
        "domain.n_radial=32",
        "--set",
        "counterexample.c=1e6",
        "--set",
        "counterexample.sweep.count=2",
        "--out",
        o,
        "--verify",
    ]);
    assert_ne!(code, EXIT_OK);
    // Without --verify, a failing check is only recorded.
    let code = run(&[
        "--set",
        "experiment=evolve-nonlinear",
        "--set",
        "domain.n_angular=32",
        "--set",
        "domain.n_radial=16",
        "--set",
        "initial.field=random-solenoidal",
        "--set",
        "scheme.steps=5",
        "--out",
        o,
    ]);
    assert_eq!(code, EXIT_OK);
    let r = report(out.path());
    let failing: Vec<_> = r["checks"].as_array().unwrap().iter().filter(|c| c["pass"] == false).collect();
    assert!(!failing.is_empty());
    let code = run(&[
        "--set",
        "experiment=evolve-nonlinear",
        "--set",
        "domain.n_angular=32",
        "--set",
        "domain.n_radial=16",
        "--set",
        "initial.field=random-solenoidal",
        "--set",
        "scheme.steps=5",
        "--out",
        o,
        "--verify",
    ]);
    assert_eq!(code, EXIT_VERIFY);
}

#[test]
fn sweeps_write_one_directory_per_point() {
    let out = tempfile::tempdir().unwrap();
    let o = out.path().to_str().unwrap();
    let code = run(&[
        "--set",
        "experiment=project",
        "--set",
        "domain.n_angular=32",
        "--set",
        "domain.n_radial=16",
        "--sweep",
        "seed=1,2",
        "--sweep",
        "initial.max_mode=2,3",
        "--out",
        o,
        "--verify",
    ]);
    assert_eq!(code, EXIT_OK);
    for seed in [1, 2] {
        for m in [2, 3] {
            let d = out.path().join(format!("seed={seed},initial.max_mode={m}"));
            assert!(d.join("projected.csv").exists(), "{}", d.display());
            assert_eq!(report(&d)["results"]["seed"], seed);
        }
    }
}

#[test]
fn spectrum_and_stokes_pressure_on_a_small_disk() {
    let out = tempfile::tempdir().unwrap();
    for exp in ["spectrum", "stokes-pressure"] {
        let d = out.path().join(exp);
        let code = run(&[
            "--set",
            &format!("experiment={exp}"),
            "--set",
            "domain.n_angular=32",
            "--set",
            "domain.n_radial=16",
            "--set",
            "spectrum.max_mode=8",
            "--out",
            d.to_str().unwrap(),
            "--verify",
        ]);
        assert_eq!(code, EXIT_OK, "{exp}");
    }
    let csv = std::fs::read_to_string(out.path().join("spectrum/spectrum.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), enslab::spectrum::SPECTRUM_HEADER);
    assert_eq!(csv.lines().count(), 16);
}
