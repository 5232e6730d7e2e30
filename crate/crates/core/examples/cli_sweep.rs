//! Drives the batch front end in-process: a torus shear run swept over two
//! time steps, verified, with outputs under `out/example_sweep`.

fn main() {
    let code = enslab::cli::main([
        "enslab",
        "--set",
        "experiment=evolve-linear",
        "--set",
        "domain.kind=torus",
        "--set",
        "domain.size=6.283185307179586",
        "--set",
        "domain.n_angular=32",
        "--set",
        "domain.n_radial=32",
        "--set",
        "initial.field=shear",
        "--sweep",
        "scheme.dt=0.01,0.02",
        "--out",
        "out/example_sweep",
        "--verify",
    ]);
    println!("exit code {code}");
    for dt in ["0.01", "0.02"] {
        let path = format!("out/example_sweep/scheme.dt={dt}/report.json");
        let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        for c in report["checks"].as_array().unwrap() {
            println!(
                "dt={dt} {:<32} {:.3e} <= {:.3e} {}",
                c["name"].as_str().unwrap(),
                c["value"].as_f64().unwrap(),
                c["bound"].as_f64().unwrap(),
                c["pass"]
            );
        }
    }
}
