//! Acceptance report: one PASS/FAIL line per criterion, with the measured
//! values next to the pinned tolerances.
//!
//! The report does not gate the exit status; a FAIL line is a finding to read,
//! and the remaining test targets still run after it.

use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use enslab::bessel::{jn, jn_prime_zero};
use enslab::counterexample::{
    build_counterexample_field, demonstrate_energy_increase, evaluate, harmonic_conjugate_defect,
    search_counterexample, BoundaryLayerProfile, SweepSpec,
};
use enslab::fields::{
    divergence, gradient, h1_semi_sq, l2_norm, l2_norm_vec, lap_norm, Grid, Location, ScalarField, Trace, VectorField,
};
use enslab::operators::{
    adjusted_form_a, apply_A, gradient_potential, quadratic_form, random_field, random_solenoidal, stokes_pressure,
    AdjustedIPParams, RandomFieldSpec,
};
use enslab::spectrum::{
    assemble_dense, assemble_dense_composed, dense_eigenvalues, eigen_A_iterative, fit_coercivity, fit_negativity,
    pack, spectrum_report, CoercivityFit, CoercivitySearch, FormMatrices, GalerkinBasis,
};
use enslab::timestepping::{
    fit_energy_constants, run, small_data_threshold, step_damped, step_linear, step_nonlinear, stokes_reference_step,
    EnergyLedger, RunStatus, SchemeConfig,
};
use num_complex::Complex64;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

type Criterion = fn() -> enslab::Result<Outcome>;

fn lambda1() -> f64 {
    jn_prime_zero(1, 1).powi(2)
}

fn disk(na: usize, nr: usize) -> Arc<Grid> {
    Grid::disk(1.0, na, nr).expect("valid disk grid")
}

fn coercivity_failure() -> enslab::Result<Outcome> {
    let t = Instant::now();
    let grid = disk(256, 128);
    let rep = search_counterexample(&grid, &BoundaryLayerProfile::dipole(), 0.05, 5.0, &SweepSpec::default())?;
    let elapsed = t.elapsed();
    let neg = fit_negativity(&disk(128, 64), RandomFieldSpec::default())?;
    let pass = rep.form.total < 0.0 && rep.satisfied && elapsed <= Duration::from_secs(60) && neg.min_quotient < 0.0;
    Ok(Outcome::new(
        pass,
        format!(
            "<u,Au> = {:.3} < 0, margin {:.3} > 0 at (0.05, 5), {:.1}s <= 60s; Galerkin quotient {:.3} < 0",
            rep.form.total,
            rep.margin,
            elapsed.as_secs_f64(),
            neg.min_quotient
        ),
    ))
}

fn torus_control() -> enslab::Result<Outcome> {
    let grid = Grid::torus(2.0 * std::f64::consts::PI, 64, 64)?;
    let spec = RandomFieldSpec { max_mode: 6, max_degree: 3 };
    let rows = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let u = random_field(&grid, spec, seed);
            let h2 = (l2_norm_vec(&u).powi(2) + h1_semi_sq(&u) + lap_norm(&u).powi(2)).sqrt();
            let p = l2_norm_vec(&stokes_pressure(&u).0) / h2;
            let f = quadratic_form(&u)?;
            Ok((p, (f.total - f.grad_energy).abs() / f.grad_energy))
        })
        .collect::<enslab::Result<Vec<_>>>()?;
    let p = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let q = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(Outcome::new(
        p <= 1e-10 && q <= 1e-9,
        format!(
            "100 fields: max |grad p_s|/|u|_H2 = {p:.1e} <= 1e-10, max rel |<u,Au> - |grad u|^2| = {q:.1e} <= 1e-9"
        ),
    ))
}

fn fits(grid: &Arc<Grid>, eps: &[f64]) -> enslab::Result<Vec<CoercivityFit>> {
    let m = FormMatrices::new(&GalerkinBasis::new(grid, RandomFieldSpec::default()))?;
    eps.iter().map(|&e| fit_coercivity(&m, e, &CoercivitySearch::default())).collect()
}

fn coercivity_ratio(u: &VectorField, eps: f64, fit: &CoercivityFit) -> enslab::Result<f64> {
    let p = AdjustedIPParams::new(eps, fit.c_eps)?;
    let gq = l2_norm_vec(&gradient(&gradient_potential(u))).powi(2);
    let norm = h1_semi_sq(u) + eps * lap_norm(u).powi(2) + fit.c_eps * gq;
    Ok(adjusted_form_a(u, p)? * fit.c / norm)
}

fn h1_equivalent_coercivity() -> enslab::Result<Outcome> {
    let t = Instant::now();
    let eps = [0.01, 0.05, 0.1, 0.5];
    let (coarse, fine) = (disk(128, 64), disk(256, 128));
    let a = fits(&coarse, &eps)?;
    let b = fits(&fine, &eps)?;
    let within2 = |x: f64, y: f64| (x == 0.0 && y == 0.0) || (x > 0.0 && y > 0.0 && (x / y).max(y / x) <= 2.0);
    let stable = a.iter().zip(&b).all(|(x, y)| within2(x.c, y.c) && within2(x.c_eps.max(0.0), y.c_eps.max(0.0)));
    let fit = &b[1];
    let worst = (0..1000u64)
        .into_par_iter()
        .map(|s| coercivity_ratio(&random_field(&fine, RandomFieldSpec::default(), 10_000 + s), 0.05, fit))
        .collect::<enslab::Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    // Fields outside the fit space: more angular modes and radial powers.
    let richer = RandomFieldSpec { max_mode: 8, max_degree: 5 };
    let outside = (0..200u64)
        .into_par_iter()
        .map(|s| coercivity_ratio(&random_field(&fine, richer, 20_000 + s), 0.05, fit))
        .collect::<enslab::Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let elapsed = t.elapsed();
    let pairs: Vec<String> = a.iter().zip(&b).map(|(x, y)| format!("{}:{:.2}/{:.2}", x.epsilon, x.c, y.c)).collect();
    Ok(Outcome::new(
        stable && worst.min(outside) >= 1.0 - 1e-9 && elapsed <= Duration::from_secs(600),
        format!(
            "C_eps = {} at both grids, c (128/256) {}; 1000 fields at eps 0.05: min ratio {worst:.4} >= 1 (richer fields {outside:.4}); {:.0}s",
            b.iter().map(|f| f.c_eps.to_string()).collect::<Vec<_>>().join("/"),
            pairs.join(" "),
            elapsed.as_secs_f64()
        ),
    ))
}

fn harmonic_conjugate() -> enslab::Result<Outcome> {
    let profile = BoundaryLayerProfile::dipole().with_gamma2(-64.0);
    let mut defects = Vec::new();
    for n in [32, 64, 128] {
        let grid = disk(2 * n, n);
        defects.push(harmonic_conjugate_defect(&evaluate(&grid, &profile, 0.05, 5.0)?.u)?);
    }
    let found =
        search_counterexample(&disk(256, 128), &BoundaryLayerProfile::dipole(), 0.05, 5.0, &SweepSpec::default())?;
    let at_found = harmonic_conjugate_defect(&found.u)?;
    let decreasing = defects.windows(2).all(|w| w[1] < w[0]);
    Ok(Outcome::new(
        defects[2] <= 1e-2 && at_found <= 1e-2 && decreasing,
        format!(
            "defect 64x32 {:.2e}, 128x64 {:.2e}, 256x128 {:.2e} (decreasing); at the found field {:.2e} <= 1e-2",
            defects[0], defects[1], defects[2], at_found
        ),
    ))
}

fn divergence_heat_decay() -> enslab::Result<Outcome> {
    let grid = disk(128, 64);
    let k = jn_prime_zero(1, 1);
    let phi = ScalarField::from_fn(&grid, Location::Face, |x, y| jn(1, k * x.hypot(y)) * y.atan2(x).cos());
    let u0 = gradient(&phi).with_trace(Trace::Free);
    let dt = 1e-3;
    let mut errs = Vec::new();
    for alpha in [0.0, 1.0, 10.0] {
        let mut u = u0.clone();
        let mut prev = l2_norm(&divergence(&u));
        let mut worst: f64 = 0.0;
        // The first steps shed the wall trace of the data; the factor is read after.
        for n in 0..200 {
            u = step_damped(&u, None, dt, alpha)?;
            let d = l2_norm(&divergence(&u));
            if n >= 100 {
                worst = worst.max(((d / prev) * (1.0 + (lambda1() + alpha) * dt) - 1.0).abs());
            }
            prev = d;
        }
        errs.push(worst);
    }
    Ok(Outcome::new(
        errs.iter().all(|e| *e <= 1e-2),
        format!(
            "max rel error of the per-step factor, steps 100..200: alpha 0 {:.1e}, 1 {:.1e}, 10 {:.1e} (<= 1e-2)",
            errs[0], errs[1], errs[2]
        ),
    ))
}

struct LinearRun {
    dt: f64,
    c: f64,
    ledger: EnergyLedger,
    elapsed: Duration,
}

/// The 10⁴-step linear runs shared by the energy criteria.
fn linear_runs() -> &'static enslab::Result<Vec<LinearRun>> {
    static RUNS: OnceLock<enslab::Result<Vec<LinearRun>>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let grid = disk(128, 64);
        let spec = RandomFieldSpec::default();
        let eps = 0.05;
        let fit = fits(&grid, &[eps])?.remove(0);
        [1e-3, 1e-2]
            .into_iter()
            .map(|dt| {
                let t = Instant::now();
                let energy = fit_energy_constants(&grid, spec, dt, 0.5, 100, 17)?;
                let cfg = SchemeConfig {
                    dt,
                    n_steps: 10_000,
                    adjusted: AdjustedIPParams::new(eps, fit.c_eps)?,
                    decay_rate: 1.0 / fit.c,
                    c1: energy.c1,
                    c2: energy.c2,
                    eps_e: energy.eps_e,
                    ..SchemeConfig::default()
                };
                let ledger = run(&cfg, &random_field(&grid, spec, 23))?;
                Ok(LinearRun { dt, c: 1.0 / fit.c, ledger, elapsed: t.elapsed() })
            })
            .collect()
    })
}

fn shared_runs() -> enslab::Result<&'static [LinearRun]> {
    match linear_runs() {
        Ok(r) => Ok(r),
        Err(e) => Err(enslab::Error::Solver(format!("linear runs failed: {e}"))),
    }
}

fn discrete_energy_decay() -> enslab::Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in shared_runs()? {
        let l = &r.ledger;
        let e0 = l.combined_energy(&l.rows[0]);
        let floor = 1e-24 * e0;
        let factor = l
            .rows
            .windows(2)
            .filter(|w| l.combined_energy(&w[1]) > floor)
            .map(|w| l.combined_energy(&w[1]) / l.combined_energy(&w[0]))
            .fold(0.0, f64::max);
        let bound = 1.0 - r.c * r.dt;
        let resid = l.rows.iter().map(|x| x.disc_ineq_resid).fold(f64::NEG_INFINITY, f64::max) / e0.max(1.0);
        let ok = l.status == RunStatus::Completed
            && factor <= bound + 1e-12
            && resid <= 1e-8
            && r.elapsed <= Duration::from_secs(300);
        pass &= ok;
        parts.push(format!(
            "dt {}: factor {factor:.6} <= {bound:.6}, resid {resid:.1e} <= 1e-8, {:.0}s",
            r.dt,
            r.elapsed.as_secs_f64()
        ));
    }
    Ok(Outcome::new(pass, format!("c = {:.4}; {}", shared_runs()?[0].c, parts.join("; "))))
}

fn transient_growth() -> enslab::Result<Outcome> {
    let grid = disk(128, 64);
    let u0 = build_counterexample_field(&grid, &BoundaryLayerProfile::dipole().with_gamma2(-64.0))?;
    let s = demonstrate_energy_increase(&u0, 1e-3, 400)?;
    let v0 = random_solenoidal(&grid, RandomFieldSpec::default(), 2);
    let f = demonstrate_energy_increase(&v0, 1e-3, 400)?;
    let grow = f.l2_sq.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    Ok(Outcome::new(
        s.increased_first_step && s.ends_below_initial && f.non_increasing,
        format!(
            "|u1|^2/|u0|^2 = {:.4} > 1, |u400|^2/|u0|^2 = {:.4} < 1; divergence-free: max step ratio {grow:.6} <= 1",
            s.l2_sq[1] / s.l2_sq[0],
            s.l2_sq[400] / s.l2_sq[0]
        ),
    ))
}

fn energy_monitor() -> enslab::Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in shared_runs()? {
        let l = &r.ledger;
        let e0 = l.rows[0].e_c1c2;
        let worst = l.energy_monitor().into_iter().fold(f64::NEG_INFINITY, f64::max);
        pass &= worst <= 1e-6 * e0;
        parts.push(format!("dt {}: max monitor {:.2e} E0 <= 1e-6 E0", r.dt, worst / e0));
    }
    Ok(Outcome::new(pass, parts.join("; ")))
}

fn spectrum_identity() -> enslab::Result<Outcome> {
    let rep = spectrum_report(&disk(128, 64), 15, 12)?;
    let l1 = 3.3900;
    let neumann = (rep.smallest_neumann - l1).abs() / l1;
    Ok(Outcome::new(
        rep.max_rel_err <= 1e-2 && rep.reverse_max_rel_err <= 1e-2 && neumann <= 1e-2,
        format!(
            "15 eigenvalues: max rel err {:.1e} (reverse {:.1e}) <= 1e-2; smallest Neumann {:.5} vs 3.3900 ({:.1e})",
            rep.max_rel_err, rep.reverse_max_rel_err, rep.smallest_neumann, neumann
        ),
    ))
}

fn divergence_free_invariance() -> enslab::Result<Outcome> {
    let measure = |grid: &Arc<Grid>| -> enslab::Result<(f64, f64, f64)> {
        let u0 = random_solenoidal(grid, RandomFieldSpec::default(), 4).scale(0.5);
        let n0 = l2_norm_vec(&u0);
        let dt = 1e-3;
        let (mut a, mut b, mut lin, mut stokes) = (u0.clone(), u0.clone(), u0.clone(), u0.clone());
        let (mut div, mut alpha_dev, mut stokes_dev): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for _ in 0..20 {
            a = step_nonlinear(&a, None, dt, 0.0)?;
            b = step_nonlinear(&b, None, dt, 10.0)?;
            lin = step_linear(&lin, None, dt)?;
            stokes = stokes_reference_step(&stokes, dt)?;
            div = div.max(l2_norm(&divergence(&a)) / n0);
            alpha_dev = alpha_dev.max(l2_norm_vec(&a.axpy(-1.0, &b)?) / n0);
            stokes_dev = stokes_dev.max(l2_norm_vec(&lin.axpy(-1.0, &stokes)?) / n0);
        }
        Ok((div, alpha_dev, stokes_dev))
    };
    let (d, a, s) = measure(&disk(64, 32))?;
    let (td, ta, ts) = measure(&Grid::torus(2.0 * std::f64::consts::PI, 32, 32)?)?;
    Ok(Outcome::new(
        d <= 1e-8 && a <= 1e-9 && s <= 1e-8,
        format!(
            "disk: div {d:.1e} <= 1e-8, alpha dev {a:.1e} <= 1e-9, vs Stokes {s:.1e} <= 1e-8; \
             torus: {td:.1e}, {ta:.1e}, {ts:.1e}"
        ),
    ))
}

fn small_data() -> enslab::Result<Outcome> {
    let grid = disk(32, 16);
    let shape = random_field(&grid, RandomFieldSpec::default(), 3);
    let cfg = SchemeConfig {
        dt: 1e-2,
        n_steps: 10_000,
        adjusted: AdjustedIPParams::new(0.05, 0.0)?,
        ..SchemeConfig::default()
    };
    let rep = small_data_threshold(&cfg, &shape, 4096.0, 6)?;
    let at = rep.trials.iter().find(|t| t.amplitude == rep.threshold).map_or(f64::NAN, |t| t.max_increase);
    Ok(Outcome::new(
        rep.trials.iter().any(|t| t.monotone),
        format!(
            "threshold amplitude {:.3} (first failure {}), max relative step change there {at:.2e}, 10^4 steps",
            rep.threshold,
            rep.failing.map_or("none".into(), |f| format!("{f:.3}"))
        ),
    ))
}

fn dense_oracle() -> enslab::Result<Outcome> {
    let grid = disk(32, 16);
    let a = assemble_dense(&grid, apply_A)?;
    let composed = assemble_dense_composed(&grid)?;
    let mut worst: f64 = (&a - &composed).amax() / a.amax();
    for seed in 0..5 {
        let u = random_field(&grid, RandomFieldSpec { max_mode: 8, max_degree: 4 }, seed);
        let x = nalgebra::DVector::from_vec(pack(&u));
        let y = nalgebra::DVector::from_vec(pack(&apply_A(&u)));
        worst = worst.max((&a * &x - &y).amax() / y.amax());
    }
    let dense = dense_eigenvalues(&a);
    let ritz = eigen_A_iterative(&grid, 60, 1e-10, 1)?;
    let eig = ritz
        .iter()
        .take(10)
        .map(|r| {
            let z = Complex64::new(r.re, r.im);
            dense.iter().map(|d| (d - z).norm()).fold(f64::INFINITY, f64::min) / z.norm()
        })
        .fold(0.0, f64::max);
    Ok(Outcome::new(
        worst <= 1e-10 && eig <= 1e-8 && ritz.len() >= 10,
        format!("dense vs matrix-free {worst:.1e} <= 1e-10; 10 Arnoldi vs dense eigenvalues {eig:.1e} <= 1e-8"),
    ))
}

fn main() {
    let criteria: [(u32, &str, Criterion); 12] = [
        (1, "coercivity fails on the disk", coercivity_failure),
        (2, "torus control", torus_control),
        (3, "H1-equivalent coercivity", h1_equivalent_coercivity),
        (4, "harmonic-conjugate identity", harmonic_conjugate),
        (5, "divergence heat decay", divergence_heat_decay),
        (6, "discrete energy inequality and decay", discrete_energy_decay),
        (7, "transient L2 growth then decay", transient_growth),
        (8, "non-quadratic energy monitor", energy_monitor),
        (9, "spectrum identity", spectrum_identity),
        (10, "divergence-free invariance", divergence_free_invariance),
        (11, "small-data monotonicity", small_data),
        (12, "dense oracle at 32x16", dense_oracle),
    ];
    let mut failed = Vec::new();
    for (n, name, f) in criteria {
        let t = Instant::now();
        let out = f().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        let tag = if out.pass { "PASS" } else { "FAIL" };
        if !out.pass {
            failed.push(n);
        }
        println!("{tag} {n:>2} {name}: {} [{:.1}s]", out.detail, t.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of 12 PASS; failing: {:?}", 12 - failed.len(), failed);
}
