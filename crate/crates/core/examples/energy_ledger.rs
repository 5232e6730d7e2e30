//! A linear run from random wall-vanishing data with every constant fitted
//! first: `(C_ε, c)` from the Galerkin coercivity fit and `(c1, c2)` for the
//! non-quadratic energy. The ledger is written to `ledger.csv`.

use std::fs::File;
use std::io::BufWriter;

use enslab::bessel::jn_prime_zero;
use enslab::fields::Grid;
use enslab::operators::{random_field, AdjustedIPParams, RandomFieldSpec};
use enslab::spectrum::{fit_coercivity, CoercivitySearch, FormMatrices, GalerkinBasis};
use enslab::timestepping::{fit_energy_constants, run, SchemeConfig};

fn main() -> enslab::Result<()> {
    let grid = Grid::disk(1.0, 128, 64)?;
    let spec = RandomFieldSpec::default();
    let (eps, dt) = (0.05, 1e-3);

    let forms = FormMatrices::new(&GalerkinBasis::new(&grid, spec))?;
    let fit = fit_coercivity(&forms, eps, &CoercivitySearch::default())?;
    let energy = fit_energy_constants(&grid, spec, dt, 0.5, 100, 11)?;
    println!("C_eps = {}, c = {:.4}, c1 = {}, c2 = {}", fit.c_eps, fit.c, energy.c1, energy.c2);

    let cfg = SchemeConfig {
        dt,
        n_steps: 1000,
        adjusted: AdjustedIPParams::new(eps, fit.c_eps)?,
        decay_rate: 1.0 / fit.c,
        c1: energy.c1,
        c2: energy.c2,
        eps_e: energy.eps_e,
        ..SchemeConfig::default()
    };
    let ledger = run(&cfg, &random_field(&grid, spec, 5))?;
    let checks = ledger.checks(jn_prime_zero(1, 1).powi(2), 0.0);
    let worst = ledger.combined_factors().into_iter().fold(0.0, f64::max);
    println!("status                     {:?}", ledger.status);
    println!("worst combined factor      {worst:.6} (bound {:.6})", 1.0 - cfg.decay_rate * dt);
    println!("max inequality residual    {:.3e}", checks.max_disc_ineq_resid);
    println!("max energy monitor / E0    {:.3e}", checks.max_energy_monitor);
    println!("divergence decay ratio     {:.4}", checks.div_decay_ratio);
    ledger.write_csv(BufWriter::new(File::create("ledger.csv")?))?;
    println!("wrote ledger.csv ({} rows)", ledger.rows.len());
    Ok(())
}
