//! A boundary-layer field on the unit disk with `⟨u, Au⟩ < 0`, found by
//! sweeping the curvature of its stream function at the wall.

use enslab::counterexample::{harmonic_conjugate_defect, search_counterexample, BoundaryLayerProfile, SweepSpec};
use enslab::fields::Grid;
use enslab::operators::RandomFieldSpec;
use enslab::spectrum::fit_negativity;

fn main() -> enslab::Result<()> {
    let grid = Grid::disk(1.0, 256, 128)?;
    let (eps, c) = (0.05, 5.0);
    let report = search_counterexample(&grid, &BoundaryLayerProfile::dipole(), eps, c, &SweepSpec::default())?;
    let f = &report.form;
    println!("gamma''(0)        = {:.3}", report.profile.gamma2);
    println!("<u,Au>            = {:.4}", f.total);
    println!("|grad u|^2        = {:.4}", f.grad_energy);
    println!("|div u|^2         = {:.4}", f.div_norm_sq);
    println!("eps|grad u|^2 - C|div u|^2 - <u,Au> = {:.4}  (eps = {eps}, C = {c})", report.margin);
    println!("harmonic-conjugate defect = {:.2e}", harmonic_conjugate_defect(&report.u)?);

    let coarse = Grid::disk(1.0, 128, 64)?;
    let neg = fit_negativity(&coarse, RandomFieldSpec::default())?;
    println!("Galerkin min <u,Au>/|u|^2 over {} fields = {:.4}", neg.basis_size, neg.min_quotient);
    Ok(())
}
