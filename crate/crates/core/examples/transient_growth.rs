//! `‖u‖` grows in the first steps from data with `⟨u, Au⟩ < 0` and then decays,
//! while divergence-free data only ever lose energy.

use enslab::counterexample::{build_counterexample_field, demonstrate_energy_increase, BoundaryLayerProfile};
use enslab::fields::Grid;
use enslab::operators::{random_solenoidal, RandomFieldSpec};

fn main() -> enslab::Result<()> {
    let grid = Grid::disk(1.0, 128, 64)?;
    let u0 = build_counterexample_field(&grid, &BoundaryLayerProfile::dipole().with_gamma2(-64.0))?;
    let s = demonstrate_energy_increase(&u0, 1e-3, 400)?;
    let peak = s.l2_sq.iter().copied().fold(0.0, f64::max);
    println!(
        "counterexample data: |u0|^2 = {:.4}, |u1|^2 = {:.4}, peak {:.4} after {} steps, final {:.4}",
        s.l2_sq[0],
        s.l2_sq[1],
        peak,
        s.growth_steps,
        s.l2_sq.last().unwrap()
    );

    let v0 = random_solenoidal(&grid, RandomFieldSpec::default(), 2);
    let s = demonstrate_energy_increase(&v0, 1e-3, 400)?;
    println!(
        "solenoidal data:     non-increasing = {}, |v0|^2 = {:.4}, final {:.4}",
        s.non_increasing,
        s.l2_sq[0],
        s.l2_sq.last().unwrap()
    );
    Ok(())
}
