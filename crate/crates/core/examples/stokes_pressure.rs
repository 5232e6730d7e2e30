//! The Stokes pressure three ways: inside `A`, through the commutator
//! `(ΔP − PΔ)u`, and on the torus where it vanishes.

use enslab::fields::{l2_norm_vec, vector_laplacian, Grid, Location};
use enslab::operators::{
    apply_A, quadratic_form, random_field, stokes_pressure, stokes_pressure_commutator, RandomFieldSpec,
};

fn annulus_difference(a: &enslab::fields::VectorField, b: &enslab::fields::VectorField) -> f64 {
    let g = a.grid();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..g.cell_count() {
        let (r, _) = g.node_polar(Location::Cell, i);
        if r > 0.3 && r < 0.8 {
            let w = g.cell_weights()[i];
            num += w * ((a.x()[i] - b.x()[i]).powi(2) + (a.y()[i] - b.y()[i]).powi(2));
            den += w * (a.x()[i].powi(2) + a.y()[i].powi(2));
        }
    }
    (num / den).sqrt()
}

fn main() -> enslab::Result<()> {
    println!("n_radial  |A - (-L + grad p_s)|  commutator gap (0.3 < r < 0.8)");
    for n in [16, 32, 64, 128] {
        let grid = Grid::disk(1.0, 2 * n, n)?;
        let u = random_field(&grid, RandomFieldSpec::default(), 7);
        let (gp, _) = stokes_pressure(&u);
        let a = apply_A(&u);
        let route = gp.axpy(-1.0, &vector_laplacian(&u))?;
        let err = l2_norm_vec(&a.axpy(-1.0, &route)?) / l2_norm_vec(&a);
        let gap = annulus_difference(&gp, &stokes_pressure_commutator(&u));
        println!("{n:>8}  {err:>20.2e}  {gap:>10.3e}");
    }

    let torus = Grid::torus(2.0 * std::f64::consts::PI, 64, 64)?;
    let u = random_field(&torus, RandomFieldSpec::default(), 3);
    let form = quadratic_form(&u)?;
    println!();
    println!("torus: |grad p_s| = {:.2e}", l2_norm_vec(&stokes_pressure(&u).0));
    println!("torus: <u,Au> = {:.12}, |grad u|^2 = {:.12}", form.total, form.grad_energy);
    Ok(())
}
