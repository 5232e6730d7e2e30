//! The divergence of the scheme obeys a Neumann heat equation: from the first
//! Neumann eigenfunction it decays by `1/(1 + (λ₁ + α)δt)` per step.

use enslab::bessel::{jn, jn_prime_zero};
use enslab::fields::{divergence, gradient, l2_norm, Grid, Location, ScalarField, Trace};
use enslab::timestepping::step_damped;

fn main() -> enslab::Result<()> {
    let grid = Grid::disk(1.0, 128, 64)?;
    let k = jn_prime_zero(1, 1);
    let lambda1 = k * k;
    let phi = ScalarField::from_fn(&grid, Location::Face, |x, y| jn(1, k * x.hypot(y)) * y.atan2(x).cos());
    let u0 = gradient(&phi).with_trace(Trace::Free);
    let dt = 1e-3;
    println!("lambda_1 = {lambda1:.6}");
    for alpha in [0.0, 1.0, 10.0] {
        let mut u = u0.clone();
        let mut prev = l2_norm(&divergence(&u));
        let mut factor = 0.0;
        for _ in 0..200 {
            u = step_damped(&u, None, dt, alpha)?;
            let d = l2_norm(&divergence(&u));
            factor = d / prev;
            prev = d;
        }
        let expect = 1.0 / (1.0 + (lambda1 + alpha) * dt);
        println!("alpha = {alpha:>4}: factor {factor:.8}, expected {expect:.8}, rel err {:.2e}", factor / expect - 1.0);
    }
    Ok(())
}
