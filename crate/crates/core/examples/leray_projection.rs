//! Helmholtz–Hodge split of a random wall-vanishing field on the disk.

use enslab::fields::{divergence, gradient, l2_inner_vec, l2_norm, l2_norm_vec, Grid, Trace};
use enslab::operators::{leray_project, project, random_field, RandomFieldSpec};

fn main() -> enslab::Result<()> {
    let grid = Grid::disk(1.0, 128, 64)?;
    let u = random_field(&grid, RandomFieldSpec::default(), 1);
    let split = leray_project(&u);
    let grad_q = gradient(&split.q);

    let cos = l2_inner_vec(&split.v, &grad_q)? / (l2_norm_vec(&split.v) * l2_norm_vec(&grad_q));
    let again = project(&split.v).axpy(-1.0, &split.v)?;
    println!("|u|       = {:.6}", l2_norm_vec(&u));
    println!("|Pu|      = {:.6}", l2_norm_vec(&split.v));
    println!("|grad q|  = {:.6}", l2_norm_vec(&grad_q));
    println!("cos(Pu, grad q)    = {cos:.2e}");
    println!("|P(Pu) - Pu|/|Pu|  = {:.2e}", l2_norm_vec(&again) / l2_norm_vec(&split.v));
    let weak = divergence(&split.v.clone().with_trace(Trace::Zero));
    println!("|div Pu| (no-flux) = {:.2e}", l2_norm(&weak));
    Ok(())
}
