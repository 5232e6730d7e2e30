//! At toy size the matrix-free `A` is checked against a dense assembly, and
//! dense eigenvalues against shift-invert Arnoldi.

use enslab::fields::Grid;
use enslab::operators::apply_A;
use enslab::spectrum::{assemble_dense, assemble_dense_composed, dense_eigenvalues, eigen_A_iterative};

fn main() -> enslab::Result<()> {
    let grid = Grid::disk(1.0, 32, 16)?;
    let a = assemble_dense(&grid, apply_A)?;
    let b = assemble_dense_composed(&grid)?;
    println!("dense size {}; |A - A_composed|_max / |A|_max = {:.2e}", a.nrows(), (&a - &b).amax() / a.amax());

    let mut dense = dense_eigenvalues(&a);
    dense.sort_by(|x, y| x.norm().total_cmp(&y.norm()));
    let ritz = eigen_A_iterative(&grid, 60, 1e-10, 1)?;
    println!("{:>16} {:>16} {:>10}", "arnoldi", "dense", "rel diff");
    for r in ritz.iter().take(10) {
        let z = num_complex::Complex64::new(r.re, r.im);
        let near = dense.iter().min_by(|p, q| (*p - z).norm().total_cmp(&(*q - z).norm())).unwrap();
        println!("{:>16.10} {:>16.10} {:>10.2e}", r.re, near.re, (near - z).norm() / z.norm());
    }
    Ok(())
}
