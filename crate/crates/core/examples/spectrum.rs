//! Smallest eigenvalues of `A` on the disk, sorted into the Stokes branch and
//! the Neumann branch and matched against both reference spectra.

use enslab::bessel::jn_prime_zero;
use enslab::fields::Grid;
use enslab::spectrum::spectrum_report;

fn main() -> enslab::Result<()> {
    let grid = Grid::disk(1.0, 128, 64)?;
    let report = spectrum_report(&grid, 15, 12)?;
    println!("{:>3} {:>4} {:>14} {:>9} {:>8} {:>10}", "#", "m", "lambda", "branch", "ref", "rel err");
    for e in &report.entries {
        println!(
            "{:>3} {:>4} {:>14.8} {:>9} {:>8.4} {:>10.2e}",
            e.index,
            e.mode,
            e.re,
            e.branch.as_str(),
            e.reference,
            e.rel_err
        );
    }
    let l1 = jn_prime_zero(1, 1).powi(2);
    println!("smallest Neumann value {:.6} vs (j'_11)^2 = {l1:.6}", report.smallest_neumann);
    println!("max |Im|/|lambda| {:.1e}, max residual {:.1e}", report.max_imag_ratio, report.max_residual);
    Ok(())
}
