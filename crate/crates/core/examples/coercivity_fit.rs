//! Fits `(C_ε, c)` in the adjusted coercivity inequality for several `ε`, on
//! two resolutions, next to the torus where plain coercivity holds.

use enslab::fields::Grid;
use enslab::operators::RandomFieldSpec;
use enslab::spectrum::{fit_coercivity, negativity_of, CoercivitySearch, FormMatrices, GalerkinBasis};

fn main() -> enslab::Result<()> {
    let spec = RandomFieldSpec::default();
    for (na, nr) in [(128, 64), (256, 128)] {
        let grid = Grid::disk(1.0, na, nr)?;
        let basis = GalerkinBasis::new(&grid, spec);
        let forms = FormMatrices::new(&basis)?;
        let neg = negativity_of(&basis, &forms)?;
        println!("{na}x{nr}: {} basis fields, min <u,Au>/|u|^2 = {:.4}", basis.len(), neg.min_quotient);
        for eps in [0.01, 0.05, 0.1, 0.5] {
            let fit = fit_coercivity(&forms, eps, &CoercivitySearch::default())?;
            println!("  eps = {eps:<5} C_eps = {:<6} c = {:.4}", fit.c_eps, fit.c);
        }
    }
    let torus = Grid::torus(4.0, 64, 64)?;
    let basis = GalerkinBasis::new(&torus, spec);
    let neg = negativity_of(&basis, &FormMatrices::new(&basis)?)?;
    println!("torus: min <u,Au>/|u|^2 = {:.4}", neg.min_quotient);
    Ok(())
}
