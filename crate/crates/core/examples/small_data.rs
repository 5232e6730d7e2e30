//! Bisection on the amplitude of the initial data for the nonlinear scheme:
//! below the threshold the adjusted energy never increases over 10⁴ steps.

use enslab::fields::Grid;
use enslab::operators::{random_field, AdjustedIPParams, RandomFieldSpec};
use enslab::timestepping::{small_data_threshold, SchemeConfig};

fn main() -> enslab::Result<()> {
    let grid = Grid::disk(1.0, 32, 16)?;
    let shape = random_field(&grid, RandomFieldSpec::default(), 3);
    let cfg = SchemeConfig {
        dt: 1e-2,
        n_steps: 10_000,
        adjusted: AdjustedIPParams::new(0.05, 0.0)?,
        ..SchemeConfig::default()
    };
    let report = small_data_threshold(&cfg, &shape, 4096.0, 6)?;
    for t in &report.trials {
        println!(
            "amplitude {:>9.3}  monotone {:<5}  max relative increase {:+.3e}",
            t.amplitude, t.monotone, t.max_increase
        );
    }
    println!("threshold {:.3} (first failure {:?})", report.threshold, report.failing);
    Ok(())
}
