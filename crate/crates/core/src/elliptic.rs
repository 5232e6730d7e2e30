//! Poisson, Helmholtz and heat solvers.
//!
//! On the disk every solve splits into independent tridiagonal systems, one
//! per angular mode, solved directly. Scalar problems live on the face grid,
//! vector Helmholtz problems on the cell grid. On the torus all solves are
//! diagonal in Fourier space.

use std::sync::Arc;

use num_complex::Complex64 as C;

use crate::error::{Error, Result};
use crate::fields::disk;
use crate::fields::torus;
use crate::fields::{BoundaryTrace, Grid, Location, ScalarField, Trace, VectorField};

/// Default relative tolerance for the Neumann compatibility condition.
pub const TOL_COMPAT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EllipticKind {
    PoissonDirichlet,
    PoissonNeumann,
    HelmholtzDirichlet,
    HarmonicDirichlet,
}

#[derive(Debug, Clone)]
pub enum Rhs {
    Scalar(ScalarField),
    Vector(VectorField),
}

#[derive(Debug, Clone)]
pub enum Solution {
    Scalar(ScalarField),
    Vector(VectorField),
}

/// A fully specified boundary-value problem.
#[derive(Debug, Clone)]
pub struct EllipticProblem {
    pub kind: EllipticKind,
    /// Helmholtz shift (1/time).
    pub shift: f64,
    pub rhs: Option<Rhs>,
    pub boundary: Option<BoundaryTrace>,
    pub tol_compat: f64,
}

impl EllipticProblem {
    pub fn new(kind: EllipticKind) -> Self {
        Self { kind, shift: 0.0, rhs: None, boundary: None, tol_compat: TOL_COMPAT }
    }

    pub fn solve(&self, grid: &Arc<Grid>) -> Result<Solution> {
        let zero_trace = || BoundaryTrace::zeros(grid);
        let scalar_rhs = || match &self.rhs {
            Some(Rhs::Scalar(f)) => Ok(f.clone()),
            None => Ok(ScalarField::zeros(grid, Location::Face)),
            Some(Rhs::Vector(_)) => Err(Error::Parameter("scalar problem given a vector right-hand side".into())),
        };
        let bc = self.boundary.clone().unwrap_or_else(zero_trace);
        match self.kind {
            EllipticKind::PoissonNeumann => {
                solve_poisson_neumann_tol(&scalar_rhs()?, &bc, self.tol_compat).map(Solution::Scalar)
            }
            EllipticKind::PoissonDirichlet => solve_poisson_dirichlet(&scalar_rhs()?, &bc).map(Solution::Scalar),
            EllipticKind::HarmonicDirichlet => solve_harmonic_dirichlet(grid, &bc).map(Solution::Scalar),
            EllipticKind::HelmholtzDirichlet => match &self.rhs {
                Some(Rhs::Vector(f)) => solve_helmholtz_dirichlet(self.shift, f).map(Solution::Vector),
                None => solve_helmholtz_dirichlet(self.shift, &VectorField::zeros(grid)).map(Solution::Vector),
                Some(Rhs::Scalar(_)) => {
                    Err(Error::Parameter("helmholtz problem needs a vector right-hand side".into()))
                }
            },
        }
    }
}

fn require_face(f: &ScalarField) -> Result<()> {
    if f.grid().is_disk() && f.location() != Location::Face {
        return Err(Error::GridMismatch("disk scalar solves act on face fields".into()));
    }
    if f.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("right-hand side".into()));
    }
    Ok(())
}

fn check_trace(grid: &Grid, g: &BoundaryTrace) -> Result<()> {
    if grid.is_disk() && g.len() != grid.n_angular() {
        return Err(Error::GridMismatch(format!(
            "boundary trace has {} values, grid has {} boundary nodes",
            g.len(),
            grid.n_angular()
        )));
    }
    if g.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("boundary data".into()));
    }
    Ok(())
}

/// Mean-zero `q` with `Δq = f` in the domain and `∂q/∂ν = g` on the boundary.
pub fn solve_poisson_neumann(f: &ScalarField, g: &BoundaryTrace) -> Result<ScalarField> {
    solve_poisson_neumann_tol(f, g, TOL_COMPAT)
}

/// As [`solve_poisson_neumann`] with an explicit relative compatibility tolerance.
pub fn solve_poisson_neumann_tol(f: &ScalarField, g: &BoundaryTrace, tol: f64) -> Result<ScalarField> {
    require_face(f)?;
    let grid = f.grid();
    check_trace(grid, g)?;
    let w = grid.weights(f.location());
    let vol: f64 = f.values().iter().zip(w).map(|(v, w)| v * w).sum();
    let vol_abs: f64 = f.values().iter().zip(w).map(|(v, w)| (v * w).abs()).sum();
    let flux: f64 = g.values.iter().sum::<f64>() * g.ds;
    let flux_abs: f64 = g.values.iter().map(|v| v.abs()).sum::<f64>() * g.ds;
    let defect = (vol - flux).abs();
    let scale = vol_abs + flux_abs;
    if defect > tol * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Compatibility { defect, tol: tol * scale });
    }
    Ok(neumann_unchecked(f, Some(g)))
}

/// Neumann solve that silently projects the data onto the compatible range.
pub(crate) fn neumann_unchecked(f: &ScalarField, g: Option<&BoundaryTrace>) -> ScalarField {
    let grid = f.grid();
    if !grid.is_disk() {
        let q = torus::solve_poisson(grid, &torus::forward(grid, f.values()));
        return ScalarField::raw(grid, Location::Cell, torus::inverse(grid, q)).mean_free();
    }
    let (na, n) = (grid.n_angular(), grid.n_radial());
    let mut b = disk::forward(grid, f.values());
    disk::clean_pole(grid, &mut b);
    for v in 0..=n {
        for k in 0..na {
            b[v * na + k] *= -grid.wf[v];
        }
    }
    if let Some(g) = g {
        let gs = grid.ring.forward(&g.values);
        for k in 0..na {
            b[n * na + k] += gs[k] * grid.length();
        }
    }
    let q = disk::solve_stiffness(grid, &b);
    ScalarField::raw(grid, Location::Face, disk::inverse(grid, q)).mean_free()
}

/// Mean-zero potential solving the weak Neumann problem with load `b`
/// already expressed as `G^H W u` per mode.
pub(crate) fn stiffness_solve(grid: &Arc<Grid>, b: &[C]) -> ScalarField {
    let q = disk::solve_stiffness(grid, b);
    ScalarField::raw(grid, Location::Face, disk::inverse(grid, q)).mean_free()
}

/// `q` with `Δq = f` in the disk and `q = g` on the boundary.
pub fn solve_poisson_dirichlet(f: &ScalarField, g: &BoundaryTrace) -> Result<ScalarField> {
    require_face(f)?;
    let grid = f.grid();
    if !grid.is_disk() {
        return Err(Error::Parameter("the torus has no boundary for Dirichlet data".into()));
    }
    check_trace(grid, g)?;
    let mut fs = disk::forward(grid, f.values());
    disk::clean_pole(grid, &mut fs);
    let bs = grid.ring.forward(&g.values);
    let q = disk::solve_face_dirichlet(grid, &fs, &bs);
    Ok(ScalarField::raw(grid, Location::Face, disk::inverse(grid, q)))
}

/// Harmonic extension of boundary data into the disk.
pub fn solve_harmonic_dirichlet(grid: &Arc<Grid>, g: &BoundaryTrace) -> Result<ScalarField> {
    solve_poisson_dirichlet(&ScalarField::zeros(grid, Location::Face), g)
}

/// Componentwise `(λ − Δ)u = f` with `u = 0` on the boundary (periodic on the torus).
pub fn solve_helmholtz_dirichlet(lambda: f64, f: &VectorField) -> Result<VectorField> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Parameter(format!("helmholtz shift must be positive, got {lambda}")));
    }
    if !f.is_finite() {
        return Err(Error::NonFinite("helmholtz right-hand side".into()));
    }
    let grid = f.grid();
    let (x, y) = (f.x(), f.y());
    let solve = |c: &[f64]| -> Vec<f64> {
        if grid.is_disk() {
            disk::inverse(grid, disk::solve_cell_helmholtz(grid, lambda, &disk::forward(grid, c)))
        } else {
            torus::inverse(grid, torus::solve_helmholtz(grid, lambda, &torus::forward(grid, c)))
        }
    };
    VectorField::from_components(grid, solve(x), solve(y), Trace::Zero)
}

/// One implicit Euler step of `∂t φ = Δφ` with `∂φ/∂ν = 0`.
///
/// The update `(W + δt K) φ⁺ = W φ` conserves the quadrature mean exactly.
pub fn heat_step_neumann(phi: &ScalarField, dt: f64) -> Result<ScalarField> {
    if !(dt > 0.0) {
        return Err(Error::Parameter(format!("time step must be positive, got {dt}")));
    }
    require_face(phi)?;
    let grid = phi.grid();
    if !grid.is_disk() {
        let s: Vec<C> = torus::forward(grid, phi.values());
        let out: Vec<C> = (0..s.len())
            .map(|i| {
                let (kx, ky) = torus::symbol(grid, i);
                s[i] / (1.0 + dt * (kx * kx + ky * ky))
            })
            .collect();
        return Ok(ScalarField::raw(grid, Location::Cell, torus::inverse(grid, out)));
    }
    let (na, n) = (grid.n_angular(), grid.n_radial());
    let mut s = disk::forward(grid, phi.values());
    disk::clean_pole(grid, &mut s);
    let mut out = vec![C::new(0.0, 0.0); s.len()];
    for k in 0..na {
        let (diag, off) = disk::stiffness(grid, k);
        let (_, _, m0) = disk::wavenumber(grid, k);
        let start = if m0 { 0 } else { 1 };
        let d: Vec<f64> = (start..=n).map(|v| grid.wf[v] + dt * diag[v]).collect();
        let o: Vec<f64> = (start..n).map(|v| dt * off[v]).collect();
        let rhs: Vec<C> = (start..=n).map(|v| s[v * na + k] * grid.wf[v]).collect();
        let x = disk::thomas_sym(&d, &o, &rhs);
        for (i, v) in (start..=n).enumerate() {
            out[v * na + k] = x[i];
        }
    }
    Ok(ScalarField::raw(grid, Location::Face, disk::inverse(grid, out)))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use proptest::prelude::*;

    use super::*;
    use crate::bessel;
    use crate::fields::{l2_inner, l2_norm, laplacian};

    fn rel_diff(a: &ScalarField, b: &ScalarField) -> f64 {
        l2_norm(&a.axpy(-1.0, b).unwrap()) / l2_norm(b).max(1e-300)
    }

    #[test]
    fn neumann_radial_solution() {
        let g = Grid::disk(1.0, 64, 32).unwrap();
        let f = ScalarField::from_fn(&g, Location::Face, |_, _| 2.0);
        let bc = BoundaryTrace::from_fn(&g, |_| 1.0);
        let q = solve_poisson_neumann(&f, &bc).unwrap();
        assert!(q.is_mean_zero());
        let exact = ScalarField::from_fn(&g, Location::Face, |x, y| (x * x + y * y) / 2.0 - 0.25);
        assert!(q.axpy(-1.0, &exact).unwrap().max_abs() < 1e-3);
        let zero = solve_poisson_neumann(&ScalarField::zeros(&g, Location::Face), &BoundaryTrace::zeros(&g)).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn neumann_rejects_incompatible_data() {
        let g = Grid::disk(1.0, 32, 16).unwrap();
        let f = ScalarField::from_fn(&g, Location::Face, |_, _| 1.0);
        match solve_poisson_neumann(&f, &BoundaryTrace::zeros(&g)) {
            Err(Error::Compatibility { defect, .. }) => assert!((defect - PI).abs() < 1e-10),
            other => panic!("{other:?}"),
        }
    }

    /// Inverse iteration on the Neumann solver started from `J_1`-like data
    /// converges to the first nonconstant eigenpair; compare with the Bessel root.
    #[test]
    fn neumann_eigenfunction_matches_bessel_oracle() {
        let g = Grid::disk(1.0, 256, 128).unwrap();
        let jp = bessel::jn_prime_zero(1, 1);
        let exact = ScalarField::from_fn(&g, Location::Face, |x, y| {
            let r = x.hypot(y);
            bessel::jn(1, jp * r) * if r > 0.0 { x / r } else { 0.0 }
        });
        let none = BoundaryTrace::zeros(&g);
        let mut phi = exact.clone();
        let mut lambda = 0.0;
        for _ in 0..6 {
            let next = solve_poisson_neumann(&phi.scale(-1.0), &none).unwrap();
            lambda = l2_inner(&phi, &phi).unwrap() / l2_inner(&phi, &next).unwrap();
            phi = next.scale(1.0 / l2_norm(&next));
        }
        assert!((lambda - jp * jp).abs() / (jp * jp) < 1e-4, "{lambda}");
        let resid = solve_poisson_neumann(&phi.scale(-lambda), &none).unwrap();
        assert!(rel_diff(&resid, &phi) < 1e-6);
        let exact = exact.scale(1.0 / l2_norm(&exact));
        assert!(rel_diff(&phi, &exact) < 1e-3);
    }

    #[test]
    fn dirichlet_examples() {
        let g = Grid::disk(1.0, 64, 32).unwrap();
        let one = solve_harmonic_dirichlet(&g, &BoundaryTrace::from_fn(&g, |_| 1.0)).unwrap();
        assert!(one.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let x = solve_harmonic_dirichlet(&g, &BoundaryTrace::from_fn(&g, f64::cos)).unwrap();
        let ex = ScalarField::from_fn(&g, Location::Face, |x, _| x);
        assert!(x.axpy(-1.0, &ex).unwrap().max_abs() < 1e-12);
        let f = ScalarField::from_fn(&g, Location::Face, |_, _| -4.0);
        let q = solve_poisson_dirichlet(&f, &BoundaryTrace::from_fn(&g, |_| -1.0)).unwrap();
        let ex = ScalarField::from_fn(&g, Location::Face, |x, y| -x * x - y * y);
        assert!(q.axpy(-1.0, &ex).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn helmholtz_examples() {
        let t = Grid::torus(2.0 * PI, 32, 32).unwrap();
        let lam = 3.0;
        let f = VectorField::from_fn(&t, Trace::Free, |_, y| ((lam + 1.0) * y.sin(), 0.0));
        let u = solve_helmholtz_dirichlet(lam, &f).unwrap();
        let e = VectorField::from_fn(&t, Trace::Free, |_, y| (y.sin(), 0.0));
        assert!(u.axpy(-1.0, &e).unwrap().max_abs() < 1e-12);
        assert!(solve_helmholtz_dirichlet(0.0, &f).is_err());

        let mut errs = Vec::new();
        for n in [32, 64] {
            let g = Grid::disk(1.0, 2 * n, n).unwrap();
            let exact = |x: f64, y: f64| {
                let w = 1.0 - x * x - y * y;
                (w * w * x, 0.5 * w * w * x)
            };
            let ue = VectorField::from_fn(&g, Trace::Zero, exact);
            // Δ[(1 − r²)² x] = x (24 r² − 16)
            let f = VectorField::from_fn(&g, Trace::Free, |x, y| {
                let r2 = x * x + y * y;
                let w = 1.0 - r2;
                let lap = x * (24.0 * r2 - 16.0);
                let v = lam * w * w * x - lap;
                (v, 0.5 * v)
            });
            let u = solve_helmholtz_dirichlet(lam, &f).unwrap();
            errs.push(u.axpy(-1.0, &ue).unwrap().max_abs());
        }
        assert!(errs[0] / errs[1] > 3.5, "{errs:?}");
    }

    #[test]
    fn heat_step_examples() {
        let g = Grid::disk(1.0, 64, 32).unwrap();
        let c = ScalarField::from_fn(&g, Location::Face, |_, _| 2.5);
        let s = heat_step_neumann(&c, 0.1).unwrap();
        assert!(s.values().iter().all(|v| (v - 2.5).abs() < 1e-12));
        let phi = ScalarField::from_fn(&g, Location::Face, |x, y| x * x * y + (3.0 * x).cos());
        let s = heat_step_neumann(&phi, 0.01).unwrap();
        assert!((s.mean() - phi.mean()).abs() < 1e-12);
        let a = l2_norm(&phi.clone().mean_free());
        let b = l2_norm(&s.mean_free());
        assert!(b < a);
    }

    #[test]
    fn dirichlet_laplacian_round_trip() {
        let g = Grid::disk(1.0, 32, 16).unwrap();
        let f = ScalarField::from_fn(&g, Location::Face, |x, y| (x + 2.0 * y).sin());
        let q = solve_poisson_dirichlet(&f, &BoundaryTrace::zeros(&g)).unwrap();
        let l = laplacian(&q);
        let n = g.n_radial() * g.n_angular();
        let err = l.values()[..n].iter().zip(&f.values()[..n]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    fn face_field(g: &Arc<Grid>, c: &[f64]) -> ScalarField {
        ScalarField::from_fn(g, Location::Face, |x, y| {
            c[0] + c[1] * x + c[2] * y * y + c[3] * (2.0 * x * y).sin() + c[4] * (x - y).cos()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn neumann_solver_is_self_adjoint(a in prop::collection::vec(-1.0..1.0f64, 5),
                                          b in prop::collection::vec(-1.0..1.0f64, 5)) {
            let g = Grid::disk(1.0, 32, 16).unwrap();
            let none = BoundaryTrace::zeros(&g);
            let f1 = face_field(&g, &a).mean_free();
            let f2 = face_field(&g, &b).mean_free();
            let s1 = solve_poisson_neumann(&f1, &none).unwrap();
            let s2 = solve_poisson_neumann(&f2, &none).unwrap();
            let lhs = l2_inner(&s1, &f2).unwrap();
            let rhs = l2_inner(&f1, &s2).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
            prop_assert!(s1.mean().abs() <= 1e-10 * s1.max_abs().max(1e-300));
        }

        #[test]
        fn dirichlet_solver_is_self_adjoint(a in prop::collection::vec(-1.0..1.0f64, 5),
                                            b in prop::collection::vec(-1.0..1.0f64, 5)) {
            let g = Grid::disk(1.0, 32, 16).unwrap();
            let none = BoundaryTrace::zeros(&g);
            let f1 = face_field(&g, &a);
            let f2 = face_field(&g, &b);
            let s1 = solve_poisson_dirichlet(&f1, &none).unwrap();
            let s2 = solve_poisson_dirichlet(&f2, &none).unwrap();
            let lhs = l2_inner(&s1, &f2).unwrap();
            let rhs = l2_inner(&f1, &s2).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }
    }
}
