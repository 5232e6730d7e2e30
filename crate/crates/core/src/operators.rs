//! Leray projection, Stokes pressure, the extended Stokes operator `A`, its
//! divergence-damped variant `B_α`, adjusted inner products and energies.
//!
//! Everything is assembled from the discrete calculus in [`crate::fields`].
//! The projection is exactly orthogonal in the quadrature inner product, so
//! identities such as `(I − P)Au = −∇∇·u` hold to rounding error.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::elliptic;
use crate::error::{Error, Result};
use crate::fields::{
    self, boundary_vorticity, curl2d, divergence, gradient, h1_inner, h1_semi_sq, l2_inner, l2_inner_vec, l2_norm,
    l2_norm_vec, vector_laplacian, Grid, Location, ScalarField, Trace, VectorField,
};
use crate::fields::{disk, torus};
use crate::linalg;

/// Weights of the adjusted inner product `⟨u,v⟩ + ε⟨∇u,∇v⟩ + C⟨Q(u),Q(v)⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdjustedIPParams {
    pub epsilon: f64,
    pub c: f64,
}

impl AdjustedIPParams {
    pub fn new(epsilon: f64, c: f64) -> Result<Self> {
        if !(epsilon >= 0.0) || !(c >= 0.0) || !epsilon.is_finite() || !c.is_finite() {
            return Err(Error::Parameter(format!("need epsilon >= 0 and C >= 0, got ({epsilon}, {c})")));
        }
        Ok(Self { epsilon, c })
    }

    /// Plain L² inner product.
    pub fn l2() -> Self {
        Self { epsilon: 0.0, c: 0.0 }
    }
}

/// `u = v + ∇q` with `v` divergence free and tangential.
#[derive(Debug, Clone)]
pub struct HodgeDecomposition {
    pub v: VectorField,
    pub q: ScalarField,
}

/// Terms of `⟨u, Au⟩` and its vorticity/divergence split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFormReport {
    pub grad_energy: f64,
    pub pressure_term: f64,
    pub total: f64,
    pub div_norm_sq: f64,
    pub vorticity_norm_sq: f64,
    pub conjugate_term: f64,
}

impl QuadraticFormReport {
    /// `‖ω‖² + ‖∇·u‖² − ∫ q_s ω`, equal to `total` for zero-trace fields.
    pub fn split_total(&self) -> f64 {
        self.vorticity_norm_sq + self.div_norm_sq - self.conjugate_term
    }
}

/// Mean-zero `Q(u)` with `∇Q(u) = (I − P)u`.
pub fn gradient_potential(u: &VectorField) -> ScalarField {
    let g = u.grid();
    if !g.is_disk() {
        let d = divergence(u);
        let q = torus::solve_poisson(g, &torus::forward(g, d.values()));
        return ScalarField::raw(g, Location::Cell, torus::inverse(g, q)).mean_free();
    }
    let (x, y) = (u.x(), u.y());
    let (ur, ut) = disk::to_polar(g, x, y);
    let mut b = disk::weak_div(g, &disk::forward(g, &ur), &disk::forward(g, &ut), None);
    let na = g.n_angular();
    for (i, c) in b.iter_mut().enumerate() {
        *c *= -g.wf[i / na];
    }
    elliptic::stiffness_solve(g, &b)
}

/// Leray projection `Pu`.
pub fn project(u: &VectorField) -> VectorField {
    let q = gradient_potential(u);
    subtract(u, &gradient(&q)).with_trace(Trace::Free)
}

/// Helmholtz–Hodge split of `u`.
pub fn leray_project(u: &VectorField) -> HodgeDecomposition {
    let q = gradient_potential(u);
    let v = subtract(u, &gradient(&q)).with_trace(Trace::Free);
    HodgeDecomposition { v, q }
}

fn subtract(a: &VectorField, b: &VectorField) -> VectorField {
    a.axpy(-1.0, b).expect("fields share a grid")
}

/// Stokes pressure `p_s` and its gradient.
///
/// `p_s = Q(Δu) − ∇·u`, so that `∇p_s = (I − P)Δu − ∇∇·u`.
pub fn stokes_pressure(u: &VectorField) -> (VectorField, ScalarField) {
    let lap = vector_laplacian(u);
    let q = gradient_potential(&lap);
    let p = q.axpy(-1.0, &divergence(u)).expect("same location").mean_free();
    (gradient(&p), p)
}

/// Stokes pressure with the wall value of `∇·u` extrapolated from the
/// interior faces.
///
/// The half-cell divergence on the wall face is only first order, and the
/// pressure gradient in the outermost cell differences across it, so the
/// pressure of [`stokes_pressure`] carries an `O(1)` error in one cell layer.
/// This reconstruction removes it. It is not the pressure inside [`apply_A`]:
/// swapping it in there decouples the wall divergence and gives `A` a kernel.
pub fn stokes_pressure_wall_corrected(u: &VectorField) -> (VectorField, ScalarField) {
    let lap = vector_laplacian(u);
    let q = gradient_potential(&lap);
    let mut d = divergence(u);
    let g = u.grid();
    if g.is_disk() && g.n_radial() >= 3 {
        let (na, n) = (g.n_angular(), g.n_radial());
        let mut v = d.into_values();
        for k in 0..na {
            let at = |j: usize| v[j * na + k];
            v[n * na + k] = 3.0 * at(n - 1) - 3.0 * at(n - 2) + at(n - 3);
        }
        d = ScalarField::raw(g, Location::Face, v);
    }
    let p = q.axpy(-1.0, &d).expect("same location").mean_free();
    (gradient(&p), p)
}

/// `(ΔP − PΔ)u`, the commutator route to `∇p_s`.
pub fn stokes_pressure_commutator(u: &VectorField) -> VectorField {
    let pu = project(u);
    let lap_pu = vector_laplacian(&pu);
    let p_lap = project(&vector_laplacian(u));
    subtract(&lap_pu, &p_lap)
}

/// Extended Stokes operator `Au = −PΔu − ∇∇·u`.
#[allow(non_snake_case)]
pub fn apply_A(u: &VectorField) -> VectorField {
    let lap = vector_laplacian(u);
    let q = gradient_potential(&lap);
    let phi = q.axpy(-1.0, &divergence(u)).expect("same location");
    gradient(&phi).axpy(-1.0, &lap).expect("same grid")
}

/// Divergence-damped operator `B_α u = Au + α(I − P)u`.
#[allow(non_snake_case)]
pub fn apply_B(u: &VectorField, alpha: f64) -> Result<VectorField> {
    if !(alpha >= 0.0) {
        return Err(Error::Parameter(format!("damping must be non-negative, got {alpha}")));
    }
    let gq = gradient(&gradient_potential(u));
    apply_A(u).axpy(alpha, &gq)
}

/// Laplacian of `Q(u)` with its natural no-flux closure, equal to `∇·u`
/// for zero-trace `u`.
pub fn potential_laplacian(q: &ScalarField) -> ScalarField {
    divergence(&gradient(q).with_trace(Trace::Zero))
}

/// `⟨u, v⟩_{ε,C}` for two fields.
pub fn adjusted_inner(u: &VectorField, v: &VectorField, p: AdjustedIPParams) -> Result<f64> {
    let mut s = l2_inner_vec(u, v)?;
    if p.epsilon > 0.0 {
        s += p.epsilon * h1_inner(u, v)?;
    }
    if p.c > 0.0 {
        s += p.c * l2_inner(&gradient_potential(u), &gradient_potential(v))?;
    }
    Ok(s)
}

/// `⟨u, Au⟩_ε` for a zero-trace `u`.
///
/// `Au` has no boundary trace in general, so the gradient pairing uses the
/// form `−⟨Δu, Au⟩`, which extends `⟨∇u, ∇Au⟩` continuously from fields
/// with `Au = 0` on the boundary.
pub fn adjusted_form_a(u: &VectorField, p: AdjustedIPParams) -> Result<f64> {
    let au = apply_A(u);
    let mut s = l2_inner_vec(u, &au)?;
    if p.epsilon > 0.0 {
        s -= p.epsilon * l2_inner_vec(&vector_laplacian(u), &au)?;
    }
    if p.c > 0.0 {
        s += p.c * l2_inner(&gradient_potential(u), &gradient_potential(&au))?;
    }
    Ok(s)
}

/// `⟨u, B_α u⟩_ε`, expanded by linearity into the `A` part and the damping part.
///
/// The gradient pairing of the damping part is integrated by parts onto the
/// divergence, `⟨∇u, ∇∇q⟩ = ⟨∇·u, Δq⟩`.
pub fn adjusted_form_b(u: &VectorField, alpha: f64, p: AdjustedIPParams) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::Parameter(format!("damping must be non-negative, got {alpha}")));
    }
    let q = gradient_potential(u);
    let gq = gradient(&q);
    let mut damp = l2_inner_vec(u, &gq)?;
    if p.epsilon > 0.0 {
        damp += p.epsilon * l2_inner(&divergence(u), &potential_laplacian(&q))?;
    }
    if p.c > 0.0 {
        damp += p.c * l2_inner(&q, &gradient_potential(&gq))?;
    }
    Ok(adjusted_form_a(u, p)? + alpha * damp)
}

/// Right-hand side of the `B_α` identity:
/// `⟨u,Au⟩_ε + α(‖∇Q‖² + C‖Q‖² + ε‖ΔQ‖²)`.
pub fn b_identity_rhs(u: &VectorField, alpha: f64, p: AdjustedIPParams) -> Result<f64> {
    let q = gradient_potential(u);
    let gq = l2_norm_vec(&gradient(&q)).powi(2);
    let qq = l2_norm(&q).powi(2);
    let lq = l2_norm(&potential_laplacian(&q)).powi(2);
    Ok(adjusted_form_a(u, p)? + alpha * (gq + p.c * qq + p.epsilon * lq))
}

/// Decomposition of `⟨u, Au⟩` used in the failure-of-coercivity argument.
pub fn quadratic_form(u: &VectorField) -> Result<QuadraticFormReport> {
    let g = u.grid();
    let (gps, _) = stokes_pressure(u);
    let grad_energy = h1_semi_sq(u);
    let pressure_term = l2_inner_vec(u, &gps)?;
    let total = l2_inner_vec(u, &apply_A(u))?;
    let div = divergence(u);
    let curl = curl2d(u);
    let conjugate_term = if g.is_disk() {
        let qs = elliptic::solve_harmonic_dirichlet(g, &boundary_vorticity(u))?;
        l2_inner(&qs, &curl)?
    } else {
        0.0
    };
    Ok(QuadraticFormReport {
        grad_energy,
        pressure_term,
        total,
        div_norm_sq: l2_norm(&div).powi(2),
        vorticity_norm_sq: l2_norm(&curl).powi(2),
        conjugate_term,
    })
}

/// `E = ‖u‖² + c1‖∇u‖‖∇Q(u)‖ + c2‖∇Q(u)‖²`.
pub fn energy_e(u: &VectorField, c1: f64, c2: f64) -> f64 {
    let gq = l2_norm_vec(&gradient(&gradient_potential(u)));
    l2_norm_vec(u).powi(2) + c1 * h1_semi_sq(u).sqrt() * gq + c2 * gq * gq
}

/// `E' = (2 − ε)‖∇u‖² + ‖Δu‖‖∇Q(u)‖ + ‖ΔQ(u)‖²`.
pub fn energy_eprime(u: &VectorField, eps: f64) -> f64 {
    let q = gradient_potential(u);
    let gq = l2_norm_vec(&gradient(&q));
    let lq = l2_norm(&potential_laplacian(&q));
    (2.0 - eps) * h1_semi_sq(u) + fields::lap_norm(u) * gq + lq * lq
}

/// Solves `Au = f` by GMRES preconditioned with the inverse vector Laplacian.
#[allow(non_snake_case)]
pub fn solve_A(f: &VectorField, tol: f64) -> Result<VectorField> {
    let g = f.grid().clone();
    let n = g.cell_count();
    let pack = |u: &VectorField| -> Vec<f64> { u.x().iter().chain(u.y()).copied().collect() };
    let unpack = |v: &[f64]| VectorField::raw(&g, v[..n].to_vec(), v[n..].to_vec(), Trace::Zero);
    let apply = |v: &[f64]| pack(&apply_A(&unpack(v)));
    let precond = |v: &[f64]| {
        // (−Δ)⁻¹ through a Helmholtz solve with a tiny shift.
        match elliptic::solve_helmholtz_dirichlet(1e-12, &unpack(v)) {
            Ok(w) => pack(&w),
            Err(_) => v.to_vec(),
        }
    };
    let b = pack(f);
    let (x, _) = linalg::gmres(apply, precond, &b, tol, 60, 2000)?;
    Ok(unpack(&x))
}

/// `H_div`-equivalent form
/// `⟨u,v⟩ + ε⟨∇·u,∇·v⟩ + C⟨A⁻¹u,A⁻¹v⟩_ε − ⟨u,∇p_s(A⁻¹v)⟩ − ⟨∇p_s(A⁻¹u),v⟩`.
///
/// Each evaluation costs two GMRES solves with `A`.
pub fn hdiv_inner(u: &VectorField, v: &VectorField, p: AdjustedIPParams) -> Result<f64> {
    let au = solve_A(u, 1e-11)?;
    let av = solve_A(v, 1e-11)?;
    let (pu, _) = stokes_pressure(&au);
    let (pv, _) = stokes_pressure(&av);
    let mut s = l2_inner_vec(u, v)?;
    s += p.epsilon * l2_inner(&divergence(u), &divergence(v))?;
    s += p.c * adjusted_inner(&au, &av, p)?;
    s -= l2_inner_vec(u, &pv)? + l2_inner_vec(&pu, v)?;
    Ok(s)
}

/// Generator of smooth random fields vanishing on the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomFieldSpec {
    /// Highest angular (disk) or Cartesian (torus) wavenumber.
    pub max_mode: usize,
    /// Highest extra radial power `r^{2k}` (disk).
    pub max_degree: usize,
}

impl Default for RandomFieldSpec {
    fn default() -> Self {
        Self { max_mode: 4, max_degree: 3 }
    }
}

/// Random smooth field. On the disk each Cartesian component is a
/// combination of `r^{m+2k} cos/sin(mθ)` times the window `1 − r²/R²`; on the
/// torus a random trigonometric polynomial.
pub fn random_field(grid: &Arc<Grid>, spec: RandomFieldSpec, seed: u64) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |scale: f64| -> f64 { scale * (rng.random::<f64>() * 2.0 - 1.0) };
    if grid.is_disk() {
        let r0 = grid.length();
        let mut terms = Vec::new();
        for m in 0..=spec.max_mode {
            for k in 0..=spec.max_degree {
                let s = 1.0 / (1.0 + m as f64 + k as f64);
                terms.push((m, k, [draw(s), draw(s), draw(s), draw(s)]));
            }
        }
        VectorField::from_fn(grid, Trace::Zero, |x, y| {
            let (r, th) = ((x * x + y * y).sqrt() / r0, y.atan2(x));
            let w = 1.0 - r * r;
            let (mut ux, mut uy) = (0.0, 0.0);
            for (m, k, c) in &terms {
                let radial = r.powi((*m + 2 * *k) as i32);
                let (cm, sm) = ((*m as f64 * th).cos(), (*m as f64 * th).sin());
                ux += radial * (c[0] * cm + c[1] * sm);
                uy += radial * (c[2] * cm + c[3] * sm);
            }
            (w * ux, w * uy)
        })
    } else {
        let k0 = 2.0 * PI / grid.length();
        let kmax = spec.max_mode as i64;
        let mut terms = Vec::new();
        for a in -kmax..=kmax {
            for b in -kmax..=kmax {
                if a == 0 && b == 0 {
                    continue;
                }
                let s = 1.0 / (1.0 + (a * a + b * b) as f64);
                terms.push((a as f64 * k0, b as f64 * k0, [draw(s), draw(s), draw(s), draw(s)]));
            }
        }
        VectorField::from_fn(grid, Trace::Free, |x, y| {
            let (mut ux, mut uy) = (0.0, 0.0);
            for (a, b, c) in &terms {
                let ph = a * x + b * y;
                ux += c[0] * ph.cos() + c[1] * ph.sin();
                uy += c[2] * ph.cos() + c[3] * ph.sin();
            }
            (ux, uy)
        })
    }
}

/// Random field that is exactly divergence free on the grid: the perpendicular
/// gradient of a stream function vanishing on the boundary.
pub fn random_solenoidal(grid: &Arc<Grid>, spec: RandomFieldSpec, seed: u64) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut draw = |scale: f64| -> f64 { scale * (rng.random::<f64>() * 2.0 - 1.0) };
    let mut coef = Vec::new();
    for m in 0..=spec.max_mode {
        for k in 0..=spec.max_degree {
            let s = 1.0 / (1.0 + m as f64 + k as f64);
            coef.push((m, k, draw(s), draw(s)));
        }
    }
    let r0 = grid.length();
    let psi = ScalarField::from_fn(grid, Location::Face, |x, y| {
        if grid.is_disk() {
            let (r, th) = ((x * x + y * y).sqrt() / r0, y.atan2(x));
            let w = 1.0 - r * r;
            let s: f64 = coef
                .iter()
                .map(|(m, k, a, b)| {
                    r.powi((*m + 2 * *k) as i32) * (a * (*m as f64 * th).cos() + b * (*m as f64 * th).sin())
                })
                .sum();
            w * w * s
        } else {
            let k0 = 2.0 * PI / r0;
            coef.iter()
                .map(|(m, k, a, b)| {
                    let (p, q) = ((*m + 1) as f64 * k0, *k as f64 * k0);
                    a * (p * x + q * y).cos() + b * (q * x - p * y).sin()
                })
                .sum()
        }
    });
    let trace = if grid.is_disk() { Trace::Zero } else { Trace::Free };
    fields::perp_gradient(&psi).with_trace(trace)
}

/// Smooth probe potentials: harmonic polynomials `r^m cos/sin(mθ)`, `m ≤ 5`,
/// plus radial polynomials.
pub fn probe_potentials(grid: &Arc<Grid>) -> Vec<ScalarField> {
    let mut out = Vec::new();
    let loc = Location::Face;
    if grid.is_disk() {
        for m in 1..=5 {
            out.push(ScalarField::from_fn(grid, loc, move |x, y| (x.hypot(y)).powi(m) * (m as f64 * y.atan2(x)).cos()));
            out.push(ScalarField::from_fn(grid, loc, move |x, y| (x.hypot(y)).powi(m) * (m as f64 * y.atan2(x)).sin()));
        }
        for k in 1..=10 {
            out.push(ScalarField::from_fn(grid, loc, move |x, y| (x * x + y * y).powi(k)));
        }
    } else {
        let k0 = 2.0 * PI / grid.length();
        for a in 0..=3 {
            for b in 0..=2 {
                if a == 0 && b == 0 {
                    continue;
                }
                let (a, b) = (a as f64 * k0, b as f64 * k0);
                out.push(ScalarField::from_fn(grid, loc, move |x, y| (a * x + b * y).cos()));
                out.push(ScalarField::from_fn(grid, loc, move |x, y| (a * x - b * y).sin()));
            }
        }
        out.truncate(20);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::boundary_normal_trace;

    fn disk(n: usize) -> Arc<Grid> {
        Grid::disk(1.0, 2 * n, n).unwrap()
    }

    #[test]
    fn gradient_field_projects_to_zero() {
        let g = disk(32);
        let u = VectorField::from_fn(&g, Trace::Free, |x, y| (x, y));
        let h = leray_project(&u);
        assert!(h.v.max_abs() < 1e-11);
        let exact = ScalarField::from_fn(&g, Location::Face, |x, y| (x * x + y * y) / 2.0).mean_free();
        assert!(h.q.axpy(-1.0, &exact).unwrap().max_abs() < 1e-11);
    }

    #[test]
    fn rotation_is_solenoidal_and_pressure_free() {
        let g = disk(32);
        let u = VectorField::from_fn(&g, Trace::Free, |x, y| (-y, x));
        let h = leray_project(&u);
        assert!(h.q.max_abs() < 1e-11);
        assert!(h.v.axpy(-1.0, &u).unwrap().max_abs() < 1e-11);
        let (gp, _) = stokes_pressure(&u);
        assert!(gp.max_abs() < 1e-9, "{}", gp.max_abs());
    }

    #[test]
    fn projection_is_orthogonal_and_idempotent() {
        let g = disk(32);
        let u = random_field(&g, RandomFieldSpec::default(), 7);
        let h = leray_project(&u);
        let un = l2_norm_vec(&u);
        let gq = gradient(&h.q);
        assert!(l2_inner_vec(&h.v, &gq).unwrap().abs() < 1e-12 * un * un);
        let again = leray_project(&h.v);
        assert!(l2_norm_vec(&again.v.axpy(-1.0, &h.v).unwrap()) < 1e-12 * un);
        for phi in probe_potentials(&g) {
            let gp = gradient(&phi);
            let ip = l2_inner_vec(&h.v, &gp).unwrap().abs();
            assert!(ip <= 1e-10 * un * l2_norm_vec(&gp));
        }
    }

    #[test]
    fn projected_normal_trace_converges() {
        let nt = |n| {
            let g = disk(n);
            let v = project(&random_field(&g, RandomFieldSpec::default(), 7));
            boundary_normal_trace(&v).max_abs() / v.max_abs()
        };
        let (a, b) = (nt(32), nt(64));
        assert!(a < 2e-3 && a / b > 2.8, "{a:e} {b:e}");
    }

    #[test]
    fn torus_commutes() {
        let t = Grid::torus(2.0 * PI, 32, 32).unwrap();
        let u = random_field(&t, RandomFieldSpec::default(), 3);
        let (gp, _) = stokes_pressure(&u);
        assert!(gp.max_abs() < 1e-11);
        let s = VectorField::from_fn(&t, Trace::Free, |_, y| (y.sin(), 0.0));
        let a = apply_A(&s);
        assert!(a.axpy(-1.0, &s).unwrap().max_abs() < 1e-12);
        let q = l2_inner_vec(&s, &a).unwrap();
        assert!((q - 2.0 * PI * PI).abs() < 1e-9);
    }

    #[test]
    fn a_matches_pressure_route_and_b_adds_gradient() {
        let g = disk(32);
        let u = random_field(&g, RandomFieldSpec::default(), 11);
        let (gp, _) = stokes_pressure(&u);
        let alt = gp.axpy(-1.0, &vector_laplacian(&u)).unwrap();
        let a = apply_A(&u);
        assert!(l2_norm_vec(&a.axpy(-1.0, &alt).unwrap()) < 1e-10 * l2_norm_vec(&a));
        let lin = VectorField::from_fn(&g, Trace::Free, |x, y| (x, y));
        let diff = apply_B(&lin, 2.5).unwrap().axpy(-1.0, &apply_A(&lin)).unwrap();
        let expect = lin.scale(2.5);
        assert!(diff.axpy(-1.0, &expect).unwrap().max_abs() < 1e-10);
        assert!(apply_B(&lin, -1.0).is_err());
    }

    #[test]
    fn quadratic_form_identities() {
        let g = disk(64);
        let u = random_field(&g, RandomFieldSpec::default(), 5);
        let r = quadratic_form(&u).unwrap();
        assert!((r.total - r.grad_energy - r.pressure_term).abs() < 1e-8 * r.total.abs());
        let split = r.split_total();
        assert!((split - r.total).abs() < 0.05 * r.grad_energy, "{r:?}");
    }

    #[test]
    fn adjusted_inner_reduces_and_is_symmetric() {
        let g = disk(32);
        let u = random_field(&g, RandomFieldSpec::default(), 1);
        let v = random_field(&g, RandomFieldSpec::default(), 2);
        let l2 = adjusted_inner(&u, &u, AdjustedIPParams::l2()).unwrap();
        assert!((l2 - l2_norm_vec(&u).powi(2)).abs() < 1e-14 * l2);
        let p = AdjustedIPParams::new(0.1, 3.0).unwrap();
        let a = adjusted_inner(&u, &v, p).unwrap();
        let b = adjusted_inner(&v, &u, p).unwrap();
        assert!((a - b).abs() < 1e-12 * (a.abs() + 1.0));
        let s = random_solenoidal(&g, RandomFieldSpec::default(), 4);
        let lhs = adjusted_inner(&s, &s, p).unwrap();
        let rhs = l2_norm_vec(&s).powi(2) + 0.1 * h1_semi_sq(&s);
        assert!((lhs - rhs).abs() < 1e-10 * lhs);
        assert!(AdjustedIPParams::new(-1.0, 0.0).is_err());
    }

    #[test]
    fn b_identity_is_exact() {
        let g = disk(32);
        let p = AdjustedIPParams::new(0.05, 4.0).unwrap();
        for seed in 0..5 {
            let u = random_field(&g, RandomFieldSpec::default(), seed);
            for alpha in [0.0, 1.0, 10.0, 100.0] {
                let lhs = adjusted_form_b(&u, alpha, p).unwrap();
                let rhs = b_identity_rhs(&u, alpha, p).unwrap();
                assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()));
            }
        }
    }

    #[test]
    fn energies_on_solenoidal_and_zero_fields() {
        let g = disk(32);
        let s = random_solenoidal(&g, RandomFieldSpec::default(), 9);
        let e = energy_e(&s, 2.0, 3.0);
        assert!((e - l2_norm_vec(&s).powi(2)).abs() < 1e-10 * e);
        let ep = energy_eprime(&s, 0.1);
        assert!((ep - 1.9 * h1_semi_sq(&s)).abs() < 1e-8 * ep);
        let z = VectorField::zeros(&g);
        assert_eq!(energy_e(&z, 1.0, 1.0), 0.0);
        assert_eq!(energy_eprime(&z, 0.1), 0.0);
    }

    #[test]
    fn solve_a_inverts_apply_a() {
        let g = disk(16);
        let u = random_field(&g, RandomFieldSpec::default(), 21);
        let f = apply_A(&u);
        let back = solve_A(&f, 1e-12).unwrap();
        let err = l2_norm_vec(&back.axpy(-1.0, &u).unwrap()) / l2_norm_vec(&u);
        assert!(err < 1e-8, "{err}");
    }

    /// `∇p_s` against `(ΔP − PΔ)u` away from the pole and the wall. Both ends
    /// differ at low order (the cell-centred interpolation of the angular
    /// gradient near the pole, the one-sided wall closure), so only the
    /// annulus is compared, where the two routes agree at second order.
    #[test]
    fn commutator_route_agrees_in_the_annulus() {
        let annulus_err = |n: usize| {
            let g = disk(n);
            let u = random_field(&g, RandomFieldSpec::default(), 7);
            let c = stokes_pressure_commutator(&u);
            let (gp, _) = stokes_pressure(&u);
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..g.cell_count() {
                let (r, _) = g.node_polar(Location::Cell, i);
                if r > 0.3 && r < 0.8 {
                    let w = g.cell_weights()[i];
                    num += w * ((gp.x()[i] - c.x()[i]).powi(2) + (gp.y()[i] - c.y()[i]).powi(2));
                    den += w * (gp.x()[i].powi(2) + gp.y()[i].powi(2));
                }
            }
            (num / den).sqrt()
        };
        let (coarse, fine) = (annulus_err(32), annulus_err(64));
        assert!(fine < 1e-3, "{fine}");
        assert!(coarse / fine > 3.5, "{coarse} -> {fine}");
    }
}
