//! Boundary-layer fields on which `⟨u, Au⟩` fails to be coercive.
//!
//! The field is `u = ∇⊥ψ + ∇p` with `p = α(s)β(r̃)` and `ψ = α'(s)γ(r̃)`,
//! where `s = Rθ` is arclength and `r̃ = R − r` the distance to the wall.
//! With `β(0) = 1`, `β'(0) = 0`, `γ(0) = 0`, `γ'(0) = 1` the two parts cancel
//! on the boundary, so `u` vanishes there, while the boundary term
//! `∮ ∂νψ Δψ = ∫ α'² (κ − γ''(0)) ds` can be made as large as we like
//! by pushing `γ''(0)` to large negative values in a thin layer.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elliptic;
use crate::error::{Error, Result};
use crate::fields::{boundary_vorticity, l2_norm_vec, perp_gradient, Grid, Location, ScalarField, Trace, VectorField};
use crate::operators::{quadratic_form, stokes_pressure_wall_corrected, QuadraticFormReport};
use crate::timestepping;

/// `(1 − t²)⁴` on `|t| < 1`, with its first two derivatives.
fn cutoff(t: f64) -> [f64; 3] {
    if t.abs() >= 1.0 {
        return [0.0; 3];
    }
    let a = 1.0 - t * t;
    [a.powi(4), -8.0 * t * a.powi(3), -8.0 * a.powi(3) + 48.0 * t * t * a * a]
}

/// One-sided `(1 − t)⁴` on `[0, 1)` with derivatives. Multiplied by `t²` it
/// carries `γ''(0)` at a low `∫ (t² q)''²` for its width.
fn layer(t: f64) -> [f64; 3] {
    if !(0.0..1.0).contains(&t) {
        return [0.0; 3];
    }
    let a = 1.0 - t;
    [a.powi(4), -4.0 * a.powi(3), 12.0 * a * a]
}

/// `exp(−1/(1 − t²))` with derivatives up to the third.
fn bump(t: f64) -> [f64; 4] {
    if t.abs() >= 1.0 {
        return [0.0; 4];
    }
    let a = 1.0 - t * t;
    let e = (-1.0 / a).exp();
    let p1 = -2.0 * t / (a * a);
    let p2 = -2.0 / (a * a) - 8.0 * t * t / (a * a * a);
    let p3 = -24.0 * t / (a * a * a) - 48.0 * t * t * t / (a * a * a * a);
    [e, e * p1, e * (p2 + p1 * p1), e * (p3 + 3.0 * p1 * p2 + p1 * p1 * p1)]
}

/// Shape of `α` and `β`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileFamily {
    /// `α` an `exp(−1/(1 − t²))` bump in arclength, `β` a polynomial cutoff.
    Bump,
    /// `α = cos(s/R)` around the whole circle with `β = (3ρ − ρ³)/2`,
    /// `ρ = r/R`, which keeps `p` a cubic polynomial and `‖Δp‖` small.
    Dipole,
}

/// Profiles `α`, `β`, `γ` of the boundary layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryLayerProfile {
    pub family: ProfileFamily,
    /// Peak of `α`.
    pub amplitude: f64,
    /// Half-width of `α` in arclength (bump family).
    pub arc_width: f64,
    /// Angle of the centre of the layer.
    pub center: f64,
    /// Radial support of `β` (bump family).
    pub beta_width: f64,
    /// Radial support of the linear part of `γ` (bump family).
    pub gamma_width: f64,
    /// `γ''(0)`.
    pub gamma2: f64,
    /// Radial support of the layer carrying `γ''(0)`. Zero picks
    /// `min(gamma_width, localization / |γ''(0)|)`.
    pub gamma2_width: f64,
    pub localization: f64,
}

impl Default for BoundaryLayerProfile {
    fn default() -> Self {
        Self {
            family: ProfileFamily::Bump,
            amplitude: 1.0,
            arc_width: 1.2,
            center: 0.0,
            beta_width: 0.6,
            gamma_width: 0.3,
            gamma2: 0.0,
            gamma2_width: 0.0,
            localization: 0.4,
        }
    }
}

impl BoundaryLayerProfile {
    /// Dipole layer with `γ''(0)` carried on a width `8/|γ''(0)|`.
    pub fn dipole() -> Self {
        Self { family: ProfileFamily::Dipole, gamma_width: 0.5, localization: 8.0, ..Self::default() }
    }

    pub fn with_gamma2(mut self, g2: f64) -> Self {
        self.gamma2 = g2;
        self
    }

    /// Width of the layer carrying `γ''(0)`.
    pub fn quadratic_width(&self) -> f64 {
        if self.gamma2_width > 0.0 {
            return self.gamma2_width;
        }
        if self.gamma2 == 0.0 {
            return self.gamma_width;
        }
        self.gamma_width.min(self.localization / self.gamma2.abs())
    }

    /// Radial extent of the layer (the whole disk for the dipole family).
    pub fn support(&self, radius: f64) -> f64 {
        match self.family {
            ProfileFamily::Bump => self.beta_width.max(self.gamma_width).max(self.quadratic_width()),
            ProfileFamily::Dipole => radius,
        }
    }

    /// Half-width of the arc carrying the layer.
    pub fn arc_half_width(&self, radius: f64) -> f64 {
        match self.family {
            ProfileFamily::Bump => self.arc_width,
            ProfileFamily::Dipole => PI * radius,
        }
    }

    pub fn check(&self, radius: f64) -> Result<()> {
        let ok = [self.arc_width, self.beta_width, self.gamma_width, self.localization]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
            && self.amplitude.is_finite()
            && self.gamma2.is_finite()
            && self.gamma2_width >= 0.0;
        if !ok {
            return Err(Error::Parameter(format!("invalid boundary-layer profile {self:?}")));
        }
        if self.quadratic_width() >= radius {
            return Err(Error::Parameter(format!("layer width {} exceeds radius {radius}", self.quadratic_width())));
        }
        if self.family == ProfileFamily::Bump {
            if self.support(radius) >= radius {
                return Err(Error::Parameter(format!(
                    "layer support {} does not fit inside radius {radius}",
                    self.support(radius)
                )));
            }
            if self.arc_width >= PI * radius {
                return Err(Error::Parameter(format!(
                    "arc half-width {} exceeds half the circumference",
                    self.arc_width
                )));
            }
        }
        Ok(())
    }

    /// `α, α', α''` at arclength `s`.
    pub fn alpha(&self, s: f64, radius: f64) -> [f64; 3] {
        let a = self.amplitude;
        match self.family {
            ProfileFamily::Bump => {
                let w = self.arc_width;
                let b = bump(s / w);
                [a * b[0], a * b[1] / w, a * b[2] / (w * w)]
            }
            ProfileFamily::Dipole => {
                let (c, sn) = ((s / radius).cos(), (s / radius).sin());
                [a * c, -a * sn / radius, -a * c / (radius * radius)]
            }
        }
    }

    /// `β, β'` at depth `r̃`.
    pub fn beta(&self, rt: f64, radius: f64) -> [f64; 2] {
        match self.family {
            ProfileFamily::Bump => {
                let c = cutoff(rt / self.beta_width);
                [c[0], c[1] / self.beta_width]
            }
            ProfileFamily::Dipole => {
                let rho = 1.0 - rt / radius;
                [0.5 * (3.0 * rho - rho.powi(3)), -1.5 * (1.0 - rho * rho) / radius]
            }
        }
    }

    /// `γ, γ', γ''` at depth `r̃`.
    pub fn gamma(&self, rt: f64, radius: f64) -> [f64; 3] {
        let (base, base2) = match self.family {
            ProfileFamily::Bump => {
                let d = self.gamma_width;
                let c = cutoff(rt / d);
                let (c1, c2) = (c[1] / d, c[2] / (d * d));
                ([rt * c[0], c[0] + rt * c1, 2.0 * c1 + rt * c2], 0.0)
            }
            ProfileFamily::Dipole => {
                // R ρ(1 − ρ²)/2 with ρ = 1 − r̃/R.
                let rho = 1.0 - rt / radius;
                let g = [0.5 * radius * rho * (1.0 - rho * rho), -0.5 * (1.0 - 3.0 * rho * rho), -3.0 * rho / radius];
                (g, -3.0 / radius)
            }
        };
        let e = self.quadratic_width();
        let q = layer(rt / e);
        let (q1, q2) = (q[1] / e, q[2] / (e * e));
        let h = 0.5 * (self.gamma2 - base2);
        [
            base[0] + h * rt * rt * q[0],
            base[1] + h * (2.0 * rt * q[0] + rt * rt * q1),
            base[2] + h * (2.0 * q[0] + 4.0 * rt * q1 + rt * rt * q2),
        ]
    }

    /// `(u_r, u_θ)` at polar point `(r, φ)` relative to the layer centre.
    fn velocity(&self, radius: f64, r: f64, phi: f64) -> (f64, f64) {
        let rt = radius - r;
        if rt < 0.0 || rt >= self.support(radius) || r <= 0.0 {
            return (0.0, 0.0);
        }
        let s = radius * phi;
        if self.family == ProfileFamily::Bump && s.abs() >= self.arc_width {
            return (0.0, 0.0);
        }
        let [a, a1, a2] = self.alpha(s, radius);
        let [b, b1] = self.beta(rt, radius);
        let [c, c1, _] = self.gamma(rt, radius);
        let m = radius / r;
        // ∂r = −∂r̃: ∇p = (−αβ', (R/r)α'β) and ∇⊥ψ = (−(R/r)α''γ, −α'γ').
        (-a * b1 - m * a2 * c, m * a1 * b - a1 * c1)
    }
}

fn wrap(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// Builds `u = ∇⊥ψ + ∇p` by sampling the closed-form gradients.
///
/// On the torus the same layer is placed inside the circle of radius `L/4`
/// around the centre of the cell and the field is zero outside it.
pub fn build_counterexample_field(grid: &Arc<Grid>, profile: &BoundaryLayerProfile) -> Result<VectorField> {
    let (radius, cx, cy) = if grid.is_disk() {
        (grid.length(), 0.0, 0.0)
    } else {
        let l = grid.length();
        (0.25 * l, 0.5 * l, 0.5 * l)
    };
    profile.check(radius)?;
    let trace = if grid.is_disk() { Trace::Zero } else { Trace::Free };
    Ok(VectorField::from_fn(grid, trace, |x, y| {
        let (dx, dy) = (x - cx, y - cy);
        let r = dx.hypot(dy);
        let th = dy.atan2(dx);
        let (ur, ut) = profile.velocity(radius, r, wrap(th - profile.center));
        let (c, s) = (th.cos(), th.sin());
        (ur * c - ut * s, ur * s + ut * c)
    }))
}

/// Stream function `ψ = α'(s)γ(r̃)` on the disk faces.
pub fn stream_function(grid: &Arc<Grid>, profile: &BoundaryLayerProfile) -> Result<ScalarField> {
    if !grid.is_disk() {
        return Err(Error::Parameter("the stream function is defined on the disk only".into()));
    }
    let radius = grid.length();
    profile.check(radius)?;
    Ok(ScalarField::from_fn(grid, Location::Face, |x, y| {
        let rt = radius - x.hypot(y);
        let s = radius * wrap(y.atan2(x) - profile.center);
        let outside_arc = profile.family == ProfileFamily::Bump && s.abs() >= profile.arc_width;
        if rt >= profile.support(radius) || outside_arc {
            return 0.0;
        }
        profile.alpha(s, radius)[1] * profile.gamma(rt, radius)[0]
    }))
}

/// `∫ α'(s)² (κ − γ''(0)) ds`, the boundary term `∮ ∂νψ Δψ` written in the
/// inward depth `r̃`.
pub fn boundary_form(profile: &BoundaryLayerProfile, radius: f64) -> f64 {
    let n = 4000;
    let w = profile.arc_half_width(radius);
    let ds = 2.0 * w / n as f64;
    let k = 1.0 / radius;
    (0..n)
        .map(|i| {
            let s = -w + i as f64 * ds;
            profile.alpha(s, radius)[1].powi(2)
        })
        .sum::<f64>()
        * ds
        * (k - profile.gamma2)
}

/// `∮ ∂νψ Δψ` evaluated from grid values of `ψ`.
///
/// Radial derivatives at the wall use fourth-order one-sided stencils on the
/// face rows; the angular term is spectral on the boundary row.
pub fn boundary_form_discrete(grid: &Arc<Grid>, profile: &BoundaryLayerProfile) -> Result<f64> {
    let psi = stream_function(grid, profile)?;
    let (na, n, h) = (grid.n_angular(), grid.n_radial(), grid.h());
    if n < 6 {
        return Err(Error::InvalidGrid("need at least six radial cells".into()));
    }
    let radius = grid.length();
    let pv = psi.values();
    let wall: Vec<f64> = pv[n * na..].to_vec();
    let spec = grid.ring.forward(&wall);
    let theta2: Vec<_> = (0..na)
        .map(|k| {
            let (m, _) = grid.ring.mode(k);
            spec[k] * -(m as f64).powi(2)
        })
        .collect();
    let theta2 = grid.ring.inverse(theta2);
    let mut total = 0.0;
    for k in 0..na {
        let f: Vec<f64> = (0..6).map(|i| pv[(n - i) * na + k]).collect();
        let d1 = (25.0 * f[0] - 48.0 * f[1] + 36.0 * f[2] - 16.0 * f[3] + 3.0 * f[4]) / (12.0 * h);
        let d2 =
            (45.0 * f[0] - 154.0 * f[1] + 214.0 * f[2] - 156.0 * f[3] + 61.0 * f[4] - 10.0 * f[5]) / (12.0 * h * h);
        let lap = d2 + d1 / radius + theta2[k] / (radius * radius);
        total += d1 * lap;
    }
    Ok(total * radius * grid.dtheta())
}

/// Geometric schedule of `γ''(0)` values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub min_abs: f64,
    pub max_abs: f64,
    pub count: usize,
    pub both_signs: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { min_abs: 1.0, max_abs: 128.0, count: 15, both_signs: true }
    }
}

impl SweepSpec {
    pub fn values(&self) -> Vec<f64> {
        let n = self.count.max(1);
        let ratio = if n > 1 { (self.max_abs / self.min_abs).powf(1.0 / (n - 1) as f64) } else { 1.0 };
        let mut out = Vec::new();
        for i in 0..n {
            let g = self.min_abs * ratio.powi(i as i32);
            out.push(g);
            if self.both_signs {
                out.push(-g);
            }
        }
        out
    }
}

/// One evaluated profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub gamma2: f64,
    pub margin: f64,
    pub form: QuadraticFormReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleReport {
    pub profile: BoundaryLayerProfile,
    #[serde(skip)]
    pub u: VectorField,
    pub form: QuadraticFormReport,
    pub epsilon: f64,
    pub c: f64,
    pub satisfied: bool,
    /// `ε‖∇u‖² − C‖∇·u‖² − ⟨u, Au⟩`.
    pub margin: f64,
    pub boundary_form: f64,
    /// `‖Δψ‖² + (C + 1)‖Δp‖²`.
    pub contradiction_rhs: f64,
    pub sweep: Vec<SweepPoint>,
}

fn margin(form: &QuadraticFormReport, eps: f64, c: f64) -> f64 {
    eps * form.grad_energy - c * form.div_norm_sq - form.total
}

/// Evaluates a single profile against the target `(ε, C)`.
pub fn evaluate(grid: &Arc<Grid>, profile: &BoundaryLayerProfile, eps: f64, c: f64) -> Result<CounterexampleReport> {
    let u = build_counterexample_field(grid, profile)?;
    let form = quadratic_form(&u)?;
    let m = margin(&form, eps, c);
    let radius = if grid.is_disk() { grid.length() } else { 0.25 * grid.length() };
    Ok(CounterexampleReport {
        profile: *profile,
        u,
        form,
        epsilon: eps,
        c,
        satisfied: m > 0.0,
        margin: m,
        boundary_form: boundary_form(profile, radius),
        contradiction_rhs: form.vorticity_norm_sq + (c + 1.0) * form.div_norm_sq,
        sweep: Vec::new(),
    })
}

/// Sweeps `γ''(0)` and returns the first profile that violates
/// `⟨u, Au⟩ ≤ ε‖∇u‖² − C‖∇·u‖²`.
pub fn search_counterexample(
    grid: &Arc<Grid>,
    base: &BoundaryLayerProfile,
    eps: f64,
    c: f64,
    sweep: &SweepSpec,
) -> Result<CounterexampleReport> {
    if !(eps >= 0.0 && c >= 0.0) {
        return Err(Error::Parameter(format!("need epsilon, C >= 0, got ({eps}, {c})")));
    }
    let values = sweep.values();
    let evaluated: Vec<Result<(f64, QuadraticFormReport)>> = values
        .par_iter()
        .map(|&g2| {
            let p = base.with_gamma2(g2);
            let u = build_counterexample_field(grid, &p)?;
            Ok((g2, quadratic_form(&u)?))
        })
        .collect();
    let mut points = Vec::with_capacity(values.len());
    for e in evaluated {
        let (gamma2, form) = e?;
        points.push(SweepPoint { gamma2, margin: margin(&form, eps, c), form });
    }
    match points.iter().position(|p| p.margin > 0.0) {
        Some(i) => {
            let mut report = evaluate(grid, &base.with_gamma2(points[i].gamma2), eps, c)?;
            report.sweep = points;
            Ok(report)
        }
        None => {
            let best = points.iter().max_by(|a, b| a.margin.total_cmp(&b.margin));
            let detail = match best {
                Some(p) => format!(
                    "no violation for (eps, C) = ({eps}, {c}); best margin {:.4e} at gamma''(0) = {}",
                    p.margin, p.gamma2
                ),
                None => "empty sweep".to_string(),
            };
            Err(Error::SearchExhausted(detail))
        }
    }
}

/// `∇p_s(u)` against `∇⊥q_s` with `q_s` the harmonic extension of the
/// boundary vorticity. Returns the relative L² difference. The pressure is the
/// wall-corrected reconstruction; the mimetic one converges like `h^{0.7}`.
pub fn harmonic_conjugate_defect(u: &VectorField) -> Result<f64> {
    let g = u.grid();
    let (gp, _) = stokes_pressure_wall_corrected(u);
    let qs = elliptic::solve_harmonic_dirichlet(g, &boundary_vorticity(u))?;
    let alt = perp_gradient(&qs);
    let diff = gp.axpy(-1.0, &alt)?;
    Ok(l2_norm_vec(&diff) / l2_norm_vec(&gp).max(f64::MIN_POSITIVE))
}

/// `‖uⁿ‖²` under the linear scheme.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergySeries {
    pub dt: f64,
    pub l2_sq: Vec<f64>,
    pub increased_first_step: bool,
    /// Number of leading steps with strictly increasing energy.
    pub growth_steps: usize,
    pub ends_below_initial: bool,
    pub non_increasing: bool,
}

pub fn demonstrate_energy_increase(u0: &VectorField, dt: f64, n_steps: usize) -> Result<EnergySeries> {
    if !(dt > 0.0) {
        return Err(Error::Parameter(format!("time step must be positive, got {dt}")));
    }
    let mut l2_sq = Vec::with_capacity(n_steps + 1);
    let mut u = u0.clone();
    l2_sq.push(l2_norm_vec(&u).powi(2));
    for _ in 0..n_steps {
        u = timestepping::step_linear(&u, None, dt)?;
        l2_sq.push(l2_norm_vec(&u).powi(2));
    }
    let growth_steps = l2_sq.windows(2).take_while(|w| w[1] > w[0]).count();
    Ok(EnergySeries {
        dt,
        increased_first_step: l2_sq.len() > 1 && l2_sq[1] > l2_sq[0],
        growth_steps,
        ends_below_initial: l2_sq.last().is_some_and(|v| *v < l2_sq[0]),
        non_increasing: l2_sq.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)),
        l2_sq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{random_solenoidal, RandomFieldSpec};

    fn disk(n: usize) -> Arc<Grid> {
        Grid::disk(1.0, 2 * n, n).unwrap()
    }

    #[test]
    fn profile_endpoint_values_are_exact() {
        for base in [BoundaryLayerProfile::default(), BoundaryLayerProfile::dipole()] {
            for g2 in [-20.0, 0.0, 3.5] {
                let p = base.with_gamma2(g2);
                assert_eq!(p.beta(0.0, 1.0), [1.0, 0.0]);
                let [g0, g1, gg] = p.gamma(0.0, 1.0);
                assert_eq!(g0, 0.0);
                assert!((g1 - 1.0).abs() < 1e-15);
                assert!((gg - g2).abs() < 1e-12, "{gg} vs {g2}");
            }
        }
    }

    #[test]
    fn bump_profiles_vanish_at_support_edge() {
        let p = BoundaryLayerProfile::default().with_gamma2(-5.0);
        let edge = p.support(1.0);
        let b = p.beta(p.beta_width * (1.0 - 1e-7), 1.0);
        let c = p.gamma(edge * (1.0 - 1e-7), 1.0);
        assert!(b.iter().chain(&c).all(|v| v.abs() < 1e-10), "{b:?} {c:?}");
        let a = p.alpha(p.arc_width * (1.0 - 1e-6), 1.0);
        assert!(a.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn field_vanishes_on_the_wall() {
        for base in [BoundaryLayerProfile::default(), BoundaryLayerProfile::dipole()] {
            let p = base.with_gamma2(-12.0);
            for phi in [-0.7, 0.0, 0.3, 2.0] {
                let (ur, ut) = p.velocity(1.0, 1.0 - 1e-12, phi);
                assert!(ur.abs() < 1e-9 && ut.abs() < 1e-9, "{ur} {ut}");
            }
        }
    }

    #[test]
    fn zero_amplitude_gives_zero_field_and_form() {
        let g = disk(16);
        let p = BoundaryLayerProfile { amplitude: 0.0, ..BoundaryLayerProfile::dipole() };
        assert_eq!(build_counterexample_field(&g, &p).unwrap().max_abs(), 0.0);
        assert_eq!(boundary_form(&p, 1.0), 0.0);
    }

    #[test]
    fn oversized_layer_is_rejected() {
        let g = disk(16);
        let p = BoundaryLayerProfile { beta_width: 1.5, ..Default::default() };
        assert!(matches!(build_counterexample_field(&g, &p), Err(Error::Parameter(_))));
    }

    #[test]
    fn boundary_form_cancels_at_curvature() {
        let p = BoundaryLayerProfile::dipole().with_gamma2(1.0);
        assert!(boundary_form(&p, 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_form_routes_agree() {
        let g = disk(64);
        for g2 in [-4.0, -16.0, -32.0] {
            let p = BoundaryLayerProfile::dipole().with_gamma2(g2);
            let (a, b) = (boundary_form(&p, 1.0), boundary_form_discrete(&g, &p).unwrap());
            assert!((a - b).abs() < 0.02 * a.abs(), "{g2}: {a} vs {b}");
        }
    }

    #[test]
    fn dipole_field_has_divergence_and_small_conjugate_defect() {
        let g = disk(64);
        let r = evaluate(&g, &BoundaryLayerProfile::dipole().with_gamma2(-16.0), 0.0, 0.0).unwrap();
        assert!(r.form.div_norm_sq > 1.0);
        assert!(harmonic_conjugate_defect(&r.u).unwrap() < 1e-2);
    }

    #[test]
    fn search_finds_negative_form_on_disk() {
        let g = disk(64);
        let r = search_counterexample(&g, &BoundaryLayerProfile::dipole(), 0.0, 0.0, &SweepSpec::default()).unwrap();
        assert!(r.satisfied && r.form.total < 0.0);
        assert!(r.profile.gamma2 < 0.0);
        let first = r.sweep.iter().position(|p| p.margin > 0.0).unwrap();
        assert_eq!(r.sweep[first].gamma2, r.profile.gamma2);
    }

    #[test]
    fn search_fails_loudly_on_the_torus() {
        let g = Grid::torus(4.0, 64, 64).unwrap();
        let err = search_counterexample(&g, &BoundaryLayerProfile::dipole(), 0.0, 0.0, &SweepSpec::default());
        match err {
            Err(Error::SearchExhausted(msg)) => assert!(msg.contains("best margin"), "{msg}"),
            other => panic!("expected exhausted search, got {:?}", other.map(|r| r.margin)),
        }
    }

    #[test]
    fn counterexample_data_gains_energy_then_decays() {
        let g = disk(32);
        let u = build_counterexample_field(&g, &BoundaryLayerProfile::dipole().with_gamma2(-16.0)).unwrap();
        let s = demonstrate_energy_increase(&u, 1e-2, 300).unwrap();
        assert!(s.increased_first_step && s.growth_steps >= 1);
        assert!(s.ends_below_initial);
    }

    #[test]
    fn solenoidal_data_loses_energy_every_step() {
        let g = disk(32);
        let u = random_solenoidal(&g, RandomFieldSpec::default(), 5);
        let s = demonstrate_energy_increase(&u, 1e-2, 50).unwrap();
        assert!(s.non_increasing && !s.increased_first_step);
    }

    #[test]
    fn sweep_schedule_is_geometric_with_both_signs() {
        let v = SweepSpec { min_abs: 1.0, max_abs: 8.0, count: 4, both_signs: true }.values();
        assert_eq!(v, vec![1.0, -1.0, 2.0, -2.0, 4.0, -4.0, 8.0, -8.0]);
    }
}
