//! Explicit-pressure, implicit-viscosity time stepping and the energy ledger.
//!
//! One step computes `∇pⁿ = ∇p_s(uⁿ) + ∇Q(fⁿ)` and then solves
//! `(uⁿ⁺¹ − uⁿ)/δt − Δuⁿ⁺¹ + ∇pⁿ = fⁿ` with `uⁿ⁺¹ = 0` on the boundary.
//! The nonlinear variant adds `−P((uⁿ·∇)uⁿ) − α∇Q(uⁿ)` to the right-hand side.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::elliptic;
use crate::error::{Error, Result};
use crate::fields::{
    advect, divergence, gradient, h1_inner, h1_semi_sq, l2_inner_vec, l2_norm, l2_norm_vec, lap_norm, Grid,
    ScalarField, Trace, VectorField,
};
use crate::operators::{self, gradient_potential, potential_laplacian, stokes_pressure, AdjustedIPParams};

/// Forcing `fⁿ`, evaluated at the left endpoint `tₙ`.
#[derive(Clone, Default)]
pub enum Forcing {
    #[default]
    None,
    Steady(VectorField),
    Closure(Arc<dyn Fn(f64) -> VectorField + Send + Sync>),
    Steps(Vec<VectorField>),
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::None => f.write_str("None"),
            Forcing::Steady(_) => f.write_str("Steady(..)"),
            Forcing::Closure(_) => f.write_str("Closure(..)"),
            Forcing::Steps(v) => write!(f, "Steps({})", v.len()),
        }
    }
}

impl Forcing {
    pub fn at(&self, step: usize, t: f64) -> Option<VectorField> {
        match self {
            Forcing::None => None,
            Forcing::Steady(f) => Some(f.clone()),
            Forcing::Closure(f) => Some(f(t)),
            Forcing::Steps(v) => v.get(step).or(v.last()).cloned(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeConfig {
    pub dt: f64,
    pub n_steps: usize,
    /// Divergence damping rate.
    pub alpha: f64,
    pub nonlinear: bool,
    pub adjusted: AdjustedIPParams,
    pub c1: f64,
    pub c2: f64,
    pub eps_e: f64,
    /// Upper bound on admissible `δt`.
    pub kappa0: f64,
    /// `C` in the summed energy inequality.
    pub ineq_c: f64,
    /// Geometric decay rate `C` in `(1 − Cδt)^N`.
    pub decay_rate: f64,
    /// `C'` weighting the forcing in the decay bound.
    pub forcing_c: f64,
    /// Abort once `‖uⁿ‖ > blowup · ‖u⁰‖`.
    pub blowup: f64,
    #[serde(skip)]
    pub forcing: Forcing,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            n_steps: 100,
            alpha: 0.0,
            nonlinear: false,
            adjusted: AdjustedIPParams { epsilon: 0.05, c: 10.0 },
            c1: 1.0,
            c2: 10.0,
            eps_e: 0.5,
            kappa0: 0.1,
            ineq_c: 10.0,
            decay_rate: 1.0,
            forcing_c: 1.0,
            blowup: 1e3,
            forcing: Forcing::None,
        }
    }
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("time step must be positive, got {}", self.dt));
        }
        if !(self.dt < self.kappa0) {
            return bad(format!("time step {} is not below kappa0 = {}", self.dt, self.kappa0));
        }
        if !(self.alpha >= 0.0) {
            return bad(format!("damping must be non-negative, got {}", self.alpha));
        }
        AdjustedIPParams::new(self.adjusted.epsilon, self.adjusted.c)?;
        if !(self.c1 >= 0.0 && self.c2 >= 0.0 && self.eps_e >= 0.0) {
            return bad("energy constants must be non-negative".into());
        }
        if !(self.ineq_c > 0.0 && self.decay_rate >= 0.0 && self.forcing_c >= 0.0 && self.blowup > 1.0) {
            return bad("inequality constants out of range".into());
        }
        Ok(())
    }
}

/// `(pⁿ, ∇pⁿ)` from the weak pressure equation.
pub fn pressure_update(u: &VectorField, f: Option<&VectorField>) -> (ScalarField, VectorField) {
    let (_, ps) = stokes_pressure(u);
    let p = match f {
        Some(f) => ps.axpy(1.0, &gradient_potential(f)).expect("same grid"),
        None => ps,
    }
    .mean_free();
    (p.clone(), gradient(&p))
}

/// One step of the linear scheme.
pub fn step_linear(u: &VectorField, f: Option<&VectorField>, dt: f64) -> Result<VectorField> {
    advance(u, f, dt, 0.0, false)
}

/// One step with explicit convection and divergence damping.
pub fn step_nonlinear(u: &VectorField, f: Option<&VectorField>, dt: f64, alpha: f64) -> Result<VectorField> {
    advance(u, f, dt, alpha, true)
}

/// Linear step plus explicit damping `−α∇Q(uⁿ)`, which bypasses the pressure
/// solve (a gradient forcing would otherwise be absorbed by `pⁿ`).
pub fn step_damped(u: &VectorField, f: Option<&VectorField>, dt: f64, alpha: f64) -> Result<VectorField> {
    advance(u, f, dt, alpha, false)
}

fn advance(u: &VectorField, f: Option<&VectorField>, dt: f64, alpha: f64, convect: bool) -> Result<VectorField> {
    if !(alpha >= 0.0) {
        return Err(Error::Parameter(format!("damping must be non-negative, got {alpha}")));
    }
    let (_, gp) = pressure_update(u, f);
    let mut rhs = u.scale(1.0 / dt).axpy(-1.0, &gp)?;
    if convect {
        rhs = rhs.axpy(-1.0, &operators::project(&advect(u, u)?))?;
    }
    if alpha > 0.0 {
        rhs = rhs.axpy(-alpha, &gradient(&gradient_potential(u)))?;
    }
    if let Some(f) = f {
        rhs = rhs.axpy(1.0, f)?;
    }
    elliptic::solve_helmholtz_dirichlet(1.0 / dt, &rhs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub step: usize,
    pub t: f64,
    pub l2_sq: f64,
    pub h1_sq: f64,
    pub lap_sq: f64,
    pub div_sq: f64,
    pub gradq_sq: f64,
    pub ps_sq: f64,
    pub adj_energy: f64,
    pub e_c1c2: f64,
    pub e_prime: f64,
    pub disc_ineq_resid: f64,
    pub exp_decay_resid: f64,
    pub nonlin_term: f64,
}

pub const LEDGER_HEADER: &str =
    "step,t,l2_sq,h1_sq,lap_sq,div_sq,gradq_sq,ps_sq,adj_energy,E_c1c2,E_prime,disc_ineq_resid,exp_decay_resid,nonlin_term";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    BlowUp { step: usize, ratio: f64 },
    NonFinite { step: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub dt: f64,
    pub adjusted: AdjustedIPParams,
    pub rows: Vec<LedgerRow>,
    pub status: RunStatus,
}

/// Outcome of the ledger checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LedgerChecks {
    /// Largest `‖∇·uⁿ‖ / ((1 + rate δt)^{−n} ‖∇·u⁰‖)`.
    pub div_decay_ratio: f64,
    pub max_disc_ineq_resid: f64,
    pub max_exp_decay_resid: f64,
    /// Largest `Eⁿ⁺¹ − Eⁿ + δt E'ⁿ⁺¹`, relative to `E⁰`.
    pub max_energy_monitor: f64,
    pub l2_increase_first_step: bool,
    pub l2_eventually_below_initial: bool,
}

impl EnergyLedger {
    pub fn combined_energy(&self, row: &LedgerRow) -> f64 {
        row.l2_sq + self.adjusted.epsilon * row.h1_sq + self.adjusted.c * row.gradq_sq
    }

    /// Per-step contraction factors of the combined energy.
    pub fn combined_factors(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| self.combined_energy(&w[1]) / self.combined_energy(&w[0])).collect()
    }

    pub fn energy_monitor(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[1].e_c1c2 - w[0].e_c1c2 + self.dt * w[1].e_prime).collect()
    }

    pub fn checks(&self, lambda1: f64, alpha: f64) -> LedgerChecks {
        let rows = &self.rows;
        let d0 = rows.first().map(|r| r.div_sq.sqrt()).unwrap_or(0.0);
        let mut div_decay_ratio: f64 = 0.0;
        if d0 > 0.0 {
            for r in rows {
                let bound = (1.0 + (lambda1 + alpha) * self.dt).powi(-(r.step as i32)) * d0;
                div_decay_ratio = div_decay_ratio.max(r.div_sq.sqrt() / bound);
            }
        }
        let e0 = rows.first().map(|r| r.e_c1c2).unwrap_or(0.0).max(f64::MIN_POSITIVE);
        let fold = |f: &dyn Fn(&LedgerRow) -> f64| rows.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        let l0 = rows.first().map(|r| r.l2_sq).unwrap_or(0.0);
        LedgerChecks {
            div_decay_ratio,
            max_disc_ineq_resid: fold(&|r| r.disc_ineq_resid),
            max_exp_decay_resid: fold(&|r| r.exp_decay_resid),
            max_energy_monitor: self.energy_monitor().into_iter().fold(f64::NEG_INFINITY, f64::max) / e0,
            l2_increase_first_step: rows.len() > 1 && rows[1].l2_sq > l0,
            l2_eventually_below_initial: rows.last().is_some_and(|r| r.l2_sq < l0),
        }
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{LEDGER_HEADER}")?;
        for r in &self.rows {
            let vals = [
                r.t,
                r.l2_sq,
                r.h1_sq,
                r.lap_sq,
                r.div_sq,
                r.gradq_sq,
                r.ps_sq,
                r.adj_energy,
                r.e_c1c2,
                r.e_prime,
                r.disc_ineq_resid,
                r.exp_decay_resid,
                r.nonlin_term,
            ];
            write!(w, "{}", r.step)?;
            for v in vals {
                write!(w, ",{}", crate::io::fmt17(v))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

struct Snapshot {
    l2_sq: f64,
    h1_sq: f64,
    lap_sq: f64,
    div_sq: f64,
    gradq_sq: f64,
    lapq_sq: f64,
    ps_sq: f64,
    q: ScalarField,
    f_sq: f64,
}

fn snapshot(u: &VectorField, f: Option<&VectorField>) -> Snapshot {
    let q = gradient_potential(u);
    Snapshot {
        l2_sq: l2_norm_vec(u).powi(2),
        h1_sq: h1_semi_sq(u),
        lap_sq: lap_norm(u).powi(2),
        div_sq: l2_norm(&divergence(u)).powi(2),
        gradq_sq: l2_norm_vec(&gradient(&q)).powi(2),
        lapq_sq: l2_norm(&potential_laplacian(&q)).powi(2),
        ps_sq: l2_norm_vec(&stokes_pressure(u).0).powi(2),
        q,
        f_sq: f.map(|f| l2_norm_vec(f).powi(2)).unwrap_or(0.0),
    }
}

/// `|⟨P((u·∇)u), u⟩_ε|`.
fn nonlinear_term(u: &VectorField, p: AdjustedIPParams) -> Result<f64> {
    let w = operators::project(&advect(u, u)?);
    Ok((l2_inner_vec(&w, u)? + p.epsilon * h1_inner(&w, u)?).abs())
}

/// Runs the scheme and records the ledger.
pub fn run(cfg: &SchemeConfig, u0: &VectorField) -> Result<EnergyLedger> {
    run_observed(cfg, u0, |_, _| {})
}

/// As [`run`], calling `observe(n, uⁿ)` for every `n = 0..=n_steps`.
pub fn run_observed(
    cfg: &SchemeConfig,
    u0: &VectorField,
    mut observe: impl FnMut(usize, &VectorField),
) -> Result<EnergyLedger> {
    cfg.validate()?;
    if !u0.is_finite() {
        return Err(Error::NonFinite("initial velocity".into()));
    }
    let p = cfg.adjusted;
    let (eps, ceps) = (p.epsilon, p.c);
    let dt = cfg.dt;
    let step = |u: &VectorField, f: Option<&VectorField>| advance(u, f, dt, cfg.alpha, cfg.nonlinear);
    let norm0 = l2_norm_vec(u0);
    let mut rows = Vec::with_capacity(cfg.n_steps + 1);
    let mut u = u0.clone();
    let mut f = cfg.forcing.at(0, 0.0);
    let mut cur = snapshot(&u, f.as_ref());
    let first = (cur.l2_sq, cur.h1_sq, cur.lap_sq, cur.gradq_sq);
    let combined0 = first.0 + eps * first.1 + ceps * first.3;
    let mut dissipated = 0.0;
    let mut f_sum = 0.0;
    let mut f_decay = 0.0;
    let contraction = 1.0 - cfg.decay_rate * dt;
    let mut status = RunStatus::Completed;
    for n in 0..=cfg.n_steps {
        let t = n as f64 * dt;
        observe(n, &u);
        let next = step(&u, f.as_ref())?;
        let ratio = l2_norm_vec(&next) / norm0.max(f64::MIN_POSITIVE);
        let f_next = cfg.forcing.at(n + 1, t + dt);
        let nxt = snapshot(&next, f_next.as_ref());

        f_sum += cur.f_sq;
        dissipated += (cur.h1_sq + eps * cur.lap_sq + ceps * nxt.lapq_sq) * dt;
        let combined = cur.l2_sq + eps * cur.h1_sq + ceps * cur.gradq_sq;
        let lhs = combined + dissipated / cfg.ineq_c;
        let rhs = combined0 + cfg.ineq_c * dt * (first.1 + eps * first.2 + f_sum);
        let exp_rhs = contraction.powi(n as i32) * combined0 + cfg.forcing_c * f_decay;
        f_decay = f_decay * contraction + cur.f_sq * dt;

        let adj_energy = cur.l2_sq + eps * cur.h1_sq + ceps * l2_norm(&cur.q).powi(2);
        let gq = cur.gradq_sq.sqrt();
        let e_c1c2 = cur.l2_sq + cfg.c1 * cur.h1_sq.sqrt() * gq + cfg.c2 * cur.gradq_sq;
        let e_prime = (2.0 - cfg.eps_e) * cur.h1_sq + cur.lap_sq.sqrt() * gq + cur.lapq_sq;
        let row = LedgerRow {
            step: n,
            t,
            l2_sq: cur.l2_sq,
            h1_sq: cur.h1_sq,
            lap_sq: cur.lap_sq,
            div_sq: cur.div_sq,
            gradq_sq: cur.gradq_sq,
            ps_sq: cur.ps_sq,
            adj_energy,
            e_c1c2,
            e_prime,
            disc_ineq_resid: lhs - rhs,
            exp_decay_resid: combined - exp_rhs,
            nonlin_term: if cfg.nonlinear { nonlinear_term(&u, p)? } else { 0.0 },
        };
        let finite = [row.l2_sq, row.h1_sq, row.lap_sq, row.e_c1c2, row.e_prime].iter().all(|v| v.is_finite());
        if !finite {
            status = RunStatus::NonFinite { step: n };
            break;
        }
        rows.push(row);
        if n == cfg.n_steps {
            break;
        }
        if !next.is_finite() {
            status = RunStatus::NonFinite { step: n + 1 };
            break;
        }
        if ratio > cfg.blowup {
            status = RunStatus::BlowUp { step: n + 1, ratio };
            break;
        }
        u = next;
        f = f_next;
        cur = nxt;
    }
    Ok(EnergyLedger { dt, adjusted: p, rows, status })
}

/// Energy constants `(c1, c2)` for which the monitor
/// `E(u¹) − E(u⁰) + δt E'(u¹) ≤ 0` holds over one linear step from every sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyFit {
    pub c1: f64,
    pub c2: f64,
    pub eps_e: f64,
    pub dt: f64,
    pub samples: usize,
    /// Largest monitor value over the samples, relative to `E(u⁰)`.
    pub worst: f64,
}

/// Fits `(c1, c2)` for the energy monitor on random zero-trace data.
///
/// The monitor is affine in `(c1, c2)`, so for each candidate `c1` the least
/// admissible `c2` is a maximum over samples; it is inflated by `margin` and
/// the pair with the smallest `c2` wins.
pub fn fit_energy_constants(
    grid: &Arc<Grid>,
    spec: operators::RandomFieldSpec,
    dt: f64,
    eps_e: f64,
    samples: usize,
    seed: u64,
) -> Result<EnergyFit> {
    if !(dt > 0.0 && (0.0..2.0).contains(&eps_e) && samples > 0) {
        return Err(Error::Parameter(format!(
            "energy fit needs dt > 0, 0 <= eps_e < 2, samples > 0 (dt={dt}, eps_e={eps_e})"
        )));
    }
    use rayon::prelude::*;
    let parts = |u: &VectorField| {
        let gq = l2_norm_vec(&gradient(&gradient_potential(u)));
        (l2_norm_vec(u).powi(2), h1_semi_sq(u).sqrt() * gq, gq * gq)
    };
    // (Δ‖u‖² + δt E', Δ cross, Δ‖∇q‖², ‖u⁰‖²) per sample.
    let rows = (0..samples)
        .into_par_iter()
        .map(|i| {
            let u0 = operators::random_field(grid, spec, seed.wrapping_add(i as u64));
            let u1 = step_linear(&u0, None, dt)?;
            let (p0, p1) = (parts(&u0), parts(&u1));
            let a = p1.0 - p0.0 + dt * operators::energy_eprime(&u1, eps_e);
            Ok([a, p1.1 - p0.1, p1.2 - p0.2, p0.0, p0.1, p0.2])
        })
        .collect::<Result<Vec<[f64; 6]>>>()?;
    let margin = 1.25;
    let mut best: Option<(f64, f64)> = None;
    'c1: for c1 in [0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
        let mut c2: f64 = 1e-3;
        for r in &rows {
            let lead = r[0] + c1 * r[1];
            if r[2] < 0.0 {
                c2 = c2.max(lead / -r[2]);
            } else if lead > 0.0 {
                continue 'c1;
            }
        }
        let c2 = c2 * margin;
        if best.is_none_or(|(_, b)| c2 < b) {
            best = Some((c1, c2));
        }
    }
    let (c1, c2) = best.ok_or_else(|| {
        Error::SearchExhausted(format!("no (c1, c2) makes the energy monitor non-positive over {samples} samples"))
    })?;
    let worst = rows
        .iter()
        .map(|r| (r[0] + c1 * r[1] + c2 * r[2]) / (r[3] + c1 * r[4] + c2 * r[5]))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(EnergyFit { c1, c2, eps_e, dt, samples, worst })
}

/// One amplitude tried by [`small_data_threshold`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeTrial {
    pub amplitude: f64,
    pub monotone: bool,
    /// Largest relative one-step increase of `⟨uⁿ, uⁿ⟩_ε`.
    pub max_increase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallDataReport {
    /// Largest amplitude found with `⟨uⁿ, uⁿ⟩_ε` non-increasing.
    pub threshold: f64,
    /// Smallest amplitude found to fail, if any.
    pub failing: Option<f64>,
    pub trials: Vec<AmplitudeTrial>,
}

fn amplitude_trial(cfg: &SchemeConfig, shape: &VectorField, amplitude: f64) -> Result<AmplitudeTrial> {
    let ledger = run(cfg, &shape.scale(amplitude))?;
    let e: Vec<f64> = ledger.rows.iter().map(|r| r.adj_energy).collect();
    let max_increase = e.windows(2).map(|w| (w[1] - w[0]) / w[0]).fold(f64::NEG_INFINITY, f64::max);
    let monotone = ledger.status == RunStatus::Completed && max_increase <= 1e-12;
    Ok(AmplitudeTrial { amplitude, monotone, max_increase })
}

/// Bisects on the amplitude of `shape` for the small-data regime of the
/// nonlinear scheme: halves from `start` until a run keeps `⟨uⁿ, uⁿ⟩_ε`
/// non-increasing, then refines between the last pass and first failure.
pub fn small_data_threshold(
    cfg: &SchemeConfig,
    shape: &VectorField,
    start: f64,
    refinements: usize,
) -> Result<SmallDataReport> {
    if !(start > 0.0 && start.is_finite()) {
        return Err(Error::Parameter(format!("start amplitude must be positive, got {start}")));
    }
    let cfg = SchemeConfig { nonlinear: true, ..cfg.clone() };
    let mut trials = Vec::new();
    let mut a = start;
    let mut failing = None;
    loop {
        let t = amplitude_trial(&cfg, shape, a)?;
        trials.push(t);
        if t.monotone {
            break;
        }
        failing = Some(a);
        if trials.len() >= 40 {
            return Err(Error::SearchExhausted(format!("no monotone run down to amplitude {a:e}")));
        }
        a *= 0.5;
    }
    let mut pass = a;
    if let Some(mut fail) = failing {
        for _ in 0..refinements {
            let mid = 0.5 * (pass + fail);
            let t = amplitude_trial(&cfg, shape, mid)?;
            trials.push(t);
            if t.monotone {
                pass = mid;
            } else {
                fail = mid;
            }
        }
        failing = Some(fail);
    }
    Ok(SmallDataReport { threshold: pass, failing, trials })
}

/// Implicit-Euler Stokes reference: `(v⁺ − v)/δt + A_S v⁺ = 0` on the
/// divergence-free subspace, solved by projected GMRES.
pub fn stokes_reference_step(v: &VectorField, dt: f64) -> Result<VectorField> {
    let g: Arc<Grid> = v.grid().clone();
    let n = g.cell_count();
    let pack = |u: &VectorField| -> Vec<f64> { u.x().iter().chain(u.y()).copied().collect() };
    let unpack = |x: &[f64]| {
        VectorField::from_components(&g, x[..n].to_vec(), x[n..].to_vec(), Trace::Zero).expect("sizes match")
    };
    // (I + δt A) on zero-trace fields, restricted by composing with P.
    let apply = |x: &[f64]| {
        let w = unpack(x);
        let aw = operators::apply_A(&w);
        pack(&w.axpy(dt, &aw).expect("same grid"))
    };
    let precond = |x: &[f64]| match elliptic::solve_helmholtz_dirichlet(1.0 / dt, &unpack(x)) {
        Ok(w) => pack(&w.scale(1.0 / dt)),
        Err(_) => x.to_vec(),
    };
    let (x, _) = crate::linalg::gmres(apply, precond, &pack(v), 1e-13, 80, 4000)?;
    Ok(unpack(&x))
}
