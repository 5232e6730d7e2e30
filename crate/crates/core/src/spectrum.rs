//! Spectra of the extended Stokes operator and Galerkin fits of its
//! coercivity constants.
//!
//! Every disk operator commutes with rotations, so eigenproblems are solved one
//! angular mode at a time on the invariant subspaces
//! `(u_r, u_θ) = (f(r) cos mθ, g(r) sin mθ)` (even) and
//! `(f(r) sin mθ, −g(r) cos mθ)` (odd). For `m ≥ 1` the two are related by a
//! quarter turn and share their spectrum.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{
    disk, gradient, h1_inner, l2_inner, l2_inner_vec, vector_laplacian, Grid, ScalarField, Trace, VectorField,
};
use crate::linalg;
use crate::operators::{self, apply_A, gradient_potential, potential_laplacian, AdjustedIPParams, RandomFieldSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Stokes,
    Neumann,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Stokes => "stokes",
            Branch::Neumann => "neumann",
        }
    }
}

/// Coordinates of one invariant subspace: radial profiles `f` and `g` at the
/// cell rings, either of which may be absent for `m = 0`.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    grid: Arc<Grid>,
    pub m: usize,
    pub parity: Parity,
    has_f: bool,
    has_g: bool,
    // Angular factors of u_r and u_θ at each angular node, and their squared sums.
    ar: Vec<f64>,
    at: Vec<f64>,
    nr: f64,
    nt: f64,
}

impl ModeBasis {
    pub fn new(grid: &Arc<Grid>, m: usize, parity: Parity) -> Result<Self> {
        if !grid.is_disk() {
            return Err(Error::InvalidGrid("mode blocks need the disk".into()));
        }
        let na = grid.n_angular();
        if 2 * m > na {
            return Err(Error::Parameter(format!("mode {m} is not resolved by {na} angular nodes")));
        }
        let th: Vec<f64> = (0..na).map(|i| i as f64 * grid.dtheta()).collect();
        let (c, s): (Vec<f64>, Vec<f64>) = th.iter().map(|t| ((m as f64 * t).cos(), (m as f64 * t).sin())).unzip();
        let (ar, at) = match parity {
            Parity::Even => (c, s),
            Parity::Odd => (s, c.iter().map(|v| -v).collect()),
        };
        let nr = ar.iter().map(|v| v * v).sum::<f64>();
        let nt = at.iter().map(|v| v * v).sum::<f64>();
        Ok(Self { grid: grid.clone(), m, parity, has_f: nr > 1e-9, has_g: nt > 1e-9, ar, at, nr, nt })
    }

    /// The Nyquist mode has no quarter-turn partner: its even and odd parts
    /// are purely radial and purely angular.
    pub fn is_nyquist(&self) -> bool {
        2 * self.m == self.grid.n_angular()
    }

    pub fn dim(&self) -> usize {
        self.grid.n_radial() * (self.has_f as usize + self.has_g as usize)
    }

    fn split<'a>(&self, c: &'a [f64]) -> (Option<&'a [f64]>, Option<&'a [f64]>) {
        let n = self.grid.n_radial();
        match (self.has_f, self.has_g) {
            (true, true) => (Some(&c[..n]), Some(&c[n..])),
            (true, false) => (Some(c), None),
            _ => (None, Some(c)),
        }
    }

    /// The zero-trace field with coordinates `c`.
    pub fn field(&self, c: &[f64]) -> VectorField {
        let g = &self.grid;
        let na = g.n_angular();
        let (f, gg) = self.split(c);
        let n = g.cell_count();
        let (mut x, mut y) = (vec![0.0; n], vec![0.0; n]);
        for idx in 0..n {
            let (j, i) = (idx / na, idx % na);
            let ur = f.map_or(0.0, |f| f[j] * self.ar[i]);
            let ut = gg.map_or(0.0, |gg| gg[j] * self.at[i]);
            let (cs, sn) = (g.cos[i], g.sin[i]);
            x[idx] = ur * cs - ut * sn;
            y[idx] = ur * sn + ut * cs;
        }
        VectorField::raw(g, x, y, Trace::Zero)
    }

    /// Coordinates of the orthogonal projection of `w` onto the subspace.
    pub fn coordinates(&self, w: &VectorField) -> Vec<f64> {
        let g = &self.grid;
        let (na, nrad) = (g.n_angular(), g.n_radial());
        let (f, gg) = (vec![0.0; nrad], vec![0.0; nrad]);
        let (mut f, mut gg) = (f, gg);
        for idx in 0..g.cell_count() {
            let (j, i) = (idx / na, idx % na);
            let (cs, sn) = (g.cos[i], g.sin[i]);
            let (wx, wy) = (w.x()[idx], w.y()[idx]);
            f[j] += (wx * cs + wy * sn) * self.ar[i];
            gg[j] += (-wx * sn + wy * cs) * self.at[i];
        }
        let mut out = Vec::with_capacity(self.dim());
        if self.has_f {
            out.extend(f.iter().map(|v| v / self.nr));
        }
        if self.has_g {
            out.extend(gg.iter().map(|v| v / self.nt));
        }
        out
    }

    /// Diagonal of the L² Gram matrix in these coordinates.
    pub fn weights(&self) -> Vec<f64> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(self.dim());
        if self.has_f {
            out.extend(g.wc.iter().map(|w| w * self.nr));
        }
        if self.has_g {
            out.extend(g.wc.iter().map(|w| w * self.nt));
        }
        out
    }

    /// Matrix of `op` restricted to the subspace.
    pub fn block(&self, op: impl Fn(&VectorField) -> VectorField + Sync) -> DMatrix<f64> {
        let d = self.dim();
        let cols: Vec<Vec<f64>> = (0..d)
            .into_par_iter()
            .map(|k| {
                let mut e = vec![0.0; d];
                e[k] = 1.0;
                self.coordinates(&op(&self.field(&e)))
            })
            .collect();
        DMatrix::from_fn(d, d, |i, j| cols[j][i])
    }
}

/// One eigenvalue of a mode block.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModeEigen {
    pub mode: usize,
    pub parity: Parity,
    pub re: f64,
    pub im: f64,
    /// `‖Av − λv‖ / ‖v‖` in the L² norm.
    pub residual: f64,
    /// 2 where the odd copy is not computed.
    pub multiplicity: usize,
}

impl ModeEigen {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

fn sqrt_weights(w: &[f64]) -> (DVector<f64>, DVector<f64>) {
    let s = DVector::from_iterator(w.len(), w.iter().map(|v| v.sqrt()));
    let inv = s.map(|v| 1.0 / v);
    (s, inv)
}

fn complex_spectrum(b: &DMatrix<f64>, w: &[f64], basis: &ModeBasis) -> Result<Vec<ModeEigen>> {
    // Similarity W^{1/2} B W^{-1/2} keeps eigenvalues and makes the residual an L² one.
    let (s, inv) = sqrt_weights(w);
    let bs = DMatrix::from_fn(b.nrows(), b.ncols(), |i, j| s[i] * b[(i, j)] * inv[j]);
    let bc = bs.map(|v| Complex64::new(v, 0.0));
    let vals = bs.complex_eigenvalues();
    let mult = if basis.m == 0 || basis.is_nyquist() { 1 } else { 2 };
    let mut out = Vec::with_capacity(vals.len());
    for &lam in vals.iter() {
        let v = linalg::inverse_iteration(&bc, lam)?;
        let r = (&bc * &v - &v * lam).norm() / v.norm();
        out.push(ModeEigen {
            mode: basis.m,
            parity: basis.parity,
            re: lam.re,
            im: lam.im,
            residual: r,
            multiplicity: mult,
        });
    }
    Ok(out)
}

fn mode_subspaces(grid: &Arc<Grid>, max_mode: usize) -> Result<Vec<ModeBasis>> {
    let mut out = vec![ModeBasis::new(grid, 0, Parity::Even)?, ModeBasis::new(grid, 0, Parity::Odd)?];
    for m in 1..=max_mode.min(grid.n_angular() / 2) {
        out.push(ModeBasis::new(grid, m, Parity::Even)?);
        if 2 * m == grid.n_angular() {
            out.push(ModeBasis::new(grid, m, Parity::Odd)?);
        }
    }
    Ok(out)
}

/// All eigenvalues of `A` on angular modes `0..=max_mode`, per mode.
#[allow(non_snake_case)]
pub fn eigen_A_modes(grid: &Arc<Grid>, max_mode: usize) -> Result<Vec<ModeEigen>> {
    let mut out = Vec::new();
    for basis in mode_subspaces(grid, max_mode)? {
        let b = basis.block(apply_A);
        out.extend(complex_spectrum(&b, &basis.weights(), &basis)?);
    }
    Ok(out)
}

/// Eigenvalues of smallest modulus, repeated by multiplicity.
#[allow(non_snake_case)]
pub fn eigen_A(grid: &Arc<Grid>, count: usize, max_mode: usize) -> Result<Vec<ModeEigen>> {
    if !grid.is_disk() {
        return Ok(torus_spectrum(grid, max_mode)?.into_iter().take(count).collect());
    }
    let mut all = eigen_A_modes(grid, max_mode)?;
    all.sort_by(|a, b| a.value().norm().total_cmp(&b.value().norm()));
    let mut out = Vec::with_capacity(count);
    for e in all {
        for _ in 0..e.multiplicity {
            if out.len() < count {
                out.push(e);
            }
        }
    }
    Ok(out)
}

/// On the torus `A` is diagonal in Fourier space; each wavevector gives a
/// 2×2 block on `cos(k·x) e_c`.
fn torus_spectrum(grid: &Arc<Grid>, max_mode: usize) -> Result<Vec<ModeEigen>> {
    let k0 = 2.0 * std::f64::consts::PI / grid.length();
    let kmax = max_mode.min(grid.n_angular().min(grid.n_radial()) / 2 - 1) as i64;
    let mut out = Vec::new();
    for a in 0..=kmax {
        for b in -kmax..=kmax {
            if a == 0 && b <= 0 {
                continue;
            }
            let (kx, ky) = (a as f64 * k0, b as f64 * k0);
            let phi = |x: f64, y: f64| (kx * x + ky * y).cos();
            let e = [
                VectorField::from_fn(grid, Trace::Free, |x, y| (phi(x, y), 0.0)),
                VectorField::from_fn(grid, Trace::Free, |x, y| (0.0, phi(x, y))),
            ];
            let norm = l2_inner_vec(&e[0], &e[0])?;
            let mut m = DMatrix::<f64>::zeros(2, 2);
            for j in 0..2 {
                let w = apply_A(&e[j]);
                for i in 0..2 {
                    m[(i, j)] = l2_inner_vec(&e[i], &w)? / norm;
                }
            }
            for lam in m.complex_eigenvalues().iter() {
                out.push(ModeEigen {
                    mode: (a.unsigned_abs()).max(b.unsigned_abs()) as usize,
                    parity: Parity::Even,
                    re: lam.re,
                    im: lam.im,
                    residual: 0.0,
                    multiplicity: 2,
                });
            }
        }
    }
    out.sort_by(|a, b| a.re.total_cmp(&b.re));
    let mut expanded = Vec::new();
    for e in out {
        expanded.push(e);
        expanded.push(e);
    }
    Ok(expanded)
}

/// Stokes and Neumann branches on one mode subspace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeReference {
    pub mode: usize,
    pub parity: Parity,
    pub stokes: Vec<f64>,
    pub neumann: Vec<f64>,
}

/// `σ(A_S)`: `−Δ` restricted to the range of the discrete Leray projection.
fn stokes_branch(basis: &ModeBasis) -> Result<Vec<f64>> {
    let w = basis.weights();
    let (s, inv) = sqrt_weights(&w);
    let sym = |b: DMatrix<f64>| DMatrix::from_fn(b.nrows(), b.ncols(), |i, j| s[i] * b[(i, j)] * inv[j]);
    let p = sym(basis.block(operators::project));
    let p = (&p + p.transpose()) * 0.5;
    let eig = p.symmetric_eigen();
    let keep: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    if keep.is_empty() {
        return Ok(Vec::new());
    }
    let v = eig.eigenvectors.select_columns(&keep);
    let lap = sym(basis.block(|u| vector_laplacian(u).scale(-1.0)));
    let t = v.transpose() * lap * &v;
    let mut vals: Vec<f64> = t.complex_eigenvalues().iter().map(|c| c.re).collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// `σ(−Δ_N) \ {0}` from the face stiffness matrix of mode `m`.
pub fn neumann_branch(grid: &Arc<Grid>, m: usize) -> Result<Vec<f64>> {
    let (diag, off) = disk::stiffness(grid, m);
    let start = if m == 0 { 0 } else { 1 };
    let n = diag.len() - start;
    let k = DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (i + start, j + start);
        if a == b {
            diag[a]
        } else if a + 1 == b {
            off[a]
        } else if b + 1 == a {
            off[b]
        } else {
            0.0
        }
    });
    let wf = DMatrix::from_diagonal(&DVector::from_iterator(n, grid.wf[start..].iter().copied()));
    let (vals, _) = linalg::generalized_symmetric(&k, &wf)?;
    Ok(vals.into_iter().filter(|v| v.abs() > 1e-8).collect())
}

/// `(σ(A_S), σ(−Δ_N)\{0})` per mode on the same grid.
pub fn eigen_reference(grid: &Arc<Grid>, max_mode: usize) -> Result<Vec<ModeReference>> {
    mode_subspaces(grid, max_mode)?
        .into_iter()
        .map(|basis| {
            let stokes = stokes_branch(&basis)?;
            // Gradients of q(r) cos mθ live in the even subspace, and of
            // q(r) sin mθ in the odd one; the radial mode has no odd partner.
            let neumann =
                if basis.m == 0 && basis.parity == Parity::Odd { Vec::new() } else { neumann_branch(grid, basis.m)? };
            Ok(ModeReference { mode: basis.m, parity: basis.parity, stokes, neumann })
        })
        .collect()
}

/// One row of the spectrum CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub index: usize,
    pub mode: usize,
    pub re: f64,
    pub im: f64,
    pub residual: f64,
    pub branch: Branch,
    pub reference: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub n_angular: usize,
    pub n_radial: usize,
    pub entries: Vec<SpectrumEntry>,
    /// Reference values `≤` the largest listed eigenvalue, each with the
    /// relative distance to the nearest computed eigenvalue.
    pub reverse_max_rel_err: f64,
    pub smallest_neumann: f64,
    pub max_rel_err: f64,
    pub max_imag_ratio: f64,
    pub max_residual: f64,
}

pub const SPECTRUM_HEADER: &str = "index,re_lambda,im_lambda,branch_guess,ref_match,rel_err";

impl SpectrumReport {
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        use crate::io::fmt17;
        writeln!(w, "{SPECTRUM_HEADER}")?;
        for e in &self.entries {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                e.index,
                fmt17(e.re),
                fmt17(e.im),
                e.branch.as_str(),
                fmt17(e.reference),
                fmt17(e.rel_err)
            )?;
        }
        Ok(())
    }
}

/// The `count` smallest eigenvalues of `A`, each matched to the nearest value
/// of the Stokes or Neumann branch on the same mode subspace.
pub fn spectrum_report(grid: &Arc<Grid>, count: usize, max_mode: usize) -> Result<SpectrumReport> {
    if !grid.is_disk() {
        let eig = eigen_A(grid, count, max_mode)?;
        let entries = eig
            .iter()
            .enumerate()
            .map(|(i, e)| SpectrumEntry {
                index: i,
                mode: e.mode,
                re: e.re,
                im: e.im,
                residual: e.residual,
                branch: Branch::Stokes,
                reference: e.re,
                rel_err: 0.0,
            })
            .collect();
        return Ok(SpectrumReport {
            n_angular: grid.n_angular(),
            n_radial: grid.n_radial(),
            entries,
            reverse_max_rel_err: 0.0,
            smallest_neumann: f64::NAN,
            max_rel_err: 0.0,
            max_imag_ratio: eig.iter().map(|e| e.im.abs() / e.re.abs().max(1e-300)).fold(0.0, f64::max),
            max_residual: 0.0,
        });
    }
    let refs = eigen_reference(grid, max_mode)?;
    let per_mode: Vec<Vec<ModeEigen>> = mode_subspaces(grid, max_mode)?
        .into_par_iter()
        .map(|basis| {
            let b = basis.block(apply_A);
            complex_spectrum(&b, &basis.weights(), &basis)
        })
        .collect::<Result<_>>()?;
    let mut all: Vec<(ModeEigen, usize)> =
        per_mode.into_iter().enumerate().flat_map(|(k, v)| v.into_iter().map(move |e| (e, k))).collect();
    all.sort_by(|a, b| a.0.value().norm().total_cmp(&b.0.value().norm()));
    let mut entries = Vec::new();
    let mut used = Vec::new();
    'outer: for (e, k) in &all {
        let r = &refs[*k];
        let cands =
            r.stokes.iter().map(|v| (*v, Branch::Stokes)).chain(r.neumann.iter().map(|v| (*v, Branch::Neumann)));
        let (reference, branch) = cands
            .min_by(|a, b| (a.0 - e.re).abs().total_cmp(&(b.0 - e.re).abs()))
            .ok_or_else(|| Error::Solver(format!("no reference values for mode {}", e.mode)))?;
        let rel_err = (e.value() - reference).norm() / reference.abs();
        used.push((*k, e.re));
        for _ in 0..e.multiplicity {
            if entries.len() == count {
                break 'outer;
            }
            entries.push(SpectrumEntry {
                index: entries.len(),
                mode: e.mode,
                re: e.re,
                im: e.im,
                residual: e.residual,
                branch,
                reference,
                rel_err,
            });
        }
    }
    let top = entries.last().map(|e| e.re).unwrap_or(0.0);
    // Every reference value below the cut-off should be hit by some eigenvalue.
    let mut reverse: f64 = 0.0;
    for (k, r) in refs.iter().enumerate() {
        for v in r.stokes.iter().chain(&r.neumann).filter(|v| **v < top * 0.99) {
            let near = all
                .iter()
                .filter(|(_, kk)| *kk == k)
                .map(|(e, _)| (e.value() - *v).norm() / v.abs())
                .fold(f64::INFINITY, f64::min);
            reverse = reverse.max(near);
        }
    }
    let smallest_neumann = refs.iter().flat_map(|r| r.neumann.iter().copied()).fold(f64::INFINITY, f64::min);
    Ok(SpectrumReport {
        n_angular: grid.n_angular(),
        n_radial: grid.n_radial(),
        max_rel_err: entries.iter().map(|e| e.rel_err).fold(0.0, f64::max),
        max_imag_ratio: entries.iter().map(|e| e.im.abs() / e.re.abs()).fold(0.0, f64::max),
        max_residual: entries.iter().map(|e| e.residual).fold(0.0, f64::max),
        entries,
        reverse_max_rel_err: reverse,
        smallest_neumann,
    })
}

/// Dense matrix of a linear vector operator in the packed `(x, y)` layout.
/// Only meant for toy grids.
pub fn assemble_dense(grid: &Arc<Grid>, op: impl Fn(&VectorField) -> VectorField + Sync) -> Result<DMatrix<f64>> {
    let n = grid.cell_count();
    if 2 * n > 4096 {
        return Err(Error::Parameter(format!("dense assembly limited to 4096 unknowns, grid has {}", 2 * n)));
    }
    let trace = if grid.is_disk() { Trace::Zero } else { Trace::Free };
    let cols: Vec<Vec<f64>> = (0..2 * n)
        .into_par_iter()
        .map(|k| {
            let mut v = vec![0.0; 2 * n];
            v[k] = 1.0;
            let u = unpack(grid, &v, trace);
            pack(&op(&u))
        })
        .collect();
    Ok(DMatrix::from_fn(2 * n, 2 * n, |i, j| cols[j][i]))
}

/// `A = −L + G(Q L − D)` multiplied out from dense matrices of the vector
/// Laplacian `L`, the face gradient `G`, the divergence `D` and the potential
/// map `Q`, each assembled on its own.
pub fn assemble_dense_composed(grid: &Arc<Grid>) -> Result<DMatrix<f64>> {
    let l = assemble_dense(grid, vector_laplacian)?;
    let nv = 2 * grid.cell_count();
    let loc = if grid.is_disk() { crate::fields::Location::Face } else { crate::fields::Location::Cell };
    let ns = grid.count(loc);
    let trace = if grid.is_disk() { Trace::Zero } else { Trace::Free };
    let to_scalar = |op: fn(&VectorField) -> ScalarField| -> DMatrix<f64> {
        let cols: Vec<Vec<f64>> = (0..nv)
            .into_par_iter()
            .map(|k| {
                let mut v = vec![0.0; nv];
                v[k] = 1.0;
                op(&unpack(grid, &v, trace)).into_values()
            })
            .collect();
        DMatrix::from_fn(ns, nv, |i, j| cols[j][i])
    };
    let d = to_scalar(crate::fields::divergence);
    let q = to_scalar(gradient_potential);
    let gcols: Vec<Vec<f64>> = (0..ns)
        .into_par_iter()
        .map(|k| {
            let mut v = vec![0.0; ns];
            v[k] = 1.0;
            let s = ScalarField::from_values(grid, loc, v).map(|s| pack(&gradient(&s)));
            s.unwrap_or_default()
        })
        .collect();
    let gm = DMatrix::from_fn(nv, ns, |i, j| gcols[j][i]);
    Ok(&gm * (&q * &l - d) - l)
}

pub fn pack(u: &VectorField) -> Vec<f64> {
    u.x().iter().chain(u.y()).copied().collect()
}

pub fn unpack(grid: &Arc<Grid>, v: &[f64], trace: Trace) -> VectorField {
    let n = grid.cell_count();
    VectorField::raw(grid, v[..n].to_vec(), v[n..].to_vec(), trace)
}

/// Eigenvalues of a dense matrix ordered by modulus.
pub fn dense_eigenvalues(a: &DMatrix<f64>) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = a.complex_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    v
}

/// Converged Ritz value of the shift-invert iteration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RitzValue {
    pub re: f64,
    pub im: f64,
    /// Residual estimate of the inverted problem, relative to `|μ|`.
    pub residual: f64,
}

/// Smallest-modulus eigenvalues of `A` from Arnoldi on `A⁻¹`, each inverse
/// applied by preconditioned GMRES. Returns Ritz values whose relative
/// residual is below `tol`, ordered by modulus.
#[allow(non_snake_case)]
pub fn eigen_A_iterative(grid: &Arc<Grid>, steps: usize, tol: f64, seed: u64) -> Result<Vec<RitzValue>> {
    let start = pack(&operators::random_field(grid, RandomFieldSpec::default(), seed));
    let trace = if grid.is_disk() { Trace::Zero } else { Trace::Free };
    let apply = |v: &[f64]| -> Result<Vec<f64>> { Ok(pack(&operators::solve_A(&unpack(grid, v, trace), 1e-12)?)) };
    let ar = linalg::arnoldi(apply, &start, steps)?;
    let mut out: Vec<RitzValue> = ar
        .ritz
        .iter()
        .zip(&ar.residual)
        .filter(|(mu, r)| mu.norm() > 0.0 && **r / mu.norm() < tol)
        .map(|(mu, r)| {
            let lam = Complex64::new(1.0, 0.0) / mu;
            RitzValue { re: lam.re, im: lam.im, residual: r / mu.norm() }
        })
        .collect();
    if out.is_empty() {
        return Err(Error::Solver(format!("no Ritz value converged to {tol:e} after {steps} Arnoldi steps")));
    }
    out.sort_by(|a, b| a.re.hypot(a.im).total_cmp(&b.re.hypot(b.im)));
    Ok(out)
}

/// Vector fields spanning the fit space: on the disk `(1 − r²) r^{m+2k}`
/// times `cos mθ` or `sin mθ` in either Cartesian component, the span of
/// [`operators::random_field`]; on the torus mean-zero trigonometric modes.
#[derive(Debug, Clone)]
pub struct GalerkinBasis {
    pub fields: Vec<VectorField>,
}

impl GalerkinBasis {
    pub fn new(grid: &Arc<Grid>, spec: RandomFieldSpec) -> Self {
        let mut fields = Vec::new();
        if grid.is_disk() {
            let r0 = grid.length();
            for m in 0..=spec.max_mode {
                for k in 0..=spec.max_degree {
                    for s in 0..2 {
                        if m == 0 && s == 1 {
                            continue;
                        }
                        let ang = move |th: f64| if s == 0 { (m as f64 * th).cos() } else { (m as f64 * th).sin() };
                        let prof = move |x: f64, y: f64| {
                            let r = x.hypot(y) / r0;
                            (1.0 - r * r) * r.powi((m + 2 * k) as i32) * ang(y.atan2(x))
                        };
                        fields.push(VectorField::from_fn(grid, Trace::Zero, move |x, y| (prof(x, y), 0.0)));
                        fields.push(VectorField::from_fn(grid, Trace::Zero, move |x, y| (0.0, prof(x, y))));
                    }
                }
            }
        } else {
            let k0 = 2.0 * std::f64::consts::PI / grid.length();
            let kmax = spec.max_mode as i64;
            for a in -kmax..=kmax {
                for b in -kmax..=kmax {
                    if a == 0 && b == 0 {
                        continue;
                    }
                    let (kx, ky) = (a as f64 * k0, b as f64 * k0);
                    fields.push(VectorField::from_fn(grid, Trace::Free, move |x, y| ((kx * x + ky * y).cos(), 0.0)));
                    fields.push(VectorField::from_fn(grid, Trace::Free, move |x, y| (0.0, (kx * x + ky * y).cos())));
                }
            }
        }
        Self { fields }
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn combine(&self, c: &[f64]) -> VectorField {
        let mut u = self.fields[0].scale(c[0]);
        for (f, a) in self.fields.iter().zip(c).skip(1) {
            u = u.axpy(*a, f).expect("basis on one grid");
        }
        u
    }
}

/// Gram and form matrices of a basis.
#[derive(Debug, Clone)]
pub struct FormMatrices {
    pub mass: DMatrix<f64>,
    pub h1: DMatrix<f64>,
    pub lap: DMatrix<f64>,
    pub gradq: DMatrix<f64>,
    pub qq: DMatrix<f64>,
    pub lapq: DMatrix<f64>,
    /// `⟨b_i, A b_j⟩`.
    pub a: DMatrix<f64>,
    /// `−⟨Δb_i, A b_j⟩`.
    pub lap_a: DMatrix<f64>,
    /// `⟨Q(b_i), Q(A b_j)⟩`.
    pub q_a: DMatrix<f64>,
}

struct Images {
    b: VectorField,
    ab: VectorField,
    lap: VectorField,
    q: ScalarField,
    gq: VectorField,
    lq: ScalarField,
    qa: ScalarField,
}

impl FormMatrices {
    pub fn new(basis: &GalerkinBasis) -> Result<Self> {
        let imgs: Vec<Images> = basis
            .fields
            .par_iter()
            .map(|b| {
                let ab = apply_A(b);
                let q = gradient_potential(b);
                Images {
                    b: b.clone(),
                    lap: vector_laplacian(b),
                    gq: gradient(&q),
                    lq: potential_laplacian(&q),
                    qa: gradient_potential(&ab),
                    ab,
                    q,
                }
            })
            .collect();
        let n = imgs.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        let vals: Vec<[f64; 9]> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let (a, b) = (&imgs[i], &imgs[j]);
                Ok([
                    l2_inner_vec(&a.b, &b.b)?,
                    h1_inner(&a.b, &b.b)?,
                    l2_inner_vec(&a.lap, &b.lap)?,
                    l2_inner_vec(&a.gq, &b.gq)?,
                    l2_inner(&a.q, &b.q)?,
                    l2_inner(&a.lq, &b.lq)?,
                    l2_inner_vec(&a.b, &b.ab)?,
                    -l2_inner_vec(&a.lap, &b.ab)?,
                    l2_inner(&a.q, &b.qa)?,
                ])
            })
            .collect::<Result<_>>()?;
        let mat = |k: usize| DMatrix::from_fn(n, n, |i, j| vals[i * n + j][k]);
        Ok(Self {
            mass: mat(0),
            h1: mat(1),
            lap: mat(2),
            gradq: mat(3),
            qq: mat(4),
            lapq: mat(5),
            a: mat(6),
            lap_a: mat(7),
            q_a: mat(8),
        })
    }
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue and eigenvector of a symmetric pencil, after removing
/// directions the metric cannot see (near-dependent basis vectors).
fn min_pencil(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let eb = sym(b).symmetric_eigen();
    let top = eb.eigenvalues.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..eb.eigenvalues.len()).filter(|&i| eb.eigenvalues[i] > 1e-11 * top).collect();
    if keep.is_empty() {
        return Err(Error::Solver("degenerate Galerkin metric".into()));
    }
    let t =
        DMatrix::from_fn(b.nrows(), keep.len(), |i, k| eb.eigenvectors[(i, keep[k])] / eb.eigenvalues[keep[k]].sqrt());
    let c = sym(&(t.transpose() * sym(a) * &t));
    let e = c.symmetric_eigen();
    let (i, v) =
        e.eigenvalues.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, v)| if *v < acc.1 { (i, *v) } else { acc });
    Ok((v, &t * e.eigenvectors.column(i)))
}

#[derive(Debug, Clone, Serialize)]
pub struct NegativityFit {
    /// `min ⟨u, Au⟩ / ‖u‖²` over the basis.
    pub min_quotient: f64,
    pub basis_size: usize,
    #[serde(skip)]
    pub minimizer: VectorField,
}

/// Most negative Rayleigh quotient of the L²-symmetrised `A` over the basis.
pub fn fit_negativity(grid: &Arc<Grid>, spec: RandomFieldSpec) -> Result<NegativityFit> {
    let basis = GalerkinBasis::new(grid, spec);
    let m = FormMatrices::new(&basis)?;
    negativity_of(&basis, &m)
}

/// [`fit_negativity`] on matrices that are already assembled.
pub fn negativity_of(basis: &GalerkinBasis, m: &FormMatrices) -> Result<NegativityFit> {
    let (q, c) = min_pencil(&m.a, &m.mass)?;
    Ok(NegativityFit { min_quotient: q, basis_size: basis.len(), minimizer: basis.combine(c.as_slice()) })
}

/// One evaluation of the bisection.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CoercivityProbe {
    pub c: f64,
    pub min_quotient: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoercivityFit {
    pub epsilon: f64,
    /// Smallest passing `C_ε` on the doubling schedule.
    pub c_eps: f64,
    /// `1 / min quotient` at `c_eps`.
    pub c: f64,
    pub min_quotient: f64,
    pub basis_size: usize,
    pub history: Vec<CoercivityProbe>,
}

/// Schedule and acceptance bound for [`fit_coercivity`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoercivitySearch {
    pub c_min: f64,
    pub doublings: usize,
    pub c_max: f64,
}

impl Default for CoercivitySearch {
    fn default() -> Self {
        Self { c_min: 0.125, doublings: 24, c_max: 100.0 }
    }
}

/// Rayleigh quotient of `⟨u, Au⟩_{ε,C}` against `‖∇u‖² + ε‖Δu‖² + C‖∇Q(u)‖²`.
pub fn coercivity_quotient(m: &FormMatrices, eps: f64, c: f64) -> Result<f64> {
    let a = &m.a + &m.lap_a * eps + &m.q_a * c;
    let b = &m.h1 + &m.lap * eps + &m.gradq * c;
    Ok(min_pencil(&a, &b)?.0)
}

/// Fits `(C_ε, c)` in `⟨u, Au⟩_ε ≥ c⁻¹ (‖∇u‖² + ε‖Δu‖² + C_ε‖∇Q(u)‖²)`.
/// `C = 0` is tried first, then `c_min · 2^k`.
pub fn fit_coercivity(m: &FormMatrices, eps: f64, search: &CoercivitySearch) -> Result<CoercivityFit> {
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("epsilon must be positive, got {eps}")));
    }
    let floor = 1.0 / search.c_max;
    let mut history = Vec::new();
    let schedule = std::iter::once(0.0).chain((0..=search.doublings).map(|k| search.c_min * 2f64.powi(k as i32)));
    for c in schedule {
        let q = coercivity_quotient(m, eps, c)?;
        history.push(CoercivityProbe { c, min_quotient: q });
        if q >= floor {
            return Ok(CoercivityFit {
                epsilon: eps,
                c_eps: c,
                c: 1.0 / q,
                min_quotient: q,
                basis_size: m.mass.nrows(),
                history,
            });
        }
    }
    let best = history.iter().max_by(|a, b| a.min_quotient.total_cmp(&b.min_quotient)).copied();
    Err(Error::SearchExhausted(match best {
        Some(b) => format!(
            "no C up to {:.3e} gives quotient >= {floor:.3e} at eps = {eps}; best {:.4e} at C = {}",
            history.last().map_or(0.0, |p| p.c),
            b.min_quotient,
            b.c
        ),
        None => "empty schedule".into(),
    }))
}

/// `⟨u, B_α u⟩_ε` against its expansion over random fields, and the
/// coercivity quotient of `B_α` next to that of `A`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BIdentityReport {
    pub epsilon: f64,
    pub c: f64,
    pub alphas: Vec<f64>,
    pub max_residual: f64,
    pub quotient_a: f64,
    pub quotient_b: Vec<f64>,
}

pub fn fit_b_coercivity(
    grid: &Arc<Grid>,
    m: &FormMatrices,
    p: AdjustedIPParams,
    alphas: &[f64],
    n_fields: usize,
    seed: u64,
) -> Result<BIdentityReport> {
    if alphas.iter().any(|a| !(*a >= 0.0)) {
        return Err(Error::Parameter("damping rates must be non-negative".into()));
    }
    let residuals: Vec<f64> = (0..n_fields)
        .into_par_iter()
        .map(|i| {
            let u = operators::random_field(grid, RandomFieldSpec::default(), seed.wrapping_add(i as u64));
            let mut worst: f64 = 0.0;
            for &a in alphas {
                let lhs = operators::adjusted_form_b(&u, a, p)?;
                let rhs = operators::b_identity_rhs(&u, a, p)?;
                worst = worst.max((lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE));
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    let quotient_a = coercivity_quotient(m, p.epsilon, p.c)?;
    let damp = &m.gradq + &m.qq * p.c + &m.lapq * p.epsilon;
    let norm = &m.h1 + &m.lap * p.epsilon + &m.gradq * p.c;
    let mut quotient_b = Vec::with_capacity(alphas.len());
    for &a in alphas {
        let form = &m.a + &m.lap_a * p.epsilon + &m.q_a * p.c + &damp * a;
        quotient_b.push(min_pencil(&form, &norm)?.0);
    }
    Ok(BIdentityReport {
        epsilon: p.epsilon,
        c: p.c,
        alphas: alphas.to_vec(),
        max_residual: residuals.into_iter().fold(0.0, f64::max),
        quotient_a,
        quotient_b,
    })
}

/// Checks that `u` is a field of the fit space by reconstructing it from the
/// basis in the L² sense; returns the relative residual.
pub fn basis_residual(basis: &GalerkinBasis, m: &FormMatrices, u: &VectorField) -> Result<f64> {
    let rhs = DVector::from_iterator(basis.len(), basis.fields.iter().map(|b| l2_inner_vec(b, u).unwrap_or(f64::NAN)));
    let c = m.mass.clone().svd(true, true).solve(&rhs, 1e-13).map_err(|e| Error::Solver(e.to_string()))?;
    let v = basis.combine(c.as_slice());
    let d = v.axpy(-1.0, u)?;
    Ok(l2_inner_vec(&d, &d)?.sqrt() / l2_inner_vec(u, u)?.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::l2_norm_vec;

    #[test]
    fn mode_blocks_reproduce_the_dense_spectrum() {
        let g = Grid::disk(1.0, 16, 8).unwrap();
        let dense = dense_eigenvalues(&assemble_dense(&g, apply_A).unwrap());
        let mut blocks = Vec::new();
        for e in eigen_A_modes(&g, 8).unwrap() {
            for _ in 0..e.multiplicity {
                blocks.push(e.value());
            }
        }
        blocks.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        assert_eq!(blocks.len(), dense.len());
        for (a, b) in blocks.iter().zip(&dense) {
            assert!((a - b).norm() < 1e-8 * b.norm(), "{a} vs {b}");
        }
    }

    #[test]
    fn mode_basis_round_trips_and_is_invariant() {
        let g = Grid::disk(1.0, 32, 12).unwrap();
        for (m, p) in [(0, Parity::Even), (0, Parity::Odd), (3, Parity::Even), (16, Parity::Odd)] {
            let b = ModeBasis::new(&g, m, p).unwrap();
            let c: Vec<f64> = (0..b.dim()).map(|i| (i as f64 * 0.37).sin()).collect();
            let back = b.coordinates(&b.field(&c));
            assert!(c.iter().zip(&back).all(|(x, y)| (x - y).abs() < 1e-12));
            let au = apply_A(&b.field(&c));
            let leak = au.axpy(-1.0, &b.field(&b.coordinates(&au))).unwrap();
            assert!(l2_norm_vec(&leak) < 1e-10 * l2_norm_vec(&au));
        }
        assert!(ModeBasis::new(&g, 17, Parity::Even).is_err());
    }

    #[test]
    fn smallest_eigenvalues_split_into_stokes_and_neumann() {
        let g = Grid::disk(1.0, 64, 32).unwrap();
        let rep = spectrum_report(&g, 15, 8).unwrap();
        assert_eq!(rep.entries.len(), 15);
        assert!(rep.max_rel_err < 1e-8 && rep.reverse_max_rel_err < 1e-8, "{rep:?}");
        assert!(rep.max_imag_ratio < 1e-6 && rep.max_residual < 1e-6);
        assert!((rep.smallest_neumann - 3.3900).abs() < 0.01 * 3.39);
        assert!(rep.entries.iter().any(|e| e.branch == Branch::Stokes));
        assert!(rep.entries[0].re > 1.0, "zero must not be an eigenvalue");
        let mut csv = Vec::new();
        rep.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().next(), Some(SPECTRUM_HEADER));
        assert_eq!(text.lines().count(), 16);
    }

    #[test]
    fn torus_spectrum_is_the_laplacian() {
        let g = Grid::torus(2.0 * std::f64::consts::PI, 16, 16).unwrap();
        let eig = eigen_A(&g, 12, 3).unwrap();
        assert!(eig[..4].iter().all(|e| (e.re - 1.0).abs() < 1e-10 && e.im.abs() < 1e-12));
        assert!(eig[8..12].iter().all(|e| (e.re - 2.0).abs() < 1e-10));
    }

    #[test]
    fn negativity_on_the_disk_but_not_on_the_torus() {
        let disk = Grid::disk(1.0, 64, 32).unwrap();
        let fit = fit_negativity(&disk, RandomFieldSpec::default()).unwrap();
        assert!(fit.min_quotient < 0.0);
        let u = &fit.minimizer;
        let q = l2_inner_vec(u, &apply_A(u)).unwrap() / l2_inner_vec(u, u).unwrap();
        assert!((q - fit.min_quotient).abs() < 1e-6 * fit.min_quotient.abs());
        let torus = Grid::torus(4.0, 32, 32).unwrap();
        let fit = fit_negativity(&torus, RandomFieldSpec { max_mode: 2, max_degree: 0 }).unwrap();
        let k0 = 2.0 * std::f64::consts::PI / 4.0;
        assert!((fit.min_quotient - k0 * k0).abs() < 1e-8);
    }

    #[test]
    fn coercivity_fit_passes_random_fields_and_reports_exhaustion() {
        let g = Grid::disk(1.0, 64, 32).unwrap();
        let spec = RandomFieldSpec { max_mode: 3, max_degree: 2 };
        let m = FormMatrices::new(&GalerkinBasis::new(&g, spec)).unwrap();
        let eps = 0.05;
        let fit = fit_coercivity(&m, eps, &CoercivitySearch::default()).unwrap();
        assert!(fit.c > 0.0 && fit.c <= 100.0);
        let p = AdjustedIPParams { epsilon: eps, c: fit.c_eps };
        for seed in 0..10 {
            let u = operators::random_field(&g, spec, seed);
            let lhs = operators::adjusted_form_a(&u, p).unwrap();
            let gq = l2_norm_vec(&gradient(&gradient_potential(&u))).powi(2);
            let rhs =
                (crate::fields::h1_semi_sq(&u) + eps * crate::fields::lap_norm(&u).powi(2) + fit.c_eps * gq) / fit.c;
            assert!(lhs >= rhs * (1.0 - 1e-9), "seed {seed}: {lhs} < {rhs}");
        }
        let strict = CoercivitySearch { c_max: 0.5, doublings: 4, ..CoercivitySearch::default() };
        match fit_coercivity(&m, eps, &strict) {
            Err(Error::SearchExhausted(msg)) => assert!(msg.contains("best")),
            other => panic!("expected exhaustion, got {other:?}"),
        }
        assert!(fit_coercivity(&m, 0.0, &CoercivitySearch::default()).is_err());
    }

    #[test]
    fn damping_never_hurts_coercivity() {
        let g = Grid::disk(1.0, 32, 16).unwrap();
        let spec = RandomFieldSpec { max_mode: 2, max_degree: 2 };
        let m = FormMatrices::new(&GalerkinBasis::new(&g, spec)).unwrap();
        let p = AdjustedIPParams { epsilon: 0.05, c: 1.0 };
        let rep = fit_b_coercivity(&g, &m, p, &[0.0, 1.0, 10.0, 100.0], 8, 5).unwrap();
        assert!(rep.max_residual < 1e-7, "{rep:?}");
        assert!((rep.quotient_b[0] - rep.quotient_a).abs() < 1e-10 * rep.quotient_a.abs());
        assert!(rep.quotient_b.iter().all(|q| *q >= rep.quotient_a - 1e-10));
        assert!(fit_b_coercivity(&g, &m, p, &[-1.0], 1, 0).is_err());
    }

    #[test]
    fn dense_assembly_is_guarded_and_matches_the_operator() {
        let big = Grid::disk(1.0, 64, 64).unwrap();
        assert!(assemble_dense(&big, apply_A).is_err());
        let g = Grid::disk(1.0, 16, 8).unwrap();
        let a = assemble_dense(&g, apply_A).unwrap();
        let u = operators::random_field(&g, RandomFieldSpec::default(), 9);
        let x = DVector::from_vec(pack(&u));
        let y = pack(&apply_A(&u));
        let ay = &a * x;
        let err = ay.iter().zip(&y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        assert!(err < 1e-10 * ay.norm());
        let c = assemble_dense_composed(&g).unwrap();
        assert!((&c - &a).norm() < 1e-10 * a.norm(), "{:e}", (&c - &a).norm() / a.norm());
    }

    #[test]
    fn shift_invert_arnoldi_finds_the_smallest_eigenvalues() {
        let g = Grid::disk(1.0, 16, 8).unwrap();
        let dense = dense_eigenvalues(&assemble_dense(&g, apply_A).unwrap());
        let ritz = eigen_A_iterative(&g, 40, 1e-10, 2).unwrap();
        for r in ritz.iter().take(4) {
            let lam = Complex64::new(r.re, r.im);
            let near = dense.iter().map(|d| (d - lam).norm() / d.norm()).fold(f64::INFINITY, f64::min);
            assert!(near < 1e-8, "{lam}: {near:e}");
        }
        assert!((ritz[0].re - dense[0].re).abs() < 1e-8 * dense[0].re);
    }
}
