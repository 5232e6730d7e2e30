//! Per-Fourier-mode radial kernels on the disk.
//!
//! Spectra are stored row-major, one row of `n_angular` coefficients per
//! radius. Cell rows are indexed `j = 0..n`, face rows `v = 0..=n`. For every
//! angular mode the radial operators are at most tridiagonal, so each solve is
//! a handful of Thomas sweeps.

use num_complex::Complex64 as C;

use super::{Grid, Trace};

const ZERO: C = C::new(0.0, 0.0);

/// Derivative factor and squared wavenumber of bin `k`.
///
/// The Nyquist bin cannot carry a first derivative on the nodes, but its
/// second derivative is well defined.
#[inline]
pub(crate) fn wavenumber(g: &Grid, k: usize) -> (f64, f64, bool) {
    let (m, nyq) = g.ring.mode(k);
    let dm = if nyq { 0.0 } else { m as f64 };
    (dm, (m * m) as f64, m == 0)
}

/// The face gradient drops the Nyquist bin: its angular part is invisible on
/// the nodes, and keeping only the radial part leaves a gradient that is
/// missing its `m²/r²` energy, which shows up as spurious small Neumann modes.
#[inline]
pub(crate) fn nyquist(g: &Grid, k: usize) -> bool {
    g.ring.mode(k).1
}

pub(crate) fn forward(g: &Grid, vals: &[f64]) -> Vec<C> {
    g.ring.forward(vals)
}

pub(crate) fn inverse(g: &Grid, spec: Vec<C>) -> Vec<f64> {
    g.ring.inverse(spec)
}

/// Cartesian components at cells to polar components.
pub(crate) fn to_polar(g: &Grid, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let na = g.n_angular();
    let mut ur = vec![0.0; x.len()];
    let mut ut = vec![0.0; x.len()];
    for i in 0..x.len() {
        let (c, s) = (g.cos[i % na], g.sin[i % na]);
        ur[i] = c * x[i] + s * y[i];
        ut[i] = -s * x[i] + c * y[i];
    }
    (ur, ut)
}

pub(crate) fn from_polar(g: &Grid, ur: &[f64], ut: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let na = g.n_angular();
    let mut x = vec![0.0; ur.len()];
    let mut y = vec![0.0; ur.len()];
    for i in 0..ur.len() {
        let (c, s) = (g.cos[i % na], g.sin[i % na]);
        x[i] = c * ur[i] - s * ut[i];
        y[i] = s * ur[i] + c * ut[i];
    }
    (x, y)
}

/// Forces the pole row of a face spectrum to a single value.
pub(crate) fn clean_pole(g: &Grid, q: &mut [C]) {
    for c in q[1..g.n_angular()].iter_mut() {
        *c = ZERO;
    }
}

/// Gradient of a face scalar, returned as polar components at cells.
pub(crate) fn face_grad(g: &Grid, q: &[C]) -> (Vec<C>, Vec<C>) {
    let (na, n, h) = (g.n_angular(), g.n_radial(), g.h());
    let mut ar = vec![ZERO; n * na];
    let mut at = vec![ZERO; n * na];
    for k in 0..na {
        if nyquist(g, k) {
            continue;
        }
        let (dm, _, m0) = wavenumber(g, k);
        for j in 0..n {
            let lo = if j == 0 && !m0 { ZERO } else { q[j * na + k] };
            let hi = q[(j + 1) * na + k];
            ar[j * na + k] = (hi - lo) / h;
            at[j * na + k] = C::new(0.0, dm / g.rc[j]) * (lo + hi) * 0.5;
        }
    }
    (ar, at)
}

/// Weak divergence of polar cell components onto faces: the negative
/// weighted adjoint of [`face_grad`]. `flux` is the spectrum of `R u_r(R)`,
/// supplied when the field has a nonzero normal trace.
pub(crate) fn weak_div(g: &Grid, ar: &[C], at: &[C], flux: Option<&[C]>) -> Vec<C> {
    let (na, n, h) = (g.n_angular(), g.n_radial(), g.h());
    let mut d = vec![ZERO; (n + 1) * na];
    for k in 0..na {
        if nyquist(g, k) {
            continue;
        }
        let (dm, _, m0) = wavenumber(g, k);
        let ih = C::new(0.0, dm * h * 0.5);
        for v in 0..=n {
            if v == 0 && !m0 {
                continue;
            }
            let mut s = ZERO;
            if v < n {
                s += ar[v * na + k] * g.rc[v] + ih * at[v * na + k];
            }
            if v > 0 {
                s += -ar[(v - 1) * na + k] * g.rc[v - 1] + ih * at[(v - 1) * na + k];
            }
            if v == n {
                if let Some(f) = flux {
                    s += f[k];
                }
            }
            d[v * na + k] = s / g.wf[v];
        }
    }
    d
}

/// Tridiagonal stiffness matrix `K = G^H W G` of mode `k` on faces,
/// as `(diag, off)` with `off[v]` coupling `v` and `v + 1`.
pub(crate) fn stiffness(g: &Grid, k: usize) -> (Vec<f64>, Vec<f64>) {
    let (n, h) = (g.n_radial(), g.h());
    let (dm, _, _) = wavenumber(g, k);
    let mut diag = vec![0.0; n + 1];
    let mut off = vec![0.0; n];
    if nyquist(g, k) {
        return (diag, off);
    }
    for j in 0..n {
        let c2 = dm * dm / (4.0 * g.rc[j] * g.rc[j]);
        let w = g.wc[j];
        diag[j] += w * (1.0 / (h * h) + c2);
        diag[j + 1] += w * (1.0 / (h * h) + c2);
        off[j] = w * (-1.0 / (h * h) + c2);
    }
    (diag, off)
}

/// Solves `K q = b` for every mode. Mode zero is singular with the constant
/// null vector: the right-hand side is projected onto the range, the pole is
/// pinned, and the weighted mean of the result is removed.
pub(crate) fn solve_stiffness(g: &Grid, b: &[C]) -> Vec<C> {
    let (na, n) = (g.n_angular(), g.n_radial());
    let mut q = vec![ZERO; (n + 1) * na];
    let wsum: f64 = g.wf.iter().sum();
    for k in 0..na {
        if nyquist(g, k) {
            continue;
        }
        let (diag, off) = stiffness(g, k);
        let (_, _, m0) = wavenumber(g, k);
        let mut rhs: Vec<C> = (0..=n).map(|v| b[v * na + k]).collect();
        if m0 {
            let total: C = rhs.iter().sum();
            for (r, w) in rhs.iter_mut().zip(&g.wf) {
                *r -= total * (*w / wsum);
            }
        }
        // Rows 1..=n with q_0 = 0 (pinned for mode zero, structural otherwise).
        let x = thomas_sym(&diag[1..], &off[1..], &rhs[1..]);
        let mut col = vec![ZERO; n + 1];
        col[1..].copy_from_slice(&x);
        if m0 {
            let mean: C = col.iter().zip(&g.wf).map(|(c, w)| c * w).sum::<C>() / wsum;
            col.iter_mut().for_each(|c| *c -= mean);
        }
        for v in 0..=n {
            q[v * na + k] = col[v];
        }
    }
    q
}

/// Solves `D G q = f` on the faces inside the disk with `q = bc` on the
/// boundary row (`bc` is the spectrum of the boundary values).
pub(crate) fn solve_face_dirichlet(g: &Grid, f: &[C], bc: &[C]) -> Vec<C> {
    let (na, n) = (g.n_angular(), g.n_radial());
    let mut q = vec![ZERO; (n + 1) * na];
    for k in 0..na {
        q[n * na + k] = bc[k];
        if nyquist(g, k) {
            continue;
        }
        let (diag, off) = stiffness(g, k);
        let (_, _, m0) = wavenumber(g, k);
        let start = if m0 { 0 } else { 1 };
        let mut rhs: Vec<C> = (start..n).map(|v| -f[v * na + k] * g.wf[v]).collect();
        let last = rhs.len() - 1;
        rhs[last] -= bc[k] * off[n - 1];
        let x = thomas_sym(&diag[start..n], &off[start..n - 1], &rhs);
        for (i, v) in (start..n).enumerate() {
            q[v * na + k] = x[i];
        }
    }
    q
}

/// `D G q` on faces, plus the boundary flux term `R dq/dr(R)` on the outer
/// row when `normal` (its spectrum) is given.
pub(crate) fn face_laplacian(g: &Grid, q: &[C], normal: Option<&[C]>) -> Vec<C> {
    let (na, n) = (g.n_angular(), g.n_radial());
    let mut out = vec![ZERO; (n + 1) * na];
    for k in 0..na {
        let (diag, off) = stiffness(g, k);
        let (_, _, m0) = wavenumber(g, k);
        for v in 0..=n {
            if v == 0 && !m0 {
                continue;
            }
            let mut s = q[v * na + k] * diag[v];
            if v > 0 && (v > 1 || m0) {
                s += q[(v - 1) * na + k] * off[v - 1];
            }
            if v < n {
                s += q[(v + 1) * na + k] * off[v];
            }
            let mut val = -s / g.wf[v];
            if v == n {
                if let Some(nd) = normal {
                    val += nd[k] * g.length() / g.wf[n];
                }
            }
            out[v * na + k] = val;
        }
    }
    out
}

/// Coefficients of the cell Laplacian of mode `k`: `(lower, diag, upper)`.
fn cell_lap_coeffs(g: &Grid, k: usize, trace: Trace) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (n, h) = (g.n_radial(), g.h());
    let (_, m2, _) = wavenumber(g, k);
    let mut lo = vec![0.0; n];
    let mut di = vec![0.0; n];
    let mut up = vec![0.0; n];
    for j in 0..n {
        let s = 1.0 / (g.rc[j] * h * h);
        let inner = g.rf[j];
        let outer = g.rf[j + 1];
        lo[j] = s * inner;
        di[j] = -s * inner - m2 / (g.rc[j] * g.rc[j]);
        if j + 1 < n {
            up[j] = s * outer;
            di[j] -= s * outer;
        } else if trace == Trace::Zero && j > 0 {
            // Wall flux (8u_b − 9u_{n−1} + u_{n−2}) / 3h with u_b = 0.
            di[j] -= 3.0 * s * outer;
            lo[j] += s * outer / 3.0;
        } else if trace == Trace::Zero {
            di[j] -= 2.0 * s * outer;
        }
    }
    (lo, di, up)
}

/// Finite-volume Laplacian of a cell scalar.
pub(crate) fn cell_laplacian(g: &Grid, q: &[C], trace: Trace) -> Vec<C> {
    let (na, n, h) = (g.n_angular(), g.n_radial(), g.h());
    let mut out = vec![ZERO; n * na];
    for k in 0..na {
        let (lo, di, up) = cell_lap_coeffs(g, k, trace);
        for j in 0..n {
            let mut s = q[j * na + k] * di[j];
            if j > 0 {
                s += q[(j - 1) * na + k] * lo[j];
            }
            if j + 1 < n {
                s += q[(j + 1) * na + k] * up[j];
            }
            out[j * na + k] = s;
        }
        if trace == Trace::Free {
            let j = n - 1;
            let dr = (q[j * na + k] * 2.0 - q[(j - 1) * na + k] * 3.0 + q[(j - 2) * na + k]) / h;
            out[j * na + k] += dr * (g.length() * h / (g.rc[j] * h * h));
        }
    }
    out
}

/// Solves `(lambda - L) q = f` with a zero boundary trace.
pub(crate) fn solve_cell_helmholtz(g: &Grid, lambda: f64, f: &[C]) -> Vec<C> {
    let (na, n) = (g.n_angular(), g.n_radial());
    let mut q = vec![ZERO; n * na];
    for k in 0..na {
        let (lo, di, up) = cell_lap_coeffs(g, k, Trace::Zero);
        let sub: Vec<f64> = lo[1..].iter().map(|v| -v).collect();
        let sup: Vec<f64> = up[..n - 1].iter().map(|v| -v).collect();
        let dia: Vec<f64> = di.iter().map(|v| lambda - v).collect();
        let rhs: Vec<C> = (0..n).map(|j| f[j * na + k]).collect();
        let x = thomas(&sub, &dia, &sup, &rhs);
        for j in 0..n {
            q[j * na + k] = x[j];
        }
    }
    q
}

/// Collocated second-order gradient of a cell scalar (polar components).
pub(crate) fn cell_grad(g: &Grid, q: &[C], trace: Trace) -> (Vec<C>, Vec<C>) {
    let (na, n, h) = (g.n_angular(), g.n_radial(), g.h());
    let mut ar = vec![ZERO; n * na];
    let mut at = vec![ZERO; n * na];
    for k in 0..na {
        let (m, _) = g.ring.mode(k);
        let (dm, _, _) = wavenumber(g, k);
        let parity = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let val = |j: usize| q[j * na + k];
        for j in 0..n {
            let d = if j == 0 {
                (val(1) - val(0) * parity) / (2.0 * h)
            } else if j + 1 < n {
                (val(j + 1) - val(j - 1)) / (2.0 * h)
            } else {
                match trace {
                    Trace::Zero => -(val(j) + val(j - 1) / 3.0) / h,
                    Trace::Free => (val(j) * 3.0 - val(j - 1) * 4.0 + val(j - 2)) / (2.0 * h),
                }
            };
            ar[j * na + k] = d;
            at[j * na + k] = val(j) * C::new(0.0, dm / g.rc[j]);
        }
    }
    (ar, at)
}

/// Value of a cell quantity at the boundary circle, per angular node.
pub(crate) fn boundary_value(g: &Grid, q: &[f64], trace: Trace) -> Vec<f64> {
    let (na, n) = (g.n_angular(), g.n_radial());
    match trace {
        Trace::Zero => vec![0.0; na],
        Trace::Free => (0..na)
            .map(|k| 1.875 * q[(n - 1) * na + k] - 1.25 * q[(n - 2) * na + k] + 0.375 * q[(n - 3) * na + k])
            .collect(),
    }
}

/// Outward radial derivative at the boundary of a zero-trace cell quantity.
pub(crate) fn boundary_slope_zero(g: &Grid, q: &[f64]) -> Vec<f64> {
    let (na, n, h) = (g.n_angular(), g.n_radial(), g.h());
    (0..na).map(|k| (-3.0 * q[(n - 1) * na + k] + q[(n - 2) * na + k] / 3.0) / h).collect()
}

/// Outward radial derivative of a face scalar at the boundary (one-sided).
pub(crate) fn face_boundary_slope(g: &Grid, q: &[f64]) -> Vec<f64> {
    let (na, n, h) = (g.n_angular(), g.n_radial(), g.h());
    (0..na).map(|k| (3.0 * q[n * na + k] - 4.0 * q[(n - 1) * na + k] + q[(n - 2) * na + k]) / (2.0 * h)).collect()
}

/// Thomas algorithm for a real tridiagonal matrix and complex right-hand side.
/// `sub[i]` couples rows `i + 1` and `i`; `sup[i]` couples rows `i` and `i + 1`.
pub(crate) fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[C]) -> Vec<C> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![ZERO; n];
    let mut beta = diag[0];
    c[0] = if n > 1 { sup[0] / beta } else { 0.0 };
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - sub[i - 1] * c[i - 1];
        if i + 1 < n {
            c[i] = sup[i] / beta;
        }
        d[i] = (rhs[i] - d[i - 1] * sub[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = d[i + 1];
        d[i] -= next * c[i];
    }
    d
}

pub(crate) fn thomas_sym(diag: &[f64], off: &[f64], rhs: &[C]) -> Vec<C> {
    thomas(off, diag, off, rhs)
}
