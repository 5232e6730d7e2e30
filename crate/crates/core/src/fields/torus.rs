//! Fourier multipliers on the periodic square.
//!
//! First derivatives drop the Nyquist bins and the Laplacian is the square of
//! the first-derivative symbol, so gradient, divergence and Laplacian commute
//! exactly and the discrete Laplacian equals divergence of gradient.

use std::f64::consts::PI;

use num_complex::Complex64 as C;

use super::Grid;

pub(crate) fn forward(g: &Grid, vals: &[f64]) -> Vec<C> {
    g.plane.as_ref().expect("torus grid").forward(vals)
}

pub(crate) fn inverse(g: &Grid, spec: Vec<C>) -> Vec<f64> {
    g.plane.as_ref().expect("torus grid").inverse(spec)
}

/// Derivative symbols `(kx, ky)` of the bin at flat index `idx`.
#[inline]
pub(crate) fn symbol(g: &Grid, idx: usize) -> (f64, f64) {
    let p = g.plane.as_ref().expect("torus grid");
    let nx = p.fx.len();
    let s = 2.0 * PI / g.length();
    let (mx, nyx) = p.fx.mode(idx % nx);
    let (my, nyy) = p.fy.mode(idx / nx);
    let kx = if nyx { 0.0 } else { mx as f64 * s };
    let ky = if nyy { 0.0 } else { my as f64 * s };
    (kx, ky)
}

pub(crate) fn grad(g: &Grid, q: &[C]) -> (Vec<C>, Vec<C>) {
    let mut gx = vec![C::new(0.0, 0.0); q.len()];
    let mut gy = gx.clone();
    for i in 0..q.len() {
        let (kx, ky) = symbol(g, i);
        gx[i] = q[i] * C::new(0.0, kx);
        gy[i] = q[i] * C::new(0.0, ky);
    }
    (gx, gy)
}

pub(crate) fn div(g: &Grid, ux: &[C], uy: &[C]) -> Vec<C> {
    (0..ux.len())
        .map(|i| {
            let (kx, ky) = symbol(g, i);
            ux[i] * C::new(0.0, kx) + uy[i] * C::new(0.0, ky)
        })
        .collect()
}

pub(crate) fn lap(g: &Grid, q: &[C]) -> Vec<C> {
    (0..q.len())
        .map(|i| {
            let (kx, ky) = symbol(g, i);
            -q[i] * (kx * kx + ky * ky)
        })
        .collect()
}

/// Mean-zero solution of `Δq = f`; bins with a zero symbol are set to zero.
pub(crate) fn solve_poisson(g: &Grid, f: &[C]) -> Vec<C> {
    (0..f.len())
        .map(|i| {
            let (kx, ky) = symbol(g, i);
            let k2 = kx * kx + ky * ky;
            if k2 == 0.0 {
                C::new(0.0, 0.0)
            } else {
                -f[i] / k2
            }
        })
        .collect()
}

/// Solution of `(lambda - Δ)q = f`.
pub(crate) fn solve_helmholtz(g: &Grid, lambda: f64, f: &[C]) -> Vec<C> {
    (0..f.len())
        .map(|i| {
            let (kx, ky) = symbol(g, i);
            f[i] / (lambda + kx * kx + ky * ky)
        })
        .collect()
}
