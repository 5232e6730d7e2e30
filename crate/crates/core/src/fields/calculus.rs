use num_complex::Complex64 as C;

use super::{
    check_scalars, check_vectors, disk, torus, BoundaryTrace, Grid, Location, ScalarField, Trace, VectorField,
};
use crate::error::{Error, Result};

/// Gradient at cell centres in Cartesian components.
///
/// Face scalars use the staggered radial difference; cell scalars use a
/// collocated centred difference with one-sided closure at the boundary.
pub fn gradient(q: &ScalarField) -> VectorField {
    let g = q.grid();
    if !g.is_disk() {
        let (gx, gy) = torus::grad(g, &torus::forward(g, q.values()));
        return VectorField::raw(g, torus::inverse(g, gx), torus::inverse(g, gy), Trace::Free);
    }
    let spec = disk::forward(g, q.values());
    let (ar, at) = match q.location() {
        Location::Face => {
            let mut spec = spec;
            disk::clean_pole(g, &mut spec);
            disk::face_grad(g, &spec)
        }
        Location::Cell => disk::cell_grad(g, &spec, q.trace()),
    };
    polar_to_vector(g, ar, at, Trace::Free)
}

/// `∇⊥q = (−∂y q, ∂x q)`.
pub fn perp_gradient(q: &ScalarField) -> VectorField {
    let gq = gradient(q);
    let (x, y) = gq.parts();
    let px = y.iter().map(|v| -v).collect();
    VectorField::raw(q.grid(), px, x.to_vec(), Trace::Free)
}

/// Divergence, located on faces for the disk.
pub fn divergence(u: &VectorField) -> ScalarField {
    let g = u.grid();
    if !g.is_disk() {
        let (x, y) = u.parts();
        let d = torus::div(g, &torus::forward(g, x), &torus::forward(g, y));
        return ScalarField::raw(g, Location::Cell, torus::inverse(g, d));
    }
    let (x, y) = u.parts();
    let (ur, ut) = disk::to_polar(g, x, y);
    let flux = boundary_flux(g, &ur, u.trace());
    let d = disk::weak_div(g, &disk::forward(g, &ur), &disk::forward(g, &ut), flux.as_deref());
    ScalarField::raw(g, Location::Face, disk::inverse(g, d))
}

/// Scalar vorticity `∂x u_y − ∂y u_x`, located on faces for the disk.
pub fn curl2d(u: &VectorField) -> ScalarField {
    let g = u.grid();
    let (x, y) = u.parts();
    if !g.is_disk() {
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let d = torus::div(g, &torus::forward(g, y), &torus::forward(g, &neg));
        return ScalarField::raw(g, Location::Cell, torus::inverse(g, d));
    }
    let (ur, ut) = disk::to_polar(g, x, y);
    let neg: Vec<f64> = ur.iter().map(|v| -v).collect();
    let flux = boundary_flux(g, &ut, u.trace());
    let d = disk::weak_div(g, &disk::forward(g, &ut), &disk::forward(g, &neg), flux.as_deref());
    ScalarField::raw(g, Location::Face, disk::inverse(g, d))
}

/// Scalar Laplacian at the field's own location.
pub fn laplacian(q: &ScalarField) -> ScalarField {
    let g = q.grid();
    if !g.is_disk() {
        let l = torus::lap(g, &torus::forward(g, q.values()));
        return ScalarField::raw(g, Location::Cell, torus::inverse(g, l));
    }
    let mut spec = disk::forward(g, q.values());
    let out = match q.location() {
        Location::Face => {
            disk::clean_pole(g, &mut spec);
            let slope = disk::face_boundary_slope(g, q.values());
            disk::face_laplacian(g, &spec, Some(&g.ring.forward(&slope)))
        }
        Location::Cell => disk::cell_laplacian(g, &spec, q.trace()),
    };
    ScalarField::raw(g, q.location(), disk::inverse(g, out)).with_trace(q.trace())
}

/// Componentwise Laplacian of the Cartesian components.
pub fn vector_laplacian(u: &VectorField) -> VectorField {
    let lx = laplacian(&u.component(0));
    let ly = laplacian(&u.component(1));
    VectorField::raw(u.grid(), lx.into_values(), ly.into_values(), Trace::Free)
}

/// Advective derivative `(a·∇)b` with collocated centred differences.
pub fn advect(a: &VectorField, b: &VectorField) -> Result<VectorField> {
    check_vectors(a, b)?;
    let gx = gradient(&b.component(0));
    let gy = gradient(&b.component(1));
    let (ax, ay) = a.parts();
    let n = ax.len();
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    for i in 0..n {
        x[i] = ax[i] * gx.x()[i] + ay[i] * gx.y()[i];
        y[i] = ax[i] * gy.x()[i] + ay[i] * gy.y()[i];
    }
    Ok(VectorField::raw(a.grid(), x, y, Trace::Free))
}

pub fn l2_inner(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    check_scalars(a, b)?;
    let w = a.grid().weights(a.location());
    Ok(a.values().iter().zip(b.values()).zip(w).map(|((x, y), w)| x * y * w).sum())
}

pub fn l2_inner_vec(u: &VectorField, v: &VectorField) -> Result<f64> {
    check_vectors(u, v)?;
    let w = u.grid().cell_weights();
    let (ux, uy) = u.parts();
    let (vx, vy) = v.parts();
    Ok((0..w.len()).map(|i| (ux[i] * vx[i] + uy[i] * vy[i]) * w[i]).sum())
}

pub fn l2_norm(a: &ScalarField) -> f64 {
    let w = a.grid().weights(a.location());
    a.values().iter().zip(w).map(|(x, w)| x * x * w).sum::<f64>().sqrt()
}

pub fn l2_norm_vec(u: &VectorField) -> f64 {
    let w = u.grid().cell_weights();
    let (x, y) = u.parts();
    (0..w.len()).map(|i| (x[i] * x[i] + y[i] * y[i]) * w[i]).sum::<f64>().sqrt()
}

/// `⟨∇u, ∇v⟩` summed over both Cartesian components.
///
/// On the disk the radial part uses face differences, closing with a
/// half-cell difference to the boundary trace, and the angular part is exact
/// in Fourier space. For zero-trace fields this equals `−⟨u, Δv⟩`.
pub fn h1_inner(u: &VectorField, v: &VectorField) -> Result<f64> {
    check_vectors(u, v)?;
    let g = u.grid();
    let mut total = 0.0;
    for c in 0..2 {
        total += scalar_h1(g, &u.component(c), &v.component(c));
    }
    Ok(total)
}

/// `‖∇u‖²`.
pub fn h1_semi_sq(u: &VectorField) -> f64 {
    h1_inner(u, u).unwrap_or(f64::NAN)
}

/// `‖Δu‖` with the componentwise Laplacian.
pub fn lap_norm(u: &VectorField) -> f64 {
    l2_norm_vec(&vector_laplacian(u))
}

fn scalar_h1(g: &Grid, a: &ScalarField, b: &ScalarField) -> f64 {
    if !g.is_disk() {
        let fa = torus::forward(g, a.values());
        let fb = torus::forward(g, b.values());
        let n = fa.len() as f64;
        let w = g.area() / (n * n);
        return (0..fa.len())
            .map(|i| {
                let (kx, ky) = torus::symbol(g, i);
                (kx * kx + ky * ky) * (fa[i] * fb[i].conj()).re
            })
            .sum::<f64>()
            * w;
    }
    let (na, n, h) = (g.n_angular(), g.n_radial(), g.h());
    let dth = g.dtheta();
    let (av, bv) = (a.values(), b.values());
    let ab = disk::boundary_value(g, av, a.trace());
    let bb = disk::boundary_value(g, bv, b.trace());
    let mut radial = 0.0;
    for k in 0..na {
        for v in 1..n {
            let da = av[v * na + k] - av[(v - 1) * na + k];
            let db = bv[v * na + k] - bv[(v - 1) * na + k];
            radial += g.rf[v] / h * da * db;
        }
        let (a1, b1) = (av[(n - 1) * na + k], bv[(n - 1) * na + k]);
        if a.trace() == Trace::Zero && b.trace() == Trace::Zero && n > 1 {
            // Symmetric part of the wall flux used by the cell Laplacian.
            let (a2, b2) = (av[(n - 2) * na + k], bv[(n - 2) * na + k]);
            radial += 0.5 * g.rf[n] / h * (a1 * (3.0 * b1 - b2 / 3.0) + b1 * (3.0 * a1 - a2 / 3.0));
        } else {
            radial += 2.0 * g.rf[n] / h * (ab[k] - a1) * (bb[k] - b1);
        }
    }
    let fa = disk::forward(g, av);
    let fb = disk::forward(g, bv);
    let mut angular = 0.0;
    for k in 0..na {
        let (_, m2, _) = disk::wavenumber(g, k);
        if m2 == 0.0 {
            continue;
        }
        for j in 0..n {
            let i = j * na + k;
            angular += g.wc[j] * m2 / (g.rc[j] * g.rc[j]) * (fa[i] * fb[i].conj()).re;
        }
    }
    radial * dth + angular * dth / na as f64
}

/// Normal component `u·ν` on the boundary circle.
pub fn boundary_normal_trace(u: &VectorField) -> BoundaryTrace {
    let g = u.grid();
    let mut t = BoundaryTrace::zeros(g);
    if g.is_disk() {
        let (x, y) = u.parts();
        let (ur, _) = disk::to_polar(g, x, y);
        t.values = disk::boundary_value(g, &ur, u.trace());
    }
    t
}

/// Values of a scalar on the boundary circle.
pub fn boundary_values(q: &ScalarField) -> BoundaryTrace {
    let g = q.grid();
    let mut t = BoundaryTrace::zeros(g);
    if g.is_disk() {
        let na = g.n_angular();
        t.values = match q.location() {
            Location::Face => q.values()[g.n_radial() * na..].to_vec(),
            Location::Cell => disk::boundary_value(g, q.values(), Trace::Free),
        };
    }
    t
}

/// Vorticity on the boundary circle. For a zero-trace field it reduces to
/// the outward radial derivative of the tangential component.
pub fn boundary_vorticity(u: &VectorField) -> BoundaryTrace {
    let g = u.grid();
    let mut t = BoundaryTrace::zeros(g);
    if !g.is_disk() {
        return t;
    }
    t.values = match u.trace() {
        Trace::Zero => {
            let (x, y) = u.parts();
            let (_, ut) = disk::to_polar(g, x, y);
            disk::boundary_slope_zero(g, &ut)
        }
        Trace::Free => boundary_values(&curl2d(u)).values,
    };
    t
}

/// `∮ g ds` with the trapezoid rule in arclength.
pub fn boundary_integral(t: &BoundaryTrace) -> f64 {
    t.values.iter().sum::<f64>() * t.ds
}

/// Pointwise product of two boundary traces.
pub fn trace_product(a: &BoundaryTrace, b: &BoundaryTrace) -> Result<BoundaryTrace> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch("boundary traces differ in length".into()));
    }
    let mut out = a.clone();
    for (o, v) in out.values.iter_mut().zip(&b.values) {
        *o *= v;
    }
    Ok(out)
}

/// `R u(R)` spectrum on the boundary row for a free-trace component.
fn boundary_flux(g: &Grid, comp: &[f64], trace: Trace) -> Option<Vec<C>> {
    match trace {
        Trace::Zero => None,
        Trace::Free => {
            let b: Vec<f64> = disk::boundary_value(g, comp, Trace::Free).iter().map(|v| v * g.length()).collect();
            Some(g.ring.forward(&b))
        }
    }
}

pub(crate) fn polar_to_vector(g: &std::sync::Arc<Grid>, ar: Vec<C>, at: Vec<C>, trace: Trace) -> VectorField {
    let (ar, at) = (disk::inverse(g, ar), disk::inverse(g, at));
    let (x, y) = disk::from_polar(g, &ar, &at);
    VectorField::raw(g, x, y, trace)
}
