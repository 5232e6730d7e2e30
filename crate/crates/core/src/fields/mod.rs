//! Structured grids on the disk and the periodic square, discrete vector
//! calculus, quadrature, norms and boundary traces.
//!
//! The disk grid is Fourier in the angle and finite-volume in the radius.
//! Velocity components live at cell centres `r_j = (j + 1/2) h`, so there is
//! no node at the pole. Potentials, pressures, divergence and vorticity live
//! on the cell faces `r_v = v h`, which include the pole (a single value) and
//! the boundary circle. Gradient (faces to cells) and divergence (cells to
//! faces) are exact adjoints under the quadrature, which makes the discrete
//! Helmholtz decomposition exactly orthogonal.
//!
//! On the torus every operator is a Fourier multiplier and the two locations
//! coincide.

mod calculus;
pub(crate) mod disk;
pub(crate) mod fourier;
pub(crate) mod torus;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use fourier::{Fourier, Fourier2};

pub use calculus::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Disk,
    Torus,
}

/// Where a scalar lives on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Location {
    /// Cell centres, shared with the velocity components.
    Cell,
    /// Radial cell faces including pole and boundary (disk only).
    Face,
}

/// Boundary behaviour assumed by stencils that reach past the outer cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trace {
    /// The field vanishes on the boundary (discrete H¹₀).
    Zero,
    /// No boundary condition; traces are extrapolated from the interior.
    Free,
}

pub struct Grid {
    kind: DomainKind,
    length: f64,
    n_angular: usize,
    n_radial: usize,
    h: f64,
    pub(crate) rc: Vec<f64>,
    pub(crate) rf: Vec<f64>,
    pub(crate) wc: Vec<f64>,
    pub(crate) wf: Vec<f64>,
    pub(crate) cos: Vec<f64>,
    pub(crate) sin: Vec<f64>,
    cell_w: Vec<f64>,
    face_w: Vec<f64>,
    pub(crate) ring: Fourier,
    pub(crate) plane: Option<Fourier2>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("kind", &self.kind)
            .field("length", &self.length)
            .field("n_angular", &self.n_angular)
            .field("n_radial", &self.n_radial)
            .finish()
    }
}

impl Grid {
    /// Disk of radius `radius` with `n_angular` Fourier nodes and `n_radial` cells.
    pub fn disk(radius: f64, n_angular: usize, n_radial: usize) -> Result<Arc<Grid>> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidGrid(format!("radius must be positive, got {radius}")));
        }
        if n_angular < 4 || !n_angular.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("n_angular must be even and >= 4, got {n_angular}")));
        }
        if n_radial < 4 {
            return Err(Error::InvalidGrid(format!("n_radial must be >= 4, got {n_radial}")));
        }
        let n = n_radial;
        let h = radius / n as f64;
        let dth = 2.0 * PI / n_angular as f64;
        let rc: Vec<f64> = (0..n).map(|j| (j as f64 + 0.5) * h).collect();
        let rf: Vec<f64> = (0..=n).map(|v| v as f64 * h).collect();
        let wc: Vec<f64> = rc.iter().map(|r| r * h).collect();
        let mut wf: Vec<f64> = rf.iter().map(|r| r * h).collect();
        wf[0] = h * h / 8.0;
        wf[n] = radius * h / 2.0 - h * h / 8.0;
        let (cos, sin): (Vec<f64>, Vec<f64>) =
            (0..n_angular).map(|k| ((k as f64 * dth).cos(), (k as f64 * dth).sin())).unzip();
        let cell_w = wc.iter().flat_map(|w| std::iter::repeat_n(w * dth, n_angular)).collect();
        let face_w = wf.iter().flat_map(|w| std::iter::repeat_n(w * dth, n_angular)).collect();
        Ok(Arc::new(Grid {
            kind: DomainKind::Disk,
            length: radius,
            n_angular,
            n_radial,
            h,
            rc,
            rf,
            wc,
            wf,
            cos,
            sin,
            cell_w,
            face_w,
            ring: Fourier::new(n_angular),
            plane: None,
        }))
    }

    /// Periodic square `[0, period)²` with `n_x * n_y` nodes.
    pub fn torus(period: f64, n_x: usize, n_y: usize) -> Result<Arc<Grid>> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::InvalidGrid(format!("period must be positive, got {period}")));
        }
        if n_x < 4 || n_y < 4 || !n_x.is_multiple_of(2) || !n_y.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("torus sizes must be even and >= 4, got {n_x}x{n_y}")));
        }
        let w = period * period / (n_x * n_y) as f64;
        Ok(Arc::new(Grid {
            kind: DomainKind::Torus,
            length: period,
            n_angular: n_x,
            n_radial: n_y,
            h: period / n_x as f64,
            rc: Vec::new(),
            rf: Vec::new(),
            wc: Vec::new(),
            wf: Vec::new(),
            cos: Vec::new(),
            sin: Vec::new(),
            cell_w: vec![w; n_x * n_y],
            face_w: vec![w; n_x * n_y],
            ring: Fourier::new(n_x),
            plane: Some(Fourier2::new(n_x, n_y)),
        }))
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn is_disk(&self) -> bool {
        self.kind == DomainKind::Disk
    }

    /// Radius of the disk or period of the torus.
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Angular node count (disk) or `n_x` (torus).
    pub fn n_angular(&self) -> usize {
        self.n_angular
    }

    /// Radial cell count (disk) or `n_y` (torus).
    pub fn n_radial(&self) -> usize {
        self.n_radial
    }

    /// Radial spacing (disk) or `x` spacing (torus).
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.n_angular as f64
    }

    pub fn area(&self) -> f64 {
        match self.kind {
            DomainKind::Disk => PI * self.length * self.length,
            DomainKind::Torus => self.length * self.length,
        }
    }

    pub fn cell_count(&self) -> usize {
        self.n_angular * self.n_radial
    }

    pub fn face_count(&self) -> usize {
        match self.kind {
            DomainKind::Disk => self.n_angular * (self.n_radial + 1),
            DomainKind::Torus => self.cell_count(),
        }
    }

    pub fn count(&self, loc: Location) -> usize {
        match loc {
            Location::Cell => self.cell_count(),
            Location::Face => self.face_count(),
        }
    }

    /// Quadrature weights (area per node) at cell centres.
    pub fn cell_weights(&self) -> &[f64] {
        &self.cell_w
    }

    pub fn face_weights(&self) -> &[f64] {
        &self.face_w
    }

    pub fn weights(&self, loc: Location) -> &[f64] {
        match loc {
            Location::Cell => &self.cell_w,
            Location::Face => &self.face_w,
        }
    }

    /// Cartesian coordinates of node `idx` at the given location.
    ///
    /// Disk nodes are centred on the origin; torus nodes start at the origin.
    pub fn node_xy(&self, loc: Location, idx: usize) -> (f64, f64) {
        let na = self.n_angular;
        let (j, k) = (idx / na, idx % na);
        match self.kind {
            DomainKind::Disk => {
                let r = match loc {
                    Location::Cell => self.rc[j],
                    Location::Face => self.rf[j],
                };
                (r * self.cos[k], r * self.sin[k])
            }
            DomainKind::Torus => {
                let hy = self.length / self.n_radial as f64;
                (k as f64 * self.h, j as f64 * hy)
            }
        }
    }

    /// Polar coordinates `(r, theta)` of a disk node.
    pub fn node_polar(&self, loc: Location, idx: usize) -> (f64, f64) {
        let (x, y) = self.node_xy(loc, idx);
        (x.hypot(y), (idx % self.n_angular) as f64 * self.dtheta())
    }

    /// Indices of the outermost cell ring (disk), the nodes adjacent to the boundary.
    pub fn boundary_cells(&self) -> Vec<usize> {
        match self.kind {
            DomainKind::Disk => {
                let base = (self.n_radial - 1) * self.n_angular;
                (base..base + self.n_angular).collect()
            }
            DomainKind::Torus => Vec::new(),
        }
    }

    /// Indices of the face nodes lying on the boundary circle.
    pub fn boundary_faces(&self) -> Vec<usize> {
        match self.kind {
            DomainKind::Disk => {
                let base = self.n_radial * self.n_angular;
                (base..base + self.n_angular).collect()
            }
            DomainKind::Torus => Vec::new(),
        }
    }

    pub(crate) fn same(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
        Arc::ptr_eq(a, b)
            || (a.kind == b.kind && a.length == b.length && a.n_angular == b.n_angular && a.n_radial == b.n_radial)
    }
}

/// Values on a grid at cell centres or faces.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    location: Location,
    trace: Trace,
    mean_zero: bool,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<Grid>, location: Location) -> Self {
        let location = normalise_location(grid, location);
        Self {
            grid: grid.clone(),
            location,
            trace: Trace::Free,
            mean_zero: false,
            values: vec![0.0; grid.count(location)],
        }
    }

    pub fn from_values(grid: &Arc<Grid>, location: Location, values: Vec<f64>) -> Result<Self> {
        let location = normalise_location(grid, location);
        if values.len() != grid.count(location) {
            return Err(Error::GridMismatch(format!("expected {} values, got {}", grid.count(location), values.len())));
        }
        let mut f = Self { grid: grid.clone(), location, trace: Trace::Free, mean_zero: false, values };
        f.fix_pole();
        Ok(f)
    }

    /// Samples `f(x, y)` at every node. The pole ring samples `f(0, 0)`.
    pub fn from_fn(grid: &Arc<Grid>, location: Location, f: impl Fn(f64, f64) -> f64) -> Self {
        let location = normalise_location(grid, location);
        let values = (0..grid.count(location))
            .map(|i| {
                let (x, y) = grid.node_xy(location, i);
                f(x, y)
            })
            .collect();
        Self { grid: grid.clone(), location, trace: Trace::Free, mean_zero: false, values }
    }

    pub fn with_trace(mut self, trace: Trace) -> Self {
        self.trace = trace;
        self
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn location(&self) -> Location {
        self.location
    }

    pub fn trace(&self) -> Trace {
        self.trace
    }

    pub fn is_mean_zero(&self) -> bool {
        self.mean_zero
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = f(*v));
        out.mean_zero = false;
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn axpy(&self, a: f64, other: &ScalarField) -> Result<Self> {
        check_scalars(self, other)?;
        let mut out = self.clone();
        for (o, b) in out.values.iter_mut().zip(&other.values) {
            *o += a * b;
        }
        out.mean_zero = false;
        Ok(out)
    }

    /// Quadrature mean over the domain.
    pub fn mean(&self) -> f64 {
        let w = self.grid.weights(self.location);
        self.values.iter().zip(w).map(|(v, w)| v * w).sum::<f64>() / self.grid.area()
    }

    /// Subtracts the quadrature mean and sets the mean-zero flag.
    pub fn mean_free(mut self) -> Self {
        let m = self.mean();
        self.values.iter_mut().for_each(|v| *v -= m);
        self.mean_zero = true;
        self
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    pub(crate) fn raw(grid: &Arc<Grid>, location: Location, values: Vec<f64>) -> Self {
        Self { grid: grid.clone(), location, trace: Trace::Free, mean_zero: false, values }
    }

    /// Face fields carry a single value at the pole; copies are averaged.
    fn fix_pole(&mut self) {
        if self.grid.is_disk() && self.location == Location::Face {
            let na = self.grid.n_angular;
            let m = self.values[..na].iter().sum::<f64>() / na as f64;
            self.values[..na].iter_mut().for_each(|v| *v = m);
        }
    }
}

fn normalise_location(grid: &Grid, loc: Location) -> Location {
    if grid.is_disk() {
        loc
    } else {
        Location::Cell
    }
}

pub(crate) fn check_scalars(a: &ScalarField, b: &ScalarField) -> Result<()> {
    if !Grid::same(&a.grid, &b.grid) {
        return Err(Error::GridMismatch("scalar fields live on different grids".into()));
    }
    if a.location != b.location {
        return Err(Error::GridMismatch(format!("scalar locations differ: {:?} vs {:?}", a.location, b.location)));
    }
    Ok(())
}

/// Two Cartesian components per cell centre.
#[derive(Debug, Clone)]
pub struct VectorField {
    grid: Arc<Grid>,
    trace: Trace,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        let n = grid.cell_count();
        Self { grid: grid.clone(), trace: Trace::Zero, x: vec![0.0; n], y: vec![0.0; n] }
    }

    pub fn from_components(grid: &Arc<Grid>, x: Vec<f64>, y: Vec<f64>, trace: Trace) -> Result<Self> {
        let n = grid.cell_count();
        if x.len() != n || y.len() != n {
            return Err(Error::GridMismatch(format!(
                "expected {n} values per component, got {} and {}",
                x.len(),
                y.len()
            )));
        }
        Ok(Self { grid: grid.clone(), trace, x, y })
    }

    pub fn from_fn(grid: &Arc<Grid>, trace: Trace, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let (x, y) = (0..grid.cell_count())
            .map(|i| {
                let (px, py) = grid.node_xy(Location::Cell, i);
                f(px, py)
            })
            .unzip();
        Self { grid: grid.clone(), trace, x, y }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn trace(&self) -> Trace {
        self.trace
    }

    pub fn with_trace(mut self, trace: Trace) -> Self {
        self.trace = trace;
        self
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn component(&self, c: usize) -> ScalarField {
        let v = if c == 0 { self.x.clone() } else { self.y.clone() };
        ScalarField::raw(&self.grid, Location::Cell, v).with_trace(self.trace)
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.x.iter_mut().chain(out.y.iter_mut()).for_each(|v| *v *= s);
        out
    }

    /// `self + a * other`; the result keeps a zero trace only if both inputs do.
    pub fn axpy(&self, a: f64, other: &VectorField) -> Result<Self> {
        check_vectors(self, other)?;
        let mut out = self.clone();
        for (o, b) in out.x.iter_mut().zip(&other.x) {
            *o += a * b;
        }
        for (o, b) in out.y.iter_mut().zip(&other.y) {
            *o += a * b;
        }
        if other.trace == Trace::Free {
            out.trace = Trace::Free;
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.x.iter().chain(&self.y).fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    pub(crate) fn parts(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.y)
    }

    pub(crate) fn raw(grid: &Arc<Grid>, x: Vec<f64>, y: Vec<f64>, trace: Trace) -> Self {
        Self { grid: grid.clone(), trace, x, y }
    }
}

pub(crate) fn check_vectors(a: &VectorField, b: &VectorField) -> Result<()> {
    if !Grid::same(&a.grid, &b.grid) {
        return Err(Error::GridMismatch("vector fields live on different grids".into()));
    }
    Ok(())
}

/// Values on the boundary circle at the angular nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub values: Vec<f64>,
    /// Arclength coordinate of each node.
    pub s: Vec<f64>,
    /// Boundary curvature at each node.
    pub kappa: Vec<f64>,
    /// Arclength per node.
    pub ds: f64,
}

impl BoundaryTrace {
    pub fn zeros(grid: &Grid) -> Self {
        match grid.kind() {
            DomainKind::Disk => {
                let n = grid.n_angular();
                let r = grid.length();
                let ds = r * grid.dtheta();
                BoundaryTrace {
                    values: vec![0.0; n],
                    s: (0..n).map(|k| k as f64 * ds).collect(),
                    kappa: vec![1.0 / r; n],
                    ds,
                }
            }
            DomainKind::Torus => BoundaryTrace { values: Vec::new(), s: Vec::new(), kappa: Vec::new(), ds: 0.0 },
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        let mut t = Self::zeros(grid);
        let dth = grid.dtheta();
        for (k, v) in t.values.iter_mut().enumerate() {
            *v = f(k as f64 * dth);
        }
        t
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_weights_sum_to_area() {
        for (na, nr) in [(8, 4), (64, 32), (256, 128)] {
            let g = Grid::disk(1.3, na, nr).unwrap();
            for loc in [Location::Cell, Location::Face] {
                let s: f64 = g.weights(loc).iter().sum();
                assert!((s - g.area()).abs() / g.area() < 1e-12, "{loc:?} {s}");
            }
        }
        let t = Grid::torus(2.0 * PI, 16, 8).unwrap();
        let s: f64 = t.cell_weights().iter().sum();
        assert!((s - 4.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn disk_grid_has_no_pole_node() {
        let g = Grid::disk(1.0, 16, 8).unwrap();
        assert!(g.rc.iter().all(|&r| r > 0.0));
        assert!(Grid::disk(1.0, 15, 8).is_err());
    }

    #[test]
    fn boundary_curvature_is_reciprocal_radius() {
        let g = Grid::disk(2.0, 32, 8).unwrap();
        let t = BoundaryTrace::zeros(&g);
        assert!(t.kappa.iter().all(|&k| k == 0.5));
    }

    #[test]
    fn mean_free_flags_and_centres() {
        let g = Grid::disk(1.0, 32, 16).unwrap();
        let f = ScalarField::from_fn(&g, Location::Face, |x, y| 1.0 + x * x + y).mean_free();
        assert!(f.is_mean_zero());
        assert!(f.mean().abs() <= 1e-10 * f.max_abs());
    }
}
