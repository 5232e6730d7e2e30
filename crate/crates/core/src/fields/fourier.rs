use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Batched FFT of fixed length, applied to consecutive rows of a buffer.
#[derive(Clone)]
pub(crate) struct Fourier {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fourier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fourier").field("n", &self.n).finish()
    }
}

impl Fourier {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    /// Signed wavenumber of bin `k` and whether it is the Nyquist bin.
    pub fn mode(&self, k: usize) -> (i64, bool) {
        let n = self.n as i64;
        let k = k as i64;
        let m = if 2 * k > n { k - n } else { k };
        (m, 2 * k == n)
    }

    /// Forward transform of every row of `data` (unnormalised).
    pub fn forward(&self, data: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        buf
    }

    pub fn forward_complex(&self, buf: &mut [Complex64]) {
        self.fwd.process(buf);
    }

    /// Inverse transform of every row, keeping the real part and applying 1/n.
    pub fn inverse(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.inv.process(&mut buf);
        let s = 1.0 / self.n as f64;
        buf.into_iter().map(|c| c.re * s).collect()
    }

    pub fn inverse_complex(&self, buf: &mut [Complex64]) {
        self.inv.process(buf);
        let s = 1.0 / self.n as f64;
        for c in buf.iter_mut() {
            *c *= s;
        }
    }
}

/// Two-dimensional transform on a row-major `ny x nx` array.
#[derive(Clone, Debug)]
pub(crate) struct Fourier2 {
    pub fx: Fourier,
    pub fy: Fourier,
}

impl Fourier2 {
    pub fn new(nx: usize, ny: usize) -> Self {
        Self { fx: Fourier::new(nx), fy: Fourier::new(ny) }
    }

    fn columns(&self, buf: &mut [Complex64], forward: bool) {
        let (nx, ny) = (self.fx.len(), self.fy.len());
        let mut t = vec![Complex64::new(0.0, 0.0); nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                t[i * ny + j] = buf[j * nx + i];
            }
        }
        if forward {
            self.fy.forward_complex(&mut t);
        } else {
            self.fy.inverse_complex(&mut t);
        }
        for j in 0..ny {
            for i in 0..nx {
                buf[j * nx + i] = t[i * ny + j];
            }
        }
    }

    pub fn forward(&self, data: &[f64]) -> Vec<Complex64> {
        let mut buf = self.fx.forward(data);
        self.columns(&mut buf, true);
        buf
    }

    pub fn inverse(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.fx.inverse_complex(&mut buf);
        self.columns(&mut buf, false);
        buf.into_iter().map(|c| c.re).collect()
    }
}
