//! Bessel functions of the first kind and their zeros.
//!
//! These give the analytic reference values for the disk: the Neumann
//! eigenvalues are squared zeros of `J_m'` and the Stokes eigenvalues are
//! squared zeros of `J_{m+1}`.

/// `J_m(x)` by its power series, accurate for `|x| ≲ 30`.
pub fn jn(m: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=m {
        term *= half / k as f64;
    }
    let mut sum = term;
    let q = -half * half;
    for k in 1..300 {
        term *= q / (k as f64 * (k + m) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && k > 2 {
            break;
        }
    }
    sum
}

/// `J_m'(x)`.
pub fn jn_prime(m: u32, x: f64) -> f64 {
    if m == 0 {
        -jn(1, x)
    } else {
        0.5 * (jn(m - 1, x) - jn(m + 1, x))
    }
}

fn jn_second(m: u32, x: f64) -> f64 {
    // Bessel's equation: x² y'' + x y' + (x² − m²) y = 0.
    let mf = m as f64;
    -(jn_prime(m, x) / x) - (1.0 - mf * mf / (x * x)) * jn(m, x)
}

/// Refines a bracketed root of `f` with safeguarded Newton steps.
fn refine(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..100 {
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if (fx > 0.0) == (flo > 0.0) {
            lo = x;
        } else {
            hi = x;
        }
        let step = fx / df(x);
        let mut next = x - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() < 1e-15 * x.abs() {
            return next;
        }
        x = next;
    }
    x
}

fn nth_root(f: impl Fn(f64) -> f64 + Copy, df: impl Fn(f64) -> f64 + Copy, start: f64, k: usize) -> f64 {
    let dx = 0.05;
    let mut x = start;
    let mut count = 0;
    let mut fx = f(x);
    loop {
        let next = x + dx;
        let fn_ = f(next);
        if fx == 0.0 || (fx > 0.0) != (fn_ > 0.0) {
            count += 1;
            if count == k {
                return refine(f, df, x, next);
            }
        }
        x = next;
        fx = fn_;
    }
}

/// `k`-th positive zero of `J_m` (`k ≥ 1`).
pub fn jn_zero(m: u32, k: usize) -> f64 {
    nth_root(move |x| jn(m, x), move |x| jn_prime(m, x), 1e-3, k)
}

/// `k`-th positive zero of `J_m'` (`k ≥ 1`). For `m = 0` the trivial zero at
/// the origin is skipped.
pub fn jn_prime_zero(m: u32, k: usize) -> f64 {
    nth_root(move |x| jn_prime(m, x), move |x| jn_second(m, x), 1e-3, k)
}
