//! Small Krylov and dense helpers shared by the operator and spectrum code.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct GmresInfo {
    pub iterations: usize,
    pub residual: f64,
}

/// Right-preconditioned restarted GMRES for `A x = b`.
///
/// `tol` is relative to `‖b‖`. Returns the solution and iteration count, or a
/// solver error carrying the final residual.
pub fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<(Vec<f64>, GmresInfo)> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, GmresInfo { iterations: 0, residual: 0.0 }));
    }
    let mut total = 0;
    let mut resid;
    while total < max_iter {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        resid = beta / bnorm;
        if resid <= tol {
            return Ok((x, GmresInfo { iterations: total, residual: resid }));
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|e| e / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::new();
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..restart {
            let zk = precond(&v[k]);
            let mut w = apply(&zk);
            z.push(zk);
            for _ in 0..2 {
                for i in 0..=k {
                    let hij = dot(&w, &v[i]);
                    h[i][k] += hij;
                    w.iter_mut().zip(&v[i]).for_each(|(a, b)| *a -= hij * b);
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            total += 1;
            resid = g[k + 1].abs() / bnorm;
            if resid <= tol || hn == 0.0 || total >= max_iter {
                break;
            }
            v.push(w.iter().map(|e| e / hn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            x.iter_mut().zip(&z[i]).for_each(|(a, b)| *a += yi * b);
        }
    }
    let ax = apply(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    resid = norm(&r) / bnorm;
    if resid <= tol * 10.0 {
        return Ok((x, GmresInfo { iterations: total, residual: resid }));
    }
    Err(Error::Solver(format!("gmres stalled after {total} iterations at relative residual {resid:.3e}")))
}

/// Ritz pairs from an Arnoldi factorisation.
#[derive(Debug, Clone)]
pub struct Arnoldi {
    pub ritz: Vec<Complex64>,
    /// Residual estimate `|h_{m+1,m} y_m|` for each Ritz value.
    pub residual: Vec<f64>,
}

/// `steps` Arnoldi iterations with full reorthogonalisation from `start`.
pub fn arnoldi(apply: impl Fn(&[f64]) -> Result<Vec<f64>>, start: &[f64], steps: usize) -> Result<Arnoldi> {
    let n = start.len();
    let m = steps.min(n);
    let s = norm(start);
    let mut v: Vec<Vec<f64>> = vec![start.iter().map(|e| e / s).collect()];
    let mut h = DMatrix::<f64>::zeros(m + 1, m);
    let mut used = m;
    for k in 0..m {
        let mut w = apply(&v[k])?;
        for _ in 0..2 {
            for i in 0..=k {
                let c = dot(&w, &v[i]);
                h[(i, k)] += c;
                w.iter_mut().zip(&v[i]).for_each(|(a, b)| *a -= c * b);
            }
        }
        let hn = norm(&w);
        h[(k + 1, k)] = hn;
        if hn < 1e-14 {
            used = k + 1;
            break;
        }
        v.push(w.iter().map(|e| e / hn).collect());
    }
    let hm = h.view((0, 0), (used, used)).into_owned();
    let tail = h[(used, used - 1)];
    let hc = hm.map(|e| Complex64::new(e, 0.0));
    let schur = nalgebra::Schur::new(hc.clone());
    let vals = schur.eigenvalues().ok_or_else(|| Error::Solver("hessenberg eigenvalues failed".into()))?;
    let mut ritz = Vec::new();
    let mut residual = Vec::new();
    for &theta in vals.iter() {
        let y = inverse_iteration(&hc, theta)?;
        ritz.push(theta);
        residual.push(tail * y[used - 1].norm());
    }
    Ok(Arnoldi { ritz, residual })
}

/// Unit eigenvector of a complex matrix for an (approximate) eigenvalue.
pub fn inverse_iteration(a: &DMatrix<Complex64>, lambda: Complex64) -> Result<DVector<Complex64>> {
    let n = a.nrows();
    let scale = a.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
    let shift = lambda + Complex64::new(1e-10 * scale, 1e-10 * scale);
    let mut m = a.clone();
    for i in 0..n {
        m[(i, i)] -= shift;
    }
    let lu = m.lu();
    let mut x = DVector::from_fn(n, |i, _| Complex64::new(1.0 + (i as f64 * 0.37).sin(), 0.1));
    for _ in 0..3 {
        x = lu.solve(&x).ok_or_else(|| Error::Solver("singular shifted matrix".into()))?;
        let s = x.norm();
        x /= Complex64::new(s, 0.0);
    }
    Ok(x)
}

/// Eigenvalues (ascending) and eigenvectors of the symmetric pencil `(a, b)`
/// with `b` positive definite.
pub fn generalized_symmetric(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let chol = b.clone().cholesky().ok_or_else(|| Error::Solver("pencil metric is not positive definite".into()))?;
    let l = chol.l();
    let linv = l.clone().try_inverse().ok_or_else(|| Error::Solver("singular cholesky factor".into()))?;
    let c = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = linv.transpose() * eig.eigenvectors.select_columns(&idx);
    Ok((vals, vecs))
}

/// Complex analogue of [`generalized_symmetric`] for Hermitian pencils.
pub fn generalized_hermitian(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let chol = b.clone().cholesky().ok_or_else(|| Error::Solver("pencil metric is not positive definite".into()))?;
    let linv = chol.l().try_inverse().ok_or_else(|| Error::Solver("singular cholesky factor".into()))?;
    let c = &linv * a * linv.adjoint();
    let c = (&c + c.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = c.symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = linv.adjoint() * eig.eigenvectors.select_columns(&idx);
    Ok((vals, vecs))
}
