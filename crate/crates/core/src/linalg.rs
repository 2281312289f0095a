//! Krylov kernels for Hermitian operators on complex vectors.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

/// A Hermitian linear map `C^n → C^n`.
pub trait HermitianOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]);
}

pub fn dot(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm_sqr(x: &[Complex64]) -> f64 {
    x.iter().map(|a| a.norm_sqr()).sum()
}

pub fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for `A x = b`, `A` Hermitian
/// positive definite. `x` holds the initial guess on entry.
///
/// Returns `Err` with the final statistics if the tolerance is not reached in
/// `max_iter` iterations.
pub fn pcg<A: HermitianOperator + ?Sized>(
    a: &A,
    inv_diag: &[f64],
    b: &[Complex64],
    x: &mut [Complex64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<CgStats, CgStats> {
    let n = a.dim();
    let b_norm = norm_sqr(b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        return Ok(CgStats { iterations: 0, relative_residual: 0.0 });
    }
    let mut r = vec![Complex64::new(0.0, 0.0); n];
    a.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z: Vec<Complex64> = r.iter().zip(inv_diag).map(|(ri, d)| ri * d).collect();
    let mut p = z.clone();
    let mut ap = vec![Complex64::new(0.0, 0.0); n];
    let mut rz = dot(&r, &z).re;
    let mut res = norm_sqr(&r).sqrt() / b_norm;
    let mut it = 0;
    while res > rel_tol {
        if it == max_iter {
            return Err(CgStats { iterations: it, relative_residual: res });
        }
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap).re;
        if !(pap > 0.0) {
            return Err(CgStats { iterations: it, relative_residual: res });
        }
        let alpha = rz / pap;
        axpy(Complex64::new(alpha, 0.0), &p, x);
        axpy(Complex64::new(-alpha, 0.0), &ap, &mut r);
        for ((zi, ri), d) in z.iter_mut().zip(&r).zip(inv_diag) {
            *zi = ri * d;
        }
        let rz_new = dot(&r, &z).re;
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + *pi * beta;
        }
        res = norm_sqr(&r).sqrt() / b_norm;
        it += 1;
    }
    Ok(CgStats { iterations: it, relative_residual: res })
}

/// Smallest Ritz value of a Hermitian operator after `steps` Lanczos
/// iterations with full reorthogonalization, together with the smallest Ritz
/// values of the previous sweep (for convergence monitoring).
pub fn lanczos_extremes<A: HermitianOperator + ?Sized>(
    a: &A,
    start: &[Complex64],
    steps: usize,
) -> LanczosResult {
    let n = a.dim();
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(steps);
    let mut alphas = Vec::with_capacity(steps);
    let mut betas: Vec<f64> = Vec::with_capacity(steps);
    let mut q = start.to_vec();
    let q_norm = norm_sqr(&q).sqrt();
    q.iter_mut().for_each(|v| *v /= q_norm);
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..steps {
        a.apply(&q, &mut w);
        let alpha = dot(&q, &w).re;
        axpy(Complex64::new(-alpha, 0.0), &q, &mut w);
        if k > 0 {
            axpy(Complex64::new(-betas[k - 1], 0.0), &basis[k - 1], &mut w);
        }
        basis.push(q.clone());
        alphas.push(alpha);
        // full reorthogonalization against every stored vector
        for v in &basis {
            let c = dot(v, &w);
            axpy(-c, v, &mut w);
        }
        let beta = norm_sqr(&w).sqrt();
        if beta < 1e-12 * alpha.abs().max(1.0) {
            break;
        }
        betas.push(beta);
        q = w.iter().map(|v| v / beta).collect();
    }
    let m = alphas.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let mut ritz: Vec<f64> = SymmetricEigen::new(t).eigenvalues.iter().copied().collect();
    ritz.sort_by(|a, b| a.total_cmp(b));
    LanczosResult { ritz, steps: m }
}

#[derive(Clone, Debug)]
pub struct LanczosResult {
    /// Ritz values in ascending order.
    pub ritz: Vec<f64>,
    pub steps: usize,
}

impl LanczosResult {
    pub fn min(&self) -> f64 {
        self.ritz[0]
    }
}
