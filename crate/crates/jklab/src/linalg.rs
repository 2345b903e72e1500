//! Small dense linear-algebra helpers: matrix products and a preconditioned
//! conjugate-gradient solver.

use crate::{Error, Result};

/// `c = a · b` for row-major matrices `a: m×k`, `b: k×n`.
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    let mut c = vec![0.0; m * n];
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    // SAFETY: slices have the asserted lengths and row-major strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    c
}

/// Jacobi-preconditioned conjugate gradient for a symmetric positive definite
/// operator given by `apply(x, out)`.
///
/// Converges when `‖r‖ ≤ tol·‖b‖`.
pub fn conjugate_gradient<F>(apply: F, diag: &[f64], b: &[f64], tol: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    if diag.len() != n {
        return Err(Error::Invalid("preconditioner length mismatch".into()));
    }
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::Numeric(format!(
            "system is not positive definite: diagonal entry {i} is {}",
            diag[i]
        )));
    }
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let max_iter = 20 * n + 200;
    for _ in 0..max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Numeric(format!("conjugate gradient breakdown: pᵀAp = {pap}")));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= tol * bnorm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Numeric(format!(
        "conjugate gradient did not reach residual {tol} in {max_iter} iterations"
    )))
}

/// Solve `A x = b` for a dense symmetric positive definite row-major `A`.
pub fn cg_dense(a: &[f64], b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = b.len();
    let diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    conjugate_gradient(
        |x, out| {
            for (i, o) in out.iter_mut().enumerate() {
                *o = dot(&a[i * n..(i + 1) * n], x);
            }
        },
        &diag,
        b,
        tol,
    )
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
