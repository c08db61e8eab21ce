use crate::error::{Error, Result};
use crate::util::{dot, norm2};

/// Symmetric positive semidefinite operator for conjugate gradients.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[f64], out: &mut [f64]);
    fn diagonal(&self) -> Vec<f64>;
    /// Projection onto the complement of the known null space (identity by
    /// default).
    fn project(&self, _v: &mut [f64]) {}
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Jacobi-preconditioned CG for A x = b starting from x0. Stops when
/// ‖b − Ax‖ ≤ tol·max(1, ‖b‖). Curvature collapse along a search direction
/// is reported as `NullSpace`.
pub fn pcg(op: &impl LinearOperator, b: &[f64], x0: &[f64], tol: f64, max_iter: usize) -> Result<CgOutcome> {
    let n = op.dim();
    let mut x = x0.to_vec();
    op.project(&mut x);
    let mut bb = b.to_vec();
    op.project(&mut bb);
    let scale = norm2(&bb).max(1.0);
    let diag = op.diagonal();
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    let inv: Vec<f64> = diag.iter().map(|&v| if v > 0.0 { 1.0 / v } else { 1.0 }).collect();
    let mut ax = vec![0.0; n];
    op.apply(&x, &mut ax);
    let mut r: Vec<f64> = bb.iter().zip(&ax).map(|(a, b)| a - b).collect();
    op.project(&mut r);
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(a, b)| a * b).collect();
    op.project(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut it = 0;
    let mut res = norm2(&r);
    while res > tol * scale && it < max_iter {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        let pp = dot(&p, &p);
        if !(pap > 1e-13 * dmax.max(f64::MIN_POSITIVE) * pp) {
            return Err(Error::NullSpace);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        op.project(&mut r);
        for i in 0..n {
            z[i] = r[i] * inv[i];
        }
        op.project(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
        res = norm2(&r);
    }
    op.project(&mut x);
    Ok(CgOutcome { x, iterations: it, residual: res, converged: res <= tol * scale })
}
