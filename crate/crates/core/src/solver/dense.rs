use nalgebra::{DMatrix, DVector};

use crate::energy::Problem;
use crate::error::{Error, Result};

pub const MAX_DENSE_UNKNOWNS: usize = 4096;

/// Assembles the full stiffness matrix of a quadratic problem.
pub fn stiffness(problem: &Problem) -> DMatrix<f64> {
    let n = problem.n;
    let dim = problem.dim();
    let mut h = DMatrix::zeros(dim, dim);
    for t in &problem.terms {
        if t.from == t.to {
            continue;
        }
        let k = 2.0 * t.lambda * t.scale * t.scale * problem.weight;
        let ja = problem.dof_of[t.from as usize];
        let jb = problem.dof_of[t.to as usize];
        for c in 0..n {
            let a = (ja != u32::MAX).then(|| ja as usize * n + c);
            let b = (jb != u32::MAX).then(|| jb as usize * n + c);
            if let Some(a) = a {
                h[(a, a)] += k;
            }
            if let Some(b) = b {
                h[(b, b)] += k;
            }
            if let (Some(a), Some(b)) = (a, b) {
                h[(a, b)] -= k;
                h[(b, a)] -= k;
            }
        }
    }
    h
}

/// Dense Cholesky solve of a quadratic problem. Periodic problems are gauged
/// by pinning the first free slot, and the result is returned mean-zero.
pub fn solve_dense(problem: &Problem) -> Result<Vec<f64>> {
    let dim = problem.dim();
    if dim > MAX_DENSE_UNKNOWNS {
        return Err(Error::TooLarge(format!("{dim} unknowns exceed the dense limit {MAX_DENSE_UNKNOWNS}")));
    }
    if dim == 0 {
        return Ok(Vec::new());
    }
    let mut g0 = vec![0.0; dim];
    problem.value_grad(&vec![0.0; dim], &mut g0);
    let h = stiffness(problem);
    let skip = if problem.translation_gauge { problem.n } else { 0 };
    let red = dim - skip;
    let mut x = vec![0.0; dim];
    if red > 0 {
        let hr = h.view((skip, skip), (red, red)).into_owned();
        let rhs = DVector::from_iterator(red, g0[skip..].iter().map(|v| -v));
        let dmax = (0..red).map(|i| hr[(i, i)]).fold(0.0, f64::max);
        let chol = hr.cholesky().ok_or(Error::NullSpace)?;
        let l = chol.l_dirty();
        let min_pivot = (0..red).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        if !(min_pivot > 1e-12 * dmax) {
            return Err(Error::NullSpace);
        }
        let sol = chol.solve(&rhs);
        x[skip..].copy_from_slice(sol.as_slice());
    }
    problem.project_mean_zero(&mut x);
    Ok(x)
}
