use std::collections::VecDeque;

use crate::util::{dot, norm2};

/// Smooth objective for quasi-Newton descent.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn value_grad(&self, x: &[f64], g: &mut [f64]) -> f64;
}

#[derive(Debug, Clone)]
pub struct LbfgsParams {
    pub tol: f64,
    pub max_iter: usize,
    pub memory: usize,
    pub backtrack: f64,
    pub armijo: f64,
}

#[derive(Debug, Clone)]
pub struct DescentOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    /// (objective, gradient norm) after each accepted step.
    pub history: Vec<(f64, f64)>,
}

/// Limited-memory BFGS with backtracking Armijo line search. Every accepted
/// step satisfies f(x + t d) ≤ f(x) + c t ∇f·d, so the objective never
/// increases. Stops when ‖∇f‖ ≤ tol·max(1, ‖∇f(x0)‖).
pub fn lbfgs(obj: &impl Objective, x0: &[f64], p: &LbfgsParams) -> DescentOutcome {
    let n = obj.dim();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = obj.value_grad(&x, &mut g);
    let target = p.tol * norm2(&g).max(1.0);
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut history = Vec::new();
    let mut it = 0;
    let mut gn = norm2(&g);
    let mut xn = vec![0.0; n];
    let mut gnew = vec![0.0; n];
    while gn > target && it < p.max_iter {
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let a = rho * dot(s, &q);
            for i in 0..n {
                q[i] -= a * y[i];
            }
            alphas.push(a);
        }
        let gamma = match mem.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 1.0 / gn.max(1.0),
        };
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for i in 0..n {
                q[i] += s[i] * (a - b);
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            mem.clear();
            dir = g.iter().map(|v| -v / gn.max(1.0)).collect();
            slope = dot(&g, &dir);
        }
        let mut t = 1.0;
        let mut accepted = false;
        let mut fnew = f;
        while t > 1e-20 {
            for i in 0..n {
                xn[i] = x[i] + t * dir[i];
            }
            fnew = obj.value_grad(&xn, &mut gnew);
            if fnew <= f + p.armijo * t * slope {
                accepted = true;
                break;
            }
            t *= p.backtrack;
        }
        if !accepted {
            break;
        }
        let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| gnew[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm2(&s) * norm2(&y) {
            if mem.len() == p.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        std::mem::swap(&mut x, &mut xn);
        std::mem::swap(&mut g, &mut gnew);
        f = fnew;
        gn = norm2(&g);
        it += 1;
        history.push((f, gn));
    }
    DescentOutcome { x, value: f, iterations: it, grad_norm: gn, converged: gn <= target, history }
}

/// Derivative-free cyclic coordinate search: each coordinate tries ±h and
/// keeps improvements; h halves after a sweep without progress.
pub fn coordinate_descent(obj: &impl Objective, x0: &[f64], h0: f64, tol: f64, max_sweeps: usize) -> DescentOutcome {
    let mut x = x0.to_vec();
    let mut f = obj.value(&x);
    let mut h = h0;
    let mut sweeps = 0;
    let mut history = Vec::new();
    while h > tol && sweeps < max_sweeps {
        let mut improved = false;
        for i in 0..x.len() {
            for s in [h, -h] {
                let old = x[i];
                x[i] = old + s;
                let fv = obj.value(&x);
                if fv < f {
                    f = fv;
                    improved = true;
                    break;
                }
                x[i] = old;
            }
        }
        if !improved {
            h *= 0.5;
        }
        sweeps += 1;
        history.push((f, h));
    }
    DescentOutcome { x, value: f, iterations: sweeps, grad_norm: h, converged: h <= tol, history }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn dim(&self) -> usize {
            2
        }
        fn value(&self, x: &[f64]) -> f64 {
            (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
        }
        fn value_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
            g[0] = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]);
            g[1] = 200.0 * (x[1] - x[0] * x[0]);
            self.value(x)
        }
    }

    #[test]
    fn lbfgs_finds_rosenbrock_minimum_monotonically() {
        let p = LbfgsParams { tol: 1e-10, max_iter: 1000, memory: 8, backtrack: 0.5, armijo: 1e-4 };
        let out = lbfgs(&Rosenbrock, &[-1.2, 1.0], &p);
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
        assert!(out.history.windows(2).all(|w| w[1].0 <= w[0].0));
    }

    #[test]
    fn coordinate_search_on_quadratic() {
        struct Q;
        impl Objective for Q {
            fn dim(&self) -> usize {
                2
            }
            fn value(&self, x: &[f64]) -> f64 {
                (x[0] - 0.3).powi(2) + 2.0 * (x[1] + 0.7).powi(2)
            }
            fn value_grad(&self, x: &[f64], _g: &mut [f64]) -> f64 {
                self.value(x)
            }
        }
        let out = coordinate_descent(&Q, &[0.0, 0.0], 0.5, 1e-9, 10_000);
        assert!((out.x[0] - 0.3).abs() < 1e-8 && (out.x[1] + 0.7).abs() < 1e-8);
    }
}
