//! Disjoint path families on ℤᵈ and the path weight μ of an edge.
//!
//! For e = [z, z+eᵢ] and j the first index ≠ i the family is
//!
//! ```text
//!   ℓ₁        z → z+eᵢ
//!   staples   z → z±eⱼ → z+eᵢ±eⱼ → z+eᵢ             (every j ≠ i, both signs)
//!   loop      z → z−eᵢ → z−eᵢ+eⱼ → z−eᵢ+2eⱼ → z+2eⱼ → z+eᵢ+2eⱼ
//!               → z+2eᵢ+2eⱼ → z+2eᵢ+eⱼ → z+2eᵢ → z+eᵢ
//!
//!        +2eⱼ  o---o---o---o
//!              |           |
//!        +eⱼ   o   o---o   o
//!              |   |   |   |
//!         0    o---z---o---o
//!                  |   |
//!        −eⱼ       o---o
//! ```
//!
//! which gives 2d edge-disjoint paths of length ≤ 9 inside B₄(z).

use rayon::prelude::*;
use serde::Serialize;

use crate::energy::{discrete_gradient, Field};
use crate::environment::{EnvironmentSpec, WeightField};
use crate::error::{Error, Result};
use crate::lattice::{box_cells, Lattice, Region};
use crate::util::mean_se;

/// Undirected edge [a, a + e_k] as (a, k).
pub type UnitEdge = (Vec<i64>, usize);

fn unit_edge(x: &[i64], y: &[i64]) -> UnitEdge {
    let k = (0..x.len()).find(|&k| x[k] != y[k]).expect("distinct nodes");
    debug_assert_eq!((x[k] - y[k]).abs(), 1);
    debug_assert!((0..x.len()).all(|l| l == k || x[l] == y[l]));
    if y[k] > x[k] {
        (x.to_vec(), k)
    } else {
        (y.to_vec(), k)
    }
}

/// The canonical family for [z, z+eᵢ] as lists of unit edges.
pub fn path_family(z: &[i64], i: usize) -> Vec<Vec<UnitEdge>> {
    let d = z.len();
    assert!(d >= 2 && i < d);
    let at = |steps: &[(usize, i64)]| {
        let mut x = z.to_vec();
        for &(k, s) in steps {
            x[k] += s;
        }
        x
    };
    let walk = |nodes: Vec<Vec<i64>>| nodes.windows(2).map(|w| unit_edge(&w[0], &w[1])).collect::<Vec<_>>();
    let mut family = vec![walk(vec![at(&[]), at(&[(i, 1)])])];
    for j in (0..d).filter(|&j| j != i) {
        for s in [1, -1] {
            family.push(walk(vec![at(&[]), at(&[(j, s)]), at(&[(i, 1), (j, s)]), at(&[(i, 1)])]));
        }
    }
    let j = if i == 0 { 1 } else { 0 };
    family.push(walk(vec![
        at(&[]),
        at(&[(i, -1)]),
        at(&[(i, -1), (j, 1)]),
        at(&[(i, -1), (j, 2)]),
        at(&[(j, 2)]),
        at(&[(i, 1), (j, 2)]),
        at(&[(i, 2), (j, 2)]),
        at(&[(i, 2), (j, 1)]),
        at(&[(i, 2)]),
        at(&[(i, 1)]),
    ]));
    family
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathWeight {
    pub z: Vec<i64>,
    pub direction: usize,
    pub p: f64,
    pub paths: Vec<Vec<UnitEdge>>,
    /// Σ_{b ∈ ℓ} ω(b)^{−1/(p−1)} per path.
    pub path_sums: Vec<f64>,
    pub mu: f64,
    /// Index of the minimizing path (lowest on ties).
    pub argmin: usize,
}

impl PathWeight {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// Edge index of the unit step e_k in the canonical edge list.
fn direction_edges(lattice: &Lattice) -> Result<Vec<usize>> {
    if !lattice.is_hypercubic() {
        return Err(Error::NotHypercubic);
    }
    let d = lattice.d();
    (0..d)
        .map(|k| {
            lattice
                .edges()
                .iter()
                .position(|e| e.to_cell.iter().enumerate().all(|(l, &c)| c == i64::from(l == k)))
                .ok_or(Error::NotHypercubic)
        })
        .collect()
}

fn weight_of(weights: &(impl WeightField + ?Sized), dirs: &[usize], e: &UnitEdge) -> f64 {
    weights.weight(&e.0, dirs[e.1])
}

fn path_weight(
    weights: &(impl WeightField + ?Sized),
    dirs: &[usize],
    z: &[i64],
    i: usize,
    p: f64,
) -> PathWeight {
    let paths = path_family(z, i);
    let path_sums: Vec<f64> = paths
        .iter()
        .map(|l| l.iter().map(|e| weight_of(weights, dirs, e).powf(-1.0 / (p - 1.0))).sum())
        .collect();
    let mut argmin = 0;
    for (k, &s) in path_sums.iter().enumerate() {
        if s < path_sums[argmin] {
            argmin = k;
        }
    }
    // μ^{−p/(p−1)} = min Σ ω^{−1/(p−1)}
    let mu = path_sums[argmin].powf(-(p - 1.0) / p);
    PathWeight { z: z.to_vec(), direction: i, p, paths, path_sums, mu, argmin }
}

/// μ(ω; [z, z+eᵢ]) with its path family.
pub fn iid_mu(lattice: &Lattice, weights: &(impl WeightField + ?Sized), z: &[i64], i: usize, p: f64) -> Result<PathWeight> {
    let dirs = direction_edges(lattice)?;
    if z.len() != lattice.d() || i >= lattice.d() {
        return Err(Error::InvalidSpec("edge does not match the lattice dimension".into()));
    }
    if !(p > 1.0) {
        return Err(Error::ExponentViolation("μ needs p > 1".into()));
    }
    Ok(path_weight(weights, &dirs, z, i, p))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeInequalityReport {
    pub edges_checked: usize,
    pub violations: usize,
    /// max |∇v(e)| / (μ⁻¹(Σ_ℓ ω|∇v|ᵖ)^{1/p}) over edges with a nonzero bound.
    pub max_ratio: f64,
}

impl EdgeInequalityReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// |∇v(e)| ≤ μ⁻¹ (Σ_{b ∈ ℓ(e)} ω(b)|∇v(b)|ᵖ)^{1/p} for every edge anchored in
/// the region, with ℓ(e) the minimizing path. The field needs a halo of 3.
pub fn mu_edge_inequality_check(
    lattice: &Lattice,
    weights: &(impl WeightField + ?Sized),
    field: &Field,
    region: &Region,
    p: f64,
) -> Result<EdgeInequalityReport> {
    let dirs = direction_edges(lattice)?;
    if !(p > 1.0) {
        return Err(Error::ExponentViolation("μ needs p > 1".into()));
    }
    let (lo, hi) = region.grid_bounds(field.m)?;
    let grad = |e: &UnitEdge| -> Result<f64> {
        let g = discrete_gradient(lattice, field, &e.0, dirs[e.1])?;
        Ok(g.iter().map(|x| x * x).sum::<f64>().sqrt())
    };
    let mut rep = EdgeInequalityReport { edges_checked: 0, violations: 0, max_ratio: 0.0 };
    for z in box_cells(&lo, &hi) {
        for i in 0..lattice.d() {
            let pw = path_weight(weights, &dirs, &z, i, p);
            let lhs = grad(&(z.clone(), i))?;
            let mut s = 0.0;
            for e in &pw.paths[pw.argmin] {
                s += weight_of(weights, &dirs, e) * grad(e)?.powf(p);
            }
            let rhs = s.powf(1.0 / p) / pw.mu;
            rep.edges_checked += 1;
            if lhs > rhs * (1.0 + 1e-12) + f64::MIN_POSITIVE {
                rep.violations += 1;
            }
            if rhs > 0.0 {
                rep.max_ratio = rep.max_ratio.max(lhs / rhs);
            }
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuMomentEstimate {
    pub p: f64,
    pub beta: f64,
    pub gamma: f64,
    pub samples: usize,
    /// Mean of μ(ω; [0, e₁])^{−βp} over the samples.
    pub estimate: f64,
    pub se: f64,
    /// The same estimate on the first half of the samples.
    pub half_estimate: f64,
    /// |estimate − half_estimate| / estimate.
    pub relative_change: f64,
    /// 95% half-width relative to the estimate.
    pub relative_ci: f64,
    /// Set when relative_ci exceeds 0.1.
    pub wide_ci: bool,
}

impl MuMomentEstimate {
    pub fn to_csv(&self) -> String {
        format!(
            "p,beta,gamma,samples,estimate,se,half_estimate,relative_change,relative_ci,wide_ci\n{},{},{},{},{},{},{},{},{},{}\n",
            self.p,
            self.beta,
            self.gamma,
            self.samples,
            self.estimate,
            self.se,
            self.half_estimate,
            self.relative_change,
            self.relative_ci,
            self.wide_ci
        )
    }
}

/// Monte Carlo estimate of 𝔼[μ^{−βp}] for an i.i.d. environment, checking
/// γ > 1/(2d(p−1)) and 1/(p−1) ≤ β < 2dγ first.
pub fn mu_moment_estimate(
    lattice: &Lattice,
    spec: &EnvironmentSpec,
    p: f64,
    beta: f64,
    gamma: f64,
    samples: usize,
) -> Result<MuMomentEstimate> {
    let dirs = direction_edges(lattice)?;
    spec.validate(lattice)?;
    if spec.mode != crate::environment::Correlation::IidPerEdge {
        return Err(Error::HypothesisViolation("the environment must be i.i.d. per edge".into()));
    }
    if !(p > 1.0) {
        return Err(Error::ExponentViolation("μ needs p > 1".into()));
    }
    let d = lattice.d() as f64;
    if !(gamma > 1.0 / (2.0 * d * (p - 1.0))) {
        return Err(Error::HypothesisViolation(format!("γ = {gamma} must exceed 1/(2d(p−1)) = {}", 1.0 / (2.0 * d * (p - 1.0)))));
    }
    if !(beta < 2.0 * d * gamma) {
        return Err(Error::HypothesisViolation(format!("β = {beta} must be below 2dγ = {}", 2.0 * d * gamma)));
    }
    if beta < 1.0 / (p - 1.0) {
        return Err(Error::HypothesisViolation(format!("β = {beta} must be at least 1/(p−1) = {}", 1.0 / (p - 1.0))));
    }
    if spec.dist.iter().any(|dist| dist.moment_diverges(-gamma)) {
        return Err(Error::HypothesisViolation(format!("𝔼[ω^−γ] diverges for γ = {gamma}")));
    }
    if samples < 2 {
        return Err(Error::ConfigInvalid("need at least 2 samples".into()));
    }
    let z = vec![0i64; lattice.d()];
    let values: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|s| path_weight(&spec.sample(s), &dirs, &z, 0, p).mu.powf(-beta * p))
        .collect();
    let (estimate, se) = mean_se(&values);
    let (half_estimate, _) = mean_se(&values[..samples / 2]);
    let relative_ci = if estimate > 0.0 { 1.96 * se / estimate } else { 0.0 };
    Ok(MuMomentEstimate {
        p,
        beta,
        gamma,
        samples,
        estimate,
        se,
        half_estimate,
        relative_change: (estimate - half_estimate).abs() / estimate,
        relative_ci,
        wide_ci: relative_ci > 0.1,
    })
}
