//! Numerical checks of the discrete inequalities: norm equivalence between
//! lattice sums and gradients, the Hölder step behind coercivity, the
//! weighted Poincaré inequality and the i.i.d. path weights.

mod paths;

pub use paths::{
    iid_mu, mu_edge_inequality_check, mu_moment_estimate, path_family, EdgeInequalityReport, MuMomentEstimate,
    PathWeight,
};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::energy::{discrete_gradient, Field};
use crate::environment::{EnvironmentSpec, WeightField};
use crate::error::{Error, Result};
use crate::lattice::{box_cells, Lattice, Region};
use crate::util::{hash_words, KahanSum};

fn pnorm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SumIntReport {
    /// Nodal quadrature of |∇u|^q over (A)₋εR.
    pub integral: f64,
    /// ε^d Σ_{z ∈ A} Σ_{b ∈ 𝓝𝓝₀} |∂ᵉ_b u(z)|^q.
    pub lattice_sum: f64,
    /// integral / lattice_sum (0 when both vanish).
    pub ratio: f64,
}

/// Per-cell gradient: least-squares fit of G with G·y_b = u(y) − u(x) over
/// the nearest-neighbour edges anchored at the cell. Exact for affine u.
fn cell_gradient_operator(lattice: &Lattice) -> Result<(Vec<usize>, DMatrix<f64>)> {
    let d = lattice.d();
    let nn: Vec<usize> = (0..lattice.num_edges()).filter(|&b| lattice.edges()[b].nn).collect();
    let mut a = DMatrix::zeros(nn.len(), d);
    for (r, &b) in nn.iter().enumerate() {
        let e = &lattice.edges()[b];
        for j in 0..d {
            a[(r, j)] = e.direction[j] * e.length;
        }
    }
    let ata = a.transpose() * &a;
    let inv = ata
        .try_inverse()
        .ok_or_else(|| Error::InvalidSpec("nearest-neighbour edges at a cell do not span ℝᵈ".into()))?;
    Ok((nn, inv * a.transpose()))
}

/// Compares ∫_{(A)₋εR}|∇u|^q with the nearest-neighbour lattice sum over A.
/// The suite maximum of the ratio estimates the constant c₀.
pub fn sumint_check(lattice: &Lattice, field: &Field, region: &Region, q: f64) -> Result<SumIntReport> {
    if !(q >= 1.0) {
        return Err(Error::ExponentViolation("q must be at least 1".into()));
    }
    let d = lattice.d();
    let n = field.n;
    let eps = field.eps();
    let w = eps.powi(d as i32);
    let (nn, pinv) = cell_gradient_operator(lattice)?;
    let (lo, hi) = region.grid_bounds(field.m)?;
    let r = lattice.range();
    let mut integral = KahanSum::new();
    let mut sum = KahanSum::new();
    let mut diffs = vec![0.0; nn.len() * n];
    for z in box_cells(&lo, &hi) {
        for (k, &b) in nn.iter().enumerate() {
            let g = discrete_gradient(lattice, field, &z, b)?;
            sum.add(pnorm(&g).powf(q));
            let len = lattice.edges()[b].length;
            for c in 0..n {
                diffs[k * n + c] = g[c] * len * eps;
            }
        }
        let x: Vec<f64> = z.iter().map(|&c| c as f64).collect();
        let inside = (0..d).all(|k| x[k] - lo[k] as f64 > r && hi[k] as f64 - x[k] > r);
        if inside {
            let mut grad = vec![0.0; n * d];
            for c in 0..n {
                for j in 0..d {
                    grad[c * d + j] = (0..nn.len()).map(|k| pinv[(j, k)] * diffs[k * n + c]).sum::<f64>() / eps;
                }
            }
            integral.add(pnorm(&grad).powf(q));
        }
    }
    let (integral, lattice_sum) = (integral.value() * w, sum.value() * w);
    let ratio = if lattice_sum > 0.0 { integral / lattice_sum } else { 0.0 };
    Ok(SumIntReport { integral, lattice_sum, ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoercivityReport {
    /// (ε^d Σ |∂u|^{βp/(β+1)})^{(β+1)/β}
    pub lhs: f64,
    /// (ε^d Σ λ^{−β})^{1/β} · ε^d Σ λ|∂u|^p
    pub rhs: f64,
    pub holds: bool,
}

/// The Hölder step with exponents ((β+1)/β, β+1) over the anchored
/// nearest-neighbour edges of A. Any failure is an arithmetic bug.
pub fn coercivity_diagnostic(
    lattice: &Lattice,
    weights: &(impl WeightField + ?Sized),
    field: &Field,
    region: &Region,
    p: f64,
    beta: f64,
) -> Result<CoercivityReport> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::ExponentViolation("β must be positive and finite".into()));
    }
    let s = beta * p / (beta + 1.0);
    let w = field.eps().powi(lattice.d() as i32);
    let (lo, hi) = region.grid_bounds(field.m)?;
    let (mut a, mut inv, mut en) = (KahanSum::new(), KahanSum::new(), KahanSum::new());
    for z in box_cells(&lo, &hi) {
        for (b, e) in lattice.edges().iter().enumerate() {
            if !e.nn {
                continue;
            }
            let g = pnorm(&discrete_gradient(lattice, field, &z, b)?);
            let lam = weights.weight(&z, b);
            a.add(g.powf(s));
            inv.add(lam.powf(-beta));
            en.add(lam * g.powf(p));
        }
    }
    let lhs = (a.value() * w).powf((beta + 1.0) / beta);
    let rhs = (inv.value() * w).powf(1.0 / beta) * en.value() * w;
    Ok(CoercivityReport { lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-12) + f64::MIN_POSITIVE })
}

/// Exponents of the weighted Poincaré inequality. An infinite α or β
/// switches to the bounded-weight mode, which needs `bounds`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoincareParams {
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
    /// (Σ_b sup λ_b, Σ_{b ∈ 𝓝𝓝₀} sup 1/λ_b) for the bounded-weight mode.
    pub bounds: Option<(f64, f64)>,
}

impl PoincareParams {
    /// α > 1 and (1 − 1/α)/q ≥ (1 + 1/β)/p − 1/d.
    pub fn validate(&self, d: usize) -> Result<()> {
        let (p, q, a, b) = (self.p, self.q, self.alpha, self.beta);
        if !(p > 1.0 && q >= 1.0 && q.is_finite()) {
            return Err(Error::ExponentViolation("need p > 1 and 1 ≤ q < ∞".into()));
        }
        if !(a > 1.0) || !(b > 0.0) {
            return Err(Error::ExponentViolation(format!("need α > 1 and β > 0, got α = {a}, β = {b}")));
        }
        let lhs = (1.0 - 1.0 / a) / q;
        let rhs = (1.0 + 1.0 / b) / p - 1.0 / d as f64;
        if lhs < rhs - 1e-12 {
            return Err(Error::ExponentViolation(format!(
                "(1 − 1/α)/q = {lhs} is below (1 + 1/β)/p − 1/d = {rhs}"
            )));
        }
        if (a.is_infinite() || b.is_infinite()) && self.bounds.is_none() {
            return Err(Error::ExponentViolation("infinite α or β needs explicit weight bounds".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoincareEntry {
    pub eps: f64,
    pub side: f64,
    pub lhs: f64,
    /// Right-hand side without the constant C.
    pub rhs: f64,
    pub implied_c: f64,
    pub m_alpha: f64,
    pub m_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct PoincareReport {
    pub entries: Vec<PoincareEntry>,
}

impl PoincareReport {
    pub fn max_implied_c(&self) -> f64 {
        self.entries.iter().map(|e| e.implied_c).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("Q_side,eps,lhs,rhs_without_C,implied_C,m_alpha,m_beta\n");
        for e in &self.entries {
            s.push_str(&format!("{},{},{},{},{},{},{}\n", e.side, e.eps, e.lhs, e.rhs, e.implied_c, e.m_alpha, e.m_beta));
        }
        s
    }
}

/// Euclidean distance from a point to a box.
fn dist_to_box(x: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&v, (&a, &b))| if v < a { a - v } else if v > b { v - b } else { 0.0 })
        .map(|t| t * t)
        .sum::<f64>()
        .sqrt()
}

/// One evaluation of the weighted Poincaré inequality on the cube Q:
/// LHS is the nodal mean over Q of |u − ⟨u⟩_Q|^q Σ_b λ_b, to the power 1/q;
/// the right-hand side is |Q|^{1/d} m_α^{1/q} m̃_β^{1/p} times the weighted
/// gradient mean over (Q)_{εR}, to the power 1/p.
pub fn poincare_check(
    lattice: &Lattice,
    weights: &(impl WeightField + ?Sized),
    field: &Field,
    cube: &Region,
    params: &PoincareParams,
) -> Result<PoincareEntry> {
    let d = lattice.d();
    params.validate(d)?;
    let (p, q) = (params.p, params.q);
    let n = field.n;
    let m = field.m;
    let eps = field.eps();
    let (lo, hi) = cube.grid_bounds(m)?;
    let vol = cube.volume();
    let w = eps.powi(d as i32) / vol;
    // nodal mean of u over Q
    let mut nodes = Vec::new();
    for z in box_cells(&lo, &hi) {
        for i in 0..lattice.num_offsets() {
            if lattice.node_in_grid_box(&z, i, &lo, &hi) {
                nodes.push((z.clone(), i));
            }
        }
    }
    // values relative to the first node, so a constant field has exactly
    // zero deviation
    let origin = field.get(&nodes[0].0, nodes[0].1)?.to_vec();
    let mut mean = vec![0.0; n];
    for (z, i) in &nodes {
        let u = field.get(z, *i)?;
        mean.iter_mut().zip(u.iter().zip(&origin)).for_each(|(m, (v, o))| *m += v - o);
    }
    mean.iter_mut().for_each(|m| *m /= nodes.len() as f64);
    let lam_sum = |z: &[i64]| (0..lattice.num_edges()).map(|b| weights.weight(z, b)).sum::<f64>();
    let mut lhs = KahanSum::new();
    for (z, i) in &nodes {
        let u = field.get(z, *i)?;
        let dev: Vec<f64> = u.iter().zip(&origin).zip(&mean).map(|((a, o), b)| (a - o) - b).collect();
        lhs.add(pnorm(&dev).powf(q) * lam_sum(z));
    }
    let lhs = (lhs.value() / nodes.len() as f64).powf(1.0 / q);
    let m_alpha = if params.alpha.is_infinite() {
        params.bounds.expect("validated").0
    } else {
        let mut acc = KahanSum::new();
        for z in box_cells(&lo, &hi) {
            for b in 0..lattice.num_edges() {
                acc.add(weights.weight(&z, b).powf(params.alpha));
            }
        }
        (acc.value() * w).powf(1.0 / params.alpha)
    };
    // anchors within εR of Q
    let r = lattice.range();
    let pad = r.ceil() as i64;
    let glo: Vec<i64> = lo.iter().map(|x| x - pad).collect();
    let ghi: Vec<i64> = hi.iter().map(|x| x + pad).collect();
    let flo: Vec<f64> = lo.iter().map(|&x| x as f64).collect();
    let fhi: Vec<f64> = hi.iter().map(|&x| x as f64).collect();
    let (mut inv, mut grad) = (KahanSum::new(), KahanSum::new());
    for z in box_cells(&glo, &ghi) {
        let x: Vec<f64> = z.iter().map(|&c| c as f64).collect();
        if dist_to_box(&x, &flo, &fhi) >= r {
            continue;
        }
        for (b, e) in lattice.edges().iter().enumerate() {
            if !e.nn {
                continue;
            }
            let lam = weights.weight(&z, b);
            inv.add(lam.powf(-params.beta));
            grad.add(lam * pnorm(&discrete_gradient(lattice, field, &z, b)?).powf(p));
        }
    }
    let m_beta = if params.beta.is_infinite() {
        params.bounds.expect("validated").1
    } else {
        (inv.value() * w).powf(1.0 / params.beta)
    };
    let grad = grad.value() * w;
    let rhs = vol.powf(1.0 / d as f64) * m_alpha.powf(1.0 / q) * m_beta.powf(1.0 / p) * grad.powf(1.0 / p);
    let implied_c = if lhs == 0.0 { 0.0 } else if rhs == 0.0 { f64::INFINITY } else { lhs / rhs };
    Ok(PoincareEntry { eps, side: cube.hi[0] - cube.lo[0], lhs, rhs, implied_c, m_alpha, m_beta })
}

/// Random smooth-plus-noise field for inequality trials: three Fourier
/// modes per component with integer wave vectors in [−2, 2]ᵈ, plus nodal
/// Gaussian noise of standard deviation `noise`.
pub fn random_trial_field(
    lattice: &Lattice,
    m: u32,
    region: &Region,
    halo: i64,
    noise: f64,
    rng: &mut impl Rng,
) -> Result<Field> {
    let (d, n) = (lattice.d(), lattice.n());
    let modes: Vec<(Vec<f64>, f64, f64)> = (0..3 * n)
        .map(|_| {
            let kv: Vec<f64> = (0..d).map(|_| rng.random_range(-2i32..=2) as f64).collect();
            let amp: f64 = rng.sample(StandardNormal);
            (kv, amp, rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let mut field = Field::sample(lattice, m, region, halo, |x| {
        (0..n)
            .map(|c| {
                modes[3 * c..3 * c + 3]
                    .iter()
                    .map(|(kv, a, ph)| a * (std::f64::consts::TAU * crate::util::dot(kv, x) + ph).sin())
                    .sum()
            })
            .collect()
    })?;
    if noise > 0.0 {
        for v in field.values.iter_mut() {
            *v += noise * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(field)
}

/// Poincaré trials on random (u, Q, ε): trial t uses ε = 1/schedule[t mod
/// len], environment sample t, a cube of 2..=m cells at a random cell
/// offset in [0, m)ᵈ and a field from [`random_trial_field`] with noise 0
/// or 0.1. Trials are independent and seeded by (seed, t).
pub fn poincare_suite(
    lattice: &Lattice,
    spec: &EnvironmentSpec,
    params: &PoincareParams,
    schedule: &[u32],
    trials: usize,
    seed: u64,
) -> Result<PoincareReport> {
    params.validate(lattice.d())?;
    spec.validate(lattice)?;
    if schedule.is_empty() || schedule.contains(&0) {
        return Err(Error::ConfigInvalid("ε-schedule must list positive m = 1/ε".into()));
    }
    let d = lattice.d();
    let halo = lattice.range().ceil() as i64 + lattice.reach() + 1;
    let entries = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(hash_words(&[seed, t as u64]));
            let m = schedule[t % schedule.len()];
            let cells = rng.random_range(2..=m.max(2)) as f64;
            let lo: Vec<f64> = (0..d).map(|_| rng.random_range(0..m) as f64).collect();
            let cube = Region::new(
                lo.iter().map(|x| x / m as f64).collect(),
                lo.iter().map(|x| (x + cells) / m as f64).collect(),
            )?;
            let noise = if rng.random_bool(0.5) { 0.1 } else { 0.0 };
            let u = random_trial_field(lattice, m, &cube, halo, noise, &mut rng)?;
            poincare_check(lattice, &spec.sample(t as u64), &u, &cube, params)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PoincareReport { entries })
}
