//! Cell problems and the quantities built from them: m_F, W_hom^(k), Monte
//! Carlo estimates of W₀, the quadratic tensor 𝕃 and the Γ-gap experiment.

mod estimate;
mod gamma;
mod tensor;

pub use estimate::{estimate_w0, growth_bounds_check, GrowthCertificate, WhomEstimate, WhomLevel, WhomRow};
pub use gamma::{gamma_gap_experiment, GammaGapReport, GammaGapRow, HomReference};
pub use tensor::{extract_tensor, HomTensor};

use serde::Serialize;

use crate::energy::Problem;
use crate::environment::WeightField;
use crate::error::Result;
use crate::lattice::{Convention, Lattice, Region};
use crate::potentials::Potential;
use crate::solver::{minimize, SolveResult, SolverConfig};

#[derive(Debug, Clone, Serialize)]
pub struct CellProblemResult {
    /// F as an n×d row-major matrix.
    pub f: Vec<f64>,
    pub k: Option<u32>,
    pub region: Option<Region>,
    /// Energy per unit volume.
    pub value: f64,
    pub solve: SolveResult,
}

/// g_F(x) = F x.
pub fn affine(f: &[f64], n: usize) -> impl Fn(&[f64]) -> Vec<f64> + '_ {
    move |x: &[f64]| {
        let d = x.len();
        (0..n).map(|c| (0..d).map(|j| f[c * d + j] * x[j]).sum()).collect()
    }
}

/// Closed form of W_hom^(k)(ℓ e_j) for the layered p-power energy on ℤᵈ,
/// where the weight of every edge depends on z₁ only (read from edge 0):
/// ℓᵖ (k⁻¹Σ ω^{−1/(p−1)})^{−(p−1)} along e₁ and ℓᵖ k⁻¹Σ ω transversally.
/// Each row (e₁) or column (e_j) decouples into a one-dimensional problem,
/// so both are exact for every p > 1.
pub fn layered_closed_form(weights: &(impl WeightField + ?Sized), d: usize, k: u32, j: usize, ell: f64, p: f64) -> f64 {
    let omega = (0..k as i64).map(|z| {
        let mut c = vec![0i64; d];
        c[0] = z;
        weights.weight(&c, 0)
    });
    if j == 0 {
        let h = omega.map(|w| w.powf(-1.0 / (p - 1.0))).sum::<f64>() / k as f64;
        ell.abs().powf(p) * h.powf(-(p - 1.0))
    } else {
        ell.abs().powf(p) * omega.sum::<f64>() / k as f64
    }
}

/// Dirichlet cell problem at scale 1: the minimum of E₁(g_F + φ, A) over
/// correctors vanishing within R of ∂A, divided by |A|. Edges are anchored
/// at the integer points of A.
pub fn m_f(
    lattice: &Lattice,
    weights: &(impl WeightField + ?Sized),
    pot: &Potential,
    f: &[f64],
    region: &Region,
    cfg: &SolverConfig,
) -> Result<CellProblemResult> {
    let (res, _) = m_f_with_problem(lattice, weights, pot, f, region, cfg)?;
    Ok(res)
}

fn m_f_with_problem(
    lattice: &Lattice,
    weights: &(impl WeightField + ?Sized),
    pot: &Potential,
    f: &[f64],
    region: &Region,
    cfg: &SolverConfig,
) -> Result<(CellProblemResult, Problem)> {
    let g = affine(f, lattice.n());
    let problem = Problem::dirichlet(lattice, weights, pot, 1, region, Convention::ZAnchored, &g, None)?;
    let x0 = problem.x_from(|c, i| g(&lattice.position(c, i)));
    let solve = minimize(&problem, cfg, Some(&x0))?;
    let res = CellProblemResult {
        f: f.to_vec(),
        k: None,
        region: Some(region.clone()),
        value: solve.value / region.volume(),
        solve,
    };
    Ok((res, problem))
}

/// Periodic cell problem W_hom^(k)(ω; F) = k⁻ᵈ min E₁(g_F + φ, kY) over
/// kℤᵈ-periodic φ. `warm` is an optional starting corrector.
pub fn whom_k(
    lattice: &Lattice,
    weights: &(impl WeightField + ?Sized),
    pot: &Potential,
    f: &[f64],
    k: u32,
    cfg: &SolverConfig,
    warm: Option<&[f64]>,
) -> Result<CellProblemResult> {
    let problem = Problem::periodic(lattice, weights, pot, k, f, false)?;
    let solve = minimize(&problem, cfg, warm)?;
    Ok(CellProblemResult {
        f: f.to_vec(),
        k: Some(k),
        region: None,
        value: solve.value / (k as f64).powi(lattice.d() as i32),
        solve,
    })
}

/// Both cell problems on kY for one sample: (W_hom^(k), m_F(kY)/kᵈ).
/// For nonconvex potentials the periodic solve starts from the periodic
/// extension of the Dirichlet minimizer, so the first value never exceeds
/// the second beyond solver tolerance.
pub fn sandwich_pair(
    lattice: &Lattice,
    weights: &(impl WeightField + ?Sized),
    pot: &Potential,
    f: &[f64],
    k: u32,
    cfg: &SolverConfig,
) -> Result<(CellProblemResult, CellProblemResult)> {
    let d = lattice.d();
    let n = lattice.n();
    let region = Region::cube(d, 0.0, k as f64);
    let (dir, dp) = m_f_with_problem(lattice, weights, pot, f, &region, cfg)?;
    let warm = if pot.is_convex() {
        None
    } else {
        let u = dp.full(&dir.solve.x);
        let g = affine(f, n);
        let per = Problem::periodic(lattice, weights, pot, k, f, false)?;
        let lookup: std::collections::HashMap<&(Vec<i64>, usize), usize> =
            dp.slot_nodes.iter().enumerate().map(|(s, key)| (key, s)).collect();
        let x = per.x_from(|c, i| {
            let s = lookup[&(c.to_vec(), i)];
            let gx = g(&lattice.position(c, i));
            (0..n).map(|cc| u[s * n + cc] - gx[cc]).collect()
        });
        Some(x)
    };
    let per = whom_k(lattice, weights, pot, f, k, cfg, warm.as_deref())?;
    Ok((per, dir))
}
