use serde::Serialize;

use super::HomTensor;
use crate::energy::{BodyForce, Problem};
use crate::environment::WeightField;
use crate::error::{Error, Result};
use crate::lattice::{box_cells, Convention, Lattice, Region};
use crate::potentials::Potential;
use crate::solver::{minimize, pcg, LinearOperator, SolverConfig};
use crate::util::KahanSum;

/// Constant-coefficient discrete problem on εℤᵈ ∩ A with density ½ D·𝕃D,
/// where D stacks the forward differences D_{c,j} u(z) = (u_c(z + εe_j) −
/// u_c(z))/ε. Diagonal terms count every forward edge inside A; cross terms
/// only cells whose d forward edges all lie in A. Nodes within εR of the
/// complement are fixed to g, as for the lattice problem.
pub struct HomReference {
    m: u32,
    n: usize,
    d: usize,
    lo: Vec<i64>,
    hi: Vec<i64>,
    l: Vec<f64>,
    /// Free-unknown index per node, or None.
    dof: Vec<Option<usize>>,
    base: Vec<f64>,
    force: Vec<f64>,
    dim: usize,
}

impl HomReference {
    pub fn new(
        lattice: &Lattice,
        tensor: &HomTensor,
        m: u32,
        region: &Region,
        g: &dyn Fn(&[f64]) -> Vec<f64>,
        force: &BodyForce,
    ) -> Result<Self> {
        let n = lattice.n();
        let d = lattice.d();
        if tensor.dim != n * d {
            return Err(Error::InvalidSpec(format!("tensor dimension {} does not match n·d = {}", tensor.dim, n * d)));
        }
        let (lo, hi) = region.grid_bounds(m)?;
        let eps = 1.0 / m as f64;
        let range = lattice.range();
        let mut dof = Vec::new();
        let mut base = Vec::new();
        let mut fv = Vec::new();
        let mut dim = 0;
        for z in box_cells(&lo, &hi) {
            let dist = (0..d).map(|k| ((z[k] - lo[k]).min(hi[k] - z[k])) as f64).fold(f64::INFINITY, f64::min);
            let x: Vec<f64> = z.iter().map(|&c| c as f64 * eps).collect();
            if dist > range + 1e-9 {
                dof.push(Some(dim));
                dim += n;
                base.extend(std::iter::repeat_n(0.0, n));
            } else {
                dof.push(None);
                base.extend_from_slice(&g(&x)[..n]);
            }
            fv.extend_from_slice(&force.at(&x)[..n]);
        }
        Ok(Self { m, n, d, lo, hi, l: tensor.matrix.clone(), dof, base, force: fv, dim })
    }

    fn node(&self, z: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for k in 0..self.d {
            if z[k] < self.lo[k] || z[k] >= self.hi[k] {
                return None;
            }
            idx = idx * (self.hi[k] - self.lo[k]) as usize + (z[k] - self.lo[k]) as usize;
        }
        Some(idx)
    }

    /// For each cell: (node index, forward neighbour per direction).
    fn cells(&self) -> impl Iterator<Item = (usize, Vec<Option<usize>>)> + '_ {
        box_cells(&self.lo, &self.hi).map(move |z| {
            let here = self.node(&z).expect("cell inside box");
            let fwd = (0..self.d)
                .map(|j| {
                    let mut y = z.clone();
                    y[j] += 1;
                    self.node(&y)
                })
                .collect();
            (here, fwd)
        })
    }

    fn weight(&self) -> f64 {
        (self.m as f64).powi(-(self.d as i32))
    }

    fn mask(&self, fwd: &[Option<usize>], a: usize, b: usize) -> f64 {
        let ja = a % self.d;
        if a == b {
            return if fwd[ja].is_some() { 1.0 } else { 0.0 };
        }
        if fwd.iter().all(|f| f.is_some()) {
            1.0
        } else {
            0.0
        }
    }

    fn differences(&self, u: &[f64], here: usize, fwd: &[Option<usize>]) -> Vec<f64> {
        let (n, d) = (self.n, self.d);
        let h = self.m as f64;
        let mut dv = vec![0.0; n * d];
        for c in 0..n {
            for j in 0..d {
                if let Some(y) = fwd[j] {
                    dv[c * d + j] = (u[y * n + c] - u[here * n + c]) * h;
                }
            }
        }
        dv
    }

    /// ∂/∂u of the quadratic part, for every node.
    fn grad_full(&self, u: &[f64]) -> Vec<f64> {
        let (n, d, nd) = (self.n, self.d, self.n * self.d);
        let s = self.weight() * self.m as f64;
        let mut out = vec![0.0; u.len()];
        for (here, fwd) in self.cells() {
            let dv = self.differences(u, here, &fwd);
            for a in 0..nd {
                let Some(y) = fwd[a % d] else { continue };
                let w: f64 = (0..nd).map(|b| self.l[a * nd + b] * self.mask(&fwd, a, b) * dv[b]).sum();
                let c = a / d;
                out[y * n + c] += s * w;
                out[here * n + c] -= s * w;
            }
        }
        out
    }

    fn embed(&self, x: &[f64], base: bool) -> Vec<f64> {
        let n = self.n;
        let mut u = if base { self.base.clone() } else { vec![0.0; self.base.len()] };
        for (node, dof) in self.dof.iter().enumerate() {
            if let Some(j) = dof {
                u[node * n..(node + 1) * n].copy_from_slice(&x[*j..*j + n]);
            }
        }
        u
    }

    fn restrict(&self, full: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (node, dof) in self.dof.iter().enumerate() {
            if let Some(j) = dof {
                out[*j..*j + n].copy_from_slice(&full[node * n..(node + 1) * n]);
            }
        }
    }

    /// J(u) = ε^d Σ ½ D·𝕃D − ε^d Σ f·u for unknowns x.
    pub fn value(&self, x: &[f64]) -> f64 {
        let u = self.embed(x, true);
        let nd = self.n * self.d;
        let mut acc = KahanSum::new();
        for (here, fwd) in self.cells() {
            let dv = self.differences(&u, here, &fwd);
            for a in 0..nd {
                for b in 0..nd {
                    acc.add(0.5 * self.l[a * nd + b] * self.mask(&fwd, a, b) * dv[a] * dv[b]);
                }
            }
        }
        for (f, v) in self.force.iter().zip(&u) {
            acc.add(-f * v);
        }
        acc.value() * self.weight()
    }

    /// Minimum of J by preconditioned CG.
    pub fn solve(&self, cfg: &SolverConfig) -> Result<(f64, Vec<f64>)> {
        if self.dim == 0 {
            return Ok((self.value(&[]), Vec::new()));
        }
        let mut g0 = self.grad_full(&self.base);
        let w = self.weight();
        g0.iter_mut().zip(&self.force).for_each(|(g, f)| *g -= w * f);
        let mut b = vec![0.0; self.dim];
        self.restrict(&g0, &mut b);
        b.iter_mut().for_each(|v| *v = -*v);
        let out = pcg(self, &b, &vec![0.0; self.dim], cfg.tol, cfg.max_iter.max(10 * self.dim))?;
        if cfg.strict && !out.converged {
            return Err(Error::NoConvergence { iterations: out.iterations, grad_norm: out.residual });
        }
        Ok((self.value(&out.x), out.x))
    }
}

impl LinearOperator for HomReference {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let g = self.grad_full(&self.embed(v, false));
        self.restrict(&g, out);
    }

    fn diagonal(&self) -> Vec<f64> {
        let (n, d, nd) = (self.n, self.d, self.n * self.d);
        let s = self.weight() * (self.m as f64).powi(2);
        let mut diag = vec![0.0; self.base.len()];
        for (here, fwd) in self.cells() {
            for c in 0..n {
                for j in 0..d {
                    let a = c * d + j;
                    let Some(y) = fwd[j] else { continue };
                    diag[y * n + c] += s * self.l[a * nd + a];
                    for jj in 0..d {
                        let b = c * d + jj;
                        if fwd[jj].is_some() {
                            diag[here * n + c] += s * self.l[a * nd + b] * self.mask(&fwd, a, b);
                        }
                    }
                }
            }
        }
        let mut out = vec![0.0; self.dim];
        self.restrict(&diag, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaGapRow {
    pub m: u32,
    pub eps: f64,
    pub min_j_eps: f64,
    pub gap: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaGapReport {
    pub rows: Vec<GammaGapRow>,
    /// Reference minimum with the constant tensor at the finest ε.
    pub min_j_hom: f64,
    pub m_ref: u32,
}

impl GammaGapReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("m,eps,min_J_eps,min_J_hom,gap,iterations\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{},{},{}\n", r.m, r.eps, r.min_j_eps, self.min_j_hom, r.gap, r.iterations));
        }
        s
    }
}

/// |min J_ε − min J_hom| for each ε = 1/m in `schedule`, where J_ε = H_ε −
/// F_ε over maps equal to g near ∂A (edge-contained energy, force at the
/// nodes of A) and J_hom is the constant-coefficient reference at the
/// finest ε.
#[allow(clippy::too_many_arguments)]
pub fn gamma_gap_experiment(
    lattice: &Lattice,
    weights: &(impl WeightField + ?Sized),
    pot: &Potential,
    tensor: &HomTensor,
    g: &dyn Fn(&[f64]) -> Vec<f64>,
    force: &BodyForce,
    region: &Region,
    schedule: &[u32],
    cfg: &SolverConfig,
) -> Result<GammaGapReport> {
    if !pot.is_quadratic() {
        return Err(Error::NotQuadratic);
    }
    if !lattice.is_hypercubic() {
        return Err(Error::NotHypercubic);
    }
    let m_ref = *schedule.iter().max().ok_or_else(|| Error::InvalidSpec("empty ε-schedule".into()))?;
    let (min_j_hom, _) = HomReference::new(lattice, tensor, m_ref, region, g, force)?.solve(cfg)?;
    let mut rows = Vec::new();
    for &m in schedule {
        let p = Problem::dirichlet(lattice, weights, pot, m, region, Convention::EdgeContained, g, Some(force))?;
        let x0 = p.x_from(|c, i| {
            let x: Vec<f64> = lattice.position(c, i).iter().map(|v| v / m as f64).collect();
            g(&x)
        });
        let r = minimize(&p, cfg, Some(&x0))?;
        rows.push(GammaGapRow {
            m,
            eps: 1.0 / m as f64,
            min_j_eps: r.value,
            gap: (r.value - min_j_hom).abs(),
            iterations: r.iterations,
        });
    }
    Ok(GammaGapReport { rows, min_j_hom, m_ref })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeSpec;
    use crate::potentials::{Family, PotentialSpec};

    fn identity_tensor(scale: f64) -> HomTensor {
        HomTensor {
            dim: 2,
            matrix: vec![scale, 0.0, 0.0, scale],
            eigenvalues: vec![scale, scale],
            min_eigenvalue: scale,
            k: 1,
            samples: 1,
        }
    }

    #[test]
    fn constant_environment_reference_matches_lattice() {
        // 𝕃 = 2I reproduces Σ_b |∂_b u|² exactly on the same nodes
        let lat = Lattice::new(LatticeSpec::preset("zd-nn", 2, 1).unwrap()).unwrap();
        let w = |_: &[i64], _: usize| 1.0;
        let pot = PotentialSpec::new(Family::Quadratic).build().unwrap();
        let zero = |_: &[f64]| vec![0.0];
        let cfg = SolverConfig { tol: 1e-12, ..Default::default() };
        let rep = gamma_gap_experiment(
            &lat,
            &w,
            &pot,
            &identity_tensor(2.0),
            &zero,
            &BodyForce::Uniform(vec![1.0]),
            &Region::cube(2, 0.0, 1.0),
            &[16, 24],
            &cfg,
        )
        .unwrap();
        assert!(rep.min_j_hom < 0.0);
        assert!(rep.rows[1].gap < 1e-10);
        assert!(rep.rows[0].gap > rep.rows[1].gap);
    }

    #[test]
    fn diagonal_matches_operator() {
        let lat = Lattice::new(LatticeSpec::preset("zd-nn", 2, 2).unwrap()).unwrap();
        let mut t = identity_tensor(1.0);
        t.dim = 4;
        t.matrix = vec![
            3.0, 0.5, 0.2, 0.1, //
            0.5, 2.0, 0.3, 0.0, //
            0.2, 0.3, 4.0, 0.6, //
            0.1, 0.0, 0.6, 2.5,
        ];
        let zero = |_: &[f64]| vec![0.0, 0.0];
        let r = HomReference::new(&lat, &t, 16, &Region::cube(2, 0.0, 1.0), &zero, &BodyForce::Uniform(vec![0.0, 0.0]))
            .unwrap();
        let diag = r.diagonal();
        let mut e = vec![0.0; r.dim];
        let mut out = vec![0.0; r.dim];
        for i in 0..r.dim {
            e[i] = 1.0;
            r.apply(&e, &mut out);
            assert!((out[i] - diag[i]).abs() < 1e-9 * diag[i]);
            e[i] = 0.0;
        }
    }
}
