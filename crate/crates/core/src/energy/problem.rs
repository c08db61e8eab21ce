use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{BodyForce, Field};
use crate::environment::WeightField;
use crate::error::{Error, Result};
use crate::lattice::{box_cells, Convention, Lattice, Region};
use crate::potentials::Potential;
use crate::util::KahanSum;

/// One compiled energy term: r = scale·(u[to] − u[from]) + shift[b].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub from: u32,
    pub to: u32,
    pub b: u32,
    pub scale: f64,
    pub lambda: f64,
}

/// Constraint kind of a cell or boundary-value problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Constraint {
    /// Nodes within distance εR of the complement of `region` are fixed to g.
    Dirichlet { m: u32, region: Region, convention: Convention },
    /// kℤᵈ-periodic corrector on top of the affine map g_F.
    Periodic { k: u32, pinned: bool },
}

const FIXED: u32 = u32::MAX;

/// A constrained energy compiled to flat index arrays. Unknowns are the
/// values of the free slots, n per slot.
#[derive(Debug, Clone)]
pub struct Problem {
    pub n: usize,
    pub d: usize,
    pub m: u32,
    pub potential: Potential,
    pub terms: Vec<Term>,
    pub shifts: Vec<f64>,
    /// ε^d, the weight of every energy term and force term.
    pub weight: f64,
    pub base: Vec<f64>,
    pub dof_of: Vec<u32>,
    pub free_slots: Vec<u32>,
    pub force: Option<Vec<f64>>,
    pub slot_nodes: Vec<(Vec<i64>, usize)>,
    /// (k, F) for periodic problems.
    pub periodic: Option<(u32, Vec<f64>)>,
    /// Energy invariant under adding a constant to every unknown.
    pub translation_gauge: bool,
    num_offsets: usize,
}

impl Problem {
    /// Dirichlet problem on `region` at ε = 1/m: nodes at distance at most
    /// εR from the complement are fixed to g; the energy uses `convention`
    /// and the optional body force acts on nodes in the region.
    #[allow(clippy::too_many_arguments)]
    pub fn dirichlet(
        lattice: &Lattice,
        weights: &(impl WeightField + ?Sized),
        pot: &Potential,
        m: u32,
        region: &Region,
        convention: Convention,
        g: &dyn Fn(&[f64]) -> Vec<f64>,
        force: Option<&BodyForce>,
    ) -> Result<Self> {
        let n = lattice.n();
        let d = lattice.d();
        let (lo, hi) = region.grid_bounds(m)?;
        let range = lattice.range();
        let eps = 1.0 / m as f64;
        let mut slot_of: HashMap<(Vec<i64>, usize), u32> = HashMap::new();
        let mut slot_nodes: Vec<(Vec<i64>, usize)> = Vec::new();
        let mut add = |key: (Vec<i64>, usize), slot_nodes: &mut Vec<(Vec<i64>, usize)>| -> u32 {
            *slot_of.entry(key.clone()).or_insert_with(|| {
                slot_nodes.push(key);
                (slot_nodes.len() - 1) as u32
            })
        };
        for c in box_cells(&lo, &hi) {
            for i in 0..lattice.num_offsets() {
                if lattice.node_in_grid_box(&c, i, &lo, &hi) {
                    add((c.clone(), i), &mut slot_nodes);
                }
            }
        }
        let mut terms = Vec::new();
        for (z, b) in lattice.edges_in_region(m, region, convention)? {
            let e = &lattice.edges()[b];
            let to: Vec<i64> = z.iter().zip(&e.to_cell).map(|(a, s)| a + s).collect();
            let from = add((z.clone(), e.from), &mut slot_nodes);
            let to = add((to, e.to), &mut slot_nodes);
            terms.push(Term { from, to, b: b as u32, scale: m as f64 / e.length, lambda: weights.weight(&z, b) });
        }
        let mut base = vec![0.0; slot_nodes.len() * n];
        let mut dof_of = vec![FIXED; slot_nodes.len()];
        let mut free_slots = Vec::new();
        for (s, (c, i)) in slot_nodes.iter().enumerate() {
            let x = lattice.position(c, *i);
            let dist = (0..d)
                .map(|k| (x[k] - lo[k] as f64).min(hi[k] as f64 - x[k]))
                .fold(f64::INFINITY, f64::min);
            if dist > range + 1e-9 {
                dof_of[s] = free_slots.len() as u32;
                free_slots.push(s as u32);
            } else {
                let xs: Vec<f64> = x.iter().map(|v| v * eps).collect();
                base[s * n..(s + 1) * n].copy_from_slice(&g(&xs)[..n]);
            }
        }
        let force = force.map(|f| {
            let mut fv = vec![0.0; slot_nodes.len() * n];
            for (s, (c, i)) in slot_nodes.iter().enumerate() {
                if lattice.node_in_grid_box(c, *i, &lo, &hi) {
                    let xs: Vec<f64> = lattice.position(c, *i).iter().map(|v| v * eps).collect();
                    fv[s * n..(s + 1) * n].copy_from_slice(&f.at(&xs)[..n]);
                }
            }
            fv
        });
        Ok(Self {
            n,
            d,
            m,
            potential: pot.clone(),
            terms,
            shifts: vec![0.0; lattice.num_edges() * n],
            weight: eps.powi(d as i32),
            base,
            dof_of,
            free_slots,
            force,
            slot_nodes,
            periodic: None,
            translation_gauge: false,
            num_offsets: lattice.num_offsets(),
        })
    }

    /// Periodic cell problem on kY at ε = 1 for u = g_F + φ, φ kℤᵈ-periodic.
    /// `f_mat` is F as an n×d row-major matrix. The affine part is never
    /// wrapped: it enters each term as the constant shift F ê_b. With
    /// `pinned`, the q₁ node of cell 0 is fixed to zero.
    pub fn periodic(
        lattice: &Lattice,
        weights: &(impl WeightField + ?Sized),
        pot: &Potential,
        k: u32,
        f_mat: &[f64],
        pinned: bool,
    ) -> Result<Self> {
        let n = lattice.n();
        let d = lattice.d();
        if k == 0 {
            return Err(Error::InvalidSpec("period k must be at least 1".into()));
        }
        if f_mat.len() != n * d {
            return Err(Error::InvalidSpec(format!("F must have {} entries", n * d)));
        }
        let kk = k as i64;
        let nof = lattice.num_offsets();
        let lin = |c: &[i64]| c.iter().fold(0i64, |acc, &x| acc * kk + x.rem_euclid(kk)) as usize;
        let lo = vec![0i64; d];
        let hi = vec![kk; d];
        let slot_nodes: Vec<(Vec<i64>, usize)> =
            box_cells(&lo, &hi).flat_map(|c| (0..nof).map(move |i| (c.clone(), i))).collect();
        let mut terms = Vec::with_capacity(slot_nodes.len() / nof * lattice.num_edges());
        for z in box_cells(&lo, &hi) {
            for (b, e) in lattice.edges().iter().enumerate() {
                let to: Vec<i64> = z.iter().zip(&e.to_cell).map(|(a, s)| a + s).collect();
                terms.push(Term {
                    from: (lin(&z) * nof + e.from) as u32,
                    to: (lin(&to) * nof + e.to) as u32,
                    b: b as u32,
                    scale: 1.0 / e.length,
                    lambda: weights.weight(&z, b),
                });
            }
        }
        let mut shifts = vec![0.0; lattice.num_edges() * n];
        for (b, e) in lattice.edges().iter().enumerate() {
            for c in 0..n {
                shifts[b * n + c] = (0..d).map(|j| f_mat[c * d + j] * e.direction[j]).sum();
            }
        }
        let mut dof_of = vec![FIXED; slot_nodes.len()];
        let mut free_slots = Vec::new();
        for s in 0..slot_nodes.len() {
            if pinned && s == 0 {
                continue;
            }
            dof_of[s] = free_slots.len() as u32;
            free_slots.push(s as u32);
        }
        Ok(Self {
            n,
            d,
            m: 1,
            potential: pot.clone(),
            terms,
            shifts,
            weight: 1.0,
            base: vec![0.0; slot_nodes.len() * n],
            dof_of,
            free_slots,
            force: None,
            slot_nodes,
            periodic: Some((k, f_mat.to_vec())),
            translation_gauge: !pinned,
            num_offsets: nof,
        })
    }

    pub fn dim(&self) -> usize {
        self.free_slots.len() * self.n
    }

    pub fn num_slots(&self) -> usize {
        self.slot_nodes.len()
    }

    pub fn is_free(&self, slot: usize) -> bool {
        self.dof_of[slot] != FIXED
    }

    /// Slot values for unknowns x.
    pub fn full(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut u = self.base.clone();
        for (j, &s) in self.free_slots.iter().enumerate() {
            let s = s as usize;
            u[s * n..(s + 1) * n].copy_from_slice(&x[j * n..(j + 1) * n]);
        }
        u
    }

    /// Unknowns from a per-node function (cell, offset) ↦ value.
    pub fn x_from(&self, f: impl Fn(&[i64], usize) -> Vec<f64>) -> Vec<f64> {
        let n = self.n;
        let mut x = vec![0.0; self.dim()];
        for (j, &s) in self.free_slots.iter().enumerate() {
            let (c, i) = &self.slot_nodes[s as usize];
            x[j * n..(j + 1) * n].copy_from_slice(&f(c, *i)[..n]);
        }
        x
    }

    #[inline]
    fn residual(&self, t: &Term, u: &[f64], r: &mut [f64]) {
        let n = self.n;
        let (a, b) = (t.from as usize * n, t.to as usize * n);
        let sh = t.b as usize * n;
        for c in 0..n {
            r[c] = t.scale * (u[b + c] - u[a + c]) + self.shifts[sh + c];
        }
    }

    /// Energy part and force part (J = energy − force).
    pub fn parts(&self, x: &[f64]) -> (f64, f64) {
        let u = self.full(x);
        let mut r = vec![0.0; self.n];
        let mut acc = KahanSum::new();
        for t in &self.terms {
            self.residual(t, &u, &mut r);
            acc.add(self.potential.eval(t.lambda, &r));
        }
        let force = match &self.force {
            Some(f) => {
                let mut fa = KahanSum::new();
                for (a, b) in f.iter().zip(&u) {
                    fa.add(a * b);
                }
                fa.value() * self.weight
            }
            None => 0.0,
        };
        (acc.value() * self.weight, force)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let (e, f) = self.parts(x);
        e - f
    }

    /// Objective value and its gradient with respect to x.
    pub fn value_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
        let n = self.n;
        let u = self.full(x);
        let mut gu = vec![0.0; u.len()];
        let mut r = vec![0.0; n];
        let mut dv = vec![0.0; n];
        let mut acc = KahanSum::new();
        for t in &self.terms {
            self.residual(t, &u, &mut r);
            acc.add(self.potential.eval(t.lambda, &r));
            self.potential.grad(t.lambda, &r, &mut dv);
            let (a, b) = (t.from as usize * n, t.to as usize * n);
            for c in 0..n {
                let v = t.scale * dv[c];
                gu[b + c] += v;
                gu[a + c] -= v;
            }
        }
        let mut val = acc.value();
        if let Some(f) = &self.force {
            let mut fa = KahanSum::new();
            for (i, (a, b)) in f.iter().zip(&u).enumerate() {
                fa.add(a * b);
                gu[i] -= a;
            }
            val -= fa.value();
        }
        for (j, &s) in self.free_slots.iter().enumerate() {
            let s = s as usize;
            for c in 0..n {
                g[j * n + c] = gu[s * n + c] * self.weight;
            }
        }
        val * self.weight
    }

    /// Hessian-vector product for quadratic potentials (V = λ|r|²).
    pub fn hess_vec(&self, v: &[f64], out: &mut [f64]) {
        let n = self.n;
        out.iter_mut().for_each(|o| *o = 0.0);
        for t in &self.terms {
            let (ja, jb) = (self.dof_of[t.from as usize], self.dof_of[t.to as usize]);
            let k = 2.0 * t.lambda * t.scale * t.scale * self.weight;
            for c in 0..n {
                let va = if ja == FIXED { 0.0 } else { v[ja as usize * n + c] };
                let vb = if jb == FIXED { 0.0 } else { v[jb as usize * n + c] };
                let w = k * (vb - va);
                if jb != FIXED {
                    out[jb as usize * n + c] += w;
                }
                if ja != FIXED {
                    out[ja as usize * n + c] -= w;
                }
            }
        }
    }

    /// Diagonal of the quadratic Hessian.
    pub fn jacobi_diag(&self) -> Vec<f64> {
        let n = self.n;
        let mut diag = vec![0.0; self.dim()];
        for t in &self.terms {
            if t.from == t.to {
                continue;
            }
            let k = 2.0 * t.lambda * t.scale * t.scale * self.weight;
            for slot in [t.from, t.to] {
                let j = self.dof_of[slot as usize];
                if j != FIXED {
                    for c in 0..n {
                        diag[j as usize * n + c] += k;
                    }
                }
            }
        }
        diag
    }

    /// Subtracts the per-component mean of x (periodic gauge).
    pub fn project_mean_zero(&self, x: &mut [f64]) {
        if !self.translation_gauge || x.is_empty() {
            return;
        }
        let n = self.n;
        let cnt = (x.len() / n) as f64;
        for c in 0..n {
            let mean = x.iter().skip(c).step_by(n).sum::<f64>() / cnt;
            x.iter_mut().skip(c).step_by(n).for_each(|v| *v -= mean);
        }
    }

    /// Node field of the full map (including g_F for periodic problems).
    pub fn to_field(&self, lattice: &Lattice, x: &[f64]) -> Field {
        let d = self.d;
        let n = self.n;
        let mut lo = vec![i64::MAX; d];
        let mut hi = vec![i64::MIN; d];
        for (c, _) in &self.slot_nodes {
            for k in 0..d {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k] + 1);
            }
        }
        let mut field = Field::zeros(self.m, n, self.num_offsets, lo, hi);
        let u = self.full(x);
        for (s, (c, i)) in self.slot_nodes.iter().enumerate() {
            let idx = field.index(c, *i).expect("slot inside bounding box");
            let mut v = u[s * n..(s + 1) * n].to_vec();
            if let Some((_, f)) = &self.periodic {
                let pos = lattice.position(c, *i);
                for (cc, vc) in v.iter_mut().enumerate() {
                    *vc += (0..d).map(|j| f[cc * d + j] * pos[j]).sum::<f64>();
                }
            }
            field.node_mut(idx).copy_from_slice(&v);
            field.free[idx] = self.is_free(s);
        }
        field
    }
}
