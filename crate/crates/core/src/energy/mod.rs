//! Discrete energies E_ε / H_ε, body-force functionals and their gradients
//! on explicit node fields, plus compiled problems for the solvers.

mod io;
mod problem;

use std::sync::Arc;

pub use io::{read_field, write_field, field_to_csv};
pub use problem::{Constraint, Problem, Term};

use crate::environment::WeightField;
use crate::error::{Error, Result};
use crate::lattice::{box_cells, Convention, Lattice, Region};
use crate::potentials::Potential;
use crate::util::KahanSum;

/// Node values on ε𝓛 ∩ box, stored per cell (lexicographic, first
/// coordinate slowest), then per offset, then per component.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub m: u32,
    pub n: usize,
    pub num_offsets: usize,
    /// Cell box [lo, hi) in units of ε.
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
    pub values: Vec<f64>,
    pub free: Vec<bool>,
}

impl Field {
    pub fn zeros(m: u32, n: usize, num_offsets: usize, lo: Vec<i64>, hi: Vec<i64>) -> Self {
        let cells: usize = lo.iter().zip(&hi).map(|(a, b)| (b - a).max(0) as usize).product();
        let nodes = cells * num_offsets;
        Self { m, n, num_offsets, lo, hi, values: vec![0.0; nodes * n], free: vec![false; nodes] }
    }

    /// Field covering `region` plus a halo of `halo` cells on every side,
    /// with values u(x) sampled at node positions.
    pub fn sample(lattice: &Lattice, m: u32, region: &Region, halo: i64, u: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let (lo, hi) = region.grid_bounds(m)?;
        let lo: Vec<i64> = lo.iter().map(|x| x - halo).collect();
        let hi: Vec<i64> = hi.iter().map(|x| x + halo).collect();
        let mut f = Self::zeros(m, lattice.n(), lattice.num_offsets(), lo, hi);
        f.fill(lattice, u);
        Ok(f)
    }

    /// Halo in cells that covers every energy term touching a region.
    pub fn halo_for(lattice: &Lattice) -> i64 {
        lattice.reach() + 1
    }

    pub fn d(&self) -> usize {
        self.lo.len()
    }

    pub fn eps(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn num_nodes(&self) -> usize {
        self.free.len()
    }

    pub fn fill(&mut self, lattice: &Lattice, u: impl Fn(&[f64]) -> Vec<f64>) {
        let nodes: Vec<(Vec<i64>, usize)> = self.nodes().collect();
        for (idx, (c, i)) in nodes.into_iter().enumerate() {
            let v = u(&self.position(lattice, &c, i));
            self.values[idx * self.n..(idx + 1) * self.n].copy_from_slice(&v[..self.n]);
        }
    }

    /// Node keys in storage order.
    pub fn nodes(&self) -> impl Iterator<Item = (Vec<i64>, usize)> + '_ {
        box_cells(&self.lo, &self.hi).flat_map(move |c| (0..self.num_offsets).map(move |i| (c.clone(), i)))
    }

    pub fn index(&self, cell: &[i64], i: usize) -> Option<usize> {
        let mut idx = 0usize;
        for k in 0..cell.len() {
            if cell[k] < self.lo[k] || cell[k] >= self.hi[k] {
                return None;
            }
            idx = idx * (self.hi[k] - self.lo[k]) as usize + (cell[k] - self.lo[k]) as usize;
        }
        Some(idx * self.num_offsets + i)
    }

    pub fn get(&self, cell: &[i64], i: usize) -> Result<&[f64]> {
        let idx = self.index(cell, i).ok_or(Error::OutOfHalo)?;
        Ok(&self.values[idx * self.n..(idx + 1) * self.n])
    }

    pub fn node(&self, idx: usize) -> &[f64] {
        &self.values[idx * self.n..(idx + 1) * self.n]
    }

    pub fn node_mut(&mut self, idx: usize) -> &mut [f64] {
        &mut self.values[idx * self.n..(idx + 1) * self.n]
    }

    /// Scaled position ε(cell + qᵢ).
    pub fn position(&self, lattice: &Lattice, cell: &[i64], i: usize) -> Vec<f64> {
        let e = self.eps();
        lattice.position(cell, i).iter().map(|x| x * e).collect()
    }

    /// Nodal quadrature ε^d Σ_{nodes in region} |u|^q.
    pub fn lq_norm_pow(&self, lattice: &Lattice, region: &Region, q: f64) -> Result<f64> {
        let (lo, hi) = region.grid_bounds(self.m)?;
        let mut acc = KahanSum::new();
        for (idx, (c, i)) in self.nodes().enumerate() {
            if lattice.node_in_grid_box(&c, i, &lo, &hi) {
                let v = self.node(idx);
                acc.add(v.iter().map(|x| x * x).sum::<f64>().sqrt().powf(q));
            }
        }
        Ok(acc.value() * self.eps().powi(self.d() as i32))
    }
}

/// ∂ᵉ_b u(z) for the edge anchored at cell z.
pub fn discrete_gradient(lattice: &Lattice, field: &Field, cell: &[i64], b: usize) -> Result<Vec<f64>> {
    let e = &lattice.edges()[b];
    let to: Vec<i64> = cell.iter().zip(&e.to_cell).map(|(a, s)| a + s).collect();
    let ux = field.get(cell, e.from)?;
    let uy = field.get(&to, e.to)?;
    let s = field.m as f64 / e.length;
    Ok(ux.iter().zip(uy).map(|(a, b)| (b - a) * s).collect())
}

/// ε^d Σ V_b(λ(z, b); ∂ᵉ_b u(z)) over the edges of `region` in the given
/// convention, with compensated summation in enumeration order.
pub fn assemble_energy(
    lattice: &Lattice,
    weights: &(impl WeightField + ?Sized),
    pot: &Potential,
    field: &Field,
    region: &Region,
    convention: Convention,
) -> Result<f64> {
    let mut acc = KahanSum::new();
    let mut err = None;
    lattice.for_each_edge_in_region(field.m, region, convention, |z, b| {
        if err.is_some() {
            return;
        }
        match discrete_gradient(lattice, field, z, b) {
            Ok(r) => acc.add(pot.eval(weights.weight(z, b), &r)),
            Err(e) => err = Some(e),
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(acc.value() * field.eps().powi(field.d() as i32))
}

/// Gradient of `assemble_energy` with respect to the free node values, laid
/// out like `field.values`; fixed nodes get zero.
pub fn energy_gradient(
    lattice: &Lattice,
    weights: &(impl WeightField + ?Sized),
    pot: &Potential,
    field: &Field,
    region: &Region,
    convention: Convention,
) -> Result<Vec<f64>> {
    let n = field.n;
    let w = field.eps().powi(field.d() as i32);
    let mut out = vec![0.0; field.values.len()];
    let mut g = vec![0.0; n];
    for (z, b) in lattice.edges_in_region(field.m, region, convention)? {
        let e = &lattice.edges()[b];
        let to: Vec<i64> = z.iter().zip(&e.to_cell).map(|(a, s)| a + s).collect();
        let ix = field.index(&z, e.from).ok_or(Error::OutOfHalo)?;
        let iy = field.index(&to, e.to).ok_or(Error::OutOfHalo)?;
        let s = field.m as f64 / e.length;
        let r: Vec<f64> = (0..n).map(|c| (field.values[iy * n + c] - field.values[ix * n + c]) * s).collect();
        pot.grad(weights.weight(&z, b), &r, &mut g);
        for c in 0..n {
            if field.free[iy] {
                out[iy * n + c] += w * s * g[c];
            }
            if field.free[ix] {
                out[ix * n + c] -= w * s * g[c];
            }
        }
    }
    Ok(out)
}

/// Body force f sampled at node positions.
#[derive(Clone)]
pub enum BodyForce {
    Uniform(Vec<f64>),
    Closed(Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>),
}

impl std::fmt::Debug for BodyForce {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BodyForce::Uniform(v) => write!(f, "Uniform({v:?})"),
            BodyForce::Closed(_) => write!(f, "Closed(..)"),
        }
    }
}

impl BodyForce {
    pub fn at(&self, x: &[f64]) -> Vec<f64> {
        match self {
            BodyForce::Uniform(v) => v.clone(),
            BodyForce::Closed(f) => f(x),
        }
    }
}

/// ε^d Σ_{x ∈ ε𝓛 ∩ A} f(x)·u(x).
pub fn body_force_functional(lattice: &Lattice, force: &BodyForce, field: &Field, region: &Region) -> Result<f64> {
    let (lo, hi) = region.grid_bounds(field.m)?;
    let mut acc = KahanSum::new();
    for (c, i) in box_cells(&lo, &hi).flat_map(|c| (0..field.num_offsets).map(move |i| (c.clone(), i))) {
        if !lattice.node_in_grid_box(&c, i, &lo, &hi) {
            continue;
        }
        let f = force.at(&field.position(lattice, &c, i));
        let u = field.get(&c, i)?;
        acc.add(f.iter().zip(u).map(|(a, b)| a * b).sum());
    }
    Ok(acc.value() * field.eps().powi(field.d() as i32))
}
