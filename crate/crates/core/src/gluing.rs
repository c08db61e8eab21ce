//! Boundary fitting: replace a field by prescribed data ū near ∂A through
//! layered cutoffs (any n) or through truncation of u − ū (n = 1).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{assemble_energy, Field};
use crate::environment::WeightField;
use crate::error::{Error, Result};
use crate::lattice::{Convention, Lattice, Region};
use crate::potentials::Potential;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlueParams {
    /// Boundary-layer width δ.
    pub delta: f64,
    /// Number of layers.
    pub m: u32,
    /// Truncation level s (truncation only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    /// Weight truncation level M; reported, not used by the construction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_m: Option<f64>,
}

impl GlueParams {
    pub fn new(delta: f64, m: u32) -> Self {
        Self { delta, m, s: None, big_m: None }
    }

    /// Lower threshold t₋ = δ(2m − k − ¾)/(2m) and upper threshold
    /// t₊ = δ(2m − k − ¼)/(2m) of the k-th cutoff.
    pub fn thresholds(&self, k: u32) -> (f64, f64) {
        let two_m = 2.0 * self.m as f64;
        let k = k as f64;
        (self.delta * (two_m - k - 0.75) / two_m, self.delta * (two_m - k - 0.25) / two_m)
    }

    /// φᵏ as a function of the distance to ∂A: 0 up to t₋, 1 from t₊, linear
    /// in between (Lipschitz constant 4m/δ).
    pub fn cutoff(&self, k: u32, dist: f64) -> f64 {
        let (lo, hi) = self.thresholds(k);
        ((dist - lo) / (hi - lo)).clamp(0.0, 1.0)
    }

    pub fn lipschitz(&self) -> f64 {
        4.0 * self.m as f64 / self.delta
    }

    fn validate(&self, lattice: &Lattice, eps: f64, region: &Region) -> Result<()> {
        if self.m == 0 || !(self.delta > 0.0) {
            return Err(Error::InvalidSpec("gluing needs δ > 0 and m ≥ 1".into()));
        }
        region.shrink(self.delta)?;
        let have = self.delta / (8.0 * self.m as f64);
        let need = 2.0 * eps * lattice.range();
        if have < need {
            return Err(Error::LayersTooThin { have, need });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlueCandidate {
    pub k: u32,
    pub energy: f64,
    /// Nodes where the candidate differs from u_ε.
    pub boundary_nodes_changed: usize,
    /// Share of nodes where truncation was active (0 for cutoff gluing).
    pub clamp_active_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlueReport {
    pub input_energy: f64,
    pub candidates: Vec<GlueCandidate>,
    /// Index of the least-energy candidate (lowest k on ties).
    pub chosen: u32,
    pub clamp_active_fraction: f64,
}

impl GlueReport {
    pub fn output_energy(&self) -> f64 {
        self.candidates[self.chosen as usize].energy
    }

    /// E(v) − E(u_ε).
    pub fn increment(&self) -> f64 {
        self.output_energy() - self.input_energy
    }

    pub fn mean_energy(&self) -> f64 {
        self.candidates.iter().map(|c| c.energy).sum::<f64>() / self.candidates.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,energy,boundary_nodes_changed,clamp_active_fraction\n");
        for c in &self.candidates {
            s.push_str(&format!("{},{},{},{}\n", c.k, c.energy, c.boundary_nodes_changed, c.clamp_active_fraction));
        }
        s
    }
}

/// Sup-norm distance of every node of `field` to the complement of A.
fn node_distances(lattice: &Lattice, field: &Field, region: &Region) -> Vec<f64> {
    field.nodes().map(|(c, i)| region.dist_to_complement(&field.position(lattice, &c, i))).collect()
}

#[allow(clippy::too_many_arguments)]
fn glue(
    lattice: &Lattice,
    weights: &(impl WeightField + ?Sized),
    pot: &Potential,
    u_eps: &Field,
    u_bar: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    region: &Region,
    params: &GlueParams,
    clamp: Option<f64>,
) -> Result<(Field, GlueReport)> {
    params.validate(lattice, u_eps.eps(), region)?;
    let n = u_eps.n;
    let dist = node_distances(lattice, u_eps, region);
    let bar: Vec<f64> = u_eps.nodes().flat_map(|(c, i)| u_bar(&u_eps.position(lattice, &c, i))).collect();
    // the perturbation u_ε − ū, truncated componentwise when requested
    let mut active = 0usize;
    let pert: Vec<f64> = u_eps
        .values
        .iter()
        .zip(&bar)
        .map(|(u, b)| {
            let w = u - b;
            match clamp {
                Some(s) if w.abs() > s => {
                    active += 1;
                    w.clamp(-s, s)
                }
                _ => w,
            }
        })
        .collect();
    let clamp_fraction = active as f64 / u_eps.values.len().max(1) as f64;
    let input_energy = assemble_energy(lattice, weights, pot, u_eps, region, Convention::ZAnchored)?;
    let build = |k: u32| {
        let mut v = u_eps.clone();
        for (node, &dn) in dist.iter().enumerate() {
            let phi = params.cutoff(k, dn);
            for c in 0..n {
                let j = node * n + c;
                let untouched = phi == 1.0 && pert[j] == u_eps.values[j] - bar[j];
                if !untouched {
                    v.values[j] = bar[j] + phi * pert[j];
                }
            }
        }
        v
    };
    let candidates = (0..params.m)
        .into_par_iter()
        .map(|k| {
            let v = build(k);
            let energy = assemble_energy(lattice, weights, pot, &v, region, Convention::ZAnchored)?;
            let changed = v
                .values
                .chunks(n)
                .zip(u_eps.values.chunks(n))
                .filter(|(a, b)| a != b)
                .count();
            Ok(GlueCandidate { k, energy, boundary_nodes_changed: changed, clamp_active_fraction: clamp_fraction })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut chosen = 0;
    for (k, c) in candidates.iter().enumerate() {
        if c.energy < candidates[chosen].energy {
            chosen = k;
        }
    }
    let report = GlueReport { input_energy, candidates, chosen: chosen as u32, clamp_active_fraction: clamp_fraction };
    Ok((build(chosen as u32), report))
}

/// Cutoff gluing: candidates ū + φᵏ(u_ε − ū), k = 0..m−1, and the one of
/// least energy E_ε(·, A). The output equals ū at every node within δ/4 of
/// ∂A and outside A.
pub fn glue_cutoff(
    lattice: &Lattice,
    weights: &(impl WeightField + ?Sized),
    pot: &Potential,
    u_eps: &Field,
    u_bar: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    region: &Region,
    params: &GlueParams,
) -> Result<(Field, GlueReport)> {
    glue(lattice, weights, pot, u_eps, u_bar, region, params, None)
}

/// Truncation gluing for scalar fields: as `glue_cutoff` with u_ε − ū
/// replaced by its clamp to [−s, s].
pub fn glue_truncate(
    lattice: &Lattice,
    weights: &(impl WeightField + ?Sized),
    pot: &Potential,
    u_eps: &Field,
    u_bar: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    region: &Region,
    params: &GlueParams,
) -> Result<(Field, GlueReport)> {
    if u_eps.n != 1 {
        return Err(Error::NotScalar);
    }
    if !pot.has_companion() {
        return Err(Error::InvalidPotential("truncation gluing needs a convex companion".into()));
    }
    let s = params.s.ok_or_else(|| Error::InvalidSpec("truncation level s is required".into()))?;
    if !(s > 0.0) {
        return Err(Error::InvalidSpec("truncation level s must be positive".into()));
    }
    glue(lattice, weights, pot, u_eps, u_bar, region, params, Some(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeSpec;
    use crate::potentials::PotentialSpec;

    fn zd2() -> Lattice {
        Lattice::new(LatticeSpec::preset("zd-nn", 2, 1).unwrap()).unwrap()
    }

    #[test]
    fn cutoff_profile() {
        let p = GlueParams::new(0.4, 4);
        // k = 0 ramps between δ(8 − ¾)/8 and δ(8 − ¼)/8
        assert_eq!(p.cutoff(0, 0.36), 0.0);
        assert_eq!(p.cutoff(0, 0.39), 1.0);
        assert!((p.cutoff(0, 0.375) - 0.5).abs() < 1e-12);
        assert_eq!(p.lipschitz(), 40.0);
        // every cutoff vanishes within δ/2 of the boundary
        assert!((0..4).all(|k| p.cutoff(k, 0.2) == 0.0));
    }

    #[test]
    fn identical_input_is_unchanged() {
        let lat = zd2();
        let region = Region::cube(2, 0.0, 1.0);
        let bar = |x: &[f64]| vec![2.0 * x[0] - x[1]];
        // 2εR = 0.0248 ≤ δ/(8m) = 0.025
        let u = Field::sample(&lat, 456, &region, Field::halo_for(&lat), bar).unwrap();
        let w = |_: &[i64], _: usize| 1.0;
        let pot = PotentialSpec::new(crate::potentials::Family::Quadratic).build().unwrap();
        let (v, rep) = glue_cutoff(&lat, &w, &pot, &u, &bar, &region, &GlueParams::new(0.4, 2)).unwrap();
        assert_eq!(v, u);
        assert!(rep.candidates.iter().all(|c| c.energy == rep.input_energy && c.boundary_nodes_changed == 0));
    }

    #[test]
    fn thin_layers_rejected() {
        let lat = zd2();
        let region = Region::cube(2, 0.0, 1.0);
        let u = Field::sample(&lat, 16, &region, 2, |_| vec![0.0]).unwrap();
        let w = |_: &[i64], _: usize| 1.0;
        let pot = PotentialSpec::new(crate::potentials::Family::Quadratic).build().unwrap();
        let r = glue_cutoff(&lat, &w, &pot, &u, &|_: &[f64]| vec![0.0], &region, &GlueParams::new(0.4, 2));
        assert!(matches!(r, Err(Error::LayersTooThin { .. })));
    }
}
