//! Stationary random weight fields λ_b(τ_z ω), generated by hashing
//! (seed, sample, z, b) and pushing the result through an inverse CDF.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::lattice::{box_cells, Lattice, Region};
use crate::util::{hash_words, mean_se, unit_open};

const LAYER_TAG: u64 = 0x4C41_5945_5245_4431;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Distribution {
    Constant { c: f64 },
    /// Takes v2 with probability `prob`, v1 otherwise.
    TwoPoint { v1: f64, v2: f64, prob: f64 },
    Lognormal { mu: f64, sigma: f64 },
    /// 1/λ is Pareto with the given exponent and scale: λ = U^{1/a} / scale.
    ParetoInverse { a: f64, #[serde(default = "one")] scale: f64 },
    Uniform { lo: f64, hi: f64 },
}

fn one() -> f64 {
    1.0
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidEnvironment(m.into()));
        match *self {
            Distribution::Constant { c } if !(c > 0.0) => bad("constant must be positive"),
            Distribution::TwoPoint { v1, v2, prob } if !(v1 > 0.0 && v2 > 0.0 && (0.0..=1.0).contains(&prob)) => {
                bad("two-point values must be positive and prob in [0,1]")
            }
            Distribution::Lognormal { sigma, .. } if !(sigma >= 0.0) => bad("lognormal sigma must be nonnegative"),
            Distribution::ParetoInverse { a, scale } if !(a > 0.0 && scale > 0.0) => {
                bad("pareto exponent and scale must be positive")
            }
            Distribution::Uniform { lo, hi } if !(lo > 0.0 && hi > lo) => bad("uniform needs 0 < lo < hi"),
            _ => Ok(()),
        }
    }

    /// Inverse CDF at u ∈ (0,1).
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Distribution::Constant { c } => c,
            Distribution::TwoPoint { v1, v2, prob } => {
                if u < prob {
                    v2
                } else {
                    v1
                }
            }
            Distribution::Lognormal { mu, sigma } => {
                let z = Normal::standard().inverse_cdf(u);
                (mu + sigma * z).exp()
            }
            Distribution::ParetoInverse { a, scale } => u.powf(1.0 / a) / scale,
            Distribution::Uniform { lo, hi } => lo + (hi - lo) * u,
        }
    }

    /// Closed-form 𝔼[λ^t] where one is used; `None` means Monte Carlo.
    pub fn analytic_moment(&self, t: f64) -> Option<f64> {
        match *self {
            Distribution::Constant { c } => Some(c.powf(t)),
            Distribution::TwoPoint { v1, v2, prob } => Some((1.0 - prob) * v1.powf(t) + prob * v2.powf(t)),
            Distribution::Uniform { lo, hi } => {
                let s = t + 1.0;
                if s.abs() < 1e-14 {
                    Some((hi / lo).ln() / (hi - lo))
                } else {
                    Some((hi.powf(s) - lo.powf(s)) / (s * (hi - lo)))
                }
            }
            Distribution::Lognormal { .. } | Distribution::ParetoInverse { .. } => None,
        }
    }

    /// Whether 𝔼[λ^t] is infinite.
    pub fn moment_diverges(&self, t: f64) -> bool {
        match *self {
            Distribution::ParetoInverse { a, .. } => t <= -a,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Correlation {
    #[default]
    IidPerEdge,
    /// Weight depends only on z·e₁ and is shared by all edges.
    LayeredE1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    /// One entry for all edges, or one per edge in canonical edge order.
    pub dist: Vec<Distribution>,
    #[serde(default)]
    pub mode: Correlation,
    #[serde(default)]
    pub seed: u64,
}

impl EnvironmentSpec {
    pub fn iid(dist: Distribution, seed: u64) -> Self {
        Self { dist: vec![dist], mode: Correlation::IidPerEdge, seed }
    }

    pub fn layered(dist: Distribution, seed: u64) -> Self {
        Self { dist: vec![dist], mode: Correlation::LayeredE1, seed }
    }

    pub fn validate(&self, lattice: &Lattice) -> Result<()> {
        if self.dist.is_empty() {
            return Err(Error::InvalidEnvironment("no distribution given".into()));
        }
        if self.dist.len() != 1 && self.dist.len() != lattice.num_edges() {
            return Err(Error::InvalidEnvironment(format!(
                "expected 1 or {} distributions, got {}",
                lattice.num_edges(),
                self.dist.len()
            )));
        }
        if self.mode == Correlation::LayeredE1 {
            if !lattice.is_hypercubic() {
                return Err(Error::InvalidEnvironment("layered mode needs the hyper-cubic lattice".into()));
            }
            if self.dist.len() != 1 {
                return Err(Error::InvalidEnvironment("layered mode shares one distribution".into()));
            }
        }
        self.dist.iter().try_for_each(Distribution::validate)
    }

    pub fn dist_for(&self, b: usize) -> &Distribution {
        if self.dist.len() == 1 {
            &self.dist[0]
        } else {
            &self.dist[b]
        }
    }

    pub fn sample(&self, s: u64) -> EnvironmentSample {
        EnvironmentSample { spec: self.clone(), s }
    }
}

/// Realization s of the environment. Cheap to clone; evaluation is a pure
/// function of (seed, s, z, b).
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSample {
    pub spec: EnvironmentSpec,
    pub s: u64,
}

impl EnvironmentSample {
    pub fn weight(&self, z: &[i64], b: usize) -> f64 {
        let h = match self.spec.mode {
            Correlation::IidPerEdge => {
                let mut words = Vec::with_capacity(z.len() + 4);
                words.push(self.spec.seed);
                words.push(self.s);
                words.push(z.len() as u64);
                words.extend(z.iter().map(|&c| c as u64));
                words.push(b as u64);
                hash_words(&words)
            }
            Correlation::LayeredE1 => hash_words(&[self.spec.seed, self.s, LAYER_TAG, z[0] as u64]),
        };
        self.spec.dist_for(b).quantile(unit_open(h))
    }
}

/// Weight field interface used by energy assembly; implemented by samples
/// and by hand-built fields in tests.
pub trait WeightField: Sync {
    fn weight(&self, z: &[i64], b: usize) -> f64;
}

impl WeightField for EnvironmentSample {
    fn weight(&self, z: &[i64], b: usize) -> f64 {
        EnvironmentSample::weight(self, z, b)
    }
}

impl<F: Fn(&[i64], usize) -> f64 + Sync> WeightField for F {
    fn weight(&self, z: &[i64], b: usize) -> f64 {
        self(z, b)
    }
}

/// Restricts a field to its values on [0,k)ᵈ and repeats them periodically.
pub struct Periodized<'a, W: WeightField + ?Sized> {
    pub inner: &'a W,
    pub k: i64,
}

impl<W: WeightField + ?Sized> WeightField for Periodized<'_, W> {
    fn weight(&self, z: &[i64], b: usize) -> f64 {
        let w: Vec<i64> = z.iter().map(|c| c.rem_euclid(self.k)).collect();
        self.inner.weight(&w, b)
    }
}

/// Multiplies every weight by a constant.
pub struct Scaled<'a, W: WeightField + ?Sized> {
    pub inner: &'a W,
    pub factor: f64,
}

impl<W: WeightField + ?Sized> WeightField for Scaled<'_, W> {
    fn weight(&self, z: &[i64], b: usize) -> f64 {
        self.factor * self.inner.weight(z, b)
    }
}

/// Evaluates the field shifted by w: λ(z + w, b).
pub struct Shifted<'a, W: WeightField + ?Sized> {
    pub inner: &'a W,
    pub shift: Vec<i64>,
}

impl<W: WeightField + ?Sized> WeightField for Shifted<'_, W> {
    fn weight(&self, z: &[i64], b: usize) -> f64 {
        let w: Vec<i64> = z.iter().zip(&self.shift).map(|(a, s)| a + s).collect();
        self.inner.weight(&w, b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentRow {
    pub b_index: usize,
    pub alpha_moment: f64,
    pub alpha_se: f64,
    /// Present only for edges in the nearest-neighbour set.
    pub beta_moment: Option<f64>,
    pub beta_se: Option<f64>,
    pub divergent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub d: usize,
    pub n_samples: usize,
    pub rows: Vec<MomentRow>,
    /// α ≥ 1, β ≥ 1/(p−1) and every required moment finite.
    pub moment_condition: bool,
    /// α > 1 and 1/α + 1/β ≤ p/d.
    pub vectorial_condition: bool,
}

impl MomentReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("b_index,alpha_moment,alpha_se,beta_moment,beta_se,divergent_flag\n");
        for r in &self.rows {
            let opt = |x: Option<f64>| x.map(|v| format!("{v}")).unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.b_index,
                r.alpha_moment,
                r.alpha_se,
                opt(r.beta_moment),
                opt(r.beta_se),
                r.divergent
            ));
        }
        s
    }

    /// Largest 𝔼[λ_b] over edges, used by the growth envelope.
    pub fn max_alpha_moment(&self) -> f64 {
        self.rows.iter().map(|r| r.alpha_moment).fold(0.0, f64::max)
    }
}

fn moment_estimate(dist: &Distribution, spec: &EnvironmentSpec, d: usize, b: usize, t: f64, n: usize) -> (f64, f64) {
    if dist.moment_diverges(t) {
        return (f64::INFINITY, f64::NAN);
    }
    if let Some(v) = dist.analytic_moment(t) {
        return (v, 0.0);
    }
    let xs: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|s| spec.sample(s).weight(&vec![0; d], b).powf(t))
        .collect();
    mean_se(&xs)
}

/// Estimates 𝔼[λ_b^α] for every edge and 𝔼[λ_b^{−β}] for nearest-neighbour
/// edges. Closed forms are used for constant, two-point and uniform laws.
pub fn estimate_moments(
    lattice: &Lattice,
    spec: &EnvironmentSpec,
    alpha: f64,
    beta: f64,
    p: f64,
    n_samples: usize,
) -> Result<MomentReport> {
    if n_samples == 0 {
        return Err(Error::InvalidEnvironment("need at least one sample".into()));
    }
    spec.validate(lattice)?;
    let mut rows = Vec::new();
    let mut all_finite = true;
    for (b, e) in lattice.edges().iter().enumerate() {
        let dist = spec.dist_for(b);
        let (am, ase) = moment_estimate(dist, spec, lattice.d(), b, alpha, n_samples);
        let (bm, bse) = if e.nn {
            let (m, se) = moment_estimate(dist, spec, lattice.d(), b, -beta, n_samples);
            (Some(m), Some(se))
        } else {
            (None, None)
        };
        let divergent = dist.moment_diverges(alpha) || (e.nn && dist.moment_diverges(-beta));
        all_finite &= !divergent;
        rows.push(MomentRow {
            b_index: b,
            alpha_moment: am,
            alpha_se: ase,
            beta_moment: bm,
            beta_se: bse,
            divergent,
        });
    }
    let d = lattice.d();
    Ok(MomentReport {
        alpha,
        beta,
        p,
        d,
        n_samples,
        rows,
        moment_condition: all_finite && alpha >= 1.0 && beta >= 1.0 / (p - 1.0),
        vectorial_condition: alpha > 1.0 && 1.0 / alpha + 1.0 / beta <= p / d as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BirkhoffRow {
    pub m: u32,
    pub average: f64,
    /// Standard error of the site mean times |A|.
    pub se: f64,
    /// average − |A|·𝔼[f] when the expectation is supplied.
    pub drift: Option<f64>,
}

/// Spatial averages ε^d Σ_{z ∈ A ∩ εℤᵈ} f(τ_{z/ε} ω) for each ε = 1/m.
pub fn birkhoff_average<W: WeightField + ?Sized>(
    sample: &W,
    f: impl Fn(&W, &[i64]) -> f64 + Sync,
    region: &Region,
    schedule: &[u32],
    expectation: Option<f64>,
) -> Result<Vec<BirkhoffRow>> {
    let mut out = Vec::new();
    for &m in schedule {
        let (lo, hi) = region.grid_bounds(m)?;
        let vals: Vec<f64> = box_cells(&lo, &hi).map(|z| f(sample, &z)).collect();
        let vol = region.volume();
        let (_, se) = mean_se(&vals);
        let eps_d = (m as f64).powi(-(region.d() as i32));
        let average = crate::util::kahan_sum(vals.iter().copied()) * eps_d;
        out.push(BirkhoffRow { m, average, se: se * vol, drift: expectation.map(|e| average - vol * e) });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeSpec;

    fn zd2() -> Lattice {
        Lattice::new(LatticeSpec::preset("zd-nn", 2, 1).unwrap()).unwrap()
    }

    #[test]
    fn constant_everywhere() {
        let s = EnvironmentSpec::iid(Distribution::Constant { c: 3.0 }, 1).sample(0);
        assert_eq!(s.weight(&[4, -7], 1), 3.0);
    }

    #[test]
    fn layered_ignores_transverse_and_edge() {
        let s = EnvironmentSpec::layered(Distribution::Uniform { lo: 0.5, hi: 2.0 }, 9).sample(3);
        assert_eq!(s.weight(&[5, 2], 0), s.weight(&[5, 9], 1));
        assert_ne!(s.weight(&[5, 2], 0), s.weight(&[6, 2], 0));
    }

    #[test]
    fn deterministic_bits() {
        let spec = EnvironmentSpec::iid(Distribution::Lognormal { mu: 0.0, sigma: 0.5 }, 42);
        assert_eq!(spec.sample(7).weight(&[1, 2], 0).to_bits(), spec.sample(7).weight(&[1, 2], 0).to_bits());
    }

    #[test]
    fn two_point_frequency() {
        let s = EnvironmentSpec::iid(Distribution::TwoPoint { v1: 1.0, v2: 4.0, prob: 0.5 }, 5).sample(0);
        let hits = (0..100_000i64).filter(|&i| s.weight(&[i, 0], 0) == 4.0).count();
        let freq = hits as f64 / 1e5;
        assert!((freq - 0.5).abs() < 0.01, "{freq}");
    }

    #[test]
    fn closed_form_moments() {
        let spec = EnvironmentSpec::iid(Distribution::TwoPoint { v1: 1.0, v2: 4.0, prob: 0.5 }, 0);
        let rep = estimate_moments(&zd2(), &spec, 1.0, 1.0, 2.0, 10).unwrap();
        assert_eq!(rep.rows[0].alpha_moment, 2.5);
        assert_eq!(rep.rows[0].beta_moment, Some(0.625));
        assert!(rep.moment_condition);
        assert!(!rep.vectorial_condition);
    }

    #[test]
    fn pareto_inverse_flagged() {
        let spec = EnvironmentSpec::iid(Distribution::ParetoInverse { a: 1.0, scale: 1.0 }, 0);
        let rep = estimate_moments(&zd2(), &spec, 1.0, 1.0, 2.0, 100).unwrap();
        assert!(rep.rows.iter().all(|r| r.divergent));
        assert!(!rep.moment_condition);
    }

    #[test]
    fn uniform_moment_matches_quadrature() {
        let d = Distribution::Uniform { lo: 0.5, hi: 3.0 };
        for t in [-2.0, -1.0, 0.5, 2.0] {
            let n = 200_000;
            let q = (0..n).map(|i| d.quantile((i as f64 + 0.5) / n as f64).powf(t)).sum::<f64>() / n as f64;
            assert!((q - d.analytic_moment(t).unwrap()).abs() < 1e-6, "{t}");
        }
    }

    #[test]
    fn birkhoff_constant() {
        let s = EnvironmentSpec::iid(Distribution::Constant { c: 3.0 }, 0).sample(0);
        let rows = birkhoff_average(&s, |w, z| w.weight(z, 0), &Region::cube(2, 0.0, 1.0), &[4, 8], Some(3.0)).unwrap();
        for r in rows {
            assert!((r.average - 3.0).abs() < 1e-12);
        }
    }
}
