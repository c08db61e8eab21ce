use rayon::prelude::*;
use serde::Serialize;

use super::sandwich_pair;
use crate::environment::{EnvironmentSpec, MomentReport};
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::potentials::{Family, Potential};
use crate::solver::SolverConfig;
use crate::util::{mean_se, norm2};

/// One (k, sample) solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhomRow {
    pub k: u32,
    pub sample: u64,
    pub value: f64,
    pub m_f_value: f64,
    pub sandwich_ok: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhomLevel {
    pub k: u32,
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhomEstimate {
    pub f: Vec<f64>,
    pub levels: Vec<WhomLevel>,
    pub rows: Vec<WhomRow>,
    /// Mean at the largest k.
    pub estimate: f64,
    /// max(standard error, change from the previous k).
    pub uncertainty: f64,
    /// Upper-bound estimate only (nonconvex potential).
    pub upper_bound_only: bool,
}

impl WhomEstimate {
    pub fn to_csv(&self) -> String {
        let f = self.f.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";");
        let mut s = String::from("F_flat,k,sample,value,m_F_value,sandwich_ok,iterations\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{f},{},{},{},{},{},{}\n",
                r.k, r.sample, r.value, r.m_f_value, r.sandwich_ok, r.iterations
            ));
        }
        s
    }

    pub fn sandwich_ok(&self) -> bool {
        self.rows.iter().all(|r| r.sandwich_ok)
    }
}

/// Monte Carlo estimate of W₀(F) from W_hom^(k) over an increasing
/// k-schedule. Sample s is the same environment for every k. Each row also
/// records m_F(kY)/kᵈ and whether the sandwich bound held within 2·tol.
pub fn estimate_w0(
    lattice: &Lattice,
    spec: &EnvironmentSpec,
    pot: &Potential,
    f: &[f64],
    schedule: &[u32],
    samples: usize,
    cfg: &SolverConfig,
) -> Result<WhomEstimate> {
    if schedule.is_empty() || schedule.windows(2).any(|w| w[0] >= w[1]) || schedule[0] == 0 {
        return Err(Error::InvalidSpec("k-schedule must be positive and strictly increasing".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidSpec("need at least one sample per k".into()));
    }
    spec.validate(lattice)?;
    let jobs: Vec<(u32, u64)> = schedule.iter().flat_map(|&k| (0..samples as u64).map(move |s| (k, s))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(k, s)| {
            let env = spec.sample(s);
            let (per, dir) = sandwich_pair(lattice, &env, pot, f, k, cfg)?;
            Ok(WhomRow {
                k,
                sample: s,
                value: per.value,
                m_f_value: dir.value,
                sandwich_ok: per.value <= dir.value + 2.0 * cfg.tol,
                iterations: per.solve.iterations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let levels: Vec<WhomLevel> = schedule
        .iter()
        .map(|&k| {
            let xs: Vec<f64> = rows.iter().filter(|r| r.k == k).map(|r| r.value).collect();
            let (mean, se) = mean_se(&xs);
            WhomLevel { k, mean, se, count: xs.len() }
        })
        .collect();
    let last = levels.last().expect("nonempty schedule");
    let drift = if levels.len() > 1 { (last.mean - levels[levels.len() - 2].mean).abs() } else { 0.0 };
    Ok(WhomEstimate {
        f: f.to_vec(),
        estimate: last.mean,
        uncertainty: last.se.max(drift),
        levels,
        rows,
        upper_bound_only: !pot.is_convex(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthCertificate {
    pub estimate: f64,
    /// Σ_b c₁(1 + 𝔼[λ_b](|F|ᵖ + 1)).
    pub upper_envelope: f64,
    pub upper_ok: bool,
    /// Positivity is required for F ≠ 0 when V vanishes only at r = 0.
    pub positivity_required: bool,
    pub positive: bool,
}

/// Checks a W₀ estimate against the moment-based growth envelope. 𝔼[λ_b] is
/// bounded by 𝔼[λ_b^α]^{1/α}, which is valid for α ≥ 1.
pub fn growth_bounds_check(
    estimate: &WhomEstimate,
    moments: &MomentReport,
    pot: &Potential,
    c1: f64,
) -> Result<GrowthCertificate> {
    if moments.alpha < 1.0 || moments.rows.iter().any(|r| r.divergent || !r.alpha_moment.is_finite()) {
        return Err(Error::InvalidSpec("growth envelope needs finite moments with α ≥ 1".into()));
    }
    let fp = norm2(&estimate.f).powf(pot.p());
    let upper_envelope: f64 =
        moments.rows.iter().map(|r| c1 * (1.0 + r.alpha_moment.powf(1.0 / moments.alpha) * (fp + 1.0))).sum();
    let positivity_required =
        matches!(pot.family(), Family::Quadratic | Family::WeightedPPower) && estimate.f.iter().any(|v| *v != 0.0);
    let cert = GrowthCertificate {
        estimate: estimate.estimate,
        upper_envelope,
        upper_ok: estimate.estimate <= upper_envelope,
        positivity_required,
        positive: estimate.estimate > 0.0,
    };
    if !cert.upper_ok {
        return Err(Error::BoundViolated(format!(
            "W₀ estimate {} exceeds the growth envelope {}",
            cert.estimate, cert.upper_envelope
        )));
    }
    if positivity_required && !cert.positive {
        return Err(Error::BoundViolated(format!("W₀ estimate {} is not positive for F ≠ 0", cert.estimate)));
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{estimate_moments, Distribution};
    use crate::lattice::LatticeSpec;
    use crate::potentials::PotentialSpec;

    fn zd2() -> Lattice {
        Lattice::new(LatticeSpec::preset("zd-nn", 2, 1).unwrap()).unwrap()
    }

    #[test]
    fn constant_environment_is_exact_at_k1() {
        let spec = EnvironmentSpec::iid(Distribution::Constant { c: 1.0 }, 0);
        let pot = PotentialSpec::new(Family::Quadratic).build().unwrap();
        let est = estimate_w0(&zd2(), &spec, &pot, &[1.0, 0.0], &[1, 2, 4], 3, &SolverConfig::default()).unwrap();
        assert!((est.estimate - 1.0).abs() < 1e-12);
        assert!(est.uncertainty < 1e-12);
        assert!(est.sandwich_ok());
        let m = estimate_moments(&zd2(), &spec, 1.0, 1.0, 2.0, 4).unwrap();
        let cert = growth_bounds_check(&est, &m, &pot, 1.0).unwrap();
        assert_eq!(cert.upper_envelope, 6.0);
    }

    #[test]
    fn rejects_non_increasing_schedule() {
        let spec = EnvironmentSpec::iid(Distribution::Constant { c: 1.0 }, 0);
        let pot = PotentialSpec::new(Family::Quadratic).build().unwrap();
        let r = estimate_w0(&zd2(), &spec, &pot, &[1.0, 0.0], &[4, 2], 1, &SolverConfig::default());
        assert!(matches!(r, Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn zero_gradient_has_zero_density() {
        let spec = EnvironmentSpec::iid(Distribution::Uniform { lo: 0.5, hi: 2.0 }, 2);
        let pot = PotentialSpec::p_power(3.0).build().unwrap();
        let est = estimate_w0(&zd2(), &spec, &pot, &[0.0, 0.0], &[2, 4], 2, &SolverConfig::default()).unwrap();
        assert_eq!(est.estimate, 0.0);
    }
}
