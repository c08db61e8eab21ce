//! Experiment configuration: one JSON document per run.

use serde::{Deserialize, Serialize};

use crate::environment::{Distribution, EnvironmentSpec};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, LatticeSpec, Region};
use crate::potentials::{Family, Potential, PotentialSpec};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LatticeChoice {
    Name(String),
    Preset {
        preset: String,
        #[serde(default = "two")]
        d: usize,
        #[serde(default = "one")]
        n: usize,
    },
    Inline(LatticeSpec),
}

fn two() -> usize {
    2
}

fn one() -> usize {
    1
}

impl Default for LatticeChoice {
    fn default() -> Self {
        LatticeChoice::Name("zd-nn".into())
    }
}

impl LatticeChoice {
    pub fn build(&self) -> Result<Lattice> {
        let spec = match self {
            LatticeChoice::Name(name) => LatticeSpec::preset(name, 2, 1)?,
            LatticeChoice::Preset { preset, d, n } => LatticeSpec::preset(preset, *d, *n)?,
            LatticeChoice::Inline(spec) => spec.clone(),
        };
        Lattice::new(spec)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exponents {
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
}

/// Synthetic boundary-fitting demo: u_ε = g_F + a·ε·sin(2π(x₁ + 2x₂)/(7ε))
/// on A, glued to g_F.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlueDemo {
    /// ε = 1/m_eps.
    pub m_eps: u32,
    pub delta: f64,
    pub layers: u32,
    /// Truncation level; selects truncation gluing when present.
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default = "half")]
    pub amplitude: f64,
}

fn half() -> f64 {
    0.5
}

fn default_samples() -> usize {
    4
}

fn quadratic() -> PotentialSpec {
    PotentialSpec::new(Family::Quadratic)
}

fn default_environment() -> EnvironmentSpec {
    EnvironmentSpec::iid(Distribution::Constant { c: 1.0 }, 0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub lattice: LatticeChoice,
    #[serde(default = "default_environment")]
    pub environment: EnvironmentSpec,
    /// Fixed layer values ω(0), …, ω(L−1), repeated along e₁; replaces the
    /// random environment in `layered-verify`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<Vec<f64>>,
    #[serde(default = "quadratic")]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Macroscopic gradients, each n×d row-major.
    #[serde(default, rename = "F")]
    pub f: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(default)]
    pub k_schedule: Vec<u32>,
    /// Values m = 1/ε.
    #[serde(default)]
    pub eps_schedule: Vec<u32>,
    #[serde(default)]
    pub exponents: Exponents,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Region>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force: Option<Vec<f64>>,
    /// Homogenized tensor (nd × nd row-major) for `dirichlet`; extracted
    /// from the environment when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tensor: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub glue: Option<GlueDemo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Fail with exit code 4 when an implied constant exceeds this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    /// Applies a seed to the environment and to the solver starts.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.environment.seed = seed;
        self.solver.seed = seed;
        self
    }
}

/// Everything a command needs, validated.
pub struct Validated {
    pub lattice: Lattice,
    pub potential: Potential,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::ConfigInvalid(msg.into())
}

/// Checks the configuration for `command` before any work starts. Messages
/// name the violated standing assumption.
pub fn validate(cfg: &ExperimentConfig, command: &str) -> Result<Validated> {
    let lattice = cfg.lattice.build()?;
    cfg.environment.validate(&lattice)?;
    let potential = cfg.potential.clone().build()?;
    let (d, n) = (lattice.d(), lattice.n());
    if cfg.samples == 0 {
        return Err(invalid("samples must be at least 1"));
    }
    for f in &cfg.f {
        if f.len() != n * d {
            return Err(invalid(format!("each F needs n·d = {} entries, got {}", n * d, f.len())));
        }
    }
    if let Some(layers) = &cfg.layers {
        if layers.is_empty() || layers.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(invalid("layer values must be positive and finite"));
        }
    }

    let ex = &cfg.exponents;
    let p = potential.p();
    if let (Some(alpha), Some(beta)) = (ex.alpha, ex.beta) {
        if !(alpha >= 1.0) || !(beta >= 1.0 / (p - 1.0)) {
            return Err(invalid(format!(
                "moment condition: need α ≥ 1 and β ≥ 1/(p−1) = {}, got α = {alpha}, β = {beta}",
                1.0 / (p - 1.0)
            )));
        }
        let reports_divergence = matches!(command, "moments" | "mu");
        for (b, e) in lattice.edges().iter().enumerate().filter(|_| !reports_divergence) {
            let dist = cfg.environment.dist_for(b);
            if alpha.is_finite() && dist.moment_diverges(alpha) {
                return Err(invalid(format!("moment condition: 𝔼[λ_b^α] is infinite for edge {b} at α = {alpha}")));
            }
            if e.nn && beta.is_finite() && dist.moment_diverges(-beta) {
                return Err(invalid(format!("moment condition: 𝔼[λ_b^−β] is infinite for edge {b} at β = {beta}")));
            }
        }
        let vectorial = alpha > 1.0 && 1.0 / alpha + 1.0 / beta <= p / d as f64;
        let scalar = n == 1 && (potential.is_convex() || potential.has_companion());
        if matches!(command, "cell" | "homogenize" | "tensor" | "dirichlet") && !vectorial && !scalar {
            return Err(invalid(format!(
                "vectorial moment condition: 1/α + 1/β = {} > p/d = {} (or α = 1), and the scalar alternative needs n = 1 with a convex companion",
                1.0 / alpha + 1.0 / beta,
                p / d as f64
            )));
        }
    }

    match command {
        "cell" | "homogenize" => {
            if cfg.f.is_empty() {
                return Err(invalid("at least one F is required"));
            }
        }
        "layered-verify" => {
            if !lattice.is_hypercubic() {
                return Err(Error::NotHypercubic);
            }
            if n != 1 || !matches!(potential.family(), Family::Quadratic | Family::WeightedPPower) {
                return Err(invalid("layered closed forms need a scalar p-power potential"));
            }
            if cfg.layers.is_none() && cfg.environment.dist.len() != 1 {
                return Err(invalid("layered mode shares one distribution"));
            }
        }
        "dirichlet" => {
            if let Some(t) = &cfg.tensor {
                if t.len() != (n * d) * (n * d) {
                    return Err(invalid(format!("tensor needs {} entries", (n * d) * (n * d))));
                }
            }
            if let Some(f) = &cfg.force {
                if f.len() != n {
                    return Err(invalid(format!("force needs n = {n} entries")));
                }
            }
        }
        "poincare" => {
            let (Some(q), Some(alpha), Some(beta)) = (ex.q, ex.alpha, ex.beta) else {
                return Err(invalid("poincare needs exponents q, α and β"));
            };
            let lhs = (1.0 - 1.0 / alpha) / q;
            let rhs = (1.0 + 1.0 / beta) / p - 1.0 / d as f64;
            if !(alpha > 1.0) || lhs < rhs - 1e-12 {
                return Err(invalid(format!(
                    "Poincaré exponents: need α > 1 and (1 − 1/α)/q ≥ (1 + 1/β)/p − 1/d, got {lhs} < {rhs}"
                )));
            }
        }
        "mu" => {
            if !lattice.is_hypercubic() {
                return Err(Error::NotHypercubic);
            }
            if let (Some(beta), Some(gamma)) = (ex.beta, ex.gamma) {
                if !(gamma > 1.0 / (2.0 * d as f64 * (p - 1.0))) || !(beta < 2.0 * d as f64 * gamma) {
                    return Err(invalid(format!(
                        "i.i.d. moment hypothesis: need γ > 1/(2d(p−1)) and 1/(p−1) ≤ β < 2dγ, got β = {beta}, γ = {gamma}"
                    )));
                }
            }
        }
        "glue-demo" => {
            let Some(g) = &cfg.glue else {
                return Err(invalid("glue-demo needs a glue section"));
            };
            if g.s.is_some() && (n != 1 || !potential.has_companion()) {
                return Err(invalid("scalar condition: truncation gluing needs n = 1 and a convex companion"));
            }
        }
        _ => {}
    }
    Ok(Validated { lattice, potential })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses() {
        let c = ExperimentConfig::from_json(r#"{"F": [[1, 0]]}"#).unwrap();
        assert_eq!(c.lattice, LatticeChoice::Name("zd-nn".into()));
        validate(&c, "cell").unwrap();
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"Fs": []}"#).is_err());
    }

    #[test]
    fn vectorial_condition_named() {
        let c = ExperimentConfig::from_json(
            r#"{"lattice": {"preset": "zd-nn", "d": 3, "n": 2}, "F": [[1,0,0,0,1,0]],
                "potential": {"family": "double_well"},
                "exponents": {"alpha": 1.2, "beta": 1.2}}"#,
        )
        .unwrap();
        let err = validate(&c, "homogenize").err().unwrap().to_string();
        assert!(err.contains("vectorial moment condition"), "{err}");
    }

    #[test]
    fn degenerate_moments_named() {
        let c = ExperimentConfig::from_json(
            r#"{"F": [[1,0]], "environment": {"dist": [{"kind": "pareto-inverse", "a": 1.0}]},
                "exponents": {"alpha": 1.0, "beta": 1.0}}"#,
        )
        .unwrap();
        let err = validate(&c, "homogenize").err().unwrap().to_string();
        assert!(err.contains("moment condition"), "{err}");
    }
}
