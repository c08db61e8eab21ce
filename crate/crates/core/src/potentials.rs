//! Pair interaction families V(λ; r) with growth metadata and convex
//! companions for the scalar case.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// λ|r|ᵖ
    WeightedPPower,
    /// λ|r|²
    Quadratic,
    /// λ(|r|² − 1)²
    DoubleWell,
    /// λ(|r| − 1)²
    VectorWell,
    /// λ·T(|r|) with T piecewise linear through user points.
    Tabulated,
}

/// Companion f(λ; r) = coef·λ·|r|^power, parsed from forms such as
/// `"2*lambda*r^2"` or `"0"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Companion {
    pub form: String,
    pub q: f64,
    pub c2: f64,
}

impl Companion {
    pub fn parse_form(form: &str) -> Result<(f64, f64)> {
        let bad = || Error::InvalidPotential(format!("cannot parse companion form '{form}'"));
        let compact: String = form.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.parse::<f64>().map(|v| v == 0.0).unwrap_or(false) {
            return Ok((0.0, 0.0));
        }
        let mut coef = 1.0;
        let mut power = None;
        let mut saw_lambda = false;
        for tok in compact.split('*') {
            if tok == "lambda" {
                saw_lambda = true;
            } else if let Some(e) = tok.strip_prefix("|r|^").or_else(|| tok.strip_prefix("r^")) {
                power = Some(e.parse::<f64>().map_err(|_| bad())?);
            } else if tok == "r" || tok == "|r|" {
                power = Some(1.0);
            } else {
                coef *= tok.parse::<f64>().map_err(|_| bad())?;
            }
        }
        match (saw_lambda, power) {
            (true, Some(e)) => Ok((coef, e)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub companion: Option<Companion>,
    /// (|r|, T) points for the tabulated family, |r| strictly increasing
    /// from 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<(f64, f64)>>,
}

/// Validated potential ready for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub spec: PotentialSpec,
    p: f64,
    c1: f64,
    companion: Option<(f64, f64)>,
}

impl PotentialSpec {
    pub fn new(family: Family) -> Self {
        Self { family, p: None, c1: None, companion: None, table: None }
    }

    pub fn p_power(p: f64) -> Self {
        Self { p: Some(p), ..Self::new(Family::WeightedPPower) }
    }

    pub fn with_companion(mut self, form: &str, q: f64, c2: f64) -> Self {
        self.companion = Some(Companion { form: form.into(), q, c2 });
        self
    }

    pub fn with_c1(mut self, c1: f64) -> Self {
        self.c1 = Some(c1);
        self
    }

    pub fn build(self) -> Result<Potential> {
        Potential::new(self)
    }
}

impl Potential {
    pub fn new(spec: PotentialSpec) -> Result<Self> {
        let fixed = match spec.family {
            Family::Quadratic | Family::VectorWell => Some(2.0),
            Family::DoubleWell => Some(4.0),
            Family::WeightedPPower | Family::Tabulated => None,
        };
        let p = match (fixed, spec.p) {
            (Some(f), Some(p)) if (f - p).abs() > 0.0 => {
                return Err(Error::InvalidPotential(format!("{:?} has growth exponent {f}, not {p}", spec.family)))
            }
            (Some(f), _) => f,
            (None, Some(p)) => p,
            (None, None) => return Err(Error::InvalidPotential("growth exponent p is required".into())),
        };
        if !(p > 1.0) {
            return Err(Error::InvalidPotential("growth exponent must exceed 1".into()));
        }
        let c1 = match (spec.c1, spec.family) {
            (Some(c), _) => c,
            (None, Family::DoubleWell) => 4.0,
            (None, Family::VectorWell) => 2.0,
            (None, _) => 1.0,
        };
        if !(c1 > 0.0) {
            return Err(Error::InvalidPotential("c1 must be positive".into()));
        }
        if spec.family == Family::Tabulated {
            let t = spec
                .table
                .as_ref()
                .ok_or_else(|| Error::InvalidPotential("tabulated family needs a table".into()))?;
            if t.len() < 2 || t[0].0 != 0.0 || t.windows(2).any(|w| w[1].0 <= w[0].0) || t.iter().any(|x| x.1 < 0.0) {
                return Err(Error::InvalidPotential(
                    "table must start at 0, increase strictly and stay nonnegative".into(),
                ));
            }
        }
        let companion = match &spec.companion {
            Some(c) => {
                if !(c.q > 1.0 && c.q < p) {
                    return Err(Error::InvalidPotential("companion exponent q must lie in (1, p)".into()));
                }
                Some(Companion::parse_form(&c.form)?)
            }
            None => None,
        };
        Ok(Self { spec, p, c1, companion })
    }

    pub fn family(&self) -> Family {
        self.spec.family
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    /// Quadratic in r, so the cell problems are linear.
    pub fn is_quadratic(&self) -> bool {
        self.spec.family == Family::Quadratic || (self.spec.family == Family::WeightedPPower && self.p == 2.0)
    }

    pub fn is_convex(&self) -> bool {
        matches!(self.spec.family, Family::Quadratic | Family::WeightedPPower)
    }

    /// Analytic gradients are available.
    pub fn is_smooth(&self) -> bool {
        self.spec.family != Family::Tabulated
    }

    fn table_eval(&self, x: f64) -> (f64, f64) {
        let t = self.spec.table.as_ref().expect("validated table");
        let i = match t.iter().position(|&(r, _)| r > x) {
            Some(0) => 0,
            Some(i) => i - 1,
            None => t.len() - 2,
        };
        let (r0, v0) = t[i];
        let (r1, v1) = t[i + 1];
        let slope = (v1 - v0) / (r1 - r0);
        (v0 + slope * (x - r0), slope)
    }

    pub fn eval(&self, lambda: f64, r: &[f64]) -> f64 {
        let r2: f64 = r.iter().map(|x| x * x).sum();
        lambda
            * match self.spec.family {
                Family::Quadratic => r2,
                Family::WeightedPPower => {
                    if self.p == 2.0 {
                        r2
                    } else {
                        r2.sqrt().powf(self.p)
                    }
                }
                Family::DoubleWell => (r2 - 1.0) * (r2 - 1.0),
                Family::VectorWell => {
                    let a = r2.sqrt() - 1.0;
                    a * a
                }
                Family::Tabulated => self.table_eval(r2.sqrt()).0.max(0.0),
            }
    }

    /// Writes ∂V/∂r into `out`. At r = 0 the vector-well and tabulated
    /// families return 0, an element of the subdifferential.
    pub fn grad(&self, lambda: f64, r: &[f64], out: &mut [f64]) {
        let r2: f64 = r.iter().map(|x| x * x).sum();
        let s = match self.spec.family {
            Family::Quadratic => 2.0,
            Family::WeightedPPower => {
                if r2 == 0.0 {
                    0.0
                } else {
                    self.p * r2.sqrt().powf(self.p - 2.0)
                }
            }
            Family::DoubleWell => 4.0 * (r2 - 1.0),
            Family::VectorWell => {
                if r2 == 0.0 {
                    0.0
                } else {
                    2.0 * (1.0 - 1.0 / r2.sqrt())
                }
            }
            Family::Tabulated => {
                if r2 == 0.0 {
                    0.0
                } else {
                    let n = r2.sqrt();
                    self.table_eval(n).1 / n
                }
            }
        };
        for (o, x) in out.iter_mut().zip(r) {
            *o = lambda * s * x;
        }
    }

    pub fn has_companion(&self) -> bool {
        self.companion.is_some()
    }

    /// Companion value f(λ; r); zero when none is configured.
    pub fn companion(&self, lambda: f64, r: &[f64]) -> f64 {
        match self.companion {
            Some((coef, power)) if coef != 0.0 => {
                let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
                coef * lambda * n.powf(power)
            }
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub c1: f64,
    pub samples: usize,
    /// Least c₁ for which both bounds hold on the sample set.
    pub tightest_c1: f64,
}

/// Checks λ(|r|ᵖ/c₁ − c₁) ≤ V(λ;r) ≤ c₁(1 + λ(|r|ᵖ + 1)) on `samples`.
pub fn growth_envelope_check(pot: &Potential, lambda: f64, samples: &[Vec<f64>], c1: Option<f64>) -> Result<GrowthReport> {
    let c1 = c1.unwrap_or(pot.c1());
    let p = pot.p();
    let mut tightest: f64 = 0.0;
    for r in samples {
        let v = pot.eval(lambda, r);
        let rp = r.iter().map(|x| x * x).sum::<f64>().sqrt().powf(p);
        let lower = lambda * (rp / c1 - c1);
        let upper = c1 * (1.0 + lambda * (rp + 1.0));
        let slack = 1e-12 * (1.0 + v.abs());
        if lower > v + slack || v > upper + slack {
            return Err(Error::EnvelopeViolated { r: r.clone() });
        }
        let w = v / lambda;
        let c_low = 0.5 * (-w + (w * w + 4.0 * rp).sqrt());
        let c_up = v / (1.0 + lambda * (rp + 1.0));
        tightest = tightest.max(c_low).max(c_up);
    }
    Ok(GrowthReport { c1, samples: samples.len(), tightest_c1: tightest })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub min_second_difference: f64,
    pub companion_growth_ok: bool,
}

/// Second differences of V + f on an increasing scalar grid must be
/// nonnegative up to `tol`, and f must obey its growth bound.
pub fn convex_companion_check(pot: &Potential, lambda: f64, grid: &[f64], tol: f64) -> Result<ConvexityReport> {
    let h = |r: f64| pot.eval(lambda, &[r]) + pot.companion(lambda, &[r]);
    let mut min_sd = f64::INFINITY;
    for w in grid.windows(3) {
        let (a, b, c) = (w[0], w[1], w[2]);
        // divided second difference, valid on nonuniform grids
        let sd = 2.0 * ((h(c) - h(b)) / (c - b) - (h(b) - h(a)) / (b - a)) / (c - a);
        if sd < -tol {
            return Err(Error::NotConvex { r: b, second_difference: sd });
        }
        min_sd = min_sd.min(sd);
    }
    let companion_growth_ok = match &pot.spec.companion {
        Some(c) => grid
            .iter()
            .all(|&r| pot.companion(lambda, &[r]) <= c.c2 * (1.0 + lambda * (r.abs().powf(c.q) + 1.0)) + 1e-12),
        None => true,
    };
    Ok(ConvexityReport { min_second_difference: min_sd, companion_growth_ok })
}
