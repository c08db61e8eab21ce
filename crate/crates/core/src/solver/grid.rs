use super::lbfgs::Objective;
use crate::error::{Error, Result};

pub const MAX_GRID_UNKNOWNS: usize = 6;
pub const MAX_GRID_POINTS: usize = 41;
/// Cap on the total number of tensor-grid evaluations.
pub const MAX_GRID_EVALS: u64 = 1 << 26;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub points: usize,
    pub half_width: f64,
    /// Grid centre; zero if `None`.
    pub center: Option<Vec<f64>>,
}

impl GridSpec {
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: u64,
}

/// Exhaustive search over the tensor grid centre ± half_width with
/// `points` nodes per unknown.
pub fn grid_search(obj: &impl Objective, spec: &GridSpec) -> Result<GridOutcome> {
    let dim = obj.dim();
    if dim > MAX_GRID_UNKNOWNS {
        return Err(Error::TooLarge(format!("{dim} unknowns exceed the grid limit {MAX_GRID_UNKNOWNS}")));
    }
    if spec.points < 2 || spec.points > MAX_GRID_POINTS {
        return Err(Error::TooLarge(format!("grid needs 2..={MAX_GRID_POINTS} points per unknown")));
    }
    let total = (spec.points as u64).pow(dim as u32);
    if total > MAX_GRID_EVALS {
        return Err(Error::TooLarge(format!("{total} grid evaluations exceed {MAX_GRID_EVALS}")));
    }
    let center = spec.center.clone().unwrap_or_else(|| vec![0.0; dim]);
    let h = spec.spacing();
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    let mut best = (f64::INFINITY, x.clone());
    for _ in 0..total {
        for k in 0..dim {
            x[k] = center[k] - spec.half_width + h * idx[k] as f64;
        }
        let v = obj.value(&x);
        if v < best.0 {
            best = (v, x.clone());
        }
        for k in (0..dim).rev() {
            idx[k] += 1;
            if idx[k] < spec.points {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(GridOutcome { x: best.1, value: best.0, evaluations: total })
}
