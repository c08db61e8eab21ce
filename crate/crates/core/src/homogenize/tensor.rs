use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::estimate_w0;
use crate::environment::EnvironmentSpec;
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::potentials::Potential;
use crate::solver::SolverConfig;

/// 𝕃 as a symmetric (nd)×(nd) matrix indexed by the row-major flattening
/// a = c·d + j of F, so that W(F) = ½ F·𝕃F.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomTensor {
    pub dim: usize,
    /// Row-major.
    pub matrix: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// Smallest eigenvalue: the ellipticity certificate.
    pub min_eigenvalue: f64,
    pub k: u32,
    pub samples: usize,
}

impl HomTensor {
    fn with_spectrum(l: DMatrix<f64>, k: u32, samples: usize) -> Self {
        let dim = l.nrows();
        let mut eigenvalues: Vec<f64> = SymmetricEigen::new(l.clone()).eigenvalues.iter().copied().collect();
        eigenvalues.sort_by(|a, b| a.total_cmp(b));
        Self {
            dim,
            matrix: l.transpose().iter().copied().collect(),
            min_eigenvalue: eigenvalues[0],
            eigenvalues,
            k,
            samples,
        }
    }

    /// A user-supplied symmetric tensor (k = samples = 0).
    pub fn from_matrix(dim: usize, matrix: &[f64]) -> Result<Self> {
        if matrix.len() != dim * dim || dim == 0 {
            return Err(Error::InvalidSpec(format!("tensor needs {} entries", dim * dim)));
        }
        let l = DMatrix::from_row_slice(dim, dim, matrix);
        if (0..dim).any(|a| (0..a).any(|b| l[(a, b)] != l[(b, a)])) {
            return Err(Error::InvalidSpec("tensor must be symmetric".into()));
        }
        Ok(Self::with_spectrum(l, 0, 0))
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.matrix[a * self.dim + b]
    }

    /// ½ F·𝕃F.
    pub fn energy(&self, f: &[f64]) -> f64 {
        let mut acc = 0.0;
        for a in 0..self.dim {
            for b in 0..self.dim {
                acc += f[a] * self.get(a, b) * f[b];
            }
        }
        0.5 * acc
    }
}

/// Polarization: 𝕃[a,a] = 2W(E_a), 𝕃[a,b] = W(E_a + E_b) − W(E_a) − W(E_b),
/// with every W the Monte Carlo mean of W_hom^(k) over the same samples.
pub fn extract_tensor(
    lattice: &Lattice,
    spec: &EnvironmentSpec,
    pot: &Potential,
    k: u32,
    samples: usize,
    cfg: &SolverConfig,
) -> Result<HomTensor> {
    if !pot.is_quadratic() {
        return Err(Error::NotQuadratic);
    }
    let dim = lattice.n() * lattice.d();
    let unit = |idx: &[usize]| {
        let mut f = vec![0.0; dim];
        idx.iter().for_each(|&a| f[a] = 1.0);
        f
    };
    let w = |f: Vec<f64>| estimate_w0(lattice, spec, pot, &f, &[k], samples, cfg).map(|e| e.estimate);
    let diag = (0..dim).map(|a| w(unit(&[a]))).collect::<Result<Vec<_>>>()?;
    let mut l = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        l[(a, a)] = 2.0 * diag[a];
        for b in 0..a {
            let v = w(unit(&[a, b]))? - diag[a] - diag[b];
            l[(a, b)] = v;
            l[(b, a)] = v;
        }
    }
    Ok(HomTensor::with_spectrum(l, k, samples))
}
