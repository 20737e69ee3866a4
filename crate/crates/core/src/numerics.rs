//! Dense symmetric eigendecomposition, Moore-Penrose pseudo-inverse and the
//! spectral quantities both learners need.
//!
//! The eigen-solver itself is nalgebra's symmetric QR iteration; this module
//! fixes the ordering, rank-tolerance and PSD conventions on top of it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative rank tolerance: eigenvalues `λ ≤ DEFAULT_RANK_TOL·λ_max` count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Eigenvalues this far below zero (relative to `max(1, λ_max)`) are still
/// accepted as PSD round-off.
pub const PSD_SLACK: f64 = 1e-10;

const SYMMETRY_TOL: f64 = 1e-12;

/// Square matrix with entries symmetric within `1e-12` and all finite.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let scale = m.amax().max(1.0);
        let asym = (&m - m.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self(m))
    }

    /// Builds the matrix from its upper triangle; `f(i, j)` is called for `i <= j`.
    pub fn from_upper(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self(m)
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let v = &self.0 * DVector::from_column_slice(x);
        v.iter().copied().collect()
    }

    /// `a·self + b·other`
    pub fn combine(&self, a: f64, other: &SymmetricMatrix, b: f64) -> SymmetricMatrix {
        SymmetricMatrix(&self.0 * a + &other.0 * b)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    pub fn max_abs_diff(&self, other: &SymmetricMatrix) -> f64 {
        (&self.0 - &other.0).amax()
    }
}

/// Eigenpairs with eigenvalues ascending; column `k` of `vectors` pairs with `values[k]`.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

pub fn sym_eig(a: &SymmetricMatrix) -> Eigen {
    let n = a.order();
    let eig = SymmetricEigen::new(a.0.clone());
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]);
    Eigen { values, vectors }
}

/// Moore-Penrose pseudo-inverse of a PSD matrix: eigenvalues above
/// `rel_tol·λ_max` are inverted, the rest map to zero.
pub fn pseudo_inverse(a: &SymmetricMatrix, rel_tol: f64) -> Result<SymmetricMatrix> {
    let n = a.order();
    if a.max_abs() == 0.0 {
        return Ok(SymmetricMatrix::zeros(n));
    }
    let Eigen { values, vectors } = sym_eig(a);
    let lambda_max = values[n - 1];
    let lambda_min = values[0];
    if lambda_min < -PSD_SLACK * lambda_max.max(1.0) {
        return Err(Error::NotPsd(lambda_min));
    }
    let cutoff = rel_tol * lambda_max;
    let mut scaled = vectors.clone();
    for (k, &lambda) in values.iter().enumerate() {
        let inv = if lambda > cutoff { 1.0 / lambda } else { 0.0 };
        scaled.column_mut(k).scale_mut(inv);
    }
    let mut out = scaled * vectors.transpose();
    // restore exact symmetry lost to round-off
    let t = out.transpose();
    out += t;
    out *= 0.5;
    Ok(SymmetricMatrix(out))
}

/// Smallest eigenvalue strictly above the rank tolerance, i.e. `1/‖A⁺‖₂`.
pub fn min_eig_on_range(a: &SymmetricMatrix) -> Result<f64> {
    if a.max_abs() == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let values = sym_eig(a).values;
    let cutoff = DEFAULT_RANK_TOL * values[values.len() - 1];
    values
        .into_iter()
        .find(|&l| l > cutoff)
        .ok_or(Error::ZeroMatrix)
}

/// `E[τ̂τ̂']` for `τ̂` uniform over the symmetrized permutahedron's vertices:
/// `(n²−1)/12` on the diagonal and `−(n+1)/12` elsewhere.
pub fn uniform_covariance(n: usize) -> SymmetricMatrix {
    let nf = n as f64;
    let diag = (nf * nf - 1.0) / 12.0;
    let off = -(nf + 1.0) / 12.0;
    SymmetricMatrix::from_upper(n, |i, j| if i == j { diag } else { off })
}

/// Nonzero eigenvalue of [`uniform_covariance`], `n(n+1)/12`.
pub fn uniform_min_eig(n: usize) -> f64 {
    let nf = n as f64;
    nf * (nf + 1.0) / 12.0
}
