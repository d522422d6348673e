//! Inertia of symmetric matrices via full eigendecomposition.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;

/// Counts of positive, zero, and negative eigenvalues under a zero band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InertiaTriple {
    pub n_plus: usize,
    pub n_zero: usize,
    pub n_minus: usize,
    /// Relative threshold that classified eigenvalues as zero.
    pub zero_tol: f64,
}

impl InertiaTriple {
    pub fn dim(&self) -> usize {
        self.n_plus + self.n_zero + self.n_minus
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.n_plus, self.n_zero, self.n_minus]
    }

    /// Componentwise signed difference `self - other`.
    pub fn diff(&self, other: &InertiaTriple) -> [i64; 3] {
        [
            self.n_plus as i64 - other.n_plus as i64,
            self.n_zero as i64 - other.n_zero as i64,
            self.n_minus as i64 - other.n_minus as i64,
        ]
    }

    pub fn matches(&self, plus: usize, zero: usize, minus: usize) -> bool {
        self.n_plus == plus && self.n_zero == zero && self.n_minus == minus
    }
}

impl std::fmt::Display for InertiaTriple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.n_plus, self.n_zero, self.n_minus)
    }
}

/// Sorted eigenvalues of a symmetric matrix (ascending).
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * m.amax().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let sym = (m + m.transpose()).scale(0.5);
    let mut eigs: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(eigs)
}

/// Inertia of a symmetric matrix. An eigenvalue counts as zero when
/// `|lambda| <= zero_tol * max(1, spectral radius)`.
pub fn inertia(m: &DMatrix<f64>, zero_tol: f64) -> Result<InertiaTriple> {
    let eigs = symmetric_eigenvalues(m)?;
    let radius = eigs.iter().fold(0.0f64, |r, &e| r.max(e.abs()));
    let band = zero_tol * radius.max(1.0);
    let mut t = InertiaTriple {
        n_plus: 0,
        n_zero: 0,
        n_minus: 0,
        zero_tol,
    };
    for e in eigs {
        if e.abs() <= band {
            t.n_zero += 1;
        } else if e > 0.0 {
            t.n_plus += 1;
        } else {
            t.n_minus += 1;
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_example() {
        let m = DMatrix::from_diagonal(&nalgebra::dvector![2.0, 0.0, -1.0]);
        let t = inertia(&m, 1e-8).unwrap();
        assert!(t.matches(1, 1, 1));
        assert_eq!(t.dim(), 3);
    }

    #[test]
    fn rank_one_laplacian_block() {
        let m = DMatrix::from_row_slice(2, 2, &[-2.0, 2.0, 2.0, -2.0]);
        let t = inertia(&m, 1e-8).unwrap();
        assert!(t.matches(0, 1, 1));
        let eigs = symmetric_eigenvalues(&m).unwrap();
        assert!((eigs[0] + 4.0).abs() <= 1e-12);
        assert!(eigs[1].abs() <= 1e-12);
    }

    /// Frozen from the trace plus the explicit null vectors e and (0,-1,1)
    /// of the collinear-triangle force matrix.
    #[test]
    fn collinear_triangle_force_matrix() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 0.5, 0.5, -1.0, 0.5, 0.5]);
        let t = inertia(&m, 1e-8).unwrap();
        assert!(t.matches(1, 2, 0), "got {t}");
        let eigs = symmetric_eigenvalues(&m).unwrap();
        assert!((eigs[2] - 3.0).abs() <= 1e-12);
    }

    #[test]
    fn asymmetry_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(matches!(inertia(&m, 1e-8), Err(Error::NotSymmetric(_))));
    }
}
