//! Small dense helpers for the 2×2 (zero-padded) matrices used throughout.

use crate::error::{validation, Result};
use crate::{tol, Mat};
use nalgebra::SymmetricEigen;

/// Eigenvalues of the symmetric part of `m`, restricted to the active block.
pub fn sym_eigenvalues(m: &Mat, dim: usize) -> Vec<f64> {
    if dim == 1 {
        return vec![m[(0, 0)]];
    }
    let s = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(s).eigenvalues.iter().copied().collect()
}

pub fn is_symmetric(m: &Mat, scale_tol: f64) -> bool {
    (m[(0, 1)] - m[(1, 0)]).abs() <= scale_tol * (1.0 + m.abs().max())
}

/// Square root of a symmetric PSD matrix. Eigenvalues in `[-1e-12, 0)` are
/// clamped to zero; anything more negative is rejected.
pub fn psd_sqrt(m: &Mat, dim: usize) -> Result<Mat> {
    if dim == 1 {
        let a = m[(0, 0)];
        if a < -tol::PSD {
            return Err(validation(format!("matrix not PSD: eigenvalue {a}")));
        }
        return Ok(Mat::new(a.max(0.0).sqrt(), 0.0, 0.0, 0.0));
    }
    let s = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s);
    let mut vals = eig.eigenvalues;
    for v in vals.iter_mut() {
        if *v < -tol::PSD {
            return Err(validation(format!("matrix not PSD: eigenvalue {v}")));
        }
        *v = v.max(0.0).sqrt();
    }
    Ok(eig.eigenvectors * Mat::from_diagonal(&vals) * eig.eigenvectors.transpose())
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &Mat) -> f64 {
    let g = m.transpose() * m;
    let e = SymmetricEigen::new(g).eigenvalues;
    e.max().max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_roundtrip() {
        let a = Mat::new(2.0, 0.5, 0.5, 1.0);
        let r = psd_sqrt(&a, 2).unwrap();
        assert!((r * r - a).abs().max() < 1e-12);
        assert!(psd_sqrt(&Mat::new(-1.0, 0.0, 0.0, 1.0), 2).is_err());
        let tiny = Mat::new(-1e-14, 0.0, 0.0, 1.0);
        assert_eq!(psd_sqrt(&tiny, 2).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn norms() {
        assert!((spectral_norm(&Mat::new(3.0, 0.0, 0.0, -4.0)) - 4.0).abs() < 1e-12);
        assert_eq!(sym_eigenvalues(&Mat::new(2.0, 0.0, 0.0, 0.0), 1), vec![2.0]);
    }
}
