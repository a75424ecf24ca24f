//! Schatten norms and quasi-norms.

use crate::error::{Error, Result};
use crate::linalg::{orthonormality_defect, thin_svd, DenseMatrix};

/// Orthogonality defect tolerated by [`rotation_trace_gap`].
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-10;

/// A Schatten exponent `p > 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SchattenExponent(f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchattenKind {
    Norm,
    QuasiNorm,
}

impl SchattenExponent {
    pub fn new(p: f64) -> Result<Self> {
        if p > 0.0 && p.is_finite() {
            Ok(Self(p))
        } else {
            Err(Error::invalid_exponent(p, "Schatten exponent must be positive and finite"))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn kind(self) -> SchattenKind {
        if self.0 >= 1.0 {
            SchattenKind::Norm
        } else {
            SchattenKind::QuasiNorm
        }
    }
}

impl TryFrom<f64> for SchattenExponent {
    type Error = Error;

    fn try_from(p: f64) -> Result<Self> {
        Self::new(p)
    }
}

/// `sum_i sigma_i^p`, with `0^p = 0`.
pub fn trace_power(sigma: &[f64], p: SchattenExponent) -> Result<f64> {
    let p = p.value();
    let mut total = 0.0;
    for &s in sigma {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::InvalidInput(format!(
                "trace_power needs nonnegative finite entries, got {s}"
            )));
        }
        if s > 0.0 {
            total += s.powf(p);
        }
    }
    Ok(total)
}

/// `||x||_{S_p}^p`, summing over the numerically nonzero singular values.
pub fn schatten_power(x: &DenseMatrix, p: SchattenExponent) -> Result<f64> {
    let svd = thin_svd(x, None)?;
    trace_power(&svd.significant_sigma(), p)
}

/// `||x||_{S_p} = (sum_i sigma_i(x)^p)^{1/p}`.
///
/// Singular values at or below the rank cutoff are dropped. Without that, a
/// rank-deficient input would pick up `(1e-16)^p` noise terms, which for small
/// `p` are far from negligible.
pub fn schatten_norm(x: &DenseMatrix, p: SchattenExponent) -> Result<f64> {
    let power = schatten_power(x, p)?;
    Ok(if power == 0.0 { 0.0 } else { power.powf(1.0 / p.value()) })
}

/// `Tr^p(A diag(sigma) A^T) - Tr^p(diag(sigma))` where `Tr^p(B) = sum_k B_kk^p`.
///
/// Nonnegative for every orthogonal `a` and `0 < p <= 1`.
pub fn rotation_trace_gap(sigma: &[f64], a: &DenseMatrix, p: SchattenExponent) -> Result<f64> {
    if p.value() > 1.0 {
        return Err(Error::invalid_exponent(p.value(), "rotation trace gap needs 0 < p <= 1"));
    }
    let r = sigma.len();
    if a.nrows() != r || a.ncols() != r {
        return Err(Error::Dimension(format!(
            "rotation is {}x{}, sigma has length {r}",
            a.nrows(),
            a.ncols()
        )));
    }
    let defect = orthonormality_defect(a).max(orthonormality_defect(&a.transpose()));
    if defect > ORTHOGONALITY_TOLERANCE {
        return Err(Error::InvalidInput(format!(
            "matrix is not orthogonal (defect {defect:e})"
        )));
    }
    // (A S A^T)_kk = sum_j a_kj^2 s_j, nonnegative term by term
    let rotated: Vec<f64> = (0..r)
        .map(|k| (0..r).map(|j| a[(k, j)] * a[(k, j)] * sigma[j]).sum())
        .collect();
    Ok(trace_power(&rotated, p)? - trace_power(sigma, p)?)
}
