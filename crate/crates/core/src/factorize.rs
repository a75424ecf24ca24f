//! Exponent splits, factor chains, and the closed-form optimal factorizations.
//!
//! For `0 < p <= 1` and exponents `p_1..p_M` with `sum 1/p_i = 1/p`,
//!
//! ```text
//! ||X||_{S_p} = min_{X = U_1 ... U_M} prod_i ||U_i||_{S_{p_i}}
//!             = min_{X = U_1 ... U_M} (p * sum_i ||U_i||_{S_{p_i}}^{p_i} / p_i)^{1/p}
//! ```
//!
//! and both minima are attained by splitting the singular values of `X` across
//! the factors: `U_1 = L diag(s^{p/p_1})`, `U_i = diag(s^{p/p_i})` in the
//! middle, and `U_M = R diag(s^{p/p_M})` for the last factor.
//!
//! Chains are stored with the last factor transposed, so a two-factor set is
//! `X = U V^T` and a three-factor set is `X = U V W^T`.

use num_rational::Ratio;
use num_traits::CheckedAdd;

use crate::error::{Error, Result};
use crate::linalg::{diag_power, ensure_finite, thin_svd, DenseMatrix};
use crate::schatten::{schatten_norm, schatten_power, SchattenExponent};

/// Relative tolerance on `sum_i 1/p_i - 1/p`.
pub const HARMONIC_TOLERANCE: f64 = 1e-12;

/// Target exponent `p` together with factor exponents whose reciprocals sum to `1/p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentSplit {
    p: f64,
    parts: Vec<f64>,
}

impl ExponentSplit {
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn parts(&self) -> &[f64] {
        &self.parts
    }

    /// Number of factors.
    pub fn arity(&self) -> usize {
        self.parts.len()
    }

    /// True when every factor exponent is at least 1, i.e. each factor term is convex.
    pub fn all_convex(&self) -> bool {
        self.parts.iter().all(|&q| q >= 1.0)
    }

    /// Validates a split given as exact rationals, then converts to floats.
    pub fn from_ratios(p: Ratio<i64>, parts: &[Ratio<i64>]) -> Result<Self> {
        let zero = Ratio::from_integer(0);
        if p <= zero {
            return Err(Error::invalid_exponent(ratio_to_f64(p), "target exponent must be positive"));
        }
        if let Some(bad) = parts.iter().find(|q| **q <= zero) {
            return Err(Error::invalid_exponent(ratio_to_f64(*bad), "factor exponents must be positive"));
        }
        let sum = parts
            .iter()
            .try_fold(zero, |acc, q| acc.checked_add(&q.recip()))
            .ok_or_else(|| Error::InvalidInput("rational split overflows 64-bit arithmetic".into()))?;
        if sum != p.recip() {
            return Err(Error::SplitMismatch {
                sum: ratio_to_f64(sum),
                expected: ratio_to_f64(p.recip()),
            });
        }
        make_split(ratio_to_f64(p), &parts.iter().map(|q| ratio_to_f64(*q)).collect::<Vec<_>>())
    }
}

fn ratio_to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Validates `p in (0, 1]`, `M >= 2` positive parts and the harmonic identity.
pub fn make_split(p: f64, parts: &[f64]) -> Result<ExponentSplit> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid_exponent(p, "target exponent must lie in (0, 1]"));
    }
    if parts.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "a split needs at least two parts, got {}",
            parts.len()
        )));
    }
    if let Some(&bad) = parts.iter().find(|&&q| !(q > 0.0 && q.is_finite())) {
        return Err(Error::invalid_exponent(bad, "factor exponents must be positive"));
    }
    let sum: f64 = parts.iter().map(|q| 1.0 / q).sum();
    let expected = 1.0 / p;
    if (sum - expected).abs() > HARMONIC_TOLERANCE * expected {
        return Err(Error::SplitMismatch { sum, expected });
    }
    Ok(ExponentSplit {
        p,
        parts: parts.to_vec(),
    })
}

/// `M` equal parts of `M p`. `M` defaults to `floor(1/p) + 1`, the smallest count
/// making every part exceed 1.
pub fn equal_split(p: f64, m: Option<usize>) -> Result<ExponentSplit> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid_exponent(p, "target exponent must lie in (0, 1]"));
    }
    let m = match m {
        Some(m) if m < 2 => {
            return Err(Error::InvalidInput(format!("need at least two factors, got {m}")))
        }
        Some(m) => m,
        None => (1.0 / p).floor() as usize + 1,
    };
    make_split(p, &vec![m as f64 * p; m])
}

/// Ordered factors `U_1..U_M` with `X = U_1 U_2 ... U_{M-1} U_M^T`.
///
/// `U_1` is `m x d`, middle factors are `d x d` and `U_M` is `n x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    factors: Vec<DenseMatrix>,
    inner_dim: usize,
}

impl FactorSet {
    pub fn new(factors: Vec<DenseMatrix>) -> Result<Self> {
        if factors.len() < 2 {
            return Err(Error::InvalidInput("a factor set needs at least two factors".into()));
        }
        let d = factors[0].ncols();
        if d == 0 {
            return Err(Error::Dimension("inner dimension must be positive".into()));
        }
        let last = factors.len() - 1;
        for (i, f) in factors.iter().enumerate() {
            ensure_finite(f, "factor")?;
            let ok = match i {
                0 => true,
                i if i == last => f.ncols() == d,
                _ => f.nrows() == d && f.ncols() == d,
            };
            if !ok {
                return Err(Error::Dimension(format!(
                    "factor {} is {}x{}, incompatible with inner dimension {d}",
                    i + 1,
                    f.nrows(),
                    f.ncols()
                )));
            }
        }
        Ok(Self {
            factors,
            inner_dim: d,
        })
    }

    pub fn factors(&self) -> &[DenseMatrix] {
        &self.factors
    }

    pub fn into_factors(self) -> Vec<DenseMatrix> {
        self.factors
    }

    pub fn inner_dim(&self) -> usize {
        self.inner_dim
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// Output shape `(m, n)` of the chained product.
    pub fn shape(&self) -> (usize, usize) {
        (self.factors[0].nrows(), self.factors[self.factors.len() - 1].nrows())
    }

    /// `U_1 ... U_{M-1} U_M^T`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let last = self.factors.len() - 1;
        let head = self.factors[1..last]
            .iter()
            .fold(self.factors[0].clone(), |acc, f| acc * f);
        head * self.factors[last].transpose()
    }
}

/// Singular-value splitting of `x` across `split.arity()` factors with inner dimension `d`.
pub fn optimal_factors_m(x: &DenseMatrix, split: &ExponentSplit, d: usize) -> Result<FactorSet> {
    if d == 0 {
        return Err(Error::Dimension("inner dimension must be positive".into()));
    }
    let svd = thin_svd(x, None)?;
    let rank = svd.rank();
    if d < rank {
        return Err(Error::InfeasibleDimension { d, rank });
    }
    factors_from_spectrum(&svd.left, &svd.sigma[..rank], &svd.right, split, d)
}

/// Spreads `left diag(sigma) right^T` over a chain: factor `i` carries `sigma^{p/p_i}`.
/// Columns beyond `sigma.len()` are zero.
pub(crate) fn factors_from_spectrum(
    left: &DenseMatrix,
    sigma: &[f64],
    right: &DenseMatrix,
    split: &ExponentSplit,
    d: usize,
) -> Result<FactorSet> {
    let (m, n) = (left.nrows(), right.nrows());
    let last = split.arity() - 1;

    let mut factors = Vec::with_capacity(split.arity());
    for (i, &q) in split.parts().iter().enumerate() {
        let scale = diag_power(sigma, split.p() / q)?;
        let f = if i == 0 {
            let mut u = DenseMatrix::zeros(m, d);
            for (j, s) in scale.iter().enumerate() {
                u.set_column(j, &(left.column(j) * *s));
            }
            u
        } else if i == last {
            let mut v = DenseMatrix::zeros(n, d);
            for (j, s) in scale.iter().enumerate() {
                v.set_column(j, &(right.column(j) * *s));
            }
            v
        } else {
            let mut mid = DenseMatrix::zeros(d, d);
            for (j, s) in scale.iter().enumerate() {
                mid[(j, j)] = *s;
            }
            mid
        };
        factors.push(f);
    }
    FactorSet::new(factors)
}

/// Optimal `(U, V)` with `X = U V^T`.
pub fn optimal_factors_two(x: &DenseMatrix, split: &ExponentSplit, d: usize) -> Result<FactorSet> {
    expect_arity(split, 2)?;
    optimal_factors_m(x, split, d)
}

/// Optimal `(U, V, W)` with `X = U V W^T` and `V` a `d x d` diagonal.
pub fn optimal_factors_three(x: &DenseMatrix, split: &ExponentSplit, d: usize) -> Result<FactorSet> {
    expect_arity(split, 3)?;
    optimal_factors_m(x, split, d)
}

fn expect_arity(split: &ExponentSplit, arity: usize) -> Result<()> {
    if split.arity() != arity {
        return Err(Error::InvalidInput(format!(
            "expected a {arity}-part split, got {} parts",
            split.arity()
        )));
    }
    Ok(())
}

fn check_arity(fs: &FactorSet, split: &ExponentSplit) -> Result<()> {
    if fs.len() != split.arity() {
        return Err(Error::InvalidInput(format!(
            "{} factors but {} exponents",
            fs.len(),
            split.arity()
        )));
    }
    Ok(())
}

/// `||U_i||_{S_{p_i}}^{p_i}` for every factor.
pub fn factor_powers(fs: &FactorSet, split: &ExponentSplit) -> Result<Vec<f64>> {
    check_arity(fs, split)?;
    fs.factors()
        .iter()
        .zip(split.parts())
        .map(|(u, &q)| schatten_power(u, SchattenExponent::new(q)?))
        .collect()
}

/// `prod_i ||U_i||_{S_{p_i}}`.
pub fn product_objective(fs: &FactorSet, split: &ExponentSplit) -> Result<f64> {
    check_arity(fs, split)?;
    fs.factors()
        .iter()
        .zip(split.parts())
        .try_fold(1.0, |acc, (u, &q)| Ok(acc * schatten_norm(u, SchattenExponent::new(q)?)?))
}

/// `p * sum_i ||U_i||_{S_{p_i}}^{p_i} / p_i`, the weighted sum before the outer `1/p` power.
pub fn weighted_sum_power(fs: &FactorSet, split: &ExponentSplit) -> Result<f64> {
    let powers = factor_powers(fs, split)?;
    Ok(split.p() * powers.iter().zip(split.parts()).map(|(t, q)| t / q).sum::<f64>())
}

/// `(p * sum_i ||U_i||_{S_{p_i}}^{p_i} / p_i)^{1/p}`.
pub fn weighted_sum_objective(fs: &FactorSet, split: &ExponentSplit) -> Result<f64> {
    let inner = weighted_sum_power(fs, split)?;
    Ok(if inner == 0.0 { 0.0 } else { inner.powf(1.0 / split.p()) })
}
