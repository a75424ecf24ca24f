//! Dense matrices, thin SVD and seeded random sampling.
//!
//! Every other module works on [`DenseMatrix`] (an `f64` [`nalgebra::DMatrix`])
//! and obtains singular values exclusively through [`thin_svd`], so the
//! numerical-rank convention lives in one place: [`RANK_TOLERANCE`].

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Dense real matrix. Entries must be finite whenever they enter an operation.
pub type DenseMatrix = DMatrix<f64>;

/// Singular values at or below `RANK_TOLERANCE * sigma_max` count as zero for
/// rank decisions.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Thin singular value decomposition `source = left * diag(sigma) * right^T`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// `m x k`, orthonormal columns.
    pub left: DenseMatrix,
    /// Nonincreasing, nonnegative.
    pub sigma: Vec<f64>,
    /// `n x k`, orthonormal columns.
    pub right: DenseMatrix,
}

impl SpectralDecomposition {
    /// Number of singular values above the numerical-rank cutoff.
    pub fn rank(&self) -> usize {
        numerical_rank(&self.sigma)
    }

    /// Singular values with everything below the rank cutoff set to zero.
    pub fn significant_sigma(&self) -> Vec<f64> {
        let r = self.rank();
        self.sigma
            .iter()
            .enumerate()
            .map(|(i, &s)| if i < r { s } else { 0.0 })
            .collect()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let mut scaled = self.left.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*s);
        }
        scaled * self.right.transpose()
    }
}

/// Count of entries of a nonincreasing `sigma` above `RANK_TOLERANCE * sigma[0]`.
pub fn numerical_rank(sigma: &[f64]) -> usize {
    let max = sigma.iter().cloned().fold(0.0_f64, f64::max);
    if max <= 0.0 {
        return 0;
    }
    let cutoff = RANK_TOLERANCE * max;
    sigma.iter().filter(|&&s| s > cutoff).count()
}

pub(crate) fn ensure_finite(x: &DenseMatrix, what: &str) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::Dimension(format!("{what} has an empty dimension")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{what} contains non-finite entries")));
    }
    Ok(())
}

/// Thin SVD of `x`, truncated to the `k` largest singular triplets when `k` is given.
pub fn thin_svd(x: &DenseMatrix, k: Option<usize>) -> Result<SpectralDecomposition> {
    ensure_finite(x, "matrix")?;
    let full = x.nrows().min(x.ncols());
    let k = match k {
        Some(0) => return Err(Error::Dimension("k must be positive".into())),
        Some(k) if k > full => {
            return Err(Error::Dimension(format!(
                "k = {k} exceeds min(rows, cols) = {full}"
            )))
        }
        Some(k) => k,
        None => full,
    };

    let (m, n) = x.shape();
    let svd = to_faer(x).thin_svd().map_err(|e| Error::NumericalFailure {
        message: format!("SVD did not converge: {e:?}"),
        objective_trace: Vec::new(),
    })?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());

    let mut order: Vec<usize> = (0..full).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    order.truncate(k);

    let left = DenseMatrix::from_fn(m, k, |i, j| u[(i, order[j])]);
    let right = DenseMatrix::from_fn(n, k, |i, j| v[(i, order[j])]);
    let sigma = order.iter().map(|&i| s[i].max(0.0)).collect();

    Ok(SpectralDecomposition { left, sigma, right })
}

/// Elementwise `sigma_i^alpha` with `0^alpha = 0`.
pub fn diag_power(sigma: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid_exponent(alpha, "power must be positive"));
    }
    sigma
        .iter()
        .map(|&s| {
            if !(s >= 0.0) || !s.is_finite() {
                Err(Error::InvalidInput(format!(
                    "diag_power needs nonnegative finite entries, got {s}"
                )))
            } else if s == 0.0 {
                Ok(0.0)
            } else {
                Ok(s.powf(alpha))
            }
        })
        .collect()
}

/// `m x n` matrix of i.i.d. standard normal entries, filled in row-major order.
pub fn gaussian_matrix(m: usize, n: usize, seed: u64) -> Result<DenseMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gaussian_matrix_with(m, n, &mut rng)
}

pub(crate) fn gaussian_matrix_with<R: rand::Rng + ?Sized>(
    m: usize,
    n: usize,
    rng: &mut R,
) -> Result<DenseMatrix> {
    if m == 0 || n == 0 {
        return Err(Error::Dimension(format!("invalid shape {m}x{n}")));
    }
    let data: Vec<f64> = (0..m * n).map(|_| StandardNormal.sample(rng)).collect();
    Ok(DenseMatrix::from_row_slice(m, n, &data))
}

/// Haar-distributed `n x n` orthogonal matrix: QR of a Gaussian matrix with the
/// triangular factor's diagonal made nonnegative.
pub fn random_orthogonal(n: usize, seed: u64) -> Result<DenseMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_orthogonal_with(n, &mut rng)
}

pub(crate) fn random_orthogonal_with<R: rand::Rng + ?Sized>(
    n: usize,
    rng: &mut R,
) -> Result<DenseMatrix> {
    let g = gaussian_matrix_with(n, n, rng)?;
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// Largest absolute entry of `a^T a - I`.
pub fn orthonormality_defect(a: &DenseMatrix) -> f64 {
    let gram = a.transpose() * a;
    let k = gram.nrows();
    let mut worst = 0.0_f64;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

/// Square diagonal matrix with the given diagonal.
pub fn diag_matrix(values: &[f64]) -> DenseMatrix {
    DenseMatrix::from_diagonal(&DVector::from_column_slice(values))
}

fn to_faer(x: &DenseMatrix) -> faer::Mat<f64> {
    faer::Mat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)])
}

/// Spectral norm, i.e. the largest singular value.
pub(crate) fn spectral_norm(x: &DenseMatrix) -> f64 {
    if x.is_empty() || x.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    to_faer(x)
        .singular_values()
        .map(|s| s.into_iter().fold(0.0_f64, f64::max))
        .unwrap_or(f64::NAN)
}
