use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::factorize::{weighted_sum_power, ExponentSplit, FactorSet};
use crate::linalg::DenseMatrix;

/// Observed-entry indicator; `true` marks an entry of the observation set.
pub type Mask = DMatrix<bool>;

/// The factored penalty: an exponent split plus the inner dimension of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySpec {
    pub split: ExponentSplit,
    pub inner_dim: usize,
}

impl PenaltySpec {
    pub fn new(split: ExponentSplit, inner_dim: usize) -> Result<Self> {
        if inner_dim == 0 {
            return Err(Error::Dimension("inner dimension must be positive".into()));
        }
        Ok(Self { split, inner_dim })
    }
}

/// Matrix completion with a Schatten penalty:
///
/// ```text
/// min  lambda * ||X||_{S_p}^p + 1/2 ||P(X - D)||_F^2
/// ```
///
/// where `P` keeps the observed entries.
#[derive(Debug, Clone)]
pub struct CompletionProblem {
    observed: DenseMatrix,
    mask: Mask,
    lambda: f64,
    penalty: PenaltySpec,
}

impl CompletionProblem {
    /// Entries of `observed` outside the mask are ignored (and zeroed).
    pub fn new(observed: DenseMatrix, mask: Mask, lambda: f64, penalty: PenaltySpec) -> Result<Self> {
        if observed.shape() != mask.shape() {
            return Err(Error::Dimension(format!(
                "observed is {:?} but mask is {:?}",
                observed.shape(),
                mask.shape()
            )));
        }
        if observed.is_empty() {
            return Err(Error::Dimension("empty matrix".into()));
        }
        if !mask.iter().any(|&b| b) {
            return Err(Error::InvalidProblem("mask has no observed entries".into()));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "regularization weight must be nonnegative and finite, got {lambda}"
            )));
        }
        let mut projected = observed;
        for (v, &seen) in projected.iter_mut().zip(mask.iter()) {
            if !seen {
                *v = 0.0;
            } else if !v.is_finite() {
                return Err(Error::InvalidProblem("observed entry is not finite".into()));
            }
        }
        Ok(Self {
            observed: projected,
            mask,
            lambda,
            penalty,
        })
    }

    /// A fully observed problem.
    pub fn fully_observed(observed: DenseMatrix, lambda: f64, penalty: PenaltySpec) -> Result<Self> {
        let mask = Mask::from_element(observed.nrows(), observed.ncols(), true);
        Self::new(observed, mask, lambda, penalty)
    }

    /// Observed values, zero outside the mask.
    pub fn observed(&self) -> &DenseMatrix {
        &self.observed
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn penalty(&self) -> &PenaltySpec {
        &self.penalty
    }

    pub fn shape(&self) -> (usize, usize) {
        self.observed.shape()
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Zeroes every entry outside the mask.
    pub fn project(&self, x: &DenseMatrix) -> DenseMatrix {
        let mut out = x.clone();
        for (v, &seen) in out.iter_mut().zip(self.mask.iter()) {
            if !seen {
                *v = 0.0;
            }
        }
        out
    }

    /// `P(x - D)`.
    pub fn residual(&self, x: &DenseMatrix) -> DenseMatrix {
        self.project(x) - &self.observed
    }

    /// `1/2 ||P(x - D)||_F^2`.
    pub fn data_term(&self, x: &DenseMatrix) -> f64 {
        0.5 * self.residual(x).norm_squared()
    }
}

/// Outcome of a completion solver.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub factors: FactorSet,
    /// One value per outer iteration, starting with the initial point.
    pub objective_trace: Vec<f64>,
    pub final_objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SolveReport {
    pub fn reconstruct(&self) -> DenseMatrix {
        self.factors.reconstruct()
    }
}

/// `lambda * p * sum_i ||U_i||_{S_{p_i}}^{p_i} / p_i + 1/2 ||P(U_1 ... U_M^T - D)||_F^2`.
pub fn objective_eval(prob: &CompletionProblem, fs: &FactorSet) -> Result<f64> {
    if fs.shape() != prob.shape() {
        return Err(Error::Dimension(format!(
            "factors reconstruct a {:?} matrix, problem is {:?}",
            fs.shape(),
            prob.shape()
        )));
    }
    let penalty = weighted_sum_power(fs, &prob.penalty().split)?;
    Ok(prob.lambda() * penalty + prob.data_term(&fs.reconstruct()))
}
