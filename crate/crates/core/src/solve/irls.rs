//! Full-matrix iteratively reweighted least squares for Schatten-`p` completion.
//!
//! Minimizes the smoothed objective
//!
//! ```text
//! F_eps(X) = lambda * Tr((X^T X + eps I)^{p/2}) + 1/2 ||P(X - D)||_F^2
//! ```
//!
//! by majorizing the concave trace term at the current iterate, which turns each
//! step into one weighted ridge solve per row. `eps` shrinks geometrically down
//! to a floor, and since `F_eps` is increasing in `eps` the recorded sequence
//! `F_{eps_k}(X_k)` is nonincreasing.

use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::factorize::optimal_factors_m;
use crate::linalg::{thin_svd, SpectralDecomposition, DenseMatrix};
use crate::solve::factored::SolverOptions;
use crate::solve::problem::{CompletionProblem, SolveReport};

pub const EPS_DECAY: f64 = 0.9;
pub const EPS_FLOOR: f64 = 1e-10;

/// IRLS state; call [`Irls::step`] to advance.
#[derive(Debug, Clone)]
pub struct Irls<'a> {
    prob: &'a CompletionProblem,
    p: f64,
    eps: f64,
    x: DenseMatrix,
}

impl<'a> Irls<'a> {
    /// Starts from `X_0 = P(D)`.
    pub fn new(prob: &'a CompletionProblem, p: f64, eps0: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::invalid_exponent(p, "IRLS exponent must lie in (0, 1]"));
        }
        if !(eps0 > 0.0 && eps0.is_finite()) {
            return Err(Error::InvalidInput(format!("eps0 must be positive, got {eps0}")));
        }
        Ok(Self {
            prob,
            p,
            eps: eps0.max(EPS_FLOOR),
            x: prob.observed().clone(),
        })
    }

    pub fn iterate(&self) -> &DenseMatrix {
        &self.x
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    // working from the SVD of X avoids squaring away the small eigenvalues of X^T X
    fn spectrum(&self) -> Result<SpectralDecomposition> {
        thin_svd(&self.x, None)
    }

    fn trace_term(&self, sigma: &[f64]) -> f64 {
        let n = self.x.ncols();
        let zeros = n - sigma.len();
        let powered: f64 = sigma.iter().map(|s| (s * s + self.eps).powf(self.p / 2.0)).sum();
        powered + zeros as f64 * self.eps.powf(self.p / 2.0)
    }

    /// `F_eps(X)` at the current iterate and smoothing level.
    pub fn smoothed_objective(&self) -> Result<f64> {
        let svd = self.spectrum()?;
        Ok(self.prob.lambda() * self.trace_term(&svd.sigma) + self.prob.data_term(&self.x))
    }

    /// One majorize-minimize step followed by the `eps` decrease.
    pub fn step(&mut self) -> Result<()> {
        let (m, n) = self.prob.shape();
        let svd = self.spectrum()?;
        let exponent = self.p / 2.0 - 1.0;
        let floor = self.eps.powf(exponent);
        // W = eps^e I + V diag((s^2 + eps)^e - eps^e) V^T
        let delta: Vec<f64> = svd
            .sigma
            .iter()
            .map(|s| (s * s + self.eps).powf(exponent) - floor)
            .collect();
        let v = &svd.right;
        let mut w = v * DenseMatrix::from_diagonal(&nalgebra::DVector::from_vec(delta)) * v.transpose();
        for j in 0..n {
            w[(j, j)] += floor;
        }
        let base = w * (self.prob.lambda() * self.p);

        let mask = self.prob.mask();
        let observed = self.prob.observed();
        let mut next = DenseMatrix::zeros(m, n);
        for i in 0..m {
            let mut system = base.clone();
            for j in 0..n {
                if mask[(i, j)] {
                    system[(j, j)] += 1.0;
                }
            }
            // symmetrize against rounding in V W V^T
            let system = (&system + system.transpose()) * 0.5;
            let rhs = observed.row(i).transpose();
            let chol = Cholesky::new(system).ok_or_else(|| Error::NumericalFailure {
                message: format!("IRLS row system {i} is not positive definite"),
                objective_trace: Vec::new(),
            })?;
            next.set_row(i, &chol.solve(&rhs).transpose());
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure {
                message: "IRLS iterate became non-finite".into(),
                objective_trace: Vec::new(),
            });
        }
        self.x = next;
        self.eps = (self.eps * EPS_DECAY).max(EPS_FLOOR);
        Ok(())
    }
}

/// IRLS with default [`SolverOptions`].
pub fn irls_baseline(prob: &CompletionProblem, p: f64, eps0: f64) -> Result<SolveReport> {
    irls_baseline_with(prob, p, eps0, &SolverOptions::default())
}

/// Runs IRLS until the relative change of the iterate drops below `opts.tol`, then
/// returns the rank-`d` truncation of the final iterate (`d` from the problem's
/// penalty), split into factors with the problem's exponent split.
pub fn irls_baseline_with(
    prob: &CompletionProblem,
    p: f64,
    eps0: f64,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    let mut state = Irls::new(prob, p, eps0)?;
    let mut trace = vec![state.smoothed_objective()?];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        let before = state.iterate().clone();
        state.step().map_err(|e| match e {
            Error::NumericalFailure { message, .. } => Error::NumericalFailure {
                message,
                objective_trace: trace.clone(),
            },
            other => other,
        })?;
        iterations += 1;
        trace.push(state.smoothed_objective()?);
        let change = (state.iterate() - &before).norm();
        if change <= opts.tol * before.norm().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    let (m, n) = prob.shape();
    let d = prob.penalty().inner_dim;
    let k = d.min(m).min(n);
    let svd = thin_svd(state.iterate(), Some(k))?;
    let truncated = svd.reconstruct();
    let factors = optimal_factors_m(&truncated, &prob.penalty().split, d)?;
    Ok(SolveReport {
        factors,
        final_objective: *trace.last().expect("trace starts non-empty"),
        objective_trace: trace,
        iterations,
        converged,
    })
}
