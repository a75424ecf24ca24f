//! Block proximal-gradient descent over a factor chain.

use crate::error::{Error, Result};
use crate::factorize::{factors_from_spectrum, ExponentSplit, FactorSet};
use crate::linalg::{numerical_rank, spectral_norm, thin_svd, DenseMatrix};
use crate::schatten::{schatten_power, trace_power, SchattenExponent};
use crate::solve::problem::{CompletionProblem, Mask, SolveReport};
use crate::solve::prox::schatten_prox_with_sigma;

/// Maximum number of step halvings per block update.
const MAX_BACKTRACKS: usize = 60;

/// Proximal-gradient steps per block and sweep.
const INNER_STEPS: usize = 30;

/// A block update stops once a step lowers the objective by less than this, relatively.
const INNER_TOL: f64 = 1e-6;

/// Largest step tried, as a multiple of `1 / L`. Directions that leave the
/// product unchanged always pass the decrease test, so the step needs a ceiling.
const MAX_STEP_GROWTH: f64 = 1e3;

/// Relative slack for the sufficient-decrease and monotonicity checks.
const DECREASE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Stop once the relative objective change of a full sweep falls below this.
    pub tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            tol: 1e-8,
        }
    }
}

/// `lambda * p * sum_i ||U_i||^{p_i}_{S_{p_i}} / p_i + 1/2 ||P(U_1 ... U_M^T) - target||^2`,
/// minimized one factor at a time.
pub(crate) struct BlockProxGradient<'a> {
    /// Already projected onto the mask.
    target: &'a DenseMatrix,
    mask: Option<&'a Mask>,
    lambda: f64,
    split: &'a ExponentSplit,
}

/// One block's view of the chain: `X = left * F * right` (or `left * F^T` for the last block).
struct BlockContext {
    left: Option<DenseMatrix>,
    right: Option<DenseMatrix>,
    transposed: bool,
}

impl BlockContext {
    fn apply(&self, f: &DenseMatrix) -> DenseMatrix {
        let core = if self.transposed { f.transpose() } else { f.clone() };
        let with_left = match &self.left {
            Some(l) => l * core,
            None => core,
        };
        match &self.right {
            Some(r) => with_left * r,
            None => with_left,
        }
    }

    /// Gradient of `1/2 ||P(X) - target||^2` with respect to `F`, given `residual = P(X) - target`.
    fn gradient(&self, residual: &DenseMatrix) -> DenseMatrix {
        let lt_r = match &self.left {
            Some(l) => l.transpose() * residual,
            None => residual.clone(),
        };
        let g = match &self.right {
            Some(r) => lt_r * r.transpose(),
            None => lt_r,
        };
        if self.transposed {
            g.transpose()
        } else {
            g
        }
    }

    fn lipschitz(&self) -> f64 {
        let l = self.left.as_ref().map_or(1.0, spectral_norm);
        let r = self.right.as_ref().map_or(1.0, spectral_norm);
        (l * r).powi(2)
    }
}

impl<'a> BlockProxGradient<'a> {
    pub(crate) fn new(
        target: &'a DenseMatrix,
        mask: Option<&'a Mask>,
        lambda: f64,
        split: &'a ExponentSplit,
    ) -> Result<Self> {
        if let Some(&q) = split.parts().iter().find(|&&q| q > 2.0) {
            return Err(Error::UnsupportedSplit(format!(
                "factor exponent {q} exceeds 2; the spectral prox supports (0, 2]"
            )));
        }
        Ok(Self {
            target,
            mask,
            lambda,
            split,
        })
    }

    fn residual(&self, x: &DenseMatrix) -> DenseMatrix {
        let mut r = x - self.target;
        if let Some(mask) = self.mask {
            for (v, &seen) in r.iter_mut().zip(mask.iter()) {
                if !seen {
                    *v = 0.0;
                }
            }
        }
        r
    }

    fn smooth(&self, x: &DenseMatrix) -> f64 {
        0.5 * self.residual(x).norm_squared()
    }

    /// `lambda * p / p_i * ||f||^{p_i}_{S_{p_i}}`
    fn block_penalty(&self, i: usize, f: &DenseMatrix) -> Result<f64> {
        if self.lambda == 0.0 {
            return Ok(0.0);
        }
        let q = self.split.parts()[i];
        Ok(self.lambda * self.split.p() / q * schatten_power(f, SchattenExponent::new(q)?)?)
    }

    fn penalties(&self, factors: &[DenseMatrix]) -> Result<Vec<f64>> {
        factors
            .iter()
            .enumerate()
            .map(|(i, f)| self.block_penalty(i, f))
            .collect()
    }

    fn context(factors: &[DenseMatrix], i: usize) -> BlockContext {
        let last = factors.len() - 1;
        let chain = |j: usize| -> DenseMatrix {
            if j == last {
                factors[j].transpose()
            } else {
                factors[j].clone()
            }
        };
        let left = (i > 0).then(|| (1..i).fold(chain(0), |acc, j| acc * chain(j)));
        let right = (i < last).then(|| (i + 2..=last).fold(chain(i + 1), |acc, j| acc * chain(j)));
        BlockContext {
            left,
            right,
            transposed: i == last,
        }
    }

    /// Up to [`INNER_STEPS`] proximal-gradient steps on factor `i` with the
    /// others held fixed. Each step starts from twice the block's last accepted
    /// step size (clamped to `[1 / L, MAX_STEP_GROWTH / L]`) and halves until sufficient decrease; a
    /// candidate that would raise the objective is rejected and ends the block.
    fn block_update(
        &self,
        factors: &mut [DenseMatrix],
        pens: &mut [f64],
        steps: &mut [f64],
        i: usize,
        trace: &[f64],
    ) -> Result<()> {
        let ctx = Self::context(factors, i);
        let lip = ctx.lipschitz();
        if !(lip > 0.0) {
            return Ok(());
        }
        let q = self.split.parts()[i];
        let weight = self.lambda * self.split.p() / q;
        let mut smooth0 = self.smooth(&ctx.apply(&factors[i]));
        for _ in 0..INNER_STEPS {
            let current = &factors[i];
            let residual = self.residual(&ctx.apply(current));
            let grad = ctx.gradient(&residual);
            let pen0 = pens[i];

            let mut step = (2.0 * steps[i]).clamp(1.0 / lip, MAX_STEP_GROWTH / lip);
            let mut accepted = None;
            for _ in 0..MAX_BACKTRACKS {
                let (cand, sigma) = schatten_prox_with_sigma(&(current - &grad * step), step * weight, q)?;
                let diff = &cand - current;
                let smooth = self.smooth(&ctx.apply(&cand));
                let model = smooth0 + grad.dot(&diff) + diff.norm_squared() / (2.0 * step);
                if smooth <= model + DECREASE_SLACK * smooth0.max(1e-300) {
                    accepted = Some((cand, sigma, smooth));
                    break;
                }
                step *= 0.5;
            }
            let Some((cand, sigma, smooth)) = accepted else {
                return Err(Error::NumericalFailure {
                    message: format!("step-size backtracking exhausted on factor {}", i + 1),
                    objective_trace: trace.to_vec(),
                });
            };
            if !smooth.is_finite() || cand.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericalFailure {
                    message: format!("non-finite iterate on factor {}", i + 1),
                    objective_trace: trace.to_vec(),
                });
            }
            steps[i] = step;
            let pen = if weight == 0.0 {
                0.0
            } else {
                let r = numerical_rank(&sigma);
                weight * trace_power(&sigma[..r], SchattenExponent::new(q)?)?
            };
            let before = smooth0 + pen0;
            let after = smooth + pen;
            if after > before {
                break;
            }
            factors[i] = cand;
            pens[i] = pen;
            smooth0 = smooth;
            if before - after <= INNER_TOL * before {
                break;
            }
        }
        Ok(())
    }

    /// One cyclic pass over all blocks; `pens` and `steps` are kept in sync
    /// with `factors`.
    fn sweep(&self, factors: &mut [DenseMatrix], pens: &mut [f64], steps: &mut [f64], trace: &[f64]) -> Result<()> {
        for i in 0..factors.len() {
            self.block_update(factors, pens, steps, i, trace)?;
        }
        Ok(())
    }

    /// Sweeps until the relative objective change drops below `opts.tol`.
    pub(crate) fn run(&self, factors: &mut [DenseMatrix], opts: &SolverOptions) -> Result<Run> {
        let mut pens = self.penalties(factors)?;
        let mut steps = vec![0.0; factors.len()];
        let mut trace = vec![self.smooth(&chain_product(factors)) + pens.iter().sum::<f64>()];
        let mut converged = false;
        let mut iterations = 0;
        while iterations < opts.max_iters {
            self.sweep(factors, &mut pens, &mut steps, &trace)?;
            iterations += 1;
            let prev = *trace.last().expect("trace starts non-empty");
            let value = self.smooth(&chain_product(factors)) + pens.iter().sum::<f64>();
            if !value.is_finite() {
                return Err(Error::NumericalFailure {
                    message: "objective became non-finite".into(),
                    objective_trace: trace,
                });
            }
            trace.push(value);
            if value == 0.0 || (prev - value).abs() <= opts.tol * prev.abs().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
        Ok(Run {
            trace,
            iterations,
            converged,
        })
    }
}

pub(crate) struct Run {
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `U_1 ... U_{M-1} U_M^T`.
pub(crate) fn chain_product(factors: &[DenseMatrix]) -> DenseMatrix {
    let last = factors.len() - 1;
    let head = factors[1..last]
        .iter()
        .fold(factors[0].clone(), |acc, f| acc * f);
    head * factors[last].transpose()
}

/// Spectral initialization: the top `d` singular triplets of the rescaled
/// observations, spread across the factors like the optimal constructor.
fn spectral_init(prob: &CompletionProblem) -> Result<FactorSet> {
    let (m, n) = prob.shape();
    let d = prob.penalty().inner_dim;
    let scale = ((m * n) as f64 / prob.observed_count() as f64).sqrt();
    let y = prob.observed() * scale;
    let k = d.min(m).min(n);
    let svd = thin_svd(&y, Some(k))?;
    factors_from_spectrum(&svd.left, &svd.sigma, &svd.right, &prob.penalty().split, d)
}

/// Factored solver with default [`SolverOptions`].
pub fn factored_complete(prob: &CompletionProblem) -> Result<SolveReport> {
    factored_complete_with(prob, &SolverOptions::default())
}

/// Block proximal-gradient descent on
///
/// ```text
/// lambda * p * sum_i ||U_i||_{S_{p_i}}^{p_i} / p_i + 1/2 ||P(U_1 ... U_M^T - D)||_F^2
/// ```
///
/// Each factor takes a gradient step on the data term followed by a Schatten-`p_i`
/// prox, with the step size starting from a Lipschitz bound of the partial
/// products and halved until sufficient decrease.
pub fn factored_complete_with(prob: &CompletionProblem, opts: &SolverOptions) -> Result<SolveReport> {
    let split = &prob.penalty().split;
    let engine = BlockProxGradient::new(prob.observed(), Some(prob.mask()), prob.lambda(), split)?;
    let mut factors = spectral_init(prob)?.into_factors();
    let run = engine.run(&mut factors, opts)?;
    let final_objective = *run.trace.last().expect("trace starts non-empty");
    Ok(SolveReport {
        factors: FactorSet::new(factors)?,
        objective_trace: run.trace,
        final_objective,
        iterations: run.iterations,
        converged: run.converged,
    })
}
