//! Numerical certificates for the factored characterizations.
//!
//! [`bound_audit`] samples feasible factorizations `X = U_1 ... U_M` and checks
//! that none of them beats `||X||_{S_p}`; [`local_min_search`] descends from
//! random starts and checks that the minimum is actually reached.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::factorize::{
    optimal_factors_m, product_objective, weighted_sum_objective, ExponentSplit, FactorSet,
};
use crate::linalg::{diag_matrix, gaussian_matrix_with, thin_svd, DenseMatrix};
use crate::schatten::{schatten_norm, SchattenExponent};

/// Feasibility threshold on `||U_1 ... U_M^T - X||_F / ||X||_F`.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-8;

/// Relative gap under which [`local_min_search`] counts as converged.
pub const SEARCH_TOLERANCE: f64 = 1e-3;

pub const DEFAULT_RESTARTS: usize = 20;
pub const DEFAULT_MAX_ITERS: usize = 500;

const MAX_BACKTRACKS: usize = 60;
/// Stop once an iteration lowers `log prod_i ||U_i||` by less than this.
const LOG_CHANGE: f64 = 1e-12;
const ARMIJO: f64 = 1e-4;
/// Iterations between least-squares re-closures of the chain.
const RECLOSE_EVERY: usize = 50;

/// `1e-8 * max(1, target)`: the slack allowed below the target before a
/// sampled factorization counts as undercutting it.
pub fn mixed_tolerance(target: f64) -> f64 {
    1e-8 * target.max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    /// `||X||_{S_p}`.
    pub target_norm: f64,
    /// Smallest product objective seen.
    pub best_found: f64,
    /// `best_found - target_norm`.
    pub gap: f64,
    /// Accepted trials (audit) or restarts (search).
    pub trials: usize,
    pub converged: bool,
    /// Audit draws rejected for failing the feasibility check.
    pub discarded: usize,
    /// Minimum over accepted trials of `product_objective - target_norm`.
    pub worst_trial_gap: Option<f64>,
    /// Minimum over accepted trials of `weighted_sum_objective - product_objective`.
    pub worst_young_gap: Option<f64>,
    /// Descent iterations of the best search run; zero for audits.
    pub outer_iterations: usize,
}

fn target_norm(x: &DenseMatrix, split: &ExponentSplit) -> Result<f64> {
    schatten_norm(x, SchattenExponent::new(split.p())?)
}

fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Least-squares completion of a chain: given `U_1..U_{M-1}`, returns `U_M` with
/// `U_M^T = A^+ X` where `A = U_1 ... U_{M-1}`, or `None` when the chain cannot
/// reach `X` within [`FEASIBILITY_TOLERANCE`].
fn close_chain(x: &DenseMatrix, head: &[DenseMatrix]) -> Option<DenseMatrix> {
    let a = head[1..].iter().fold(head[0].clone(), |acc, f| acc * f);
    let svd = thin_svd(&a, None).ok()?;
    let scale = x.norm();
    let cutoff = 1e-12 * svd.sigma.first().copied().unwrap_or(0.0);
    let kept = svd.sigma.iter().filter(|&&s| s > cutoff && s > 0.0).count();
    let last_t = if kept == 0 {
        DenseMatrix::zeros(a.ncols(), x.ncols())
    } else {
        // A^+ X = V diag(1/s) U^T X over the kept triplets
        let inv: Vec<f64> = svd.sigma[..kept].iter().map(|s| 1.0 / s).collect();
        let v = svd.right.columns(0, kept);
        let ut_x = svd.left.columns(0, kept).transpose() * x;
        v * diag_matrix(&inv) * ut_x
    };
    let residual = (&a * &last_t - x).norm();
    let ok = if scale == 0.0 {
        residual == 0.0
    } else {
        residual <= FEASIBILITY_TOLERANCE * scale
    };
    (ok && last_t.iter().all(|v| v.is_finite())).then(|| last_t.transpose())
}

/// Leading factors `U_1..U_{count}` whose product's column space contains that of `X`.
fn random_head<R: Rng>(
    rng: &mut R,
    x_basis: &DenseMatrix,
    d: usize,
    count: usize,
) -> Result<Vec<DenseMatrix>> {
    let m = x_basis.nrows();
    let r = x_basis.ncols();
    let mut basis = gaussian_matrix_with(m, d, rng)?;
    if r > 0 {
        let mix = gaussian_matrix_with(r, r, rng)?;
        basis.columns_mut(0, r).copy_from(&(x_basis * mix));
    }
    let mut head = vec![basis * gaussian_matrix_with(d, d, rng)?];
    for _ in 1..count {
        head.push(gaussian_matrix_with(d, d, rng)?);
    }
    Ok(head)
}

/// Draws the leading factors `U_1..U_{M-1}` of a feasible chain. Even trials use
/// random matrices whose column space contains that of `X`; odd trials perturb
/// the optimal factors. Both get random per-factor scalings.
fn draw_head<R: Rng>(
    rng: &mut R,
    trial: usize,
    x_basis: &DenseMatrix,
    optimum: &FactorSet,
) -> Result<Vec<DenseMatrix>> {
    let d = optimum.inner_dim();
    let count = optimum.len() - 1;
    let mut head = if trial % 2 == 0 {
        random_head(rng, x_basis, d, count)?
    } else {
        let size: f64 = 10f64.powf(rng.random_range(-4.0..0.0));
        let mut head = Vec::with_capacity(count);
        for f in &optimum.factors()[..count] {
            let jitter = DenseMatrix::identity(d, d) + gaussian_matrix_with(d, d, rng)? * size;
            head.push(f * jitter);
        }
        head
    };
    for f in &mut head {
        let log_scale: f64 = StandardNormal.sample(rng);
        *f *= log_scale.exp();
    }
    Ok(head)
}

/// Samples `n_trials` feasible factorizations of `x` and records the smallest
/// product objective next to `||x||_{S_p}`. The optimal constructor's value is
/// always included in `best_found`.
pub fn bound_audit(
    x: &DenseMatrix,
    split: &ExponentSplit,
    d: usize,
    n_trials: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let target = target_norm(x, split)?;
    let optimum = optimal_factors_m(x, split, d)?;
    let svd = thin_svd(x, None)?;
    let x_basis = svd.left.columns(0, svd.rank()).into_owned();

    let mut best = product_objective(&optimum, split)?;
    let mut accepted = 0;
    let mut discarded = 0;
    let mut worst_trial: Option<f64> = None;
    let mut worst_young: Option<f64> = None;
    for trial in 0..n_trials {
        let mut rng = trial_rng(seed, trial as u64);
        let mut factors = draw_head(&mut rng, trial, &x_basis, &optimum)?;
        let Some(last) = close_chain(x, &factors) else {
            discarded += 1;
            continue;
        };
        factors.push(last);
        let fs = FactorSet::new(factors)?;
        let product = product_objective(&fs, split)?;
        let weighted = weighted_sum_objective(&fs, split)?;
        accepted += 1;
        best = best.min(product);
        worst_trial = Some(worst_trial.map_or(product - target, |w| w.min(product - target)));
        worst_young = Some(worst_young.map_or(weighted - product, |w| w.min(weighted - product)));
    }
    let gap = best - target;
    let converged = gap >= -mixed_tolerance(target)
        && worst_trial.is_none_or(|w| w >= -mixed_tolerance(target));
    Ok(VerificationReport {
        target_norm: target,
        best_found: best,
        gap,
        trials: accepted,
        converged,
        discarded,
        worst_trial_gap: worst_trial,
        worst_young_gap: worst_young,
        outer_iterations: 0,
    })
}

struct SearchRun {
    best: f64,
    iterations: usize,
}

/// `log prod_i ||U_i||_{S_{p_i}}` and, per factor, the gradient of its log-norm.
fn log_objective(factors: &[DenseMatrix], split: &ExponentSplit) -> Result<(f64, Vec<DenseMatrix>)> {
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(factors.len());
    for (f, &q) in factors.iter().zip(split.parts()) {
        let svd = thin_svd(f, None)?;
        let r = svd.rank();
        let power: f64 = svd.sigma[..r].iter().map(|s| s.powf(q)).sum();
        if r == 0 || power == 0.0 {
            return Ok((f64::NEG_INFINITY, Vec::new()));
        }
        total += power.ln() / q;
        let weights: Vec<f64> = svd.sigma[..r].iter().map(|s| s.powf(q - 1.0) / power).collect();
        let left = svd.left.columns(0, r) * diag_matrix(&weights);
        grads.push(left * svd.right.columns(0, r).transpose());
    }
    Ok((total, grads))
}

/// Gradient of the log objective with respect to the gauge `E_i` acting between
/// factors `i` and `i + 1` as `U_i (I + E_i)`, `(I - E_i) U_{i+1}`.
fn gauge_gradient(factors: &[DenseMatrix], grads: &[DenseMatrix]) -> Vec<DenseMatrix> {
    let last = factors.len() - 1;
    (0..last)
        .map(|i| {
            let from_left = factors[i].transpose() * &grads[i];
            let from_right = if i + 1 == last {
                grads[last].transpose() * &factors[last]
            } else {
                &grads[i + 1] * factors[i + 1].transpose()
            };
            from_left - from_right
        })
        .collect()
}

/// `U_1 G_1`, `G_{i-1}^{-1} U_i G_i`, `U_M G_{M-1}^{-T}` with `G_i = exp(-eta g_i)`,
/// which leaves the product unchanged.
fn apply_gauge(factors: &[DenseMatrix], gauge: &[DenseMatrix], eta: f64) -> Vec<DenseMatrix> {
    let last = factors.len() - 1;
    let forward: Vec<DenseMatrix> = gauge.iter().map(|g| (g * -eta).exp()).collect();
    let backward: Vec<DenseMatrix> = gauge.iter().map(|g| (g * eta).exp()).collect();
    factors
        .iter()
        .enumerate()
        .map(|(i, f)| {
            if i == last {
                f * backward[i - 1].transpose()
            } else if i == 0 {
                f * &forward[0]
            } else {
                &backward[i - 1] * f * &forward[i]
            }
        })
        .collect()
}

fn significant_basis(y: &DenseMatrix, left: bool) -> Result<DenseMatrix> {
    let svd = thin_svd(y, None)?;
    let r = svd.rank();
    Ok(if left {
        svd.left.columns(0, r).into_owned()
    } else {
        svd.right.columns(0, r).into_owned()
    })
}

/// Removes inner directions that do not reach the product: every factor is
/// multiplied by the orthogonal projector onto the row space of the partial
/// product to its left and the column space of the partial product to its
/// right. The product is unchanged and no singular value grows.
fn prune(factors: &mut [DenseMatrix]) -> Result<()> {
    let last = factors.len() - 1;
    let mut prefix = factors[0].clone();
    for i in 1..=last {
        let basis = significant_basis(&prefix, false);
        let b = basis?;
        let p = &b * b.transpose();
        if i == last {
            factors[i] = &factors[i] * p;
        } else {
            factors[i] = p * &factors[i];
            prefix = &prefix * &factors[i];
        }
    }
    let mut suffix = factors[last].transpose();
    for i in (0..last).rev() {
        let b = significant_basis(&suffix, true)?;
        factors[i] = &factors[i] * (&b * b.transpose());
        if i > 0 {
            suffix = &factors[i] * suffix;
        }
    }
    Ok(())
}

/// Gradient descent with Armijo backtracking on `log prod_i ||U_i||_{S_{p_i}}`
/// along the gauge orbit of a feasible chain. Every iterate reproduces `X`; the
/// last factor is re-solved by least squares periodically against rounding drift.
fn search_run(
    x: &DenseMatrix,
    split: &ExponentSplit,
    mut factors: Vec<DenseMatrix>,
    max_iters: usize,
) -> Result<SearchRun> {
    prune(&mut factors)?;
    let (mut value, mut grads) = log_objective(&factors, split)?;
    if value == f64::NEG_INFINITY {
        return Ok(SearchRun { best: 0.0, iterations: 0 });
    }
    let rank = thin_svd(x, None)?.rank();
    let mut eta = 1.0;
    let mut iterations = 0;
    while iterations < max_iters.max(1) {
        iterations += 1;
        let gauge = gauge_gradient(&factors, &grads);
        let slope: f64 = gauge.iter().map(|g| g.norm_squared()).sum();
        if slope == 0.0 {
            break;
        }
        let mut accepted = None;
        let mut step = eta;
        for _ in 0..MAX_BACKTRACKS {
            let cand = apply_gauge(&factors, &gauge, step);
            let (v, g) = log_objective(&cand, split)?;
            if v.is_finite() && v <= value - ARMIJO * step * slope {
                accepted = Some((cand, v, g));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, v, g)) = accepted else {
            break;
        };
        let change = value - v;
        factors = cand;
        value = v;
        grads = g;
        if factors[0].ncols() > rank {
            prune(&mut factors)?;
            (value, grads) = log_objective(&factors, split)?;
        }
        eta = step * 2.0;
        if iterations % RECLOSE_EVERY == 0 {
            let head = &factors[..factors.len() - 1];
            if let Some(last) = close_chain(x, head) {
                let len = factors.len();
                factors[len - 1] = last;
                (value, grads) = log_objective(&factors, split)?;
            }
        }
        if change <= LOG_CHANGE {
            break;
        }
    }
    let head = &factors[..factors.len() - 1];
    let best = match close_chain(x, head) {
        Some(last) => {
            let mut chain = head.to_vec();
            chain.push(last);
            product_objective(&FactorSet::new(chain)?, split)?
        }
        None => f64::INFINITY,
    };
    Ok(SearchRun { best, iterations })
}

fn search_report(target: f64, run: SearchRun, restarts: usize) -> VerificationReport {
    VerificationReport {
        target_norm: target,
        best_found: run.best,
        gap: run.best - target,
        trials: restarts,
        converged: run.best <= target * (1.0 + SEARCH_TOLERANCE),
        discarded: 0,
        worst_trial_gap: None,
        worst_young_gap: None,
        outer_iterations: run.iterations,
    }
}

fn check_searchable(x: &DenseMatrix, split: &ExponentSplit, d: usize) -> Result<()> {
    if !split.all_convex() {
        return Err(Error::UnsupportedSplit(
            "local search needs every factor exponent >= 1; use bound_audit instead".into(),
        ));
    }
    let rank = thin_svd(x, None)?.rank();
    if d < rank {
        return Err(Error::InfeasibleDimension { d, rank });
    }
    Ok(())
}

/// A random exactly feasible chain with equalized factor norms.
fn feasible_start<R: Rng>(
    rng: &mut R,
    x: &DenseMatrix,
    x_basis: &DenseMatrix,
    arity: usize,
    d: usize,
) -> Result<Vec<DenseMatrix>> {
    for _ in 0..100 {
        let mut factors = random_head(rng, x_basis, d, arity - 1)?;
        let Some(last) = close_chain(x, &factors) else {
            continue;
        };
        factors.push(last);
        let norms: Vec<f64> = factors.iter().map(|f| f.norm()).collect();
        if norms.iter().any(|&v| v == 0.0) {
            return Ok(factors);
        }
        let mean = norms.iter().map(|v| v.ln()).sum::<f64>() / arity as f64;
        for (f, v) in factors.iter_mut().zip(&norms) {
            *f *= (mean - v.ln()).exp();
        }
        return Ok(factors);
    }
    Err(Error::NumericalFailure {
        message: "could not draw a feasible starting factorization".into(),
        objective_trace: Vec::new(),
    })
}

/// Random-restart descent toward `min prod_i ||U_i||_{S_{p_i}}` over `X = U_1 ... U_M^T`.
///
/// Restricted to splits with every `p_i >= 1`.
pub fn local_min_search(
    x: &DenseMatrix,
    split: &ExponentSplit,
    d: usize,
    restarts: usize,
    max_iters: usize,
    seed: u64,
) -> Result<VerificationReport> {
    check_searchable(x, split, d)?;
    let target = target_norm(x, split)?;
    let svd = thin_svd(x, None)?;
    let x_basis = svd.left.columns(0, svd.rank()).into_owned();
    let mut best: Option<SearchRun> = None;
    for restart in 0..restarts.max(1) {
        let mut rng = trial_rng(seed, restart as u64);
        let factors = feasible_start(&mut rng, x, &x_basis, split.arity(), d)?;
        let run = search_run(x, split, factors, max_iters)?;
        if best.as_ref().is_none_or(|b| run.best < b.best) {
            best = Some(run);
        }
    }
    Ok(search_report(target, best.expect("at least one restart"), restarts))
}

/// Single descent run from a given feasible factorization.
pub fn local_min_search_from(
    x: &DenseMatrix,
    split: &ExponentSplit,
    start: &FactorSet,
    max_iters: usize,
) -> Result<VerificationReport> {
    check_searchable(x, split, start.inner_dim())?;
    if start.len() != split.arity() || start.shape() != x.shape() {
        return Err(Error::InvalidInput("warm start does not match the split or matrix".into()));
    }
    let target = target_norm(x, split)?;
    let run = search_run(x, split, start.factors().to_vec(), max_iters)?;
    Ok(search_report(target, run, 1))
}
