//! Scalar and spectral proximal operators of `tau * |x|^p`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{thin_svd, DenseMatrix};

const CLOSED_FORM_MATCH: f64 = 1e-12;

fn check_exponent(p: f64) -> Result<()> {
    if p > 0.0 && p <= 2.0 {
        Ok(())
    } else {
        Err(Error::UnsupportedExponent(p))
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau >= 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("threshold tau must be nonnegative, got {tau}")))
    }
}

/// A global minimizer of `tau * |x|^p + (x - y)^2 / 2` for `0 < p <= 2`.
///
/// The result is either zero or has the sign of `y`, and `|x| <= |y|`. When both
/// zero and a nonzero point attain the minimum, zero is returned.
pub fn lp_prox_scalar(y: f64, tau: f64, p: f64) -> Result<f64> {
    check_exponent(p)?;
    check_tau(tau)?;
    if !y.is_finite() {
        return Err(Error::InvalidInput(format!("prox argument must be finite, got {y}")));
    }
    if tau == 0.0 || y == 0.0 {
        return Ok(y);
    }
    let a = y.abs();
    let mag = if p == 1.0 {
        (a - tau).max(0.0)
    } else if p == 2.0 {
        a / (1.0 + 2.0 * tau)
    } else if (p - 0.5).abs() < CLOSED_FORM_MATCH {
        half_threshold(a, tau)
    } else if (p - 2.0 / 3.0).abs() < CLOSED_FORM_MATCH {
        two_thirds_threshold(a, tau)
    } else if p < 1.0 {
        generalized_threshold(a, tau, p)
    } else {
        convex_shrink(a, tau, p)
    };
    Ok(mag.copysign(y))
}

/// `p = 1/2`: the stationary equation is a depressed cubic in `sqrt(x)`.
fn half_threshold(a: f64, tau: f64) -> f64 {
    if a <= 1.5 * tau.powf(2.0 / 3.0) {
        return 0.0;
    }
    let phi = (3.0 * 3.0_f64.sqrt() * tau / (4.0 * a.powf(1.5))).acos();
    2.0 * a / 3.0 * (1.0 + (2.0 * PI / 3.0 - 2.0 * phi / 3.0).cos())
}

/// `p = 2/3`: the stationary equation is a quartic in `x^{1/3}`.
fn two_thirds_threshold(a: f64, tau: f64) -> f64 {
    let lam = 2.0 * tau;
    if a <= (2.0 / 3.0) * (3.0 * lam.powi(3)).powf(0.25) {
        return 0.0;
    }
    let phi = (27.0 * a * a / 16.0 * lam.powf(-1.5)).acosh();
    let big = 2.0 / 3.0_f64.sqrt() * lam.powf(0.25) * (phi / 3.0).cosh().sqrt();
    let root = (2.0 * a / big - big * big).max(0.0).sqrt();
    ((big + root) / 2.0).powi(3)
}

/// `0 < p < 1`, other than the closed-form cases: threshold test, then the
/// largest root of `x + tau p x^{p-1} = a`.
fn generalized_threshold(a: f64, tau: f64, p: f64) -> f64 {
    let base = 2.0 * tau * (1.0 - p);
    let threshold = base.powf(1.0 / (2.0 - p)) + tau * p * base.powf((p - 1.0) / (2.0 - p));
    if a <= threshold {
        return 0.0;
    }
    // g(x) = x + tau p x^{p-1} - a is convex with its minimum at x_min
    let x_min = (tau * p * (1.0 - p)).powf(1.0 / (2.0 - p));
    let x = stationary_root(a, tau, p, x_min.min(a), a);
    let objective = |x: f64| tau * x.powf(p) + 0.5 * (x - a) * (x - a);
    if objective(x) < 0.5 * a * a {
        x
    } else {
        0.0
    }
}

/// `1 < p < 2`: strictly convex, unique root of `x + tau p x^{p-1} = a` in `(0, a)`.
fn convex_shrink(a: f64, tau: f64, p: f64) -> f64 {
    stationary_root(a, tau, p, 0.0, a)
}

/// Safeguarded Newton for `x + tau p x^{p-1} = a` on `[lo, hi]`, with `g(lo) <= 0 <= g(hi)`.
fn stationary_root(a: f64, tau: f64, p: f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = |x: f64| x + tau * p * x.powf(p - 1.0) - a;
    let dg = |x: f64| 1.0 + tau * p * (p - 1.0) * x.powf(p - 2.0);
    let mut x = if p < 1.0 { hi } else { 0.5 * (lo + hi) };
    for _ in 0..200 {
        let gx = g(x);
        if gx == 0.0 {
            return x;
        }
        if gx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let slope = dg(x);
        let newton = x - gx / slope;
        let next = if slope.is_finite() && slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 1e-16 * a.max(1.0) || hi - lo <= 1e-16 * a.max(1.0) {
            return next;
        }
        x = next;
    }
    x
}

/// Spectral prox: applies [`lp_prox_scalar`] to every singular value of `y`.
pub fn schatten_prox(y: &DenseMatrix, tau: f64, p: f64) -> Result<DenseMatrix> {
    schatten_prox_with_sigma(y, tau, p).map(|(x, _)| x)
}

/// [`schatten_prox`] together with the singular values of the result.
pub(crate) fn schatten_prox_with_sigma(y: &DenseMatrix, tau: f64, p: f64) -> Result<(DenseMatrix, Vec<f64>)> {
    check_exponent(p)?;
    check_tau(tau)?;
    let svd = thin_svd(y, None)?;
    let mut left = svd.left;
    let mut sigma = Vec::with_capacity(svd.sigma.len());
    for (j, &s) in svd.sigma.iter().enumerate() {
        let shrunk = lp_prox_scalar(s, tau, p)?.max(0.0);
        left.column_mut(j).scale_mut(shrunk);
        sigma.push(shrunk);
    }
    Ok((left * svd.right.transpose(), sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_matrix, gaussian_matrix};
    use crate::schatten::{schatten_power, SchattenExponent};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn objective(x: f64, y: f64, tau: f64, p: f64) -> f64 {
        tau * x.abs().powf(p) + 0.5 * (x - y) * (x - y)
    }

    /// Brute-force minimizer over a uniform grid on `[lo, hi]`, then golden-section polish.
    fn grid_oracle(y: f64, tau: f64, p: f64, lo: f64, hi: f64, step: f64) -> f64 {
        let n = ((hi - lo) / step).ceil() as usize;
        let mut best = lo;
        let mut best_val = objective(lo, y, tau, p);
        for i in 1..=n {
            let x = (lo + i as f64 * step).min(hi);
            let v = objective(x, y, tau, p);
            if v < best_val {
                best_val = v;
                best = x;
            }
        }
        let (mut a, mut b) = ((best - step).max(lo), (best + step).min(hi));
        let r = (5.0_f64.sqrt() - 1.0) / 2.0;
        for _ in 0..100 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if objective(c, y, tau, p) < objective(d, y, tau, p) {
                b = d;
            } else {
                a = c;
            }
        }
        let polished = 0.5 * (a + b);
        if objective(polished, y, tau, p) < best_val {
            polished
        } else {
            best
        }
    }

    #[test]
    fn soft_and_ridge_closed_forms() {
        assert_eq!(lp_prox_scalar(3.0, 1.0, 1.0).unwrap(), 2.0);
        assert_eq!(lp_prox_scalar(-0.5, 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(lp_prox_scalar(3.0, 0.5, 2.0).unwrap(), 1.5);
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(matches!(lp_prox_scalar(1.0, 1.0, 0.0), Err(Error::UnsupportedExponent(_))));
        assert!(matches!(lp_prox_scalar(1.0, 1.0, 2.5), Err(Error::UnsupportedExponent(_))));
        assert!(lp_prox_scalar(1.0, -1.0, 1.0).is_err());
        assert!(schatten_prox(&DenseMatrix::identity(2, 2), 1.0, 3.0).is_err());
    }

    #[test]
    fn half_matches_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..100 {
            let y: f64 = rng.random_range(-2.0..2.0);
            let tau: f64 = rng.random_range(0.05..1.0);
            let x = lp_prox_scalar(y, tau, 0.5).unwrap();
            let (lo, hi) = if y >= 0.0 { (0.0, y) } else { (y, 0.0) };
            let oracle = grid_oracle(y, tau, 0.5, lo, hi, 1e-6);
            assert!((x - oracle).abs() <= 1e-4, "y={y} tau={tau}: {x} vs {oracle}");
        }
    }

    #[test]
    fn beats_wide_grid_for_every_supported_exponent() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for p in [0.1, 0.3, 0.5, 2.0 / 3.0, 0.8, 1.0, 1.25, 4.0 / 3.0, 1.5, 1.9, 2.0] {
            for _ in 0..4 {
                let y: f64 = rng.random_range(-1.0..1.0);
                let tau: f64 = rng.random_range(0.02..0.8);
                let x = lp_prox_scalar(y, tau, p).unwrap();
                assert!(x == 0.0 || x.signum() == y.signum());
                assert!(x.abs() <= y.abs());
                let fx = objective(x, y, tau, p);
                let span = 2.0 * y.abs();
                let n = (2.0 * span / 1e-6) as usize;
                let best = (0..=n)
                    .map(|i| objective(-span + i as f64 * 1e-6, y, tau, p))
                    .fold(f64::INFINITY, f64::min);
                assert!(best - fx >= -1e-9, "p={p} y={y} tau={tau}: {fx} vs grid {best}");
            }
        }
    }

    #[test]
    fn threshold_ties_resolve_to_zero() {
        let tau: f64 = 0.7;
        let at_half = 1.5 * tau.powf(2.0 / 3.0);
        assert_eq!(lp_prox_scalar(at_half, tau, 0.5).unwrap(), 0.0);
        let at_soft = tau;
        assert_eq!(lp_prox_scalar(at_soft, tau, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn spectral_prox_examples() {
        let y = gaussian_matrix(4, 3, 5).unwrap();
        let near = schatten_prox(&y, 1e-15, 0.5).unwrap();
        assert!((near - &y).abs().max() <= 1e-8);

        let out = schatten_prox(&diag_matrix(&[3.0, 1.0]), 1.0, 1.0).unwrap();
        assert!((out - diag_matrix(&[2.0, 0.0])).abs().max() <= 1e-14);
    }

    #[test]
    fn spectral_prox_thresholds_singular_values() {
        let y = gaussian_matrix(6, 4, 12).unwrap();
        let (tau, p) = (0.7, 2.0 / 3.0);
        let out = schatten_prox(&y, tau, p).unwrap();
        let expected: Vec<f64> = thin_svd(&y, None)
            .unwrap()
            .sigma
            .iter()
            .map(|&s| lp_prox_scalar(s, tau, p).unwrap())
            .collect();
        let got = thin_svd(&out, None).unwrap().sigma;
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() <= 1e-10);
        }
    }

    #[test]
    fn spectral_prox_is_locally_optimal() {
        let y = gaussian_matrix(6, 4, 31).unwrap();
        let (tau, p) = (0.7, 2.0 / 3.0);
        let exponent = SchattenExponent::new(p).unwrap();
        let f = |x: &DenseMatrix| tau * schatten_power(x, exponent).unwrap() + 0.5 * (x - &y).norm_squared();
        let out = schatten_prox(&y, tau, p).unwrap();
        let base = f(&out);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for i in 0..200 {
            let scale = [1e-1, 1e-2, 1e-3][i % 3];
            let noise = gaussian_matrix(6, 4, rng.random()).unwrap() * scale;
            assert!(f(&(&out + noise)) >= base - 1e-12);
        }
    }
}
