//! Power calibration for the one-sample two-sided t-test: the noncentral-t
//! CDF (by adaptive quadrature of its defining mixture integral) and the
//! signal mean that achieves a target power.

use crate::error::{Error, Result};
use crate::numerics::special::{ln_gamma, normal_cdf};
use crate::numerics::t_sf_two_sided;

const MAX_DF: usize = 1000;

/// CDF of the noncentral t distribution with `df` degrees of freedom and
/// noncentrality `lambda`, evaluated at `t`.
///
/// Integrates Phi(t * u / sqrt(df) - lambda) against the density of
/// U = sqrt(V / 1) with V ~ chi-square(df); the substitution keeps the
/// integrand bounded even at df = 1.
pub fn noncentral_t_cdf(t: f64, df: usize, lambda: f64) -> Result<f64> {
    if df == 0 || df > MAX_DF {
        return Err(Error::InvalidArgument(format!(
            "noncentral_t_cdf supports 1 <= df <= {MAX_DF}, got {df}"
        )));
    }
    if !t.is_finite() || !lambda.is_finite() {
        return Err(Error::InvalidArgument(
            "noncentral_t_cdf requires finite t and lambda".into(),
        ));
    }
    let nu = df as f64;
    // log normalizer of the chi density: u^(nu-1) e^(-u^2/2) / (2^(nu/2-1) Gamma(nu/2))
    let log_norm = -(nu / 2.0 - 1.0) * std::f64::consts::LN_2 - ln_gamma(nu / 2.0);
    let chi_density = move |u: f64| -> f64 {
        if u <= 0.0 {
            if df == 1 {
                return log_norm.exp();
            }
            return 0.0;
        }
        (log_norm + (nu - 1.0) * u.ln() - 0.5 * u * u).exp()
    };
    let integrand =
        move |u: f64| -> f64 { normal_cdf(t * u / nu.sqrt() - lambda) * chi_density(u) };
    let hi = nu.sqrt() + 12.0;
    let value = adaptive_simpson(&integrand, 0.0, hi, 1e-12, 60);
    Ok(value.clamp(0.0, 1.0))
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

/// Two-sided critical value: the t with P(|T_df| >= t) = alpha.
pub fn t_two_sided_critical(alpha: f64, df: usize) -> Result<f64> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidAlpha { alpha });
    }
    // sf is strictly decreasing in t; bracket then bisect.
    let mut hi = 1.0;
    let mut iter = 0;
    while t_sf_two_sided(hi, df)? > alpha {
        hi *= 2.0;
        iter += 1;
        if iter > 200 {
            return Err(Error::NonConvergence("t critical value bracket".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if t_sf_two_sided(mid, df)? > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Power of the two-sided one-sample t-test at level `alpha` when `n`
/// unit-variance normal observations have mean `mu`.
pub fn t_test_power(mu: f64, n: usize, alpha: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "t-test power requires n >= 2, got {n}"
        )));
    }
    let df = n - 1;
    let crit = t_two_sided_critical(alpha, df)?;
    let lambda = (n as f64).sqrt() * mu;
    let upper = 1.0 - noncentral_t_cdf(crit, df, lambda)?;
    let lower = noncentral_t_cdf(-crit, df, lambda)?;
    Ok((upper + lower).clamp(0.0, 1.0))
}

/// The mean mu > 0 at which the two-sided one-sample t-test with `n`
/// unit-variance observations and level `alpha` reaches power `eta`.
///
/// Solved by bisection on the noncentral-t power curve to a relative
/// tolerance of 1e-8. Returns 0 when `eta <= alpha` (the power at mu = 0).
pub fn mean_for_power(alpha: f64, eta: f64, n: usize) -> Result<f64> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidAlpha { alpha });
    }
    if !(0.0 < eta && eta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target power must lie in (0, 1), got {eta}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "mean_for_power requires n >= 2, got {n}"
        )));
    }
    if eta <= alpha {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    let mut iter = 0;
    while t_test_power(hi, n, alpha)? < eta {
        hi *= 2.0;
        iter += 1;
        if iter > 60 {
            return Err(Error::NonConvergence("mean_for_power bracket".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if t_test_power(mid, n, alpha)? < eta {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-8 * hi {
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(Error::NonConvergence("mean_for_power bisection".into()))
}
