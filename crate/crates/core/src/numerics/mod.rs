//! Distribution tails and power calibration used by the statistical core.

pub mod power;
pub mod rng;
pub mod special;

pub use power::{mean_for_power, noncentral_t_cdf, t_test_power, t_two_sided_critical};
pub use rng::{rng_standard_normal, RngStream, StreamRng};
pub use special::{erfc, ln_gamma, normal_cdf, normal_sf_two_sided, reg_beta, reg_gamma_upper};

use crate::error::{Error, Result};

/// Chi-square survival function P(X > x) for `df` degrees of freedom.
pub fn chisq_sf(x: f64, df: usize) -> Result<f64> {
    if df == 0 {
        return Err(Error::InvalidArgument("chi-square requires df >= 1".into()));
    }
    if !x.is_finite() || x < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "chi-square survival requires finite x >= 0, got {x}"
        )));
    }
    special::reg_gamma_upper(df as f64 / 2.0, x / 2.0)
}

/// Two-sided Student-t tail probability P(|T_df| >= |t|).
pub fn t_sf_two_sided(t: f64, df: usize) -> Result<f64> {
    if df == 0 {
        return Err(Error::InvalidArgument("t test requires df >= 1".into()));
    }
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "t statistic must be finite, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let nu = df as f64;
    special::reg_beta(nu / 2.0, 0.5, nu / (nu + t * t))
}
