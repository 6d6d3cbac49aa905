//! Combined partial-conjunction p-values.
//!
//! For a voxel with per-subject p-values p_1..p_s and granularity gamma,
//! the combined p-value pools the s - gamma + 1 largest order statistics
//! through Fisher's method: the statistic -2 * sum of their logs is
//! referred to a chi-square tail with 2(s - gamma + 1) degrees of freedom.

use crate::error::{Error, Result};
use crate::numerics::chisq_sf;
use crate::types::{Granularity, PValueMatrix, PcField};

/// Values below this floor are clamped before taking logs, keeping the
/// statistic finite while leaving combined p-values of ~0 intact.
pub const LOG_CLAMP_FLOOR: f64 = 1e-300;

/// Fisher-combination p-value for one voxel at one granularity.
pub fn fisher_pc_pvalue(pvals: &[f64], gamma: Granularity) -> Result<f64> {
    let s = pvals.len();
    if gamma.get() > s {
        return Err(Error::InvalidGamma {
            gamma: gamma.get(),
            subjects: s,
        });
    }
    for (i, &p) in pvals.iter().enumerate() {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidEntry {
                row: 1,
                col: i + 1,
                value: p,
            });
        }
    }
    let mut sorted = pvals.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("validated finite"));
    Ok(fisher_tail(&sorted, gamma.get(), s))
}

/// Combined p-value from an already ascending-sorted row.
fn fisher_tail(sorted: &[f64], gamma: usize, s: usize) -> f64 {
    let log_sum: f64 = sorted[gamma - 1..s]
        .iter()
        .map(|&p| p.max(LOG_CLAMP_FLOOR).ln())
        .sum();
    let stat = -2.0 * log_sum;
    let df = 2 * (s - gamma + 1);
    chisq_sf(stat, df).expect("statistic is nonnegative and df >= 2")
}

/// Combined p-values for every voxel and granularity. Each row is sorted
/// once and reused across granularities.
pub fn pc_field(matrix: &PValueMatrix) -> PcField {
    let m = matrix.voxel_count();
    let s = matrix.subject_count();
    let mut values = Vec::with_capacity(m * s);
    let mut sorted = vec![0.0f64; s];
    #[cfg(debug_assertions)]
    let mut non_monotone_rows = 0usize;
    for j in 0..m {
        sorted.copy_from_slice(matrix.row(j));
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("validated finite"));
        for gamma in 1..=s {
            values.push(fisher_tail(&sorted, gamma, s));
        }
        #[cfg(debug_assertions)]
        {
            // Monotonicity in gamma is plausible but never guaranteed;
            // surface any counterexample rather than assuming it.
            if values[j * s..(j + 1) * s].windows(2).any(|w| w[1] < w[0]) {
                non_monotone_rows += 1;
            }
        }
    }
    #[cfg(debug_assertions)]
    if non_monotone_rows > 0 {
        use std::sync::atomic::{AtomicUsize, Ordering};
        static LOGGED: AtomicUsize = AtomicUsize::new(0);
        let seen = LOGGED.fetch_add(1, Ordering::Relaxed);
        if seen < 3 {
            eprintln!(
                "pc_field: combined p-values non-monotone in gamma for {non_monotone_rows} of {m} voxels"
            );
        } else if seen == 3 {
            eprintln!("pc_field: further non-monotonicity messages suppressed");
        }
    }
    PcField::from_parts(m, s, values)
}

/// The length-m column of combined p-values at a single granularity.
pub fn pc_column(matrix: &PValueMatrix, gamma: Granularity) -> Result<Vec<f64>> {
    let s = matrix.subject_count();
    if gamma.get() > s {
        return Err(Error::InvalidGamma {
            gamma: gamma.get(),
            subjects: s,
        });
    }
    let mut sorted = vec![0.0f64; s];
    Ok((0..matrix.voxel_count())
        .map(|j| {
            sorted.copy_from_slice(matrix.row(j));
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("validated finite"));
            fisher_tail(&sorted, gamma.get(), s)
        })
        .collect())
}

/// Conditional p-value pc / tau for a voxel that survived selection at tau.
pub fn conditional_pc(pc: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidTau { tau });
    }
    if pc > tau {
        return Err(Error::ConditionalOutOfRange { pc, tau });
    }
    Ok(pc / tau)
}
