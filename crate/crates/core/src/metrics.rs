//! Overall error and power metrics for superimposed lower bounds, and
//! their aggregation across Monte Carlo replications.
//!
//! A voxel with a positive bound is a discovery; the discovery is false
//! when the bound overshoots the true activation count. Power is the mean
//! ratio bound/truth over active voxels whose claim is not too strong.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::procedures::SuperimposeResult;
use crate::types::{LowerBounds, TruthVector};

/// Per-replication record of one procedure's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    /// False discovery proportion; 0 when there are no discoveries.
    pub fdp: f64,
    /// Mean of bound/truth over eligible active voxels; None when no voxel
    /// is eligible.
    pub power_beta: Option<f64>,
    pub n_discoveries: usize,
    pub n_false: usize,
    /// Rejection count at each granularity (index gamma - 1).
    pub per_gamma_rejections: Vec<usize>,
    /// Chosen selection threshold per granularity, for CoFilter runs.
    pub tau_per_gamma: Option<Vec<f64>>,
}

impl TrialMetrics {
    /// Scores one superimposition outcome against the ground truth.
    pub fn from_outcome(outcome: &SuperimposeResult, truth: &TruthVector) -> Result<Self> {
        let fdp = overall_fdp(&outcome.bounds, truth)?;
        let power = power_beta(&outcome.bounds, truth)?;
        let bounds = outcome.bounds.values();
        let counts = truth.counts();
        let n_discoveries = bounds.iter().filter(|&&d| d > 0).count();
        let n_false = bounds.iter().zip(counts).filter(|&(&d, &t)| d > t).count();
        Ok(Self {
            fdp,
            power_beta: power,
            n_discoveries,
            n_false,
            per_gamma_rejections: outcome.per_gamma_rejections.clone(),
            tau_per_gamma: outcome.tau_per_gamma.clone(),
        })
    }
}

fn check_lengths(bounds: &LowerBounds, truth: &TruthVector) -> Result<()> {
    if bounds.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: bounds.len(),
            right: truth.len(),
        });
    }
    Ok(())
}

/// False discovery proportion of a bounds vector against the truth.
pub fn overall_fdp(bounds: &LowerBounds, truth: &TruthVector) -> Result<f64> {
    check_lengths(bounds, truth)?;
    let mut discoveries = 0usize;
    let mut false_discoveries = 0usize;
    for (&d, &t) in bounds.values().iter().zip(truth.counts()) {
        if d > 0 {
            discoveries += 1;
        }
        if d > t {
            false_discoveries += 1;
        }
    }
    if discoveries == 0 {
        return Ok(0.0);
    }
    Ok(false_discoveries as f64 / discoveries as f64)
}

/// Power: mean of d/t over voxels with t > 0 and d <= t; None when the
/// eligible set is empty.
pub fn power_beta(bounds: &LowerBounds, truth: &TruthVector) -> Result<Option<f64>> {
    check_lengths(bounds, truth)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (&d, &t) in bounds.values().iter().zip(truth.counts()) {
        if t > 0 && d <= t {
            sum += d as f64 / t as f64;
            count += 1;
        }
    }
    if count == 0 {
        return Ok(None);
    }
    Ok(Some(sum / count as f64))
}

/// Empirical quantiles (2.5%, 25%, 50%, 75%, 97.5%).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q025: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q975: f64,
}

fn quantiles(sorted: &[f64]) -> Quantiles {
    let q = |p: f64| -> f64 {
        // Linear interpolation between order statistics.
        let h = (sorted.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        if lo + 1 >= sorted.len() {
            return sorted[sorted.len() - 1];
        }
        sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
    };
    Quantiles {
        q025: q(0.025),
        q25: q(0.25),
        q50: q(0.5),
        q75: q(0.75),
        q975: q(0.975),
    }
}

/// Aggregate of one procedure's trials across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub replications: usize,
    /// Empirical FDR: mean FDP across replications.
    pub fdr: f64,
    /// Monte Carlo standard error of the FDR; None for a single replication.
    pub fdr_se: Option<f64>,
    pub fdp_quantiles: Quantiles,
    /// Mean power over replications where it is defined.
    pub beta_mean: Option<f64>,
    /// Number of replications with defined power.
    pub beta_defined: usize,
    pub beta_quantiles: Option<Quantiles>,
    pub mean_discoveries: f64,
    pub mean_false_discoveries: f64,
    pub mean_per_gamma_rejections: Vec<f64>,
}

/// Summarizes a non-empty list of trials.
pub fn aggregate(trials: &[TrialMetrics]) -> Result<StudySummary> {
    if trials.is_empty() {
        return Err(Error::EmptyTrials);
    }
    let r = trials.len();
    // Sums run over sorted values so that aggregation is exactly
    // permutation-invariant, not just up to rounding.
    let mut fdp_sorted: Vec<f64> = trials.iter().map(|t| t.fdp).collect();
    fdp_sorted.sort_by(|a, b| a.partial_cmp(b).expect("fdp is finite"));
    let fdr = fdp_sorted.iter().sum::<f64>() / r as f64;
    let fdr_se = if r > 1 {
        let var = fdp_sorted
            .iter()
            .map(|f| (f - fdr) * (f - fdr))
            .sum::<f64>()
            / (r - 1) as f64;
        Some((var / r as f64).sqrt())
    } else {
        None
    };

    let mut betas: Vec<f64> = trials.iter().filter_map(|t| t.power_beta).collect();
    betas.sort_by(|a, b| a.partial_cmp(b).expect("beta is finite"));
    let beta_defined = betas.len();
    let beta_mean = if betas.is_empty() {
        None
    } else {
        Some(betas.iter().sum::<f64>() / betas.len() as f64)
    };
    let beta_quantiles = if betas.is_empty() {
        None
    } else {
        Some(quantiles(&betas))
    };

    let gammas = trials[0].per_gamma_rejections.len();
    let mut mean_per_gamma = vec![0.0f64; gammas];
    for t in trials {
        for (acc, &c) in mean_per_gamma.iter_mut().zip(&t.per_gamma_rejections) {
            *acc += c as f64;
        }
    }
    for acc in &mut mean_per_gamma {
        *acc /= r as f64;
    }

    Ok(StudySummary {
        replications: r,
        fdr,
        fdr_se,
        fdp_quantiles: quantiles(&fdp_sorted),
        beta_mean,
        beta_defined,
        beta_quantiles,
        mean_discoveries: trials.iter().map(|t| t.n_discoveries as f64).sum::<f64>() / r as f64,
        mean_false_discoveries: trials.iter().map(|t| t.n_false as f64).sum::<f64>() / r as f64,
        mean_per_gamma_rejections: mean_per_gamma,
    })
}
