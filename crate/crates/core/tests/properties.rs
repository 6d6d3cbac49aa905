//! Property and statistical tests: procedure invariants against brute-force
//! references, distributional checks on the combiner and generators.

use proptest::prelude::*;

use pcmap_core::combine::{fisher_pc_pvalue, pc_field};
use pcmap_core::metrics::{overall_fdp, power_beta};
use pcmap_core::numerics::{mean_for_power, rng_standard_normal, t_sf_two_sided, RngStream};
use pcmap_core::procedures::{bh, cofilter_adaptive, cofilter_fixed};
use pcmap_core::simulate::{delta_profile, gen_equicorr_map, EquiCorrScenario};
use pcmap_core::{Granularity, LowerBounds, PValueMatrix, TruthVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Quadratic-time step-up reference: check every sorted position against
/// its threshold, take the max, reject everything at or below that value.
fn bh_reference(pvals: &[f64], alpha: f64) -> Vec<usize> {
    let n = pvals.len();
    if n == 0 {
        return Vec::new();
    }
    let mut sorted: Vec<f64> = pvals.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best: Option<f64> = None;
    for (i, &q) in sorted.iter().enumerate() {
        if q <= (i + 1) as f64 * alpha / n as f64 {
            best = Some(q);
        }
    }
    match best {
        None => Vec::new(),
        Some(threshold) => (0..n).filter(|&j| pvals[j] <= threshold).collect(),
    }
}

fn pvec(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, 1..max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn bh_matches_quadratic_reference(pvals in pvec(60), alpha in 0.01f64..0.5) {
        let got = bh(&pvals, alpha).unwrap();
        prop_assert_eq!(got, bh_reference(&pvals, alpha));
    }

    #[test]
    fn cofilter_tau_one_is_bh(pvals in pvec(60), alpha in 0.01f64..0.5) {
        let gamma = Granularity::new(1, 1).unwrap();
        let set = cofilter_fixed(&pvals, gamma, alpha, 1.0).unwrap();
        prop_assert_eq!(set.indices().to_vec(), bh(&pvals, alpha).unwrap());
    }

    #[test]
    fn adaptive_dominates_every_grid_point(pvals in pvec(60), alpha in 0.01f64..0.5) {
        let gamma = Granularity::new(1, 1).unwrap();
        let grid = [0.05, 0.1, 0.25, 0.5, 1.0];
        let adaptive = cofilter_adaptive(&pvals, gamma, alpha, &grid).unwrap();
        for &tau in &grid {
            let fixed = cofilter_fixed(&pvals, gamma, alpha, tau).unwrap();
            prop_assert!(adaptive.len() >= fixed.len(),
                "adaptive {} < fixed {} at tau {}", adaptive.len(), fixed.len(), tau);
        }
    }

    #[test]
    fn rejections_grow_with_alpha(pvals in pvec(60), alpha in 0.01f64..0.3) {
        let alpha_hi = alpha * 1.5;
        let lo = bh(&pvals, alpha).unwrap();
        let hi = bh(&pvals, alpha_hi).unwrap();
        prop_assert!(lo.iter().all(|j| hi.contains(j)));

        let gamma = Granularity::new(1, 1).unwrap();
        let lo = cofilter_fixed(&pvals, gamma, alpha, 0.3).unwrap();
        let hi = cofilter_fixed(&pvals, gamma, alpha_hi, 0.3).unwrap();
        prop_assert!(lo.indices().iter().all(|j| hi.contains(*j)));
    }

    #[test]
    fn fisher_is_permutation_invariant(pvals in pvec(8), shift in 0usize..8) {
        let s = pvals.len();
        let gamma = Granularity::new(1 + shift % s, s).unwrap();
        let base = fisher_pc_pvalue(&pvals, gamma).unwrap();
        let mut rotated = pvals.clone();
        rotated.rotate_left(shift % s);
        prop_assert_eq!(base, fisher_pc_pvalue(&rotated, gamma).unwrap());
    }

    #[test]
    fn fisher_is_monotone_in_each_argument(
        pvals in pvec(8),
        idx in 0usize..8,
        bump in 0.0f64..1.0,
    ) {
        let s = pvals.len();
        let idx = idx % s;
        let gamma = Granularity::new(1 + idx % s, s).unwrap();
        let base = fisher_pc_pvalue(&pvals, gamma).unwrap();
        let mut raised = pvals.clone();
        raised[idx] = (raised[idx] + bump).min(1.0);
        let after = fisher_pc_pvalue(&raised, gamma).unwrap();
        prop_assert!(after >= base - 1e-12, "raising p decreased output: {base} -> {after}");
    }

    #[test]
    fn metrics_stay_in_unit_interval(
        pairs in prop::collection::vec((0usize..5, 0usize..5), 1..50)
    ) {
        let bounds = LowerBounds::new(pairs.iter().map(|p| p.0).collect(), 4).unwrap();
        let truth = TruthVector::new(pairs.iter().map(|p| p.1).collect(), 4).unwrap();
        let fdp = overall_fdp(&bounds, &truth).unwrap();
        prop_assert!((0.0..=1.0).contains(&fdp));
        if let Some(beta) = power_beta(&bounds, &truth).unwrap() {
            prop_assert!((0.0..=1.0).contains(&beta));
        }
    }

    #[test]
    fn profile_counts_always_conserve(s in 1usize..12, extra in 0usize..500, c in 1.05f64..4.0) {
        let m = s + 1 + extra;
        let truth = delta_profile(m, s, c).unwrap();
        prop_assert_eq!(truth.len(), m);
        prop_assert!(truth.counts().iter().all(|&d| d <= s));
    }
}

#[test]
fn field_single_cell_identity_on_unit_interval() {
    for k in 0..50 {
        let p = 1e-290f64.max((k as f64 / 49.0).powi(3));
        let matrix = PValueMatrix::new(vec![vec![p]]).unwrap();
        let field = pc_field(&matrix);
        let gamma = Granularity::new(1, 1).unwrap();
        assert!((field.value(0, gamma) - p).abs() < 1e-12, "p={p}");
    }
}

/// Two-sided t tail for df = 1 against a 1e5-point Simpson integration of
/// the Cauchy density.
#[test]
fn t_sf_df1_matches_numerical_integration() {
    let density = |x: f64| 1.0 / (std::f64::consts::PI * (1.0 + x * x));
    for &t in &[0.3, 1.0, 2.5, 7.0] {
        // Composite Simpson over [-t, t] with 1e5 intervals.
        let n = 100_000usize;
        let h = 2.0 * t / n as f64;
        let mut acc = density(-t) + density(t);
        for i in 1..n {
            let x = -t + i as f64 * h;
            acc += density(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let central_mass = acc * h / 3.0;
        let expected = 1.0 - central_mass;
        let got = t_sf_two_sided(t, 1).unwrap();
        assert!(
            (got - expected).abs() < 1e-9,
            "t={t}: {got} vs oracle {expected}"
        );
    }
}

/// Calibrated mean pushed back through a Monte Carlo power estimate.
#[test]
fn calibrated_mean_reproduces_power_in_simulation() {
    let n = 50usize;
    let mu = mean_for_power(0.05, 0.95, n).unwrap();
    let mut rng = RngStream::new(314159, 0).rng();
    let reps = 100_000usize;
    let mut rejections = 0usize;
    for _ in 0..reps {
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                mu + z
            })
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
        let sd = (ss / (n as f64 - 1.0)).sqrt();
        let t = mean / (sd / (n as f64).sqrt());
        if t_sf_two_sided(t, n - 1).unwrap() <= 0.05 {
            rejections += 1;
        }
    }
    let power = rejections as f64 / reps as f64;
    assert!((power - 0.95).abs() < 0.01, "simulated power {power}");
}

/// Combined p-values under a partial-conjunction null are stochastically
/// no smaller than uniform: one-sided Kolmogorov-Smirnov at level 0.01.
#[test]
fn null_combined_pvalues_are_super_uniform() {
    let s = 10usize;
    let gamma = Granularity::new(4, s).unwrap();
    let sims = 100_000usize;
    let mut rng = RngStream::new(271828, 1).rng();
    let mut outputs = Vec::with_capacity(sims);
    for _ in 0..sims {
        // Exactly 3 non-null entries at 0 and 7 uniform nulls: delta = 3
        // falls short of gamma = 4, so the PC null holds.
        let mut pvals = vec![0.0; 3];
        for _ in 0..7 {
            pvals.push(rng.random::<f64>());
        }
        outputs.push(fisher_pc_pvalue(&pvals, gamma).unwrap());
    }
    outputs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sims as f64;
    let mut d_plus = 0.0f64;
    for (i, &x) in outputs.iter().enumerate() {
        d_plus = d_plus.max((i + 1) as f64 / n - x);
    }
    // One-sided critical value sqrt(-ln(alpha) / (2n)) at alpha = 0.01.
    let critical = (-(0.01f64).ln() / (2.0 * n)).sqrt();
    assert!(
        d_plus <= critical,
        "empirical CDF exceeds uniform: D+ = {d_plus}, critical = {critical}"
    );
}

/// Null equi-correlated maps produce uniform p-values (two-sided KS).
#[test]
fn null_equicorr_pvalues_are_uniform() {
    let scenario = EquiCorrScenario {
        voxels: 1000,
        subjects: 1,
        observations: 50,
        rho: 0.0,
        seed: 1234,
        ..Default::default()
    };
    let truth = TruthVector::new(vec![0; 1000], 1).unwrap();
    let mut pooled = Vec::with_capacity(100_000);
    for r in 0..100u64 {
        let stream = RngStream::new(scenario.seed, r);
        pooled.extend(gen_equicorr_map(&scenario, 0, &truth, &stream).unwrap());
    }
    pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = pooled.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in pooled.iter().enumerate() {
        d = d.max((x - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - x).abs());
    }
    // Two-sided critical value sqrt(-ln(alpha/2) / (2n)) at alpha = 0.01.
    let critical = (-(0.005f64).ln() / (2.0 * n)).sqrt();
    assert!(d <= critical, "KS statistic {d} exceeds {critical}");
}

#[test]
fn standard_normal_stream_reproducibility_across_invocations() {
    let a = rng_standard_normal(&RngStream::new(5, 17), 32);
    let b = rng_standard_normal(&RngStream::new(5, 17), 32);
    assert_eq!(a, b);
}

/// Null-only trials: with every voxel inactive, any discovery is false,
/// so the aggregate FDR must stay within Monte Carlo range of the level.
#[test]
fn null_only_trials_control_fdr() {
    use pcmap_core::metrics::{aggregate, TrialMetrics};
    use pcmap_core::procedures::{default_tau_grid, superimpose, MethodConfig};

    let (m, s) = (200usize, 3usize);
    let truth = TruthVector::new(vec![0; m], s).unwrap();
    let method = MethodConfig::cofilter_adaptive(0.05, default_tau_grid());
    let mut rng = RngStream::new(161803, 0).rng();
    let mut trials = Vec::with_capacity(500);
    for _ in 0..500 {
        let values: Vec<f64> = (0..m * s).map(|_| rng.random()).collect();
        let matrix = PValueMatrix::from_flat(m, s, values).unwrap();
        let outcome = superimpose(&matrix, &method).unwrap();
        trials.push(TrialMetrics::from_outcome(&outcome, &truth).unwrap());
    }
    let summary = aggregate(&trials).unwrap();
    let bound = 0.05 + 3.0 * summary.fdr_se.unwrap();
    assert!(
        summary.fdr <= bound,
        "null-only FDR {} exceeds {bound}",
        summary.fdr
    );
    // Every discovery on null data is false.
    for t in &trials {
        assert_eq!(t.n_false, t.n_discoveries);
        if t.n_discoveries > 0 {
            assert_eq!(t.fdp, 1.0);
        }
    }
}
