//! Data generators and the Monte Carlo study harness.
//!
//! Two generators are provided: an equi-correlated multivariate-normal
//! t-test pipeline without spatial structure, and a simplified 3-D
//! phantom with a spherical activation region and direct z-score maps.
//! Replications are reproducible: all randomness derives from the
//! scenario seed plus fixed stream ids, so studies give identical results
//! on any thread count.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combine::pc_field;
use crate::error::{Error, Result};
use crate::metrics::{aggregate, StudySummary, TrialMetrics};
use crate::numerics::{mean_for_power, normal_sf_two_sided, t_sf_two_sided, RngStream};
use crate::procedures::{superimpose_with_field, MethodConfig};
use crate::types::{PValueMatrix, TruthVector};

/// Stream id namespace for per-(replication, subject) map noise.
const STREAM_NS_MAP: u64 = 0;
/// Stream id namespace for per-voxel active-subject assignment.
const STREAM_NS_ASSIGN: u64 = 1 << 63;

const MAX_SUBJECTS: usize = 1 << 16;

fn map_stream(seed: u64, replication: u64, subject: usize) -> RngStream {
    RngStream::new(seed, STREAM_NS_MAP | (replication << 16) | subject as u64)
}

fn assignment_stream(seed: u64, voxel: usize) -> RngStream {
    RngStream::new(seed, STREAM_NS_ASSIGN | voxel as u64)
}

/// Equi-correlated t-test scenario: each subject map comes from n
/// multivariate-normal observations with unit variances and constant
/// pairwise correlation rho, and active voxels carry the mean calibrated
/// so a single test reaches power eta at level alpha_cal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EquiCorrScenario {
    #[serde(alias = "m")]
    pub voxels: usize,
    #[serde(alias = "s")]
    pub subjects: usize,
    #[serde(alias = "n")]
    pub observations: usize,
    pub rho: f64,
    /// Base of the geometric activation profile.
    pub c: f64,
    /// Per-test target power for active voxels.
    pub eta: f64,
    /// Level at which the per-test power is calibrated.
    pub alpha_cal: f64,
    pub seed: u64,
}

impl Default for EquiCorrScenario {
    fn default() -> Self {
        Self {
            voxels: 1000,
            subjects: 10,
            observations: 50,
            rho: 0.0,
            c: 1.5,
            eta: 0.95,
            alpha_cal: 0.05,
            seed: 0,
        }
    }
}

impl EquiCorrScenario {
    pub fn validate(&self) -> Result<()> {
        if self.subjects == 0 || self.subjects >= MAX_SUBJECTS {
            return Err(Error::InvalidArgument(format!(
                "subject count {} out of supported range",
                self.subjects
            )));
        }
        if self.voxels < self.subjects + 1 {
            return Err(Error::InvalidArgument(format!(
                "voxel count {} too small for an activation profile over {} subjects",
                self.voxels, self.subjects
            )));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidArgument(format!(
                "rho must lie in [0, 1), got {}",
                self.rho
            )));
        }
        if !self.c.is_finite() || self.c <= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "profile base c must be finite and exceed 1, got {}",
                self.c
            )));
        }
        if self.observations < 2 || self.observations > 1001 {
            return Err(Error::InvalidArgument(format!(
                "observations per map must lie in [2, 1001], got {}",
                self.observations
            )));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "target power must lie in (0, 1), got {}",
                self.eta
            )));
        }
        if !(self.alpha_cal > 0.0 && self.alpha_cal < 1.0) {
            return Err(Error::InvalidAlpha {
                alpha: self.alpha_cal,
            });
        }
        Ok(())
    }

    /// The calibrated mean placed on active voxel/subject pairs.
    pub fn signal_mean(&self) -> Result<f64> {
        mean_for_power(self.alpha_cal, self.eta, self.observations)
    }
}

/// Simplified 3-D phantom: every subject is active in the same spherical
/// region, each map is a field of z-scores (signal snr inside the sphere)
/// converted to two-sided normal p-values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomScenario {
    /// Grid dimensions (x, y, z); the voxel count is their product.
    pub grid: [usize; 3],
    #[serde(alias = "s")]
    pub subjects: usize,
    /// Sphere center in 1-based voxel coordinates.
    pub sphere_center: [f64; 3],
    /// Sphere radius in voxel units; membership is inclusive.
    pub sphere_radius: f64,
    pub snr: f64,
    pub seed: u64,
}

impl Default for PhantomScenario {
    fn default() -> Self {
        Self {
            grid: [10, 10, 10],
            subjects: 8,
            sphere_center: [5.5, 5.5, 5.5],
            sphere_radius: 3.0,
            snr: 2.0,
            seed: 0,
        }
    }
}

impl PhantomScenario {
    pub fn validate(&self) -> Result<()> {
        if self.grid.contains(&0) {
            return Err(Error::InvalidArgument(
                "phantom grid dimensions must be positive".into(),
            ));
        }
        if self.subjects == 0 || self.subjects >= MAX_SUBJECTS {
            return Err(Error::InvalidArgument(format!(
                "subject count {} out of supported range",
                self.subjects
            )));
        }
        if !self.snr.is_finite() || self.snr <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "snr must be finite and positive, got {}",
                self.snr
            )));
        }
        if self.sphere_radius < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "sphere radius must be nonnegative, got {}",
                self.sphere_radius
            )));
        }
        Ok(())
    }

    pub fn voxel_count(&self) -> usize {
        self.grid.iter().product()
    }

    /// Per-voxel sphere membership flags, row-major over (x, y, z).
    pub fn active_mask(&self) -> Vec<bool> {
        let [nx, ny, nz] = self.grid;
        let r2 = self.sphere_radius * self.sphere_radius;
        let mut active = Vec::with_capacity(self.voxel_count());
        for x in 1..=nx {
            for y in 1..=ny {
                for z in 1..=nz {
                    let dx = x as f64 - self.sphere_center[0];
                    let dy = y as f64 - self.sphere_center[1];
                    let dz = z as f64 - self.sphere_center[2];
                    active.push(dx * dx + dy * dy + dz * dz <= r2);
                }
            }
        }
        active
    }

    /// Ground truth: active voxels are active in every subject.
    pub fn truth_vector(&self) -> TruthVector {
        let counts = self
            .active_mask()
            .iter()
            .map(|&a| if a { self.subjects } else { 0 })
            .collect();
        TruthVector::new(counts, self.subjects).expect("counts are 0 or s")
    }
}

/// A simulation scenario of either kind, as read from scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StudyScenario {
    Equicorr(EquiCorrScenario),
    Phantom(PhantomScenario),
}

impl StudyScenario {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Equicorr(s) => s.validate(),
            Self::Phantom(s) => s.validate(),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Self::Equicorr(s) => s.seed,
            Self::Phantom(s) => s.seed,
        }
    }

    pub fn subject_count(&self) -> usize {
        match self {
            Self::Equicorr(s) => s.subjects,
            Self::Phantom(s) => s.subjects,
        }
    }

    pub fn voxel_count(&self) -> usize {
        match self {
            Self::Equicorr(s) => s.voxels,
            Self::Phantom(s) => s.voxel_count(),
        }
    }

    /// The ground-truth activation counts implied by the scenario.
    pub fn truth(&self) -> Result<TruthVector> {
        match self {
            Self::Equicorr(s) => delta_profile(s.voxels, s.subjects, s.c),
            Self::Phantom(s) => Ok(s.truth_vector()),
        }
    }
}

/// Activation profile: the number of voxels active in exactly i subjects
/// is proportional to c^(s - i), rounded by largest remainder; any final
/// residual lands on the inactive bucket. Voxels are laid out in blocks,
/// the fully active block first.
pub fn delta_profile(voxels: usize, subjects: usize, c: f64) -> Result<TruthVector> {
    if !c.is_finite() || c <= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "profile base c must be finite and exceed 1, got {c}"
        )));
    }
    if voxels < subjects + 1 {
        return Err(Error::InvalidArgument(format!(
            "cannot spread {subjects}+1 activation levels over {voxels} voxels"
        )));
    }
    let weights: Vec<f64> = (0..=subjects)
        .map(|i| c.powi((subjects - i) as i32))
        .collect();
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| voxels as f64 * w / total).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..=subjects).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).expect("finite").then(a.cmp(&b))
    });
    for &i in order.iter().take(voxels.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    // Guard the sum with the inactive bucket; exact arithmetic above makes
    // this a no-op.
    let sum: usize = counts.iter().sum();
    if sum > voxels && counts[0] < sum - voxels {
        return Err(Error::InvalidArgument(format!(
            "cannot realize profile over {voxels} voxels"
        )));
    }
    counts[0] = counts[0] + voxels - sum;

    let mut delta = Vec::with_capacity(voxels);
    for i in (0..=subjects).rev() {
        delta.extend(std::iter::repeat_n(i, counts[i]));
    }
    TruthVector::new(delta, subjects)
}

/// Fisher-Yates permutation of the subject indices, seeded per voxel.
fn subject_permutation(seed: u64, voxel: usize, subjects: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..subjects).collect();
    let mut rng = assignment_stream(seed, voxel).rng();
    for i in (1..subjects).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    perm
}

/// Per-voxel active flags for every subject (row-major m x s): voxel j is
/// active in the first delta_j subjects of its seeded permutation.
fn active_assignment(seed: u64, truth: &TruthVector) -> Vec<bool> {
    let s = truth.subject_count();
    let mut mask = vec![false; truth.len() * s];
    for (j, &d) in truth.counts().iter().enumerate() {
        if d == 0 {
            continue;
        }
        let row = &mut mask[j * s..(j + 1) * s];
        if d >= s {
            row.fill(true);
            continue;
        }
        for &subject in subject_permutation(seed, j, s).iter().take(d) {
            row[subject] = true;
        }
    }
    mask
}

/// Draws `observations` rows of an equi-correlated normal vector over
/// `voxels` variables: each observation shares one common factor scaled by
/// sqrt(rho) plus voxel-specific noise scaled by sqrt(1 - rho), giving
/// unit variances and pairwise correlation exactly rho.
///
/// Returns a voxel-major buffer: entry [j * observations + k] is
/// observation k of voxel j.
pub fn sample_equicorr_observations(
    rho: f64,
    voxels: usize,
    observations: usize,
    means: &[f64],
    stream: &RngStream,
) -> Vec<f64> {
    debug_assert_eq!(means.len(), voxels);
    let shared_scale = rho.sqrt();
    let own_scale = (1.0 - rho).sqrt();
    let mut rng = stream.rng();
    let mut data = vec![0.0f64; voxels * observations];
    for k in 0..observations {
        let shared: f64 = StandardNormal.sample(&mut rng);
        let common = shared_scale * shared;
        for (j, &mean) in means.iter().enumerate() {
            let own: f64 = StandardNormal.sample(&mut rng);
            data[j * observations + k] = mean + common + own_scale * own;
        }
    }
    data
}

fn t_test_pvalues(data: &[f64], voxels: usize, observations: usize) -> Vec<f64> {
    let n = observations as f64;
    let df = observations - 1;
    (0..voxels)
        .map(|j| {
            let xs = &data[j * observations..(j + 1) * observations];
            let mean = xs.iter().sum::<f64>() / n;
            let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
            let sd = (ss / (n - 1.0)).sqrt();
            if sd == 0.0 {
                return if mean == 0.0 { 1.0 } else { 0.0 };
            }
            let t = mean / (sd / n.sqrt());
            t_sf_two_sided(t, df).expect("finite statistic, df >= 1")
        })
        .collect()
}

fn equicorr_pvalues(
    scenario: &EquiCorrScenario,
    active: impl Fn(usize) -> bool,
    mu: f64,
    stream: &RngStream,
) -> Vec<f64> {
    let means: Vec<f64> = (0..scenario.voxels)
        .map(|j| if active(j) { mu } else { 0.0 })
        .collect();
    let data = sample_equicorr_observations(
        scenario.rho,
        scenario.voxels,
        scenario.observations,
        &means,
        stream,
    );
    t_test_pvalues(&data, scenario.voxels, scenario.observations)
}

/// One subject map of the equi-correlated scenario: two-sided one-sample
/// t-test p-values per voxel. The subject index is 0-based.
pub fn gen_equicorr_map(
    scenario: &EquiCorrScenario,
    subject: usize,
    truth: &TruthVector,
    stream: &RngStream,
) -> Result<Vec<f64>> {
    scenario.validate()?;
    if subject >= scenario.subjects {
        return Err(Error::InvalidArgument(format!(
            "subject index {subject} out of range for {} subjects",
            scenario.subjects
        )));
    }
    if truth.len() != scenario.voxels || truth.subject_count() != scenario.subjects {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: scenario.voxels,
        });
    }
    let mu = scenario.signal_mean()?;
    let mask = active_assignment(scenario.seed, truth);
    let s = scenario.subjects;
    Ok(equicorr_pvalues(
        scenario,
        |j| mask[j * s + subject],
        mu,
        stream,
    ))
}

/// One subject map of the phantom scenario plus the ground truth: z-scores
/// of snr inside the sphere, standard normal noise everywhere, converted
/// to two-sided normal p-values.
pub fn gen_phantom_map(
    scenario: &PhantomScenario,
    subject: usize,
    stream: &RngStream,
) -> Result<(Vec<f64>, TruthVector)> {
    scenario.validate()?;
    if subject >= scenario.subjects {
        return Err(Error::InvalidArgument(format!(
            "subject index {subject} out of range for {} subjects",
            scenario.subjects
        )));
    }
    let active = scenario.active_mask();
    let pvalues = phantom_pvalues(scenario, &active, stream);
    Ok((pvalues, scenario.truth_vector()))
}

fn phantom_pvalues(scenario: &PhantomScenario, active: &[bool], stream: &RngStream) -> Vec<f64> {
    let mut rng = stream.rng();
    active
        .iter()
        .map(|&a| {
            let noise: f64 = StandardNormal.sample(&mut rng);
            let z = if a { scenario.snr + noise } else { noise };
            normal_sf_two_sided(z)
        })
        .collect()
}

/// Everything derivable from the scenario alone, shared across replications.
struct Prepared {
    truth: TruthVector,
    kind: PreparedKind,
}

enum PreparedKind {
    Equicorr {
        mu: f64,
        /// Row-major m x s active flags.
        mask: Vec<bool>,
    },
    Phantom {
        active: Vec<bool>,
    },
}

impl Prepared {
    fn new(scenario: &StudyScenario) -> Result<Self> {
        let truth = scenario.truth()?;
        let kind = match scenario {
            StudyScenario::Equicorr(s) => PreparedKind::Equicorr {
                mu: s.signal_mean()?,
                mask: active_assignment(s.seed, &truth),
            },
            StudyScenario::Phantom(s) => PreparedKind::Phantom {
                active: s.active_mask(),
            },
        };
        Ok(Self { truth, kind })
    }

    fn matrix(&self, scenario: &StudyScenario, replication: u64) -> PValueMatrix {
        let seed = scenario.seed();
        let s = scenario.subject_count();
        let m = scenario.voxel_count();
        let mut values = vec![0.0f64; m * s];
        for subject in 0..s {
            let stream = map_stream(seed, replication, subject);
            let map = match (&self.kind, scenario) {
                (PreparedKind::Equicorr { mu, mask }, StudyScenario::Equicorr(sc)) => {
                    equicorr_pvalues(sc, |j| mask[j * s + subject], *mu, &stream)
                }
                (PreparedKind::Phantom { active }, StudyScenario::Phantom(sc)) => {
                    phantom_pvalues(sc, active, &stream)
                }
                _ => unreachable!("prepared state matches scenario kind"),
            };
            for (j, &p) in map.iter().enumerate() {
                values[j * s + subject] = p;
            }
        }
        PValueMatrix::from_flat(m, s, values).expect("generated p-values are valid")
    }
}

/// Generates the full p-value matrix of one replication.
pub fn generate_matrix(scenario: &StudyScenario, replication: u64) -> Result<PValueMatrix> {
    scenario.validate()?;
    let prepared = Prepared::new(scenario)?;
    Ok(prepared.matrix(scenario, replication))
}

/// Trials and their aggregate for one procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOutcome {
    pub summary: StudySummary,
    pub trials: Vec<TrialMetrics>,
}

/// Runs `replications` end-to-end replications of one procedure.
pub fn run_study(
    scenario: &StudyScenario,
    method: &MethodConfig,
    replications: usize,
) -> Result<StudyOutcome> {
    let mut outcomes = run_study_multi(scenario, std::slice::from_ref(method), replications)?;
    Ok(outcomes.pop().expect("one method in, one outcome out"))
}

/// Runs several procedures over the same simulated data: each replication's
/// matrix is generated once and scored by every method. Replications run
/// in parallel; outputs are identical to sequential execution.
pub fn run_study_multi(
    scenario: &StudyScenario,
    methods: &[MethodConfig],
    replications: usize,
) -> Result<Vec<StudyOutcome>> {
    if replications == 0 {
        return Err(Error::InvalidArgument(
            "at least one replication is required".into(),
        ));
    }
    if methods.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one method is required".into(),
        ));
    }
    scenario.validate()?;
    for method in methods {
        method.validate()?;
    }
    let prepared = Prepared::new(scenario)?;
    let per_rep: Vec<Vec<TrialMetrics>> = (0..replications)
        .into_par_iter()
        .map(|r| -> Result<Vec<TrialMetrics>> {
            let matrix = prepared.matrix(scenario, r as u64);
            let field = pc_field(&matrix);
            methods
                .iter()
                .map(|method| {
                    let outcome = superimpose_with_field(&matrix, &field, method)?;
                    TrialMetrics::from_outcome(&outcome, &prepared.truth)
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    methods
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let trials: Vec<TrialMetrics> = per_rep.iter().map(|row| row[i].clone()).collect();
            let summary = aggregate(&trials)?;
            Ok(StudyOutcome { summary, trials })
        })
        .collect()
}
