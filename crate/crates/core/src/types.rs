//! Domain types shared by every procedure: the p-value matrix, granularities,
//! combined p-value fields, rejection sets, per-voxel lower bounds, and
//! ground-truth activation counts.
//!
//! Voxel and subject indices are 0-based in memory; anything user-facing
//! (file output, error messages) is 1-based.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An m x s matrix of per-voxel, per-subject p-values.
///
/// Row j holds the p-values of voxel j across the s subject maps. All
/// entries are finite and in [0, 1]; dimensions are fixed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueMatrix {
    voxels: usize,
    subjects: usize,
    values: Vec<f64>,
}

impl PValueMatrix {
    /// Validates and builds a matrix from row vectors (one per voxel).
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::EmptyMatrix);
        }
        let subjects = rows[0].len();
        let voxels = rows.len();
        let mut values = Vec::with_capacity(voxels * subjects);
        for (j, row) in rows.iter().enumerate() {
            if row.len() != subjects {
                return Err(Error::RaggedRow {
                    row: j + 1,
                    expected: subjects,
                    got: row.len(),
                });
            }
            for (i, &v) in row.iter().enumerate() {
                if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidEntry {
                        row: j + 1,
                        col: i + 1,
                        value: v,
                    });
                }
                values.push(v);
            }
        }
        Ok(Self {
            voxels,
            subjects,
            values,
        })
    }

    /// Builds a matrix from a row-major flat buffer of `voxels * subjects` values.
    pub fn from_flat(voxels: usize, subjects: usize, values: Vec<f64>) -> Result<Self> {
        if voxels == 0 || subjects == 0 {
            return Err(Error::EmptyMatrix);
        }
        if values.len() != voxels * subjects {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: voxels * subjects,
            });
        }
        for (k, &v) in values.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidEntry {
                    row: k / subjects + 1,
                    col: k % subjects + 1,
                    value: v,
                });
            }
        }
        Ok(Self {
            voxels,
            subjects,
            values,
        })
    }

    pub fn voxel_count(&self) -> usize {
        self.voxels
    }

    pub fn subject_count(&self) -> usize {
        self.subjects
    }

    /// The p-values of voxel `j` (0-based) across all subjects.
    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.subjects..(j + 1) * self.subjects]
    }

    /// Row-major flat view of all entries.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A replication granularity: the number of subjects a partial-conjunction
/// claim refers to. Always in [1, s].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Granularity(usize);

impl Granularity {
    pub fn new(gamma: usize, subjects: usize) -> Result<Self> {
        if gamma == 0 || gamma > subjects {
            return Err(Error::InvalidGamma { gamma, subjects });
        }
        Ok(Self(gamma))
    }

    /// The granularity value, 1-based.
    pub fn get(self) -> usize {
        self.0
    }
}

/// Combined partial-conjunction p-values for every voxel and granularity.
///
/// Entry (j, gamma) is the combined p-value for the claim that voxel j is
/// active in at least gamma subjects.
#[derive(Debug, Clone, PartialEq)]
pub struct PcField {
    voxels: usize,
    subjects: usize,
    values: Vec<f64>,
}

impl PcField {
    pub(crate) fn from_parts(voxels: usize, subjects: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), voxels * subjects);
        Self {
            voxels,
            subjects,
            values,
        }
    }

    pub fn voxel_count(&self) -> usize {
        self.voxels
    }

    pub fn subject_count(&self) -> usize {
        self.subjects
    }

    pub fn value(&self, voxel: usize, gamma: Granularity) -> f64 {
        self.values[voxel * self.subjects + (gamma.get() - 1)]
    }

    /// All granularities for one voxel, indexed by gamma - 1.
    pub fn row(&self, voxel: usize) -> &[f64] {
        &self.values[voxel * self.subjects..(voxel + 1) * self.subjects]
    }

    /// The length-m column of combined p-values at a single granularity.
    pub fn column(&self, gamma: Granularity) -> Vec<f64> {
        let g = gamma.get() - 1;
        (0..self.voxels)
            .map(|j| self.values[j * self.subjects + g])
            .collect()
    }
}

/// Voxels rejected at one granularity by one procedure.
///
/// Indices are 0-based and sorted ascending. `tau_used` records the
/// selection threshold for CoFilter runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectionSet {
    gamma: Granularity,
    indices: Vec<usize>,
    tau_used: Option<f64>,
}

impl RejectionSet {
    pub(crate) fn new(gamma: Granularity, mut indices: Vec<usize>, tau_used: Option<f64>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        debug_assert!(tau_used.is_none_or(|t| t > 0.0 && t <= 1.0));
        Self {
            gamma,
            indices,
            tau_used,
        }
    }

    pub fn gamma(&self) -> Granularity {
        self.gamma
    }

    /// Rejected voxel indices, 0-based, sorted ascending.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn tau_used(&self) -> Option<f64> {
        self.tau_used
    }

    pub fn contains(&self, voxel: usize) -> bool {
        self.indices.binary_search(&voxel).is_ok()
    }
}

/// Per-voxel lower bounds on the number of subjects showing activation,
/// superimposed over all granularities. Zero means no claim.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBounds {
    values: Vec<usize>,
    subjects: usize,
}

impl LowerBounds {
    pub fn new(values: Vec<usize>, subjects: usize) -> Result<Self> {
        for (j, &d) in values.iter().enumerate() {
            if d > subjects {
                return Err(Error::BoundOutOfRange {
                    voxel: j + 1,
                    value: d,
                    subjects,
                });
            }
        }
        Ok(Self { values, subjects })
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn subject_count(&self) -> usize {
        self.subjects
    }
}

/// Ground truth: for each voxel, the number of subjects in which it is
/// genuinely active.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthVector {
    counts: Vec<usize>,
    subjects: usize,
}

impl TruthVector {
    pub fn new(counts: Vec<usize>, subjects: usize) -> Result<Self> {
        for (j, &d) in counts.iter().enumerate() {
            if d > subjects {
                return Err(Error::BoundOutOfRange {
                    voxel: j + 1,
                    value: d,
                    subjects,
                });
            }
        }
        Ok(Self { counts, subjects })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn subject_count(&self) -> usize {
        self.subjects
    }
}
