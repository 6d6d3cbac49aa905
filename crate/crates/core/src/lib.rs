//! Partial-conjunction multiple hypothesis testing over voxel x subject
//! p-value matrices.
//!
//! Given one p-value map per subject over a common set of voxels, this
//! crate combines each voxel's p-values into partial-conjunction p-values
//! (is the voxel active in at least gamma subjects?), tests them with FDR
//! control under several procedures, and superimposes the granularities
//! into a per-voxel lower bound on the number of active subjects. A seeded
//! Monte Carlo harness evaluates overall FDR and power on synthetic data.

pub mod combine;
pub mod error;
pub mod metrics;
pub mod numerics;
pub mod procedures;
pub mod simulate;
pub mod types;

pub use error::{Error, Result};
pub use types::{Granularity, LowerBounds, PValueMatrix, PcField, RejectionSet, TruthVector};
