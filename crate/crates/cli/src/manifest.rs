//! Run manifests: everything needed to reproduce an output bit-exactly.
//!
//! The manifest embedded in result files carries no timestamp, so
//! re-running the same configuration yields byte-identical output; the
//! timestamped copy lives in the sidecar `manifest.json`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use pcmap_core::procedures::MethodConfig;
use pcmap_core::simulate::StudyScenario;

use crate::error::Result;
use crate::io::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Convention for voxel ids and coordinates in all output files.
    pub indexing: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<StudyScenario>,
    /// SHA-256 of the input matrix file, for analyze runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_digest: Option<String>,
    /// SHA-256 of each input aggregate, for report runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_digests: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodConfig>,
    /// "all" or a single granularity value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replications: Option<usize>,
    /// 1-based replication index for single-map simulation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replication: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_format: Option<String>,
    /// Unix seconds; present only in sidecar manifests.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub created_unix: Option<u64>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            tool: "pcmap".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            indexing: "1-based".into(),
            scenario: None,
            input_digests: None,
            input_digest: None,
            method_id: None,
            method: None,
            gamma: None,
            seed: None,
            replications: None,
            replication: None,
            output_format: None,
            created_unix: None,
        }
    }

    pub fn with_method(mut self, method: &MethodConfig) -> Self {
        self.method_id = Some(method.id().into());
        self.method = Some(method.clone());
        self
    }

    pub fn with_scenario(mut self, scenario: &StudyScenario) -> Self {
        self.seed = Some(scenario.seed());
        self.scenario = Some(scenario.clone());
        self
    }

    /// A copy stamped with the current time, for sidecar files.
    pub fn stamped(&self) -> Self {
        let mut stamped = self.clone();
        stamped.created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
        stamped
    }

    /// Writes the timestamped sidecar manifest.
    pub fn write_sidecar(&self, path: &Path) -> Result<()> {
        let stamped = self.stamped();
        write_atomic(path, |w| {
            let text =
                serde_json::to_string_pretty(&stamped).expect("manifest serialization cannot fail");
            writeln!(w, "{text}").map_err(crate::error::io_err(path))?;
            Ok(())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_manifest_has_no_timestamp() {
        let manifest = RunManifest::new("bench").with_method(&MethodConfig::bh_selective(0.05));
        let json = serde_json::to_string(&manifest).unwrap();
        assert!(!json.contains("created_unix"));
        assert!(json.contains("\"method_id\":\"bh-selective\""));
        let stamped = manifest.stamped();
        assert!(stamped.created_unix.is_some());
    }

    #[test]
    fn manifest_round_trips() {
        let manifest =
            RunManifest::new("analyze").with_method(&MethodConfig::cofilter_fixed(0.05, 0.3));
        let json = serde_json::to_string(&manifest).unwrap();
        let back: RunManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(manifest, back);
    }
}
