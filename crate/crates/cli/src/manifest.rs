use std::path::Path;

use lowrank_isomap::PipelineConfig;
use serde::{Deserialize, Serialize};

use crate::jobs::Job;
use crate::Failure;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Record of one command run, sufficient to rerun it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub job: Job,
    pub config: Option<PipelineConfig>,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub input_checksum: String,
    pub started: String,
    pub finished: String,
    #[serde(default)]
    pub replayed_from: Option<String>,
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: not a run manifest: {e}", path.display())))
    }

    pub fn write(&self, dir: &Path) -> Result<(), Failure> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| Failure::Runtime(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
    }
}
