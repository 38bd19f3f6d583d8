use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{CliError, MethodChoice};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunKey {
    pub scenario: String,
    pub seed: u64,
}

impl RunKey {
    pub fn dir(&self, out: &Path) -> PathBuf {
        out.join(&self.scenario).join(format!("seed_{}", self.seed))
    }
}

/// What `simulate` produced, so later commands find the same runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_path: Option<PathBuf>,
    pub config_hash: String,
    pub output_dir: PathBuf,
    pub method: MethodChoice,
    pub scenarios: Vec<String>,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunKey>,
}

impl RunManifest {
    pub fn write(&self, out: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Runtime(e.to_string()))?;
        pmfuse::io::write_text(&out.join(MANIFEST_FILE), &(text + "\n"))?;
        Ok(())
    }

    pub fn read(out: &Path) -> Result<Option<Self>, CliError> {
        let path = out.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
    }
}
