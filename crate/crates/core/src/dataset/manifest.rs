//! Synthesis provenance: which boxes of which source image were replaced,
//! under which prompt and seeds, by which generator.
//!
//! Stored as JSON lines, one entry per generated image, so partial files
//! remain inspectable.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetError;

/// How the generation prompt for a replaced box was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesisStrategy {
    /// One of the fixed anomaly-describing text templates, rendered with the
    /// class name.
    Generic,
    /// Class-name embedding plus isotropic Gaussian noise scaled by sigma.
    Distance,
}

impl std::fmt::Display for SynthesisStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SynthesisStrategy::Generic => write!(f, "generic"),
            SynthesisStrategy::Distance => write!(f, "distance"),
        }
    }
}

/// Per-entry prompt provenance, one element per replaced box in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptRecord {
    Generic { prompts: Vec<String> },
    Distance { sigma: f64, noise_seeds: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub source_image_id: u64,
    pub output_image_id: u64,
    /// Indices into the source image's annotation list, in inpainting order.
    pub replaced_boxes: Vec<usize>,
    pub strategy: SynthesisStrategy,
    pub prompt_record: PromptRecord,
    pub generator_id: String,
    /// Seed from which all per-box randomness of this image derives.
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthesisManifest {
    pub entries: Vec<ManifestEntry>,
}

impl SynthesisManifest {
    /// Every output image id must appear in exactly one entry.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut seen = std::collections::HashSet::new();
        for entry in &self.entries {
            if !seen.insert(entry.output_image_id) {
                return Err(DatasetError::Validation(format!(
                    "output image id {} appears in more than one manifest entry",
                    entry.output_image_id
                )));
            }
        }
        Ok(())
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<(), DatasetError> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| DatasetError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        let mut file = fs::File::create(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        for entry in &self.entries {
            let line = serde_json::to_string(entry).expect("manifest entries always serialize");
            writeln!(file, "{line}").map_err(|source| DatasetError::Io {
                path: path.to_path_buf(),
                source,
            })?;
        }
        Ok(())
    }

    pub fn load_jsonl(path: &Path) -> Result<Self, DatasetError> {
        let file = fs::File::open(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut entries = Vec::new();
        for (number, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| DatasetError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry =
                serde_json::from_str(&line).map_err(|err| DatasetError::Parse {
                    path: path.to_path_buf(),
                    line: number + 1,
                    column: err.column(),
                    message: err.to_string(),
                })?;
            entries.push(entry);
        }
        let manifest = Self { entries };
        manifest.validate()?;
        Ok(manifest)
    }
}
