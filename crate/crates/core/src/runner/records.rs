use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{RunConfig, RunError};
use crate::datasets::{DatasetName, PairSet};
use crate::metrics::EvalReport;
use crate::postprocess::{MappingOutcome, RawPair};
use crate::prompting::Method;

pub const RECORD_SCHEMA: u32 = 1;
pub const MANIFEST_SCHEMA: u32 = 1;

/// One line of a results file. Contains no timing or backend information,
/// so replaying a run from cache reproduces the file byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub schema: u32,
    pub index: usize,
    pub sample_id: String,
    pub prompt_hash: String,
    pub template_version: String,
    pub exemplar_file_id: Option<String>,
    pub raw_output: Option<String>,
    pub extracted: Vec<RawPair>,
    pub outcomes: Vec<MappingOutcome>,
    pub prediction: PairSet,
    pub format_failure: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub samples: usize,
    pub cache_hits: usize,
    pub format_failures: usize,
    pub dropped_below_cutoff: usize,
    pub dropped_bad_polarity: usize,
    pub transport_errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: u32,
    pub config: RunConfig,
    pub template_version: String,
    pub seed: u64,
    pub started_at_unix_ms: u128,
    pub finished_at_unix_ms: u128,
    pub counts: Counts,
    pub dropped_conflicts: usize,
    pub review_text_handling: String,
}

/// The score of one results file, tagged with its factor levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRun {
    pub dataset: DatasetName,
    pub method: Method,
    pub model: String,
    pub report: EvalReport,
}

pub fn read_records(path: &Path) -> Result<Vec<PredictionRecord>, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::Data {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| RunError::Data {
                path: path.display().to_string(),
                message: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}
