//! End-to-end experiment orchestration.
//!
//! A run loads one dataset split, builds one prompt per sample, sends it
//! through the cached [`LlmClient`], and post-processes each answer into a
//! [`PredictionRecord`]. Records are written to a JSONL file in sample
//! order regardless of completion order; the manifest is written last.

mod config;
mod records;

use std::collections::{BTreeMap, HashMap};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::{SystemTime, UNIX_EPOCH};

use thiserror::Error;

pub use config::{BackendChoice, RunConfig};
pub use records::{
    read_records, Counts, PredictionRecord, RunManifest, ScoredRun, MANIFEST_SCHEMA, RECORD_SCHEMA,
};

use crate::datasets::{self, DatasetError, DatasetSplit, LoadOptions, PairSet};
use crate::llm::{ChatBackend, ChatRequest, DecodeParams, LlmClient, ReplayBackend, ResponseCache};
use crate::metrics::{self, EvalReport, ScoreCell};
use crate::postprocess::{canonicalize, extract_pair_list, DropReason};
use crate::prompting::{
    build_baseline_prompt, build_umr_prompt, Method, PromptBundle, PromptError,
};
use crate::stats::{AnovaError, FactorialDesign};
use crate::umr::{format_exemplars, ExemplarError, ExemplarPool};

/// Runs with more than this share of failed backend calls exit with code 3.
pub const MAX_TRANSPORT_FAILURE_RATE: f64 = 0.10;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Exemplar(#[from] ExemplarError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("{path}: {message}")]
    Data { path: String, message: String },
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("{failed} of {total} samples failed at the backend")]
    ExcessiveTransportFailures { failed: usize, total: usize },
}

impl RunError {
    /// 1 usage/config, 2 data, 3 excessive transport failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::ExcessiveTransportFailures { .. } => 3,
            _ => 2,
        }
    }
}

/// A loaded, validated run: dataset, exemplar pool and the chat client.
pub struct Experiment {
    pub config: RunConfig,
    pub split: DatasetSplit,
    pool: Option<ExemplarPool>,
}

pub fn load_split(config: &RunConfig) -> Result<DatasetSplit, RunError> {
    let inventory = config
        .inventory
        .as_deref()
        .map(datasets::read_inventory_file)
        .transpose()?;
    let options = LoadOptions {
        drop_conflict: config.drop_conflict,
        inventory,
        ..Default::default()
    };
    let mut split = datasets::load_dataset(config.dataset, &config.dataset_path, &options)?;
    if let Some(limit) = config.limit {
        split.samples.truncate(limit);
    }
    Ok(split)
}

impl Experiment {
    pub fn prepare(config: RunConfig) -> Result<Self, RunError> {
        config.validate()?;
        let split = load_split(&config)?;
        let pool = match config.method {
            Method::Umr => Some(ExemplarPool::from_files(&config.exemplars)?),
            Method::Baseline => None,
        };
        Ok(Self {
            config,
            split,
            pool,
        })
    }

    /// Prompt for sample `index`. The exemplar draw uses the sample's
    /// position, so it does not depend on scheduling.
    pub fn prompt(&self, index: usize) -> Result<PromptBundle, RunError> {
        let sample = &self.split.samples[index];
        let categories = self.split.category_inventory();
        Ok(match (&self.pool, self.config.method) {
            (Some(pool), Method::Umr) => {
                let draw = pool.draw(self.config.seed, index as u64);
                let mut bundle = build_umr_prompt(
                    &format_exemplars(&draw.document),
                    &sample.text,
                    self.config.dataset.domain(),
                    categories,
                )?;
                bundle.exemplar_file_id = Some(draw.file_id);
                bundle
            }
            _ => build_baseline_prompt(categories, &sample.text)?,
        })
    }

    pub fn request(&self, bundle: &PromptBundle) -> ChatRequest {
        ChatRequest {
            model_id: self.config.model.clone(),
            system: bundle.system.clone(),
            user: bundle.user.clone(),
            params: DecodeParams {
                max_output_tokens: self.config.max_output_tokens,
                ..DecodeParams::greedy()
            },
        }
    }

    pub fn requests(&self) -> Result<Vec<ChatRequest>, RunError> {
        (0..self.split.len())
            .map(|i| self.prompt(i).map(|b| self.request(&b)))
            .collect()
    }

    pub fn client(&self) -> Result<LlmClient, RunError> {
        let backend: Box<dyn ChatBackend> = match self.config.backend {
            BackendChoice::Replay => Box::new(ReplayBackend::new(
                self.config.replay_dir.clone().expect("validated"),
            )),
            BackendChoice::Http => http_backend(&self.config)?,
        };
        Ok(LlmClient::new(backend)
            .with_cache(ResponseCache::new(&self.config.cache_dir))
            .with_concurrency(self.config.concurrency)
            .strict_greedy(self.config.strict_greedy))
    }

    fn process(&self, client: &LlmClient, index: usize) -> Result<PredictionRecord, RunError> {
        let sample = &self.split.samples[index];
        let bundle = self.prompt(index)?;
        let request = self.request(&bundle);
        let mut record = PredictionRecord {
            schema: RECORD_SCHEMA,
            index,
            sample_id: sample.id.clone(),
            prompt_hash: request.cache_key(),
            template_version: bundle.template_version.clone(),
            exemplar_file_id: bundle.exemplar_file_id.clone(),
            raw_output: None,
            extracted: Vec::new(),
            outcomes: Vec::new(),
            prediction: PairSet::new(),
            format_failure: false,
            error: None,
        };
        match client.chat(&request) {
            Ok(resp) => {
                match extract_pair_list(&resp.text) {
                    Ok(raw) => {
                        let (set, outcomes) =
                            canonicalize(&raw, self.split.category_inventory(), self.config.cutoff);
                        record.extracted = raw;
                        record.outcomes = outcomes;
                        record.prediction = set;
                    }
                    Err(_) => record.format_failure = true,
                }
                record.raw_output = Some(resp.text);
            }
            Err(e) => {
                log::warn!("sample {}: {e}", sample.id);
                record.error = Some(e.to_string());
            }
        }
        Ok(record)
    }
}

#[cfg(feature = "http")]
fn http_backend(config: &RunConfig) -> Result<Box<dyn ChatBackend>, RunError> {
    let url = config.base_url.as_deref().expect("validated");
    crate::llm::HttpBackend::from_env(url, config.api_key_env.as_deref())
        .map(|b| Box::new(b) as Box<dyn ChatBackend>)
        .map_err(|e| RunError::Config(e.to_string()))
}

#[cfg(not(feature = "http"))]
fn http_backend(_config: &RunConfig) -> Result<Box<dyn ChatBackend>, RunError> {
    Err(RunError::Config(
        "built without the `http` feature; only the replay backend is available".into(),
    ))
}

fn unix_millis() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or_default()
}

fn write_atomically(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

/// Runs the whole split and writes the results file and manifest.
pub fn run(config: RunConfig) -> Result<RunManifest, RunError> {
    let started_at = unix_millis();
    let experiment = Experiment::prepare(config)?;
    let client = experiment.client()?;
    let config = &experiment.config;
    if let Some(dir) = config.output.parent() {
        std::fs::create_dir_all(dir)?;
    }

    let total = experiment.split.len();
    let next = AtomicUsize::new(0);
    let mut counts = Counts {
        samples: total,
        ..Default::default()
    };
    let (tx, rx) = mpsc::channel::<Result<PredictionRecord, RunError>>();
    let out = std::fs::File::create(&config.output)?;
    let mut writer = BufWriter::new(out);

    std::thread::scope(|s| -> Result<(), RunError> {
        for _ in 0..client.concurrency().min(total.max(1)) {
            let tx = tx.clone();
            let (next, experiment, client) = (&next, &experiment, &client);
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= total {
                    break;
                }
                if tx.send(experiment.process(client, i)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        // Reorder so the file is in sample order whatever finishes first.
        let mut pending = BTreeMap::new();
        let mut next_out = 0;
        for result in rx {
            let record = result?;
            pending.insert(record.index, record);
            while let Some(record) = pending.remove(&next_out) {
                counts.add(&record);
                serde_json::to_writer(&mut writer, &record).map_err(std::io::Error::other)?;
                writer.write_all(b"\n")?;
                next_out += 1;
            }
            writer.flush()?;
        }
        Ok(())
    })?;
    writer.flush()?;
    counts.cache_hits = client.counters().cache_hits;

    let manifest = RunManifest {
        schema: MANIFEST_SCHEMA,
        config: config.clone(),
        template_version: config.method.template().version.to_string(),
        seed: config.seed,
        started_at_unix_ms: started_at,
        finished_at_unix_ms: unix_millis(),
        counts,
        dropped_conflicts: experiment.split.dropped_conflicts,
        review_text_handling: "full text as-is, no sentence splitting".into(),
    };
    let json = serde_json::to_vec_pretty(&manifest).map_err(std::io::Error::other)?;
    write_atomically(&config.manifest_path(), &json)?;

    let failed = manifest.counts.transport_errors;
    if total > 0 && failed as f64 / total as f64 > MAX_TRANSPORT_FAILURE_RATE {
        return Err(RunError::ExcessiveTransportFailures { failed, total });
    }
    Ok(manifest)
}

/// Joins records to gold labels by sample id. Samples without a record,
/// with a backend error, or with a format failure count as empty predictions.
pub fn score_records(records: &[PredictionRecord], split: &DatasetSplit) -> EvalReport {
    let by_id: HashMap<&str, &PredictionRecord> =
        records.iter().map(|r| (r.sample_id.as_str(), r)).collect();
    let empty = PairSet::new();
    let mut missing = 0;
    let mut report = metrics::score_labeled(split.samples.iter().map(|s| {
        let pred = match by_id.get(s.id.as_str()) {
            Some(r) => &r.prediction,
            None => {
                missing += 1;
                &empty
            }
        };
        (s.id.clone(), pred, &s.gold)
    }));
    report.n_format_failures = records.iter().filter(|r| r.format_failure).count();
    report.n_missing = missing;
    report
}

pub fn score_run(results: &Path, split: &DatasetSplit) -> Result<EvalReport, RunError> {
    let records = read_records(results)?;
    Ok(score_records(&records, split))
}

/// Percent micro-F1 cells from scored runs, for [`metrics::aggregate`].
pub fn score_cells(runs: &[ScoredRun]) -> Vec<ScoreCell> {
    runs.iter()
        .map(|r| ScoreCell {
            dataset: r.dataset,
            method: r.method,
            model: r.model.clone(),
            score: r.report.micro_f1 * 100.0,
        })
        .collect()
}

/// `method,model,dataset,score` rows (percent), header optional.
pub fn cells_from_csv(text: &str) -> Result<Vec<ScoreCell>, String> {
    let mut cells = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(format!("line {}: expected 4 columns", lineno + 1));
        }
        let Ok(score) = f[3].parse::<f64>() else {
            if lineno == 0 {
                continue;
            }
            return Err(format!("line {}: bad score `{}`", lineno + 1, f[3]));
        };
        cells.push(ScoreCell {
            method: f[0]
                .parse()
                .map_err(|e| format!("line {}: {e}", lineno + 1))?,
            model: f[1].to_string(),
            dataset: f[2]
                .parse()
                .map_err(|e| format!("line {}: {e}", lineno + 1))?,
            score,
        });
    }
    Ok(cells)
}

impl Counts {
    fn add(&mut self, record: &PredictionRecord) {
        if record.error.is_some() {
            self.transport_errors += 1;
        }
        if record.format_failure {
            self.format_failures += 1;
        }
        for o in &record.outcomes {
            match o.dropped_reason {
                Some(DropReason::BelowCutoff) => self.dropped_below_cutoff += 1,
                Some(DropReason::BadPolarity) => self.dropped_bad_polarity += 1,
                None => {}
            }
        }
    }
}

/// Method × Model × Dataset design from score cells, levels in
/// first-appearance order.
pub fn design_from_cells(cells: &[ScoreCell]) -> Result<FactorialDesign, AnovaError> {
    let records: Vec<(String, String, String, f64)> = cells
        .iter()
        .map(|c| {
            (
                c.method.as_str().to_string(),
                c.model.clone(),
                c.dataset.as_str().to_string(),
                c.score,
            )
        })
        .collect();
    FactorialDesign::from_records(["Method", "Model", "Dataset"], &records)
}
