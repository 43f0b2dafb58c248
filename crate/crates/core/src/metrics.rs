//! Micro-F1 over sets of `(category, polarity)` pairs, and aggregation of
//! per-run scores into method × model tables.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::{DatasetName, PairSet};
use crate::prompting::Method;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub id: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub micro_f1: f64,
    pub per_sample: Vec<SampleCounts>,
    pub n_format_failures: usize,
    /// Gold samples with no prediction record, scored as empty predictions.
    #[serde(default)]
    pub n_missing: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("{preds} predictions for {golds} gold sets")]
    LengthMismatch { preds: usize, golds: usize },
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalReport {
    /// Builds a report from pooled counts; derived rates use 0 for empty
    /// denominators.
    pub fn from_counts(per_sample: Vec<SampleCounts>) -> Self {
        let tp = per_sample.iter().map(|s| s.tp).sum();
        let fp = per_sample.iter().map(|s| s.fp).sum();
        let fn_ = per_sample.iter().map(|s| s.fn_).sum();
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let micro_f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            tp,
            fp,
            fn_,
            precision,
            recall,
            micro_f1,
            per_sample,
            n_format_failures: 0,
            n_missing: 0,
        }
    }
}

pub fn sample_counts(id: &str, pred: &PairSet, gold: &PairSet) -> SampleCounts {
    let tp = pred.intersection_len(gold);
    SampleCounts {
        id: id.to_string(),
        tp,
        fp: pred.len() - tp,
        fn_: gold.len() - tp,
    }
}

/// Index-aligned scoring; sample ids are the positions.
pub fn score(preds: &[PairSet], golds: &[PairSet]) -> Result<EvalReport, MetricsError> {
    if preds.len() != golds.len() {
        return Err(MetricsError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    Ok(score_labeled(
        preds
            .iter()
            .zip(golds)
            .enumerate()
            .map(|(i, (p, g))| (i.to_string(), p, g)),
    ))
}

pub fn score_labeled<'a, I>(items: I) -> EvalReport
where
    I: IntoIterator<Item = (String, &'a PairSet, &'a PairSet)>,
{
    EvalReport::from_counts(
        items
            .into_iter()
            .map(|(id, p, g)| sample_counts(&id, p, g))
            .collect(),
    )
}

/// Rounds half-up to two decimals. The tiny offset absorbs binary
/// representation error on exact halves such as 35.565.
pub fn round2(x: f64) -> f64 {
    let scaled = x * 100.0;
    let r = (scaled.abs() + 0.5 + 1e-9).floor();
    r.copysign(scaled) / 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRow {
    pub method: Method,
    pub model: String,
    /// Mean over datasets, percent, rounded to two decimals.
    pub mean: f64,
    /// Sample standard deviation across datasets (n - 1), percent.
    pub std: f64,
    pub n_datasets: usize,
}

/// Per-cell micro-F1 (percent) and the per-(method, model) means across
/// datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateTable {
    pub models: Vec<String>,
    pub cells: Vec<ScoreCell>,
    pub means: Vec<MeanRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCell {
    pub dataset: DatasetName,
    pub method: Method,
    pub model: String,
    pub score: f64,
}

/// Aggregates percent micro-F1 scores keyed by `(dataset, method, model)`.
/// Model column order is first-appearance order in `scores`.
pub fn aggregate(scores: &[ScoreCell]) -> AggregateTable {
    let mut models: Vec<String> = Vec::new();
    for c in scores {
        if !models.contains(&c.model) {
            models.push(c.model.clone());
        }
    }
    let mut grouped: BTreeMap<(Method, usize), Vec<f64>> = BTreeMap::new();
    for c in scores {
        let m = models
            .iter()
            .position(|m| *m == c.model)
            .expect("collected above");
        grouped.entry((c.method, m)).or_default().push(c.score);
    }
    let means = grouped
        .into_iter()
        .map(|((method, m), values)| {
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            MeanRow {
                method,
                model: models[m].clone(),
                mean: round2(mean),
                std: round2(std),
                n_datasets: n,
            }
        })
        .collect();
    let mut cells = scores.to_vec();
    cells.sort_by(|a, b| {
        (
            a.dataset,
            a.method,
            models.iter().position(|m| *m == a.model),
        )
            .cmp(&(
                b.dataset,
                b.method,
                models.iter().position(|m| *m == b.model),
            ))
    });
    AggregateTable {
        models,
        cells,
        means,
    }
}

fn method_label(m: Method) -> &'static str {
    match m {
        Method::Baseline => "Baseline CoT",
        Method::Umr => "CoT with UMR",
    }
}

impl AggregateTable {
    pub fn mean(&self, method: Method, model: &str) -> Option<&MeanRow> {
        self.means
            .iter()
            .find(|r| r.method == method && r.model == model)
    }

    fn cell(&self, dataset: DatasetName, method: Method, model: &str) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.dataset == dataset && c.method == method && c.model == model)
            .map(|c| c.score)
    }

    /// Method rows, model columns, `mean ± std` cells.
    pub fn render_means(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<14}", "Method");
        for m in &self.models {
            let _ = write!(out, "  {m:>16}");
        }
        out.push('\n');
        for method in Method::ALL {
            if !self.means.iter().any(|r| r.method == method) {
                continue;
            }
            let _ = write!(out, "{:<14}", method_label(method));
            for m in &self.models {
                let cell = self
                    .mean(method, m)
                    .map(|r| format!("{:.2} ± {:.2}", r.mean, r.std))
                    .unwrap_or_else(|| "-".into());
                let _ = write!(out, "  {cell:>16}");
            }
            out.push('\n');
        }
        out
    }

    /// Dataset × method rows, model columns.
    pub fn render_cells(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<14}{:<14}", "Dataset", "Method");
        for m in &self.models {
            let _ = write!(out, "  {m:>16}");
        }
        out.push('\n');
        for dataset in DatasetName::ALL {
            for method in Method::ALL {
                if !self
                    .cells
                    .iter()
                    .any(|c| c.dataset == dataset && c.method == method)
                {
                    continue;
                }
                let _ = write!(out, "{:<14}{:<14}", dataset.as_str(), method_label(method));
                for m in &self.models {
                    let cell = self
                        .cell(dataset, method, m)
                        .map(|s| format!("{s:.2}"))
                        .unwrap_or_else(|| "-".into());
                    let _ = write!(out, "  {cell:>16}");
                }
                out.push('\n');
            }
        }
        out
    }
}
