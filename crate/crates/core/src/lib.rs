//! Zero-shot aspect-category sentiment analysis (ACSA) harness.
//!
//! The crate covers the full experiment loop: UMR graph handling for prompt
//! exemplars, dataset loading, prompt construction, a cached chat-completion
//! client, post-processing of free-text model output into canonical
//! `(category, polarity)` sets, micro-F1 scoring and a three-way factorial
//! ANOVA over per-cell scores.

pub mod datasets;
pub mod llm;
pub mod metrics;
pub mod postprocess;
pub mod prompting;
pub mod runner;
pub mod stats;
pub mod umr;

pub use datasets::{DatasetName, DatasetSplit, Pair, PairSet, Polarity, Sample};
pub use metrics::EvalReport;
pub use stats::{AnovaTable, FactorialDesign};
pub use umr::{UmrDocument, UmrGraph};
