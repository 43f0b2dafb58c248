//! ACSA dataset loading: SemEval-2016 Task 5 XML (Laptop16, Restaurant16),
//! MAMS ACSA XML, and the Shoes review records.
//!
//! Every loader produces a [`DatasetSplit`] whose gold labels are sets of
//! `(category, polarity)` pairs. Sentences without opinions are kept with an
//! empty gold set.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Neutral,
    Negative,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Positive, Polarity::Neutral, Polarity::Negative];

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Neutral => "neutral",
            Polarity::Negative => "negative",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Polarity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "positive" => Ok(Polarity::Positive),
            "neutral" => Ok(Polarity::Neutral),
            "negative" => Ok(Polarity::Negative),
            _ => Err(s.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pair {
    pub category: String,
    pub polarity: Polarity,
}

impl Pair {
    pub fn new(category: impl Into<String>, polarity: Polarity) -> Self {
        Self {
            category: category.into(),
            polarity,
        }
    }
}

/// A set of `(category, polarity)` pairs; identical pairs collapse, while
/// one category with two polarities stays two pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PairSet(BTreeSet<Pair>);

impl PairSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false if the pair was already present.
    pub fn insert(&mut self, pair: Pair) -> bool {
        self.0.insert(pair)
    }

    pub fn contains(&self, pair: &Pair) -> bool {
        self.0.contains(pair)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Pair> {
        self.0.iter()
    }

    pub fn intersection_len(&self, other: &PairSet) -> usize {
        self.0.intersection(&other.0).count()
    }
}

impl FromIterator<Pair> for PairSet {
    fn from_iter<I: IntoIterator<Item = Pair>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a PairSet {
    type Item = &'a Pair;
    type IntoIter = std::collections::btree_set::Iter<'a, Pair>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub text: String,
    pub gold: PairSet,
    pub domain: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DatasetName {
    Laptop16,
    Restaurant16,
    #[serde(rename = "MAMS")]
    Mams,
    Shoes,
}

impl DatasetName {
    pub const ALL: [DatasetName; 4] = [
        DatasetName::Laptop16,
        DatasetName::Restaurant16,
        DatasetName::Mams,
        DatasetName::Shoes,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetName::Laptop16 => "Laptop16",
            DatasetName::Restaurant16 => "Restaurant16",
            DatasetName::Mams => "MAMS",
            DatasetName::Shoes => "Shoes",
        }
    }

    /// Value substituted for `<DOMAIN>` in the UMR prompt.
    pub fn domain(self) -> &'static str {
        match self {
            DatasetName::Laptop16 => "laptop",
            DatasetName::Restaurant16 | DatasetName::Mams => "restaurant",
            DatasetName::Shoes => "shoes",
        }
    }

    /// Published `(train, test, categories)` sizes of the official splits.
    pub fn official_counts(self) -> (usize, usize, usize) {
        match self {
            DatasetName::Laptop16 => (2468, 579, 67),
            DatasetName::Restaurant16 => (1954, 571, 12),
            DatasetName::Mams => (3149, 400, 8),
            DatasetName::Shoes => (906, 125, 21),
        }
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "laptop16" | "laptop" => Ok(DatasetName::Laptop16),
            "restaurant16" | "restaurant" => Ok(DatasetName::Restaurant16),
            "mams" => Ok(DatasetName::Mams),
            "shoes" => Ok(DatasetName::Shoes),
            _ => Err(format!("unknown dataset `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    #[default]
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub name: DatasetName,
    pub split: Split,
    pub samples: Vec<Sample>,
    pub categories: Vec<String>,
    /// Opinions discarded because of a `conflict` label (only with `drop_conflict`).
    pub dropped_conflicts: usize,
}

impl DatasetSplit {
    /// The ordered list substituted for `<CATEGORIES>` in both prompts.
    pub fn category_inventory(&self) -> &[String] {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub split: Split,
    /// Discard `conflict` opinions instead of failing.
    pub drop_conflict: bool,
    /// Explicit category list, in order; replaces the sorted derived inventory.
    pub inventory: Option<Vec<String>>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("sample {sample}: unknown polarity value `{value}`")]
    UnknownPolarityValue { sample: String, value: String },
    #[error("sample {sample}: `conflict` polarity (use drop_conflict to discard)")]
    ConflictPolarity { sample: String },
    #[error("sample {sample}: opinion without a category attribute")]
    MissingCategoryAttribute { sample: String },
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("sample {sample}: category `{category}` is not in the inventory")]
    UnknownCategory { sample: String, category: String },
    #[error("sample {sample}: empty text")]
    EmptyText { sample: String },
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
}

fn read(path: &Path) -> Result<String, DatasetError> {
    std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads any of the four datasets by name.
pub fn load_dataset(
    name: DatasetName,
    path: &Path,
    options: &LoadOptions,
) -> Result<DatasetSplit, DatasetError> {
    match name {
        DatasetName::Laptop16 | DatasetName::Restaurant16 => load_semeval_xml(path, name, options),
        DatasetName::Mams => load_mams(path, options),
        DatasetName::Shoes => load_shoes(path, options),
    }
}

/// One category per line; blank lines and `#` comments ignored.
pub fn read_inventory_file(path: &Path) -> Result<Vec<String>, DatasetError> {
    Ok(parse_inventory(&read(path)?))
}

pub fn parse_inventory(text: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .filter(|l| seen.insert(l.to_string()))
        .map(String::from)
        .collect()
}

/// Raw `(category, polarity)` strings for one sample, before validation.
struct RawSample {
    id: String,
    text: String,
    opinions: Vec<(Option<String>, String)>,
}

fn build_split(
    name: DatasetName,
    raw: Vec<RawSample>,
    options: &LoadOptions,
) -> Result<DatasetSplit, DatasetError> {
    let mut samples = Vec::with_capacity(raw.len());
    let mut ids = HashSet::new();
    let mut dropped = 0;
    for r in raw {
        if !ids.insert(r.id.clone()) {
            return Err(DatasetError::DuplicateId(r.id));
        }
        if r.text.trim().is_empty() {
            return Err(DatasetError::EmptyText { sample: r.id });
        }
        let mut gold = PairSet::new();
        for (category, polarity) in r.opinions {
            let category = category
                .map(|c| c.trim().to_string())
                .filter(|c| !c.is_empty())
                .ok_or_else(|| DatasetError::MissingCategoryAttribute {
                    sample: r.id.clone(),
                })?;
            let polarity = match polarity.parse::<Polarity>() {
                Ok(p) => p,
                Err(value) if value.trim().eq_ignore_ascii_case("conflict") => {
                    if options.drop_conflict {
                        dropped += 1;
                        continue;
                    }
                    return Err(DatasetError::ConflictPolarity { sample: r.id });
                }
                Err(value) => {
                    return Err(DatasetError::UnknownPolarityValue {
                        sample: r.id,
                        value,
                    })
                }
            };
            gold.insert(Pair { category, polarity });
        }
        samples.push(Sample {
            id: r.id,
            text: r.text,
            gold,
            domain: name.domain().to_string(),
        });
    }
    if dropped > 0 {
        log::info!("{name}: dropped {dropped} conflict opinions");
    }

    let categories = match &options.inventory {
        Some(list) => {
            let known: HashSet<&str> = list.iter().map(String::as_str).collect();
            for s in &samples {
                if let Some(p) = s.gold.iter().find(|p| !known.contains(p.category.as_str())) {
                    return Err(DatasetError::UnknownCategory {
                        sample: s.id.clone(),
                        category: p.category.clone(),
                    });
                }
            }
            list.clone()
        }
        None => samples
            .iter()
            .flat_map(|s| s.gold.iter().map(|p| p.category.clone()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };

    Ok(DatasetSplit {
        name,
        split: options.split,
        samples,
        categories,
        dropped_conflicts: dropped,
    })
}

fn element_text(node: roxmltree::Node<'_, '_>, tag: &str) -> Option<String> {
    node.children()
        .find(|c| c.has_tag_name(tag))
        .map(|t| t.text().unwrap_or_default().to_string())
}

/// SemEval-2016 Task 5 sentence-level XML: `sentence` elements with a
/// `text` child and `Opinion` elements carrying `category` and `polarity`.
pub fn load_semeval_xml(
    path: &Path,
    name: DatasetName,
    options: &LoadOptions,
) -> Result<DatasetSplit, DatasetError> {
    parse_semeval_xml(&read(path)?, name, options)
}

pub fn parse_semeval_xml(
    xml: &str,
    name: DatasetName,
    options: &LoadOptions,
) -> Result<DatasetSplit, DatasetError> {
    let doc =
        roxmltree::Document::parse(xml).map_err(|e| DatasetError::MalformedXml(e.to_string()))?;
    let raw = doc
        .descendants()
        .filter(|n| n.has_tag_name("sentence"))
        .enumerate()
        .map(|(i, s)| RawSample {
            id: s
                .attribute("id")
                .map(String::from)
                .unwrap_or_else(|| format!("{}-{i}", name.as_str().to_lowercase())),
            text: element_text(s, "text").unwrap_or_default(),
            opinions: s
                .descendants()
                .filter(|o| o.has_tag_name("Opinion"))
                .map(|o| {
                    (
                        o.attribute("category").map(String::from),
                        o.attribute("polarity").unwrap_or_default().to_string(),
                    )
                })
                .collect(),
        })
        .collect();
    build_split(name, raw, options)
}

/// MAMS ACSA XML: `sentence` elements with `aspectCategory` children.
pub fn load_mams(path: &Path, options: &LoadOptions) -> Result<DatasetSplit, DatasetError> {
    parse_mams_xml(&read(path)?, options)
}

pub fn parse_mams_xml(xml: &str, options: &LoadOptions) -> Result<DatasetSplit, DatasetError> {
    let doc =
        roxmltree::Document::parse(xml).map_err(|e| DatasetError::MalformedXml(e.to_string()))?;
    let raw = doc
        .descendants()
        .filter(|n| n.has_tag_name("sentence"))
        .enumerate()
        .map(|(i, s)| RawSample {
            id: s
                .attribute("id")
                .map(String::from)
                .unwrap_or_else(|| format!("mams-{i}")),
            text: element_text(s, "text").unwrap_or_default(),
            opinions: s
                .descendants()
                .filter(|o| o.has_tag_name("aspectCategory"))
                .map(|o| {
                    (
                        o.attribute("category").map(String::from),
                        o.attribute("polarity").unwrap_or_default().to_string(),
                    )
                })
                .collect(),
        })
        .collect();
    build_split(DatasetName::Mams, raw, options)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ShoesLabel {
    Object { category: String, polarity: String },
    Tuple(String, String),
}

#[derive(Deserialize)]
struct ShoesRecord {
    id: Option<serde_json::Value>,
    text: String,
    #[serde(default, alias = "pairs")]
    labels: Vec<ShoesLabel>,
}

/// Shoes review records, one review per line. The format is detected from
/// the first non-blank byte: `{` means JSON lines
/// (`{"id", "text", "labels": [{"category", "polarity"}]}`), anything else
/// means tab-separated `id, text, (category, polarity)*`.
pub fn load_shoes(path: &Path, options: &LoadOptions) -> Result<DatasetSplit, DatasetError> {
    parse_shoes(&read(path)?, options)
}

pub fn parse_shoes(text: &str, options: &LoadOptions) -> Result<DatasetSplit, DatasetError> {
    let jsonl = text.trim_start().starts_with('{');
    let mut raw = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fallback_id = format!("shoes-{}", raw.len());
        if jsonl {
            let rec: ShoesRecord =
                serde_json::from_str(line).map_err(|e| DatasetError::MalformedRecord {
                    line: line_no,
                    reason: e.to_string(),
                })?;
            let id = match rec.id {
                Some(serde_json::Value::String(s)) => s,
                Some(serde_json::Value::Number(n)) => n.to_string(),
                None => fallback_id,
                Some(other) => {
                    return Err(DatasetError::MalformedRecord {
                        line: line_no,
                        reason: format!("id must be a string or number, got {other}"),
                    })
                }
            };
            let opinions = rec
                .labels
                .into_iter()
                .map(|l| match l {
                    ShoesLabel::Object { category, polarity }
                    | ShoesLabel::Tuple(category, polarity) => (Some(category), polarity),
                })
                .collect();
            raw.push(RawSample {
                id,
                text: rec.text,
                opinions,
            });
        } else {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 2 || fields.len() % 2 != 0 {
                return Err(DatasetError::MalformedRecord {
                    line: line_no,
                    reason: format!(
                        "expected id, text and category/polarity column pairs, got {} columns",
                        fields.len()
                    ),
                });
            }
            let id = if fields[0].trim().is_empty() {
                fallback_id
            } else {
                fields[0].trim().to_string()
            };
            let opinions = fields[2..]
                .chunks(2)
                .map(|c| (Some(c[0].to_string()), c[1].to_string()))
                .collect();
            raw.push(RawSample {
                id,
                text: fields[1].to_string(),
                opinions,
            });
        }
    }
    build_split(DatasetName::Shoes, raw, options)
}
