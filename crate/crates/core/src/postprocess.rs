//! Turning free-text model output into a canonical [`PairSet`].
//!
//! Two stages: [`extract_pair_list`] finds the final Python-style list of
//! `(category, polarity)` tuples in the raw text, then [`canonicalize`] maps
//! each category onto the dataset inventory with the Ratcliff/Obershelp
//! gestalt ratio and normalizes the polarity label.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::{Pair, PairSet, Polarity};

/// Minimum similarity for a fuzzy category or polarity match.
pub const DEFAULT_CUTOFF: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPair {
    pub category_text: String,
    pub polarity_text: String,
}

impl RawPair {
    /// Trims both fields; `None` if either ends up empty.
    pub fn new(category: &str, polarity: &str) -> Option<Self> {
        let (c, p) = (category.trim(), polarity.trim());
        (!c.is_empty() && !p.is_empty()).then(|| Self {
            category_text: c.to_string(),
            polarity_text: p.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    BelowCutoff,
    BadPolarity,
}

/// What happened to one extracted pair. Exactly one of `mapped` and
/// `dropped_reason` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingOutcome {
    pub raw: RawPair,
    pub mapped: Option<Pair>,
    /// Best category similarity found, in `[0, 1]`.
    pub similarity: f64,
    pub dropped_reason: Option<DropReason>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("no list of (category, polarity) tuples found in the output")]
    NoListFound,
}

// ---------------------------------------------------------------------------
// List extraction

struct ListScanner<'a> {
    chars: &'a [char],
    at: usize,
}

impl ListScanner<'_> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.at).copied()
    }

    fn ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.at += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn ellipsis(&mut self) -> bool {
        if self.chars[self.at..].starts_with(&['.', '.', '.']) {
            self.at += 3;
            true
        } else {
            self.eat('…')
        }
    }

    fn string(&mut self) -> Option<String> {
        let quote = self.peek().filter(|c| *c == '\'' || *c == '"')?;
        self.at += 1;
        let mut out = String::new();
        loop {
            let c = self.peek()?;
            self.at += 1;
            match c {
                '\\' => {
                    out.push(self.peek()?);
                    self.at += 1;
                }
                c if c == quote => return Some(out),
                '\n' => return None,
                c => out.push(c),
            }
        }
    }

    fn tuple(&mut self) -> Option<(String, String)> {
        if !self.eat('(') {
            return None;
        }
        self.ws();
        let first = self.string()?;
        self.ws();
        if !self.eat(',') {
            return None;
        }
        self.ws();
        let second = self.string()?;
        self.ws();
        self.eat(',');
        self.ws();
        self.eat(')').then_some((first, second))
    }

    /// Parses one list starting at `self.at`, which must be on `[`.
    fn list(&mut self) -> Option<Vec<(String, String)>> {
        if !self.eat('[') {
            return None;
        }
        let mut items = Vec::new();
        loop {
            self.ws();
            if self.eat(']') {
                return Some(items);
            }
            if !items.is_empty() && self.ellipsis() {
                self.ws();
                return self.eat(']').then_some(items);
            }
            items.push(self.tuple()?);
            self.ws();
            if self.eat(',') {
                continue;
            }
            self.ws();
            return self.eat(']').then_some(items);
        }
    }
}

/// Returns the pairs of the last well-formed list of 2-tuples of quoted
/// strings in `raw_output`.
///
/// Single or double quotes, trailing commas, arbitrary whitespace and a
/// trailing `...` element are accepted. An explicit `[]` yields an empty
/// list; text with no list at all is [`ExtractError::NoListFound`]. Tuples
/// with a blank element are skipped.
pub fn extract_pair_list(raw_output: &str) -> Result<Vec<RawPair>, ExtractError> {
    let chars: Vec<char> = raw_output.chars().collect();
    let mut last = None;
    for (start, _) in chars.iter().enumerate().filter(|(_, c)| **c == '[') {
        let mut scanner = ListScanner {
            chars: &chars,
            at: start,
        };
        if let Some(items) = scanner.list() {
            last = Some(items);
        }
    }
    let items = last.ok_or(ExtractError::NoListFound)?;
    Ok(items
        .iter()
        .filter_map(|(c, p)| RawPair::new(c, p))
        .collect())
}

// ---------------------------------------------------------------------------
// Gestalt similarity

/// Longest common block of `a[alo..ahi]` and `b[blo..bhi]` as
/// `(i, j, len)`; among equally long blocks, the one starting earliest in
/// `a`, then earliest in `b`.
fn longest_match(
    a: &[char],
    b: &[char],
    (alo, ahi): (usize, usize),
    (blo, bhi): (usize, usize),
) -> (usize, usize, usize) {
    let (mut best_i, mut best_j, mut best) = (alo, blo, 0);
    // run[j + 1] = length of the common suffix ending at a[i - 1], b[j].
    let mut prev = vec![0usize; bhi - blo + 1];
    let mut cur = vec![0usize; bhi - blo + 1];
    for i in alo..ahi {
        for j in blo..bhi {
            let k = j - blo + 1;
            cur[k] = if a[i] == b[j] { prev[k - 1] + 1 } else { 0 };
            if cur[k] > best {
                best = cur[k];
                best_i = i + 1 - best;
                best_j = j + 1 - best;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    (best_i, best_j, best)
}

/// Total size of the recursive longest-matching-block decomposition.
pub fn matched_chars(a: &[char], b: &[char]) -> usize {
    let mut total = 0;
    let mut stack = vec![((0, a.len()), (0, b.len()))];
    while let Some(((alo, ahi), (blo, bhi))) = stack.pop() {
        if alo >= ahi || blo >= bhi {
            continue;
        }
        let (i, j, k) = longest_match(a, b, (alo, ahi), (blo, bhi));
        if k == 0 {
            continue;
        }
        total += k;
        stack.push(((alo, i), (blo, j)));
        stack.push(((i + k, ahi), (j + k, bhi)));
    }
    total
}

/// Ratcliff/Obershelp ratio `2·M / (|a| + |b|)` with `a` in the first role.
/// Two empty strings score 1.
pub fn gestalt_ratio(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let total = a.len() + b.len();
    if total == 0 {
        return 1.0;
    }
    2.0 * matched_chars(&a, &b) as f64 / total as f64
}

/// Symmetric gestalt similarity: the lexicographically smaller string
/// always takes the first role, which fixes the tie-breaking.
pub fn similarity(a: &str, b: &str) -> f64 {
    if a <= b {
        gestalt_ratio(a, b)
    } else {
        gestalt_ratio(b, a)
    }
}

// ---------------------------------------------------------------------------
// Mapping

/// Lowercases and collapses runs of whitespace.
pub fn fold(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Index and similarity of the closest inventory entry, ties going to the
/// earliest entry. `None` only for an empty inventory.
pub fn best_category<S: AsRef<str>>(candidate: &str, inventory: &[S]) -> Option<(usize, f64)> {
    let folded = fold(candidate);
    let mut best: Option<(usize, f64)> = None;
    for (idx, entry) in inventory.iter().enumerate() {
        let score = similarity(&folded, &fold(entry.as_ref()));
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((idx, score));
        }
    }
    best
}

/// The inventory entry closest to `candidate`, if it clears `cutoff`.
pub fn map_category<'a, S: AsRef<str>>(
    candidate: &str,
    inventory: &'a [S],
    cutoff: f64,
) -> Option<&'a str> {
    best_category(candidate, inventory)
        .filter(|(_, score)| *score >= cutoff)
        .map(|(idx, _)| inventory[idx].as_ref())
}

pub fn normalize_polarity(text: &str, cutoff: f64) -> Option<Polarity> {
    let folded = fold(text);
    if let Ok(p) = folded.parse::<Polarity>() {
        return Some(p);
    }
    let labels = Polarity::ALL.map(Polarity::as_str);
    best_category(&folded, &labels)
        .filter(|(_, score)| *score >= cutoff)
        .map(|(idx, _)| Polarity::ALL[idx])
}

/// Maps each raw pair independently and collects the survivors into a set.
pub fn canonicalize<S: AsRef<str>>(
    raw_pairs: &[RawPair],
    inventory: &[S],
    cutoff: f64,
) -> (PairSet, Vec<MappingOutcome>) {
    let mut set = PairSet::new();
    let outcomes = raw_pairs
        .iter()
        .map(|raw| {
            let (idx, score) = best_category(&raw.category_text, inventory).unwrap_or((0, 0.0));
            let mut outcome = MappingOutcome {
                raw: raw.clone(),
                mapped: None,
                similarity: score,
                dropped_reason: None,
            };
            if inventory.is_empty() || score < cutoff {
                outcome.dropped_reason = Some(DropReason::BelowCutoff);
            } else if let Some(polarity) = normalize_polarity(&raw.polarity_text, cutoff) {
                let pair = Pair::new(inventory[idx].as_ref(), polarity);
                set.insert(pair.clone());
                outcome.mapped = Some(pair);
            } else {
                outcome.dropped_reason = Some(DropReason::BadPolarity);
            }
            outcome
        })
        .collect();
    (set, outcomes)
}
