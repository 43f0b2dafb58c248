use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{parse_graph, serialize_graph, ParseError, Position, UmrGraph};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UmrEntry {
    pub sentence: String,
    pub graph: UmrGraph,
}

/// Sentence/graph pairs in file order, plus the id of the file they came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UmrDocument {
    pub source_id: String,
    entries: Vec<UmrEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DocumentError {
    #[error("no `::snt` entries found")]
    NoEntriesFound,
    #[error("entry {entry}: sentence text is blank")]
    BlankSentence { entry: usize },
    #[error("entry {entry}: no graph follows the sentence marker")]
    MissingGraph { entry: usize },
    #[error("entry {entry}: {source}")]
    Graph {
        entry: usize,
        #[source]
        source: ParseError,
    },
}

impl UmrDocument {
    /// Fails if `entries` is empty or any sentence is blank.
    pub fn new(
        source_id: impl Into<String>,
        entries: Vec<UmrEntry>,
    ) -> Result<Self, DocumentError> {
        if entries.is_empty() {
            return Err(DocumentError::NoEntriesFound);
        }
        if let Some(entry) = entries.iter().position(|e| e.sentence.trim().is_empty()) {
            return Err(DocumentError::BlankSentence { entry });
        }
        Ok(Self {
            source_id: source_id.into(),
            entries,
        })
    }

    pub fn entries(&self) -> &[UmrEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Keeps the first `min(n, len)` entries.
    ///
    /// # Panics
    /// If `n == 0`; a document always holds at least one entry.
    pub fn truncate(&self, n: usize) -> UmrDocument {
        assert!(n >= 1, "truncate needs n >= 1");
        UmrDocument {
            source_id: self.source_id.clone(),
            entries: self.entries.iter().take(n).cloned().collect(),
        }
    }
}

/// Recognizes `::snt`, `::snt3`, `# ::snt` and `# :: snt1` marker lines and
/// returns whatever text follows the marker.
fn sentence_marker(line: &str) -> Option<&str> {
    let rest = line.trim_start().trim_start_matches('#').trim_start();
    let rest = rest.strip_prefix("::")?.trim_start();
    let rest = rest.strip_prefix("snt")?;
    let rest = rest.trim_start_matches(|c: char| c.is_ascii_digit());
    if !rest.is_empty() && !rest.starts_with(char::is_whitespace) {
        return None;
    }
    Some(rest.trim())
}

/// True when `text` has at least one sentence marker line, i.e. should be
/// read with [`parse_document`] rather than as a bare graph.
pub fn has_sentence_markers(text: &str) -> bool {
    text.lines().any(|l| sentence_marker(l).is_some())
}

fn paren_delta(line: &str) -> i64 {
    let mut depth = 0;
    let mut in_str = false;
    let mut escaped = false;
    for c in line.chars() {
        if in_str {
            match (escaped, c) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_str = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_str = true,
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
    }
    depth
}

/// Parses a UMR corpus file (or any text with `::snt` markers) into its
/// sentence-level entries. Only the first graph after each marker is read;
/// alignment blocks and document-level graphs are skipped.
///
/// When the marker line carries no text (the UMR release layout), the
/// sentence is taken from the `Words:` line that follows it.
pub fn parse_document(source_id: &str, text: &str) -> Result<UmrDocument, DocumentError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut entries = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let Some(marked) = sentence_marker(lines[i]) else {
            i += 1;
            continue;
        };
        let entry = entries.len();
        let mut sentence = marked.to_string();
        i += 1;

        // Find the graph's opening line, picking up a `Words:` line if needed.
        let mut graph_start = None;
        while i < lines.len() {
            let trimmed = lines[i].trim_start();
            if sentence_marker(lines[i]).is_some() {
                break;
            }
            if sentence.is_empty() {
                if let Some(words) = trimmed.strip_prefix("Words:") {
                    sentence = words.split_whitespace().collect::<Vec<_>>().join(" ");
                }
            }
            if trimmed.starts_with('(') {
                graph_start = Some(i);
                break;
            }
            i += 1;
        }
        if sentence.trim().is_empty() {
            return Err(DocumentError::BlankSentence { entry });
        }
        let Some(start) = graph_start else {
            return Err(DocumentError::MissingGraph { entry });
        };

        let mut depth = 0;
        let mut block = String::new();
        while i < lines.len() {
            let line = lines[i];
            i += 1;
            if line.trim_start().starts_with('#') {
                continue;
            }
            block.push_str(line);
            block.push('\n');
            depth += paren_delta(line);
            if depth <= 0 {
                break;
            }
        }
        let graph = parse_graph(&block).map_err(|mut source| {
            // Report lines relative to the whole file.
            source.position = Position {
                line: source.position.line + start,
                column: source.position.column,
            };
            DocumentError::Graph { entry, source }
        })?;
        entries.push(UmrEntry { sentence, graph });
    }
    UmrDocument::new(source_id, entries)
}

/// Renders a document as `::snt` lines each followed by the canonical graph,
/// entries separated by one blank line.
pub fn format_exemplars(doc: &UmrDocument) -> String {
    doc.entries()
        .iter()
        .map(|e| format!("::snt {}\n{}", e.sentence, serialize_graph(&e.graph)))
        .collect::<Vec<_>>()
        .join("\n\n")
}
