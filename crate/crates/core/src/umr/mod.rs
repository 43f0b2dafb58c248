//! Uniform Meaning Representation graphs in Penman notation.
//!
//! A [`UmrGraph`] is a rooted, labeled graph whose spanning tree is given by
//! the nesting of the surface syntax. Re-entrant references appear as bare
//! variables and may point anywhere in the same graph, including forward.
//!
//! Documents pair sentences with their sentence-level graphs; everything else
//! in a corpus file (alignments, document-level graphs, free metadata) is
//! skipped by [`parse_document`].

mod document;
mod exemplar;
mod parse;
mod serialize;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use document::{
    format_exemplars, has_sentence_markers, parse_document, DocumentError, UmrDocument, UmrEntry,
};
pub use exemplar::{ExemplarError, ExemplarPool, SampledExemplar, EXEMPLAR_FILE_COUNT};
pub use parse::{parse_graph, ParseError, ParseErrorKind, Position};
pub use serialize::serialize_graph;

/// Number of sentence/graph pairs kept from each exemplar document.
pub const EXEMPLAR_ENTRIES: usize = 3;

/// The value slot of an edge.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Target {
    /// A nested node introduced at this position.
    Node(String),
    /// A bare variable pointing at a node introduced elsewhere.
    Reference(String),
    /// A double-quoted constant (stored unescaped).
    Str(String),
    /// Any other unquoted constant: numbers, `state`, `-`, `+`, ...
    Symbol(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub source: String,
    /// Role label without the leading `:`.
    pub role: String,
    pub target: Target,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("root variable `{0}` has no concept")]
    MissingRoot(String),
    #[error("edge source `{0}` is not a node of the graph")]
    UnknownSource(String),
    #[error("variable `{0}` is introduced more than once")]
    DuplicateVariable(String),
    #[error("variable `{0}` is referenced but never introduced")]
    DanglingReference(String),
    #[error("node `{0}` is not reachable from the root")]
    Unreachable(String),
    #[error("role label `{0}` is empty or malformed")]
    BadRole(String),
}

/// A rooted Penman graph. Equality is structural: same root, same
/// variable-to-concept map and the same multiset of edges.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UmrGraph {
    root: String,
    nodes: BTreeMap<String, String>,
    edges: Vec<Edge>,
}

impl UmrGraph {
    /// Builds a graph from parts, checking every structural invariant.
    ///
    /// Edges are kept in the given order, which is the order the serializer
    /// emits them in.
    pub fn new(
        root: impl Into<String>,
        nodes: BTreeMap<String, String>,
        edges: Vec<Edge>,
    ) -> Result<Self, GraphError> {
        let graph = Self {
            root: root.into(),
            nodes,
            edges,
        };
        graph.validate()?;
        Ok(graph)
    }

    pub(crate) fn from_parts_unchecked(
        root: String,
        nodes: BTreeMap<String, String>,
        edges: Vec<Edge>,
    ) -> Self {
        Self { root, nodes, edges }
    }

    pub fn root(&self) -> &str {
        &self.root
    }

    pub fn nodes(&self) -> &BTreeMap<String, String> {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn concept(&self, var: &str) -> Option<&str> {
        self.nodes.get(var).map(String::as_str)
    }

    /// Outgoing edges of `var`, in document order.
    pub fn edges_from<'a>(&'a self, var: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.source == var)
    }

    fn validate(&self) -> Result<(), GraphError> {
        if !self.nodes.contains_key(&self.root) {
            return Err(GraphError::MissingRoot(self.root.clone()));
        }
        let mut introduced = BTreeSet::new();
        introduced.insert(self.root.as_str());
        for edge in &self.edges {
            if edge.role.is_empty()
                || edge.role.starts_with(':')
                || edge.role.contains(char::is_whitespace)
            {
                return Err(GraphError::BadRole(edge.role.clone()));
            }
            if !self.nodes.contains_key(&edge.source) {
                return Err(GraphError::UnknownSource(edge.source.clone()));
            }
            match &edge.target {
                Target::Node(v) => {
                    if !self.nodes.contains_key(v) {
                        return Err(GraphError::DanglingReference(v.clone()));
                    }
                    if !introduced.insert(v.as_str()) {
                        return Err(GraphError::DuplicateVariable(v.clone()));
                    }
                }
                Target::Reference(v) if !self.nodes.contains_key(v) => {
                    return Err(GraphError::DanglingReference(v.clone()));
                }
                _ => {}
            }
        }
        // Every node needs an introduction, and the introduction tree must
        // hang off the root.
        if let Some(orphan) = self.nodes.keys().find(|v| !introduced.contains(v.as_str())) {
            return Err(GraphError::Unreachable(orphan.clone()));
        }
        let mut seen = BTreeSet::new();
        let mut stack = vec![self.root.as_str()];
        while let Some(v) = stack.pop() {
            if !seen.insert(v) {
                continue;
            }
            for e in self.edges_from(v) {
                if let Target::Node(child) = &e.target {
                    stack.push(child);
                }
            }
        }
        if let Some(orphan) = self.nodes.keys().find(|v| !seen.contains(v.as_str())) {
            return Err(GraphError::Unreachable(orphan.clone()));
        }
        Ok(())
    }

    fn sorted_edges(&self) -> Vec<&Edge> {
        let mut edges: Vec<&Edge> = self.edges.iter().collect();
        edges.sort();
        edges
    }
}

impl PartialEq for UmrGraph {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
            && self.nodes == other.nodes
            && self.sorted_edges() == other.sorted_edges()
    }
}

impl Eq for UmrGraph {}

/// Penman convention used to tell re-entrant variables from constants when
/// a bare token does not resolve: one or two letters, then a digit, then any
/// alphanumerics (`s1a`, `s1p2`, `b2`), or a single letter (`x`).
pub(crate) fn looks_like_variable(token: &str) -> bool {
    let bytes = token.as_bytes();
    if bytes.is_empty() || !bytes[0].is_ascii_lowercase() {
        return false;
    }
    if bytes.len() == 1 {
        return true;
    }
    let letters = bytes.iter().take_while(|b| b.is_ascii_lowercase()).count();
    if letters > 2 || letters == bytes.len() || !bytes[letters].is_ascii_digit() {
        return false;
    }
    bytes[letters..]
        .iter()
        .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit())
}
