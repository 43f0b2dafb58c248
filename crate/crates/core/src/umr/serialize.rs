use std::fmt::Write;

use super::{Target, UmrGraph};

const INDENT: &str = "  ";

/// Renders `graph` as indented Penman text, two spaces per nesting level.
///
/// Each node's edges are written in stored order; re-entrant targets become
/// bare variables.
pub fn serialize_graph(graph: &UmrGraph) -> String {
    let mut out = String::new();
    write_node(graph, graph.root(), 0, &mut out);
    out
}

fn write_node(graph: &UmrGraph, var: &str, depth: usize, out: &mut String) {
    let concept = graph.concept(var).unwrap_or_default();
    let _ = write!(out, "({var} / {concept}");
    for edge in graph.edges_from(var) {
        out.push('\n');
        for _ in 0..=depth {
            out.push_str(INDENT);
        }
        let _ = write!(out, ":{} ", edge.role);
        match &edge.target {
            Target::Node(child) => write_node(graph, child, depth + 1, out),
            Target::Reference(v) | Target::Symbol(v) => out.push_str(v),
            Target::Str(s) => {
                out.push('"');
                for c in s.chars() {
                    if matches!(c, '"' | '\\') {
                        out.push('\\');
                    }
                    out.push(c);
                }
                out.push('"');
            }
        }
    }
    out.push(')');
}
