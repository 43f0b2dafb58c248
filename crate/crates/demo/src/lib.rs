//! Browser bindings for a few harness operations. Every export takes plain
//! strings and returns a JSON string, so the page needs no glue beyond
//! `JSON.parse`.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use acsa::postprocess::{canonicalize, extract_pair_list, DEFAULT_CUTOFF};
use acsa::stats::{anova, design_from_csv, AnovaError};
use acsa::umr::{parse_graph, serialize_graph};

/// Parses one Penman graph. On success returns the canonical text plus the
/// node and edge lists; on failure the message and its line and column.
pub fn parse_umr_json(text: &str) -> Value {
    match parse_graph(text) {
        Ok(g) => {
            json!({
                "ok": true,
                "root": g.root(),
                "canonical": serialize_graph(&g),
                "nodes": g.nodes(),
                "edges": g.edges(),
            })
        }
        Err(e) => json!({
            "ok": false,
            "error": e.kind.to_string(),
            "line": e.position.line,
            "column": e.position.column,
        }),
    }
}

/// Extracts the final tuple list from a model answer and maps it onto the
/// inventory (one category per line, `#` lines ignored).
pub fn map_output_json(raw_output: &str, inventory: &str, cutoff: f64) -> Value {
    let categories: Vec<&str> = inventory
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect();
    let cutoff = if cutoff.is_finite() {
        cutoff
    } else {
        DEFAULT_CUTOFF
    };
    match extract_pair_list(raw_output) {
        Ok(raw) => {
            let (prediction, outcomes) = canonicalize(&raw, &categories, cutoff);
            json!({ "ok": true, "outcomes": outcomes, "prediction": prediction })
        }
        Err(e) => json!({ "ok": false, "error": e.to_string() }),
    }
}

/// Three-way ANOVA over a `method,model,dataset,score` CSV.
pub fn anova_json(csv: &str) -> Value {
    let result = design_from_csv(csv).and_then(|d| anova(&d));
    match result {
        Ok(table) => json!({ "ok": true, "text": table.to_string(), "table": table }),
        Err(AnovaError::ZeroResidual(table)) => json!({
            "ok": false,
            "error": AnovaError::ZeroResidual(table.clone()).to_string(),
            "text": table.to_string(),
        }),
        Err(e) => json!({ "ok": false, "error": e.to_string() }),
    }
}

#[wasm_bindgen]
pub fn parse_umr(text: &str) -> String {
    parse_umr_json(text).to_string()
}

#[wasm_bindgen]
pub fn map_output(raw_output: &str, inventory: &str, cutoff: f64) -> String {
    map_output_json(raw_output, inventory, cutoff).to_string()
}

#[wasm_bindgen]
pub fn anova_csv(csv: &str) -> String {
    anova_json(csv).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_reports_canonical_form() {
        let v = parse_umr_json("(s1f / food\n   :mod (s1g / good))");
        assert_eq!(v["ok"], true);
        assert_eq!(v["root"], "s1f");
        assert_eq!(v["canonical"], "(s1f / food\n  :mod (s1g / good))");
        assert_eq!(
            v["edges"][0]["target"],
            json!({ "kind": "node", "value": "s1g" })
        );
    }

    #[test]
    fn parse_error_carries_position() {
        let v = parse_umr_json("(s1f / food\n  :mod s1x)");
        assert_eq!(v["ok"], false);
        assert_eq!(v["line"], 2);
        assert!(v["error"].as_str().unwrap().contains("s1x"));
    }

    #[test]
    fn mapping_keeps_and_drops() {
        let v = map_output_json(
            "Answer: [('food quality', 'postive'), ('weather', 'negative')]",
            "# inventory\nFOOD#QUALITY\nSERVICE#GENERAL\n",
            f64::NAN,
        );
        assert_eq!(v["ok"], true);
        assert_eq!(v["outcomes"][0]["mapped"]["category"], "FOOD#QUALITY");
        assert_eq!(v["outcomes"][1]["dropped_reason"], "below-cutoff");
        assert_eq!(v["prediction"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn mapping_without_list() {
        let v = map_output_json("no idea", "FOOD#QUALITY", 0.6);
        assert_eq!(v["ok"], false);
    }

    #[test]
    fn anova_from_csv() {
        let csv = include_str!("../../core/tests/fixtures/table3.csv");
        let v = anova_json(csv);
        assert_eq!(v["ok"], true);
        let model = &v["table"]["effects"][1];
        assert_eq!(model["name"], "Model");
        assert!((model["f"].as_f64().unwrap() - 33.43).abs() < 0.05);
        assert!(anova_json("method,model,dataset,score\n")
            .get("error")
            .is_some());
    }
}
