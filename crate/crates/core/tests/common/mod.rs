//! Reference implementations shared by the integration tests. Nothing here
//! calls into the code path it is used to check.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use proptest::prelude::*;

use acsa::umr::{Edge, Target, UmrGraph};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// `(name, input, expected pairs or None for "no list")` from the
/// extraction fixture corpus.
pub fn extraction_cases() -> Vec<(String, String, Option<Vec<(String, String)>>)> {
    #[derive(serde::Deserialize)]
    struct Case {
        name: String,
        input: String,
        expected: Option<Vec<(String, String)>>,
    }
    let text = std::fs::read_to_string(fixtures().join("extract/cases.json")).unwrap();
    let cases: Vec<Case> = serde_json::from_str(&text).unwrap();
    cases
        .into_iter()
        .map(|c| (c.name, c.input, c.expected))
        .collect()
}

// ---------------------------------------------------------------------------
// Ratcliff/Obershelp by exhaustive block search

/// Longest common block by trying every start pair. Ties go to the smallest
/// start in `a`, then the smallest start in `b`.
fn brute_longest_block(a: &[char], b: &[char]) -> (usize, usize, usize) {
    let mut best = (0, 0, 0);
    for i in 0..a.len() {
        for j in 0..b.len() {
            let mut k = 0;
            while i + k < a.len() && j + k < b.len() && a[i + k] == b[j + k] {
                k += 1;
            }
            if k > best.2 {
                best = (i, j, k);
            }
        }
    }
    best
}

pub fn brute_matching_chars(a: &[char], b: &[char]) -> usize {
    let (i, j, k) = brute_longest_block(a, b);
    if k == 0 {
        return 0;
    }
    k + brute_matching_chars(&a[..i], &b[..j]) + brute_matching_chars(&a[i + k..], &b[j + k..])
}

/// Order-dependent ratio, first argument as the left sequence.
pub fn brute_gestalt(a: &str, b: &str) -> f64 {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let total = a.len() + b.len();
    if total == 0 {
        return 1.0;
    }
    2.0 * brute_matching_chars(&a, &b) as f64 / total as f64
}

/// Symmetric form: the lexicographically smaller string is the left one.
pub fn brute_similarity(a: &str, b: &str) -> f64 {
    if a <= b {
        brute_gestalt(a, b)
    } else {
        brute_gestalt(b, a)
    }
}

// ---------------------------------------------------------------------------
// F distribution tail by double-exponential quadrature of the density

fn ln_f_density(x: f64, d1: f64, d2: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let ln_beta = ln_gamma(d1 / 2.0) + ln_gamma(d2 / 2.0) - ln_gamma((d1 + d2) / 2.0);
    0.5 * d1 * (d1 / d2).ln() + (0.5 * d1 - 1.0) * x.ln()
        - 0.5 * (d1 + d2) * (1.0 + d1 * x / d2).ln()
        - ln_beta
}

/// `P(X > f)` for `X ~ F(d1, d2)`, integrating the density over `[f, inf)`
/// with the exp-sinh substitution `x = f + exp(pi/2 sinh s)`, halving the
/// step until two successive estimates agree.
pub fn f_tail_by_quadrature(f: f64, d1: f64, d2: f64) -> f64 {
    use std::f64::consts::FRAC_PI_2;
    let integrand = |s: f64| {
        let u = FRAC_PI_2 * s.sinh();
        let offset = u.exp();
        let x = f + offset;
        if offset == 0.0 || !x.is_finite() || x <= 0.0 {
            return 0.0;
        }
        let w = FRAC_PI_2 * s.cosh() * offset;
        let v = (ln_f_density(x, d1, d2) + w.ln()).exp();
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let limit: f64 = 6.5;
    let mut h: f64 = 0.5;
    let mut prev = f64::NAN;
    for _ in 0..12 {
        let n = (limit / h).ceil() as i64;
        let sum: f64 = (-n..=n).map(|k| integrand(k as f64 * h)).sum();
        let estimate = sum * h;
        if (estimate - prev).abs() < 1e-13 {
            return estimate;
        }
        prev = estimate;
        h /= 2.0;
    }
    prev
}

/// Fifty `(F, d1, d2)` points: the five reported statistics first, then a
/// spread over small and large degrees of freedom.
pub fn f_tail_grid() -> Vec<(f64, f64, f64)> {
    let mut grid = vec![
        (0.42, 1.0, 6.0),
        (33.43, 2.0, 6.0),
        (16.81, 3.0, 6.0),
        (0.11, 2.0, 6.0),
        (3.40, 6.0, 6.0),
    ];
    let dfs = [
        (1.0, 1.0),
        (1.0, 6.0),
        (2.0, 3.0),
        (3.0, 6.0),
        (4.0, 12.0),
        (6.0, 6.0),
        (5.0, 30.0),
        (10.0, 2.0),
        (12.0, 60.0),
    ];
    let stats = [0.05, 0.5, 1.3, 4.0, 20.0];
    for (d1, d2) in dfs {
        for f in stats {
            grid.push((f, d1, d2));
        }
    }
    assert_eq!(grid.len(), 50);
    grid
}

// ---------------------------------------------------------------------------
// Micro-F1 by explicit counting over pair lists

/// Counts with plain vectors and linear membership tests, deduplicating
/// first so the result is a set computation.
pub fn brute_counts(pred: &[(String, String)], gold: &[(String, String)]) -> (usize, usize, usize) {
    let dedup = |v: &[(String, String)]| {
        let mut out: Vec<(String, String)> = Vec::new();
        for p in v {
            if !out.contains(p) {
                out.push(p.clone());
            }
        }
        out
    };
    let (pred, gold) = (dedup(pred), dedup(gold));
    let tp = pred.iter().filter(|p| gold.contains(p)).count();
    (tp, pred.len() - tp, gold.len() - tp)
}

pub fn brute_micro_f1(samples: &[(Vec<(String, String)>, Vec<(String, String)>)]) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (p, g) in samples {
        let c = brute_counts(p, g);
        tp += c.0;
        fp += c.1;
        fn_ += c.2;
    }
    if tp == 0 {
        return 0.0;
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    2.0 * precision * recall / (precision + recall)
}

// ---------------------------------------------------------------------------
// UMR graph generator with its own Penman writer

const CONCEPTS: &[&str] = &[
    "and",
    "have-attribute-91",
    "pizza",
    "service",
    "person",
    "name",
    "say-01",
    "buy-01",
    "date-entity",
    "thing",
    "contrast-91",
    "leave-11",
];
const ROLES: &[&str] = &[
    "ARG0", "ARG1", "ARG2", "op1", "op2", "mod", "aspect", "quant", "ARG1-of", "polarity",
];
const SYMBOLS: &[&str] = &[
    "-",
    "+",
    "state",
    "performance",
    "FullAff",
    "5",
    "80",
    "plural",
    "3.5",
];
const STRINGS: &[&str] = &[
    "Maria",
    "New York",
    "say \"hi\"",
    "back\\slash",
    "a(b)c",
    "",
];

#[derive(Debug, Clone)]
enum GenTarget {
    Child(Box<GenNode>),
    Ref(usize),
    Str(usize),
    Sym(usize),
}

#[derive(Debug, Clone)]
pub struct GenNode {
    concept: usize,
    edges: Vec<(usize, GenTarget)>,
}

fn gen_node(depth: u32) -> BoxedStrategy<GenNode> {
    let leaf_target = prop_oneof![
        any::<prop::sample::Index>().prop_map(|i| GenTarget::Ref(i.index(1000))),
        (0..STRINGS.len()).prop_map(GenTarget::Str),
        (0..SYMBOLS.len()).prop_map(GenTarget::Sym),
    ];
    let target = if depth == 0 {
        leaf_target.boxed()
    } else {
        prop_oneof![
            3 => gen_node(depth - 1).prop_map(|n| GenTarget::Child(Box::new(n))),
            2 => leaf_target,
        ]
        .boxed()
    };
    (
        0..CONCEPTS.len(),
        prop::collection::vec((0..ROLES.len(), target), 0..4),
    )
        .prop_map(|(concept, edges)| GenNode { concept, edges })
        .boxed()
}

/// Random graphs with up to four levels of nesting below the root.
pub fn arb_graph() -> impl Strategy<Value = GenGraph> {
    gen_node(4).prop_map(GenGraph::from_tree)
}

/// A generated graph: the expected structure plus Penman text written
/// independently of the library serializer.
#[derive(Debug, Clone)]
pub struct GenGraph {
    pub graph: UmrGraph,
    pub text: String,
    /// Byte offsets of every structural parenthesis in `text`.
    pub parens: Vec<usize>,
}

impl GenGraph {
    fn from_tree(root: GenNode) -> Self {
        let mut count = 0;
        count_nodes(&root, &mut count);
        let mut b = Builder {
            next: 0,
            total: count,
            nodes: BTreeMap::new(),
            edges: Vec::new(),
            text: String::new(),
            parens: Vec::new(),
        };
        b.write(&root, 0);
        let graph = UmrGraph::new("g0", b.nodes, b.edges).expect("generator builds valid graphs");
        GenGraph {
            graph,
            text: b.text,
            parens: b.parens,
        }
    }
}

fn count_nodes(n: &GenNode, count: &mut usize) {
    *count += 1;
    for (_, t) in &n.edges {
        if let GenTarget::Child(c) = t {
            count_nodes(c, count);
        }
    }
}

struct Builder {
    next: usize,
    total: usize,
    nodes: BTreeMap<String, String>,
    edges: Vec<Edge>,
    text: String,
    parens: Vec<usize>,
}

impl Builder {
    fn write(&mut self, node: &GenNode, depth: usize) {
        let var = format!("g{}", self.next);
        self.next += 1;
        self.nodes
            .insert(var.clone(), CONCEPTS[node.concept].to_string());
        self.parens.push(self.text.len());
        // Mix of spacing styles around the slash.
        if depth % 2 == 0 {
            self.text
                .push_str(&format!("({var} / {}", CONCEPTS[node.concept]));
        } else {
            self.text
                .push_str(&format!("({var}/{}", CONCEPTS[node.concept]));
        }
        for (role, target) in &node.edges {
            let role = ROLES[*role].to_string();
            if depth % 3 == 1 {
                self.text.push(' ');
            } else {
                self.text.push('\n');
                self.text.push_str(&"\t".repeat(depth + 1));
            }
            self.text.push(':');
            self.text.push_str(&role);
            self.text.push(' ');
            let target = match target {
                GenTarget::Child(child) => {
                    let child_var = format!("g{}", self.next);
                    self.edges.push(Edge {
                        source: var.clone(),
                        role,
                        target: Target::Node(child_var),
                    });
                    self.write(child, depth + 1);
                    continue;
                }
                GenTarget::Ref(i) => {
                    let v = format!("g{}", i % self.total);
                    self.text.push_str(&v);
                    Target::Reference(v)
                }
                GenTarget::Str(i) => {
                    let s = STRINGS[*i];
                    self.text.push('"');
                    for c in s.chars() {
                        if c == '"' || c == '\\' {
                            self.text.push('\\');
                        }
                        self.text.push(c);
                    }
                    self.text.push('"');
                    Target::Str(s.to_string())
                }
                GenTarget::Sym(i) => {
                    self.text.push_str(SYMBOLS[*i]);
                    Target::Symbol(SYMBOLS[*i].to_string())
                }
            };
            self.edges.push(Edge {
                source: var.clone(),
                role,
                target,
            });
        }
        self.parens.push(self.text.len());
        self.text.push(')');
    }
}

/// The pizza/service example graph used across the UMR tests.
pub const PIZZA_SERVICE: &str = "(s1a / and
:op1 (s1h / have-attribute-91
:ARG1 (s1p / pizza
:mod (s1p2 / pepperoni))
:ARG2 (s1d / delicious)
:aspect state)
:op2 (s1h2 / have-attribute-91
:ARG1 (s1s / service)
:ARG2 (s1t / terrible)
:aspect state))";
