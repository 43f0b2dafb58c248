//! Regenerates the replay fixtures used by the offline end-to-end tests.
//!
//! For every `*.toml` run config in the given directory this builds the
//! exact requests the runner would send and stores a canned answer for each
//! one in the config's `replay_dir`. Answers are derived from the gold labels
//! with deterministic damage (misspellings, folded category names, refusals,
//! draft lists, unmappable pairs) so the post-processing path is exercised.
//!
//!     cargo run -p acsa-core --example make_replay_fixtures -- crates/core/tests/fixtures/e2e

use std::path::PathBuf;

use acsa::datasets::{Pair, Polarity, Sample};
use acsa::llm::ResponseCache;
use acsa::prompting::Method;
use acsa::runner::{Experiment, RunConfig};

fn misspell(p: Polarity) -> &'static str {
    match p {
        Polarity::Positive => "postive",
        Polarity::Negative => "negtive",
        Polarity::Neutral => "nuetral",
    }
}

fn folded(category: &str) -> String {
    category.to_lowercase().replace(['#', '_'], " ")
}

fn render(pairs: &[(String, String)]) -> String {
    let items: Vec<String> = pairs
        .iter()
        .map(|(c, p)| format!("('{c}', '{p}')"))
        .collect();
    format!("[{}]", items.join(", "))
}

fn answer_pairs(index: usize, gold: &[&Pair]) -> Vec<(String, String)> {
    let exact = |p: &Pair| (p.category.clone(), p.polarity.as_str().to_string());
    match index % 5 {
        0 => gold
            .iter()
            .map(|p| (folded(&p.category), p.polarity.as_str().to_string()))
            .collect(),
        1 => gold
            .iter()
            .map(|p| (p.category.clone(), misspell(p.polarity).to_string()))
            .collect(),
        2 => {
            let mut v: Vec<_> = gold.iter().skip(1).map(|p| exact(p)).collect();
            v.push(("weather outside".into(), "negative".into()));
            v
        }
        _ => {
            let mut v: Vec<_> = gold.iter().map(|p| exact(p)).collect();
            if let Some(first) = v.first_mut() {
                first.1 = "mixed".into();
            }
            v
        }
    }
}

fn canned(method: Method, index: usize, sample: &Sample) -> String {
    let gold: Vec<&Pair> = sample.gold.iter().collect();
    let final_list = render(&answer_pairs(index, &gold));
    match (method, index % 5) {
        (Method::Baseline, 3) => "I'm sorry, but I can't help with that request.".into(),
        (Method::Baseline, 4) => format!(
            "Draft: [('{}', \n\nLet me restate the answer cleanly.\nFinal answer: {final_list}",
            gold.first().map(|p| p.category.as_str()).unwrap_or("none")
        ),
        (Method::Baseline, _) => format!(
            "The review mentions {} opinion(s). Reasoning through each one in turn.\nFinal answer: {final_list}",
            gold.len()
        ),
        (Method::Umr, k) => {
            let draft = if k == 3 {
                "Initial guess: [('x', 'positive'),, oops\n"
            } else {
                ""
            };
            format!(
                "Step 1: UMR parse\n(s1x / have-attribute-91\n  :ARG1 (s1e / entity)\n  :ARG2 (s1o / opinion)\n  :aspect state)\n\
                 Step 2: the entities map to the predefined categories.\n\
                 Step 3: polarity follows the opinion attributes.\n\
                 {draft}Step 4: {final_list}"
            )
        }
    }
}

fn main() {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .expect("usage: make_replay_fixtures <config-dir>"),
    );
    let mut configs: Vec<PathBuf> = std::fs::read_dir(&dir)
        .expect("config dir")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    configs.sort();
    for path in configs {
        let config = RunConfig::load(&path).expect("config");
        let replay = ResponseCache::new(config.replay_dir.clone().expect("replay_dir"));
        let method = config.method;
        let experiment = Experiment::prepare(config).expect("prepare");
        let requests = experiment.requests().expect("requests");
        for (i, (req, sample)) in requests.iter().zip(&experiment.split.samples).enumerate() {
            replay
                .put(&req.cache_key(), req, &canned(method, i, sample))
                .expect("write fixture");
        }
        println!("{}: {} fixtures", path.display(), requests.len());
    }
}
