mod common;

use proptest::prelude::*;

use acsa::datasets::{Pair, PairSet, Polarity};
use acsa::metrics::{aggregate, score};
use acsa::prompting::Method;
use acsa::runner::cells_from_csv;

use common::{brute_counts, brute_micro_f1, fixtures};

type Labels = Vec<(String, String)>;

fn labels() -> impl Strategy<Value = Labels> {
    prop::collection::vec(
        (
            prop::sample::select(vec!["food", "service", "price", "ambience"]),
            prop::sample::select(vec!["positive", "neutral", "negative"]),
        )
            .prop_map(|(c, p)| (c.to_string(), p.to_string())),
        0..5,
    )
}

fn instance() -> impl Strategy<Value = Vec<(Labels, Labels)>> {
    prop::collection::vec((labels(), labels()), 1..12)
}

fn to_set(v: &Labels) -> PairSet {
    v.iter()
        .map(|(c, p)| Pair::new(c.as_str(), p.parse::<Polarity>().unwrap()))
        .collect()
}

fn sets(inst: &[(Labels, Labels)]) -> (Vec<PairSet>, Vec<PairSet>) {
    inst.iter().map(|(p, g)| (to_set(p), to_set(g))).unzip()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_set_count_oracle(inst in instance()) {
        let (preds, golds) = sets(&inst);
        let r = score(&preds, &golds).unwrap();
        prop_assert!((r.micro_f1 - brute_micro_f1(&inst)).abs() < 1e-12);
        for ((p, g), s) in inst.iter().zip(&r.per_sample) {
            prop_assert_eq!(brute_counts(p, g), (s.tp, s.fp, s.fn_));
        }
    }

    #[test]
    fn permutation_invariance(inst in instance(), seed in any::<u64>()) {
        let (preds, golds) = sets(&inst);
        let mut order: Vec<usize> = (0..inst.len()).collect();
        // Deterministic shuffle from the seed.
        let mut s = seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let pp: Vec<PairSet> = order.iter().map(|&i| preds[i].clone()).collect();
        let gg: Vec<PairSet> = order.iter().map(|&i| golds[i].clone()).collect();
        prop_assert_eq!(score(&preds, &golds).unwrap().micro_f1, score(&pp, &gg).unwrap().micro_f1);
    }

    #[test]
    fn identity_scores_one(inst in instance()) {
        let (_, golds) = sets(&inst);
        prop_assume!(golds.iter().any(|g| !g.is_empty()));
        prop_assert_eq!(score(&golds, &golds).unwrap().micro_f1, 1.0);
    }

    #[test]
    fn emptying_predictions_never_helps_a_perfect_run(inst in instance()) {
        let (_, golds) = sets(&inst);
        let mut preds = golds.clone();
        let mut last = score(&preds, &golds).unwrap();
        for i in 0..preds.len() {
            preds[i] = PairSet::new();
            let r = score(&preds, &golds).unwrap();
            prop_assert!(r.micro_f1 <= last.micro_f1);
            prop_assert!(r.tp <= last.tp && r.fp == 0);
            last = r;
        }
        prop_assert_eq!(last.micro_f1, 0.0);
    }
}

#[test]
fn one_of_each_error_is_half() {
    let gold = vec![
        ("Food".into(), "positive".into()),
        ("Service".into(), "negative".into()),
    ];
    let pred = vec![
        ("Food".into(), "positive".into()),
        ("Ambience".into(), "negative".into()),
    ];
    assert_eq!(brute_counts(&pred, &gold), (1, 1, 1));
    let r = score(&[to_set(&pred)], &[to_set(&gold)]).unwrap();
    assert_eq!((r.tp, r.fp, r.fn_, r.micro_f1), (1, 1, 1, 0.5));
}

#[test]
fn table3_cells_give_reported_means() {
    let cells =
        cells_from_csv(&std::fs::read_to_string(fixtures().join("table3.csv")).unwrap()).unwrap();
    assert_eq!(cells.len(), 24);
    let t = aggregate(&cells);
    let expected = [
        (Method::Baseline, "qwen3-4b", 35.57),
        (Method::Baseline, "qwen3-8b", 43.77),
        (Method::Baseline, "gemini-2.5-pro", 59.84),
        (Method::Umr, "qwen3-4b", 32.92),
        (Method::Umr, "qwen3-8b", 43.83),
        (Method::Umr, "gemini-2.5-pro", 57.66),
    ];
    for (method, model, mean) in expected {
        let row = t.mean(method, model).unwrap();
        assert!(
            (row.mean - mean).abs() <= 0.005,
            "{method:?} {model}: {}",
            row.mean
        );
        assert_eq!(row.n_datasets, 4);
    }
    assert_eq!(t.models, ["qwen3-4b", "qwen3-8b", "gemini-2.5-pro"]);
    let text = t.render_means();
    assert!(text.contains("35.57 ±"), "{text}");
}
