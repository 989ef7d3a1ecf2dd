#[path = "support/oracles.rs"]
mod oracles;

use std::collections::{BTreeMap, BTreeSet};

use oracles::{f1_from, tally};
use privcomp::eval::correctness_at;
use privcomp::rag::{PolicyArticleMap, SegmentMapping};
use privcomp::GroundTruth;
use proptest::prelude::*;

type Keyed = BTreeMap<(String, String), BTreeSet<u32>>;

fn to_maps(pred: &Keyed) -> Vec<PolicyArticleMap> {
    let mut by_provider: BTreeMap<&str, PolicyArticleMap> = BTreeMap::new();
    for ((p, s), arts) in pred {
        let m = by_provider.entry(p).or_insert_with(|| PolicyArticleMap {
            provider_id: p.clone(),
            articles: BTreeSet::new(),
            segments: BTreeMap::new(),
            failures: vec![],
        });
        m.articles.extend(arts);
        m.segments.insert(
            s.clone(),
            SegmentMapping {
                segment_id: s.clone(),
                articles: arts.iter().map(|&a| (a, 0.0)).collect(),
                response: None,
            },
        );
    }
    by_provider.into_values().collect()
}

fn arb_keyed(non_empty: bool) -> impl Strategy<Value = Keyed> {
    let key = (prop::sample::select(vec!["a.com", "b.org"]), 0..6u8);
    let lo = usize::from(non_empty);
    prop::collection::btree_map(key, prop::collection::btree_set(1..=12u32, lo..5), 1..10).prop_map(|m| {
        m.into_iter()
            .map(|((p, s), v)| ((p.to_string(), format!("s{s}")), v))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn correctness_matches_tally(pred in arb_keyed(false), truth in arb_keyed(true)) {
        let truth = GroundTruth { entries: truth };
        let maps = to_maps(&pred);
        let overlap = truth.entries.keys().any(|k| pred.contains_key(k));
        let got = correctness_at(&maps, &truth, 1.0);
        if !overlap {
            prop_assert!(got.is_err());
            return Ok(());
        }
        let got = got.unwrap();
        let (tp, fp, fn_) = tally(&pred, &truth, 1..=12);
        prop_assert_eq!((got.counts.tp, got.counts.fp, got.counts.fn_), (tp, fp, fn_));
        let (p, r, f) = f1_from(tp, fp, fn_);
        prop_assert!((got.precision - p).abs() < 1e-12);
        prop_assert!((got.recall - r).abs() < 1e-12);
        prop_assert!((got.f1 - f).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&got.f1));
        let identical = truth.entries.iter().all(|(k, v)| pred.get(k) == Some(v));
        prop_assert_eq!(got.f1 == 1.0, identical);
    }
}
