//! Retrieval correctness against annotated segments and threshold sweeps.
//!
//! Correctness is micro-averaged F1 over per-segment article sets: true
//! positives, false positives and false negatives are summed over all
//! annotated segments before precision and recall are taken.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::thread;

use thiserror::Error;

use crate::policy::{filter_short_segments, GroundTruth, PolicyDocument};
use crate::rag::{map_policy_to_articles, ExtractiveBackend, PolicyArticleMap, RagError};
use crate::regulation::ArticleChunk;
use crate::retrieval::{build_index, RetrievalError, RetrieverConfig};

/// Correctness reported for the original embedding model at each threshold.
/// Printed for comparison only; a lexical embedder lives in a different
/// distance space.
pub const REFERENCE_CORRECTNESS: [(f64, f64); 7] = [
    (0.9, 0.66),
    (1.0, 0.74),
    (1.1, 0.82),
    (1.2, 0.84),
    (1.3, 0.89),
    (1.4, 0.88),
    (1.5, 0.9),
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("no annotated segment appears in the predictions")]
    NoOverlap,
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Rag(#[from] RagError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectnessResult {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_segments: usize,
    pub counts: ConfusionCounts,
}

impl CorrectnessResult {
    /// Precision is 0 when nothing was predicted, recall is 0 when nothing
    /// was expected.
    pub fn from_counts(threshold: f64, counts: ConfusionCounts, n_segments: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(counts.tp, counts.tp + counts.fp);
        let recall = ratio(counts.tp, counts.tp + counts.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        CorrectnessResult {
            threshold,
            precision,
            recall,
            f1,
            n_segments,
            counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    thresholds: Vec<f64>,
    pub min_tokens: usize,
    pub retriever: RetrieverConfig,
}

impl SweepConfig {
    pub fn new(thresholds: Vec<f64>, min_tokens: usize, retriever: RetrieverConfig) -> Result<Self, EvalError> {
        if thresholds.is_empty() {
            return Err(EvalError::InvalidSweep("no thresholds".into()));
        }
        if let Some(t) = thresholds.iter().find(|t| !t.is_finite() || **t <= 0.0) {
            return Err(EvalError::InvalidSweep(format!("threshold {t} is not positive")));
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EvalError::InvalidSweep("thresholds must be strictly increasing".into()));
        }
        Ok(SweepConfig {
            thresholds,
            min_tokens,
            retriever,
        })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }
}

/// Tallies predictions against every annotated segment. A segment absent
/// from the predictions counts as an empty prediction; predicted segments
/// without annotations are ignored.
pub fn correctness_at(
    predictions: &[PolicyArticleMap],
    truth: &GroundTruth,
    threshold: f64,
) -> Result<CorrectnessResult, EvalError> {
    let empty = BTreeSet::new();
    let mut counts = ConfusionCounts::default();
    let mut overlap = false;
    for ((provider, segment), expected) in &truth.entries {
        let predicted = predictions
            .iter()
            .find(|m| &m.provider_id == provider)
            .and_then(|m| m.segment_articles(segment));
        overlap |= predicted.is_some();
        let predicted = predicted.as_ref().unwrap_or(&empty);
        let hits = predicted.intersection(expected).count();
        counts.tp += hits;
        counts.fp += predicted.len() - hits;
        counts.fn_ += expected.len() - hits;
    }
    if !overlap {
        return Err(EvalError::NoOverlap);
    }
    Ok(CorrectnessResult::from_counts(threshold, counts, truth.len()))
}

/// Filters short segments, builds one index over `chunks` and scores the
/// extractive mapping at every threshold.
pub fn sweep(
    chunks: &[ArticleChunk],
    policies: &[PolicyDocument],
    truth: &GroundTruth,
    config: &SweepConfig,
) -> Result<Vec<CorrectnessResult>, EvalError> {
    let policies = filter_short_segments(policies, config.min_tokens);
    let truth = truth.restricted_to(&policies);
    let index = build_index(chunks, &config.retriever)?;

    let run = |threshold: f64| -> Result<CorrectnessResult, EvalError> {
        let retriever = config.retriever.with_threshold(threshold)?;
        let maps = policies
            .iter()
            .map(|p| map_policy_to_articles(p, &index, &retriever, &ExtractiveBackend))
            .collect::<Result<Vec<_>, _>>()?;
        correctness_at(&maps, &truth, threshold)
    };

    thread::scope(|s| {
        let handles: Vec<_> = config
            .thresholds
            .iter()
            .map(|&t| {
                let run = &run;
                s.spawn(move || run(t))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    })
}

pub fn render_sweep_table(results: &[CorrectnessResult]) -> String {
    let mut out = String::from("threshold  precision  recall  f1      n_segments\n");
    for r in results {
        let _ = writeln!(
            out,
            "{:<9.2}  {:<9.4}  {:<6.4}  {:<6.4}  {}",
            r.threshold, r.precision, r.recall, r.f1, r.n_segments
        );
    }
    out.push_str("correctness = micro-averaged F1 over per-segment article sets\n");
    out
}

/// Two-column table of [`REFERENCE_CORRECTNESS`].
pub fn render_reference_table() -> String {
    let mut out = String::from("reference (original embedding model, not reproduced here)\nthreshold  correctness\n");
    for (t, c) in REFERENCE_CORRECTNESS {
        let _ = writeln!(out, "{t:<9.2}  {c:.2}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::PolicySegment;
    use crate::rag::SegmentMapping;
    use std::collections::BTreeMap;

    fn prediction(provider: &str, segs: &[(&str, &[u32])]) -> PolicyArticleMap {
        let segments: BTreeMap<String, SegmentMapping> = segs
            .iter()
            .map(|(id, arts)| {
                (
                    id.to_string(),
                    SegmentMapping {
                        segment_id: id.to_string(),
                        articles: arts.iter().map(|&a| (a, 0.5)).collect(),
                        response: None,
                    },
                )
            })
            .collect();
        PolicyArticleMap {
            provider_id: provider.into(),
            articles: segs.iter().flat_map(|(_, a)| a.iter().copied()).collect(),
            segments,
            failures: vec![],
        }
    }

    fn truth(rows: &[(&str, &str, &[u32])]) -> GroundTruth {
        GroundTruth {
            entries: rows
                .iter()
                .map(|(p, s, a)| ((p.to_string(), s.to_string()), a.iter().copied().collect()))
                .collect(),
        }
    }

    #[test]
    fn perfect_predictions() {
        let t = truth(&[("p", "a", &[1, 2]), ("p", "b", &[3])]);
        let r = correctness_at(&[prediction("p", &[("a", &[1, 2]), ("b", &[3])])], &t, 1.0).unwrap();
        assert_eq!((r.precision, r.recall, r.f1, r.n_segments), (1.0, 1.0, 1.0, 2));
    }

    #[test]
    fn disjoint_predictions() {
        let t = truth(&[("p", "a", &[1]), ("p", "b", &[3])]);
        let r = correctness_at(&[prediction("p", &[("a", &[2]), ("b", &[4])])], &t, 1.0).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn hand_tallied_micro_average() {
        // (tp, fp, fn) = (2,1,0), (1,0,1), (0,1,1): P = 3/5, R = 3/5
        let t = truth(&[("p", "a", &[1, 2]), ("p", "b", &[3, 4]), ("p", "c", &[5])]);
        let pred = prediction("p", &[("a", &[1, 2, 9]), ("b", &[3]), ("c", &[6])]);
        let r = correctness_at(&[pred], &t, 1.0).unwrap();
        assert_eq!(r.counts, ConfusionCounts { tp: 3, fp: 2, fn_: 2 });
        assert!((r.precision - 0.6).abs() < 1e-12);
        assert!((r.recall - 0.6).abs() < 1e-12);
        assert!((r.f1 - 0.6).abs() < 1e-12);
    }

    #[test]
    fn missing_and_unannotated_segments() {
        let t = truth(&[("p", "a", &[1]), ("p", "b", &[2])]);
        let pred = prediction("p", &[("a", &[1]), ("zzz", &[7, 8])]);
        let r = correctness_at(&[pred], &t, 1.0).unwrap();
        assert_eq!(r.counts, ConfusionCounts { tp: 1, fp: 0, fn_: 1 });
        assert_eq!(
            correctness_at(&[prediction("q", &[("a", &[1])])], &t, 1.0),
            Err(EvalError::NoOverlap)
        );
    }

    #[test]
    fn sweep_config_validation() {
        let rc = RetrieverConfig::new(1.0).unwrap();
        assert!(SweepConfig::new(vec![0.5, 1.0], 0, rc.clone()).is_ok());
        assert!(SweepConfig::new(vec![1.0, 0.5], 0, rc.clone()).is_err());
        assert!(SweepConfig::new(vec![0.5, 0.5], 0, rc.clone()).is_err());
        assert!(SweepConfig::new(vec![0.0], 0, rc.clone()).is_err());
        assert!(SweepConfig::new(vec![], 0, rc).is_err());
    }

    fn chunk(article: u32, text: &str) -> ArticleChunk {
        ArticleChunk {
            chunk_id: ArticleChunk::make_id(article, 1),
            article_number: article,
            paragraph_index: 1,
            text: text.into(),
        }
    }

    #[test]
    fn sweep_boundaries() {
        let chunks = vec![
            chunk(5, "lawful fair transparent processing"),
            chunk(6, "consent lawful basis contract"),
            chunk(17, "erasure right to be forgotten"),
        ];
        let policies = vec![PolicyDocument {
            provider_id: "p".into(),
            provider_name: "P".into(),
            segments: vec![
                PolicySegment::new("a", "we process data in a lawful and transparent way"),
                PolicySegment::new("b", "you can request erasure of your account"),
                PolicySegment::new("c", "short"),
            ],
        }];
        let t = truth(&[("p", "a", &[5]), ("p", "b", &[17]), ("p", "c", &[6])]);
        let cfg = SweepConfig::new(vec![0.5, 1.0, 2.0], 2, RetrieverConfig::new(1.0).unwrap()).unwrap();
        let results = sweep(&chunks, &policies, &t, &cfg).unwrap();
        assert_eq!(results.len(), 3);
        assert!(results.iter().all(|r| r.n_segments == 2));
        assert!(results.windows(2).all(|w| w[0].recall <= w[1].recall));
        assert_eq!(results[2].recall, 1.0);
        assert_eq!(sweep(&chunks, &policies, &t, &cfg).unwrap(), results);
    }

    #[test]
    fn table_layout() {
        let r = CorrectnessResult::from_counts(0.9, ConfusionCounts { tp: 3, fp: 2, fn_: 2 }, 3);
        let table = render_sweep_table(&[r]);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines[0], "threshold  precision  recall  f1      n_segments");
        assert_eq!(lines[1], "0.90       0.6000     0.6000  0.6000  3");
        assert!(render_reference_table().contains("1.40       0.88\n"));
    }
}
