use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use privcomp::kg::{annotate_labels, parse_turtle, populate_provider, populate_regulation, serialize_turtle, Graph};
use privcomp::policy::load_policies;
use privcomp::rag::{map_policy_to_articles, ExtractiveBackend};
use privcomp::regulation::{chunk_regulation, load_obligation_map, parse_regulation, RegulationDoc};
use privcomp::retrieval::{build_index, RetrieverConfig};
use privcomp::rules::{builtin_rules, default_roles, infer_fixpoint};

fn read(rel: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn regulation_graph() -> (RegulationDoc, Graph) {
    let doc = parse_regulation(&read("gdpr/gdpr.reg")).unwrap();
    let obligations = load_obligation_map(&read("gdpr/obligations.csv"), &doc).unwrap();
    let mut g = Graph::new();
    populate_regulation(&mut g, &doc, &obligations).unwrap();
    annotate_labels(&mut g, &doc);
    (doc, g)
}

fn regulation(c: &mut Criterion) {
    let source = read("gdpr/gdpr.reg");
    c.bench_function("parse_and_chunk_gdpr", |b| {
        b.iter(|| chunk_regulation(&parse_regulation(black_box(&source)).unwrap()).len())
    });

    let (_, g) = regulation_graph();
    let text = serialize_turtle(&g);
    c.bench_function("turtle_serialize", |b| b.iter(|| serialize_turtle(black_box(&g)).len()));
    c.bench_function("turtle_parse", |b| b.iter(|| parse_turtle(black_box(&text)).unwrap().len()));
}

fn retrieval(c: &mut Criterion) {
    let (doc, _) = regulation_graph();
    let chunks = chunk_regulation(&doc);
    let config = RetrieverConfig::new(0.8).unwrap().with_top_k(2).unwrap();
    c.bench_function("build_index_gdpr", |b| b.iter(|| build_index(black_box(&chunks), &config).unwrap().len()));

    let index = build_index(&chunks, &config).unwrap();
    let policies = load_policies(&read("policies/corpus.txt")).unwrap();
    c.bench_function("map_sample_corpus", |b| {
        b.iter(|| {
            policies
                .iter()
                .map(|p| map_policy_to_articles(p, &index, &config, &ExtractiveBackend).unwrap().articles.len())
                .sum::<usize>()
        })
    });
}

fn inference(c: &mut Criterion) {
    let (doc, mut g) = regulation_graph();
    for p in ["a.example", "b.example", "c.example", "d.example"] {
        populate_provider(&mut g, p, &doc.regulation_id).unwrap();
    }
    let rules = builtin_rules(&default_roles()).unwrap();
    c.bench_function("infer_four_providers", |b| {
        b.iter_batched(|| g.clone(), |g| infer_fixpoint(&g, &rules).unwrap().len(), BatchSize::SmallInput)
    });
}

criterion_group!(benches, regulation, retrieval, inference);
criterion_main!(benches);
