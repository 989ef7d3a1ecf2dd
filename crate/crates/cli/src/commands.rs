use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use privcomp::compliance::{compute_gap, providers, record_compliance, render_report, ReportFormat};
use privcomp::eval::{render_reference_table, render_sweep_table, sweep as run_sweep, SweepConfig};
use privcomp::kg::{
    annotate_labels, parse_turtle, populate_provider, populate_regulation, article_iri, serialize_turtle, vocab,
    Graph,
};
use privcomp::policy::{filter_short_segments, load_ground_truth, load_policies, PolicyDocument};
use privcomp::rag::{map_policy_with_fallback, Endpoint, ExternalBackend, ExtractiveBackend, GeneratorBackend, MapOptions, PolicyArticleMap};
use privcomp::regulation::{chunk_regulation, load_obligation_map, parse_regulation, ObligationRole};
use privcomp::retrieval::{build_index, RetrieverConfig};
use privcomp::rules::{builtin_rules, infer_fixpoint, parse_rules, RuleSet};
use sha2::{Digest, Sha256};

use crate::{Backend, CheckArgs, Format, GapsArgs, InferenceArgs, IngestArgs, SweepArgs};

pub const DEFAULT_THRESHOLD: f64 = 0.8;
pub const DEFAULT_TOP_K: usize = 2;
pub const DEFAULT_MIN_TOKENS: usize = 10;
pub const DEFAULT_SWEEP: [f64; 9] = [0.5, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95];

const EXIT_OK: u8 = 0;
const EXIT_GAPS: u8 = 1;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn report_format(f: Format) -> ReportFormat {
    match f {
        Format::Human => ReportFormat::Human,
        Format::Machine => ReportFormat::Machine,
    }
}

/// Built-in role rules plus the optional rule file. Returns the rule file
/// text too, for the digest line.
fn load_rules(args: &InferenceArgs) -> Result<(RuleSet, Option<String>)> {
    let roles = args
        .roles
        .iter()
        .map(|r| r.trim().parse::<ObligationRole>().map_err(|e| anyhow!("unknown role `{}`", e.0)))
        .collect::<Result<BTreeSet<_>>>()?;
    if roles.is_empty() {
        bail!("--roles needs at least one role");
    }
    let builtin = builtin_rules(&roles)?;
    match &args.rules {
        None => Ok((builtin, None)),
        Some(path) => {
            let text = read(path)?;
            let extra = parse_rules(&text).with_context(|| format!("in {}", path.display()))?;
            Ok((builtin.merged(&extra)?, Some(text)))
        }
    }
}

fn retriever(threshold: f64, top_k: usize) -> Result<RetrieverConfig> {
    let config = RetrieverConfig::new(threshold)?;
    Ok(if top_k == 0 { config } else { config.with_top_k(top_k)? })
}

fn role_list(args: &InferenceArgs) -> String {
    let mut roles: Vec<&str> = args.roles.iter().map(|r| r.trim()).collect();
    roles.sort();
    roles.join(",")
}

pub fn ingest(args: IngestArgs) -> Result<u8> {
    let source = read(&args.regulation)?;
    let doc = parse_regulation(&source).with_context(|| format!("in {}", args.regulation.display()))?;
    let obligations = load_obligation_map(&read(&args.obligations)?, &doc)
        .with_context(|| format!("in {}", args.obligations.display()))?;

    let mut graph = Graph::new();
    populate_regulation(&mut graph, &doc, &obligations)?;
    annotate_labels(&mut graph, &doc);
    let turtle = serialize_turtle(&graph);

    let summary = format!(
        "chapters {} articles {} chunks {}",
        doc.chapters.len(),
        doc.article_count(),
        chunk_regulation(&doc).len()
    );
    match &args.out {
        Some(path) => {
            write(path, &turtle)?;
            println!("{summary}");
        }
        None => {
            print!("{turtle}");
            eprintln!("{summary}");
        }
    }
    Ok(EXIT_OK)
}

fn external_backend(args: &CheckArgs) -> Result<ExternalBackend> {
    let spec = args
        .external_endpoint
        .as_deref()
        .filter(|s| !s.trim().is_empty())
        .ok_or_else(|| anyhow!("--backend external needs --external-endpoint or {}", crate::ENDPOINT_ENV))?;
    Ok(ExternalBackend::new(
        Endpoint::parse(spec.trim()),
        Duration::from_millis(args.external_timeout_ms),
    ))
}

fn render_answers(maps: &[PolicyArticleMap]) -> String {
    let mut out = String::new();
    for m in maps {
        for seg in m.segments.values() {
            let articles: Vec<String> = seg.articles.iter().map(|(a, _)| a.to_string()).collect();
            let _ = writeln!(out, "== {} {} articles [{}]", m.provider_id, seg.segment_id, articles.join(", "));
            match &seg.response {
                Some(r) => {
                    let _ = writeln!(out, "backend {}", r.backend_used);
                    let _ = writeln!(out, "{}", r.answer_text.trim_end());
                }
                None => out.push_str("backend none\n"),
            }
        }
    }
    out
}

pub fn check(args: CheckArgs) -> Result<u8> {
    if !(args.threshold.is_finite() && args.threshold > 0.0) {
        bail!("--threshold must be a positive number");
    }
    let kg_text = read(&args.kg)?;
    let reg_text = read(&args.regulation)?;
    let pol_text = read(&args.policies)?;
    let (rules, rules_text) = load_rules(&args.inference)?;

    let mut graph = parse_turtle(&kg_text).with_context(|| format!("in {}", args.kg.display()))?;
    let doc = parse_regulation(&reg_text).with_context(|| format!("in {}", args.regulation.display()))?;
    let missing = doc
        .articles()
        .find(|(_, a)| graph.objects(&article_iri(&doc.regulation_id, a.number), &vocab().rdf_type).next().is_none());
    if let Some((_, a)) = missing {
        bail!("article {} of `{}` is not in {}; run ingest first", a.number, doc.regulation_id, args.kg.display());
    }
    let policies = load_policies(&pol_text).with_context(|| format!("in {}", args.policies.display()))?;
    let kept = filter_short_segments(&policies, args.min_tokens);

    let config = retriever(args.threshold, args.top_k)?;
    let index = build_index(&chunk_regulation(&doc), &config)?;

    let external = match args.backend {
        Backend::External => Some(external_backend(&args)?),
        Backend::Extractive => None,
    };
    let backend: &dyn GeneratorBackend = match &external {
        Some(b) => b,
        None => &ExtractiveBackend,
    };
    let fallback: Option<&dyn GeneratorBackend> = external.as_ref().map(|_| &ExtractiveBackend as _);

    let format = report_format(args.format);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "inputs sha256 kg {} regulation {} policies {} rules {}",
        digest(&kg_text),
        digest(&reg_text),
        digest(&pol_text),
        rules_text.as_deref().map_or_else(|| "none".to_string(), digest)
    );
    let _ = writeln!(
        out,
        "settings threshold {} top_k {} min_tokens {} roles {} backend {}",
        args.threshold,
        args.top_k,
        args.min_tokens,
        role_list(&args.inference),
        match args.backend {
            Backend::Extractive => "extractive",
            Backend::External => "external",
        }
    );

    let mut maps = Vec::new();
    let mut all_compliant = true;
    for policy in &policies {
        let id = &policy.provider_id;
        let articles = match kept.iter().find(|p| &p.provider_id == id) {
            Some(p) => {
                let map = map_policy_with_fallback(p, &index, &config, backend, fallback, &MapOptions::default())?;
                for f in &map.failures {
                    eprintln!(
                        "notice: BackendUnavailable provider {id} segment {}: {}; answered by {}",
                        f.segment_id,
                        f.error,
                        f.fallback.as_deref().unwrap_or("nothing")
                    );
                }
                let set = map.articles.clone();
                maps.push(map);
                set
            }
            None => {
                eprintln!("notice: provider {id} has no segments of at least {} tokens", args.min_tokens);
                BTreeSet::new()
            }
        };
        populate_provider(&mut graph, id, &doc.regulation_id)?;
        record_compliance(&mut graph, id, &articles)?;
        graph = infer_fixpoint(&graph, &rules)?;
        let report = compute_gap(&graph, id)?;
        all_compliant &= report.is_fully_compliant();
        if format == ReportFormat::Human {
            out.push('\n');
        }
        out.push_str(&render_report(&report, format));
    }

    if let Some(path) = &args.out {
        write(path, &serialize_turtle(&graph))?;
    }
    if let Some(path) = &args.answers {
        write(path, &render_answers(&maps))?;
    }
    match &args.report {
        Some(path) => write(path, &out)?,
        None => print!("{out}"),
    }
    Ok(if all_compliant { EXIT_OK } else { EXIT_GAPS })
}

pub fn gaps(args: GapsArgs) -> Result<u8> {
    let kg_text = read(&args.kg)?;
    let (rules, rules_text) = load_rules(&args.inference)?;
    let graph = parse_turtle(&kg_text).with_context(|| format!("in {}", args.kg.display()))?;
    if !providers(&graph).contains(&args.provider) {
        bail!("provider `{}` is not in {}", args.provider, args.kg.display());
    }
    // Inference is idempotent, so re-running it on a checked graph is safe
    // and covers graphs that only carry compliance facts.
    let graph = infer_fixpoint(&graph, &rules)?;
    let report = compute_gap(&graph, &args.provider)?;

    let mut out = format!(
        "inputs sha256 kg {} rules {}\n",
        digest(&kg_text),
        rules_text.as_deref().map_or_else(|| "none".to_string(), digest)
    );
    out.push_str(&render_report(&report, report_format(args.format)));
    match &args.out {
        Some(path) => write(path, &out)?,
        None => print!("{out}"),
    }
    Ok(if report.is_fully_compliant() { EXIT_OK } else { EXIT_GAPS })
}

pub fn sweep(args: SweepArgs) -> Result<u8> {
    let reg_text = read(&args.regulation)?;
    let pol_text = read(&args.policies)?;
    let truth_text = read(&args.truth)?;
    let doc = parse_regulation(&reg_text).with_context(|| format!("in {}", args.regulation.display()))?;
    let policies: Vec<PolicyDocument> =
        load_policies(&pol_text).with_context(|| format!("in {}", args.policies.display()))?;
    let truth = load_ground_truth(&truth_text, &policies).with_context(|| format!("in {}", args.truth.display()))?;

    let first = *args.thresholds.first().ok_or_else(|| anyhow!("--thresholds is empty"))?;
    let config = SweepConfig::new(args.thresholds.clone(), args.min_tokens, retriever(first, args.top_k)?)?;
    let results = run_sweep(&chunk_regulation(&doc), &policies, &truth, &config)?;

    let mut out = format!(
        "inputs sha256 regulation {} policies {} truth {}\nsettings top_k {} min_tokens {}\n\n",
        digest(&reg_text),
        digest(&pol_text),
        digest(&truth_text),
        args.top_k,
        args.min_tokens
    );
    out.push_str(&render_sweep_table(&results));
    out.push('\n');
    out.push_str(&render_reference_table());
    print!("{out}");
    if let Some(path) = &args.out {
        write(path, &out)?;
    }
    Ok(EXIT_OK)
}
