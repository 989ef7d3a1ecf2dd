//! Achieved compliance, required-minus-complied gaps and report rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::kg::schema::CC_NS;
use crate::kg::{vocab, Graph, Iri, Literal, Object, Triple};

const EXCERPT_CHARS: usize = 160;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ComplianceError {
    #[error("provider `{0}` is not in the graph")]
    UnknownProvider(String),
    #[error("article {0} is not in the graph")]
    UnknownArticle(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Human,
    Machine,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArticleDetail {
    pub number: u32,
    pub iri: Iri,
    pub title: Option<String>,
    pub excerpt: String,
    pub url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplianceReport {
    pub provider_id: String,
    pub required: BTreeSet<u32>,
    pub complied: BTreeSet<u32>,
    pub missing: BTreeSet<u32>,
    /// Detail for every required or complied article.
    pub details: BTreeMap<u32, ArticleDetail>,
}

impl ComplianceReport {
    pub fn is_fully_compliant(&self) -> bool {
        self.missing.is_empty()
    }
}

fn provider_node(graph: &Graph, provider_id: &str) -> Result<Iri, ComplianceError> {
    let unknown = || ComplianceError::UnknownProvider(provider_id.to_string());
    let iri = Iri::new(provider_iri_str(provider_id)).map_err(|_| unknown())?;
    let v = vocab();
    if graph.contains(&Triple::new(iri.clone(), v.rdf_type.clone(), v.providers.clone())) {
        Ok(iri)
    } else {
        Err(unknown())
    }
}

fn provider_iri_str(provider_id: &str) -> String {
    format!("{CC_NS}{provider_id}")
}

/// Article nodes carrying the given section index.
pub fn articles_with_index(graph: &Graph, number: u32) -> Vec<Iri> {
    let v = vocab();
    let index = Object::Literal(Literal::integer(number.into()));
    graph
        .subjects(&v.has_section_index, &index)
        .filter(|a| graph.contains(&Triple::new((*a).clone(), v.rdf_type.clone(), v.article_class.clone())))
        .cloned()
        .collect()
}

/// Section index of an article node.
pub fn article_number(graph: &Graph, article: &Iri) -> Option<u32> {
    graph
        .objects(article, &vocab().has_section_index)
        .find_map(|o| o.as_literal()?.as_integer())
        .and_then(|n| u32::try_from(n).ok())
}

/// Asserts `compliesWithSection` from the provider to each article.
/// Returns the number of triples added; repeating a call adds none.
pub fn record_compliance(
    graph: &mut Graph,
    provider_id: &str,
    articles: &BTreeSet<u32>,
) -> Result<usize, ComplianceError> {
    let provider = provider_node(graph, provider_id)?;
    let mut targets = Vec::new();
    for &n in articles {
        let nodes = articles_with_index(graph, n);
        if nodes.is_empty() {
            return Err(ComplianceError::UnknownArticle(n));
        }
        targets.extend(nodes);
    }
    let complies = &vocab().complies_with_section;
    Ok(graph.extend(
        targets
            .into_iter()
            .map(|a| Triple::new(provider.clone(), complies.clone(), a)),
    ))
}

fn excerpt(text: &str) -> String {
    let flat = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if flat.chars().count() <= EXCERPT_CHARS {
        return flat;
    }
    let cut: String = flat.chars().take(EXCERPT_CHARS).collect();
    let cut = match cut.rfind(' ') {
        Some(i) if i > EXCERPT_CHARS / 2 => &cut[..i],
        _ => &cut,
    };
    format!("{cut}...")
}

fn detail(graph: &Graph, article: &Iri, number: u32) -> ArticleDetail {
    let v = vocab();
    let lexical = |p: &Iri| {
        graph
            .objects(article, p)
            .find_map(|o| o.as_literal().map(|l| l.lexical().to_string()))
    };
    ArticleDetail {
        number,
        iri: article.clone(),
        title: lexical(&v.label),
        excerpt: lexical(&v.has_section_text).map(|t| excerpt(&t)).unwrap_or_default(),
        url: lexical(&v.has_section_url),
    }
}

fn linked_articles(graph: &Graph, provider: &Iri, predicate: &Iri) -> BTreeMap<u32, Iri> {
    graph
        .objects(provider, predicate)
        .filter_map(|o| {
            let a = o.as_iri()?;
            Some((article_number(graph, a)?, a.clone()))
        })
        .collect()
}

/// Required articles are the `requiresComplianceWith` objects of the
/// provider, complied ones the `compliesWithSection` objects. Objects
/// without a section index are ignored.
pub fn compute_gap(graph: &Graph, provider_id: &str) -> Result<ComplianceReport, ComplianceError> {
    let provider = provider_node(graph, provider_id)?;
    let v = vocab();
    let required = linked_articles(graph, &provider, &v.requires_compliance_with);
    let complied = linked_articles(graph, &provider, &v.complies_with_section);
    let details = required
        .iter()
        .chain(&complied)
        .map(|(&n, a)| (n, detail(graph, a, n)))
        .collect();
    let required: BTreeSet<u32> = required.into_keys().collect();
    let complied: BTreeSet<u32> = complied.into_keys().collect();
    Ok(ComplianceReport {
        provider_id: provider_id.to_string(),
        missing: required.difference(&complied).copied().collect(),
        required,
        complied,
        details,
    })
}

/// Providers typed in the graph, by id.
pub fn providers(graph: &Graph) -> Vec<String> {
    let v = vocab();
    let mut out: Vec<String> = graph
        .subjects(&v.rdf_type, &Object::Iri(v.providers.clone()))
        .filter_map(|p| p.as_str().strip_prefix(CC_NS).map(str::to_string))
        .collect();
    out.sort();
    out
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn render_report(report: &ComplianceReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Machine => render_machine(report),
        ReportFormat::Human => render_human(report),
    }
}

fn render_machine(r: &ComplianceReport) -> String {
    let mut out = format!(
        "provider {} required {} complied {} missing {}\n",
        r.provider_id,
        r.required.len(),
        r.complied.len(),
        r.missing.len()
    );
    for n in &r.missing {
        match r.details.get(n).and_then(|d| d.title.as_deref()).map(one_line) {
            Some(t) if !t.is_empty() => {
                let _ = writeln!(out, "missing {n} {t}");
            }
            _ => {
                let _ = writeln!(out, "missing {n}");
            }
        }
    }
    out
}

fn render_human(r: &ComplianceReport) -> String {
    let mut out = format!("Compliance report for {}\n", r.provider_id);
    let _ = writeln!(out, "  required articles: {}", r.required.len());
    let _ = writeln!(out, "  complied articles: {}", r.complied.len());
    if r.missing.is_empty() {
        let _ = writeln!(
            out,
            "  status: fully compliant, all {} required articles are addressed",
            r.required.len()
        );
        return out;
    }
    let k = r.missing.len();
    let (noun, verb) = if k == 1 { ("article", "is") } else { ("articles", "are") };
    let _ = writeln!(out, "  status: {k} required {noun} {verb} not addressed");
    out.push('\n');
    for n in &r.missing {
        let d = r.details.get(n);
        let title = d.and_then(|d| d.title.as_deref()).map(one_line);
        match title {
            Some(t) => {
                let _ = writeln!(out, "  Art. {n}  {t}");
            }
            None => {
                let _ = writeln!(out, "  Art. {n}");
            }
        }
        if let Some(url) = d.and_then(|d| d.url.as_deref()) {
            let _ = writeln!(out, "      {url}");
        }
        if let Some(ex) = d.map(|d| d.excerpt.as_str()).filter(|e| !e.is_empty()) {
            let _ = writeln!(out, "      {ex}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{annotate_labels, populate_provider, populate_regulation, provider_iri, Term, TriplePattern};
    use crate::regulation::{parse_regulation, ObligationAssignment, ObligationRole};
    use crate::rules::{builtin_rules, default_roles, infer_fixpoint};
    use proptest::prelude::*;

    fn regulation(n: u32) -> String {
        let mut s = String::from("#REG GDPR Test regulation\n#CH 1 Only\n");
        for a in 1..=n {
            s.push_str(&format!("#ART {a} Title {a} https://example.org/art-{a}\n#P 1\nText of article {a}.\n"));
        }
        s
    }

    /// Graph where `required` articles carry provider obligations for `p.com`.
    fn scenario(n: u32, required: &BTreeSet<u32>) -> Graph {
        let doc = parse_regulation(&regulation(n)).unwrap();
        let obligations: Vec<_> = required
            .iter()
            .map(|&a| ObligationAssignment { article_number: a, role: ObligationRole::Provider })
            .collect();
        let mut g = Graph::new();
        populate_regulation(&mut g, &doc, &obligations).unwrap();
        annotate_labels(&mut g, &doc);
        populate_provider(&mut g, "p.com", "GDPR").unwrap();
        infer_fixpoint(&g, &builtin_rules(&default_roles()).unwrap()).unwrap()
    }

    #[test]
    fn record_is_idempotent() {
        let mut g = scenario(30, &BTreeSet::new());
        let before = g.len();
        assert_eq!(record_compliance(&mut g, "p.com", &BTreeSet::from([5, 21])), Ok(2));
        assert_eq!(g.len(), before + 2);
        assert_eq!(record_compliance(&mut g, "p.com", &BTreeSet::from([5, 21])), Ok(0));
        assert_eq!(g.len(), before + 2);
    }

    #[test]
    fn record_errors() {
        let mut g = scenario(5, &BTreeSet::new());
        assert_eq!(
            record_compliance(&mut g, "p.com", &BTreeSet::from([2, 999])),
            Err(ComplianceError::UnknownArticle(999))
        );
        assert_eq!(
            record_compliance(&mut g, "q.com", &BTreeSet::from([2])),
            Err(ComplianceError::UnknownProvider("q.com".into()))
        );
        assert_eq!(compute_gap(&g, "q.com"), Err(ComplianceError::UnknownProvider("q.com".into())));
    }

    #[test]
    fn simple_gap() {
        let mut g = scenario(10, &(1..=5).collect());
        record_compliance(&mut g, "p.com", &BTreeSet::from([2, 4])).unwrap();
        let r = compute_gap(&g, "p.com").unwrap();
        assert_eq!(r.missing, BTreeSet::from([1, 3, 5]));
        assert_eq!(r.details[&3].title.as_deref(), Some("Title 3"));
        assert_eq!(r.details[&3].url.as_deref(), Some("https://example.org/art-3"));
        assert_eq!(r.details[&3].excerpt, "Text of article 3.");
    }

    #[test]
    fn forty_seven_required_seven_complied() {
        let required: BTreeSet<u32> = (1..=47).collect();
        let mut g = scenario(99, &required);
        record_compliance(&mut g, "p.com", &(1..=7).collect()).unwrap();
        let r = compute_gap(&g, "p.com").unwrap();
        assert_eq!((r.required.len(), r.complied.len(), r.missing.len()), (47, 7, 40));
        let machine = render_report(&r, ReportFormat::Machine);
        assert!(machine.starts_with("provider p.com required 47 complied 7 missing 40\nmissing 8 Title 8\n"));
        assert_eq!(machine.lines().count(), 41);
    }

    #[test]
    fn fully_compliant_is_explicit() {
        let mut g = scenario(4, &BTreeSet::from([1, 2]));
        record_compliance(&mut g, "p.com", &BTreeSet::from([1, 2, 3])).unwrap();
        let r = compute_gap(&g, "p.com").unwrap();
        assert!(r.is_fully_compliant());
        assert_eq!(r.complied, BTreeSet::from([1, 2, 3]));
        let human = render_report(&r, ReportFormat::Human);
        assert!(human.contains("fully compliant, all 2 required articles are addressed"));
        assert_eq!(
            render_report(&r, ReportFormat::Machine),
            "provider p.com required 2 complied 3 missing 0\n"
        );
    }

    #[test]
    fn human_report_lists_titles_and_urls() {
        let g = scenario(3, &BTreeSet::from([2]));
        let human = render_report(&compute_gap(&g, "p.com").unwrap(), ReportFormat::Human);
        assert!(human.contains("  Art. 2  Title 2\n      https://example.org/art-2\n"));
    }

    #[test]
    fn excerpt_truncates_on_word_boundary() {
        let long = "word ".repeat(100);
        let e = excerpt(&long);
        assert!(e.ends_with("word..."));
        assert!(e.chars().count() <= EXCERPT_CHARS + 3);
    }

    #[test]
    fn providers_are_listed() {
        let mut g = scenario(2, &BTreeSet::new());
        populate_provider(&mut g, "a.org", "GDPR").unwrap();
        assert_eq!(providers(&g), ["a.org", "p.com"]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn gap_matches_pattern_queries(
            required in prop::collection::btree_set(1..=20u32, 0..20),
            complied in prop::collection::btree_set(1..=20u32, 0..20),
        ) {
            let mut g = scenario(20, &required);
            record_compliance(&mut g, "p.com", &complied).unwrap();
            let r = compute_gap(&g, "p.com").unwrap();

            let v = vocab();
            let p = provider_iri("p.com");
            let objects = |pred: &Iri| -> BTreeSet<Object> {
                g.match_pattern(&TriplePattern::new(p.clone(), pred.clone(), Term::var("x")))
                    .into_iter()
                    .map(|b| b["x"].clone())
                    .collect()
            };
            let minus: BTreeSet<u32> = objects(&v.requires_compliance_with)
                .difference(&objects(&v.complies_with_section))
                .map(|o| article_number(&g, o.as_iri().unwrap()).unwrap())
                .collect();
            prop_assert_eq!(&r.missing, &minus);
            prop_assert!(r.missing.is_disjoint(&r.complied));
        }

        #[test]
        fn adding_compliance_removes_only_that_article(
            required in prop::collection::btree_set(1..=15u32, 0..15),
            complied in prop::collection::btree_set(1..=15u32, 0..15),
            extra in 1..=15u32,
        ) {
            let mut g = scenario(15, &required);
            record_compliance(&mut g, "p.com", &complied).unwrap();
            let before = compute_gap(&g, "p.com").unwrap();
            let added = record_compliance(&mut g, "p.com", &BTreeSet::from([extra])).unwrap();
            prop_assert_eq!(added, usize::from(!complied.contains(&extra)));
            let after = compute_gap(&g, "p.com").unwrap();
            let mut expected = before.missing.clone();
            expected.remove(&extra);
            prop_assert_eq!(&after.missing, &expected);
            prop_assert_eq!(before.missing.contains(&extra), required.contains(&extra) && !complied.contains(&extra));
        }
    }
}
