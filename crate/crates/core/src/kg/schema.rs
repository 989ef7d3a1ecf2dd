//! Compliance knowledge-graph vocabulary and population routines.

use std::collections::HashSet;
use std::sync::OnceLock;

use super::term::{Iri, Literal, Triple};
use super::{Graph, KgError};
use crate::policy::is_valid_provider_id;
use crate::regulation::{ObligationAssignment, ObligationRole, RegulationDoc};

pub const CC_NS: &str = "https://privcomp.example/ns#";
pub const RDF_NS: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
pub const RDFS_NS: &str = "http://www.w3.org/2000/01/rdf-schema#";
pub const XSD_NS: &str = "http://www.w3.org/2001/XMLSchema#";
pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";

/// An IRI in the `cc:` namespace.
///
/// # Panics
///
/// If `local` contains characters not allowed in an IRI.
pub fn cc(local: &str) -> Iri {
    Iri::new(format!("{CC_NS}{local}")).expect("valid local name")
}

#[derive(Debug)]
pub struct Vocabulary {
    pub rdf_type: Iri,
    pub label: Iri,

    pub providers: Iri,
    pub regulations: Iri,
    pub chapter_class: Iri,
    pub article_class: Iri,
    pub obligation_class: Iri,

    pub has_regulation: Iri,
    pub complies_with_section: Iri,
    pub requires_compliance_with: Iri,
    pub part_of_chapter: Iri,
    pub defines_obligations_for: Iri,

    pub has_chapter_index: Iri,
    pub has_section_index: Iri,
    pub has_section_text: Iri,
    pub has_section_url: Iri,
}

impl Vocabulary {
    pub fn role_instance(&self, role: ObligationRole) -> Iri {
        cc(role.instance_name())
    }

    pub fn all_terms(&self) -> Vec<Iri> {
        let mut v = vec![
            self.rdf_type.clone(),
            self.label.clone(),
            self.providers.clone(),
            self.regulations.clone(),
            self.chapter_class.clone(),
            self.article_class.clone(),
            self.obligation_class.clone(),
            self.has_regulation.clone(),
            self.complies_with_section.clone(),
            self.requires_compliance_with.clone(),
            self.part_of_chapter.clone(),
            self.defines_obligations_for.clone(),
            self.has_chapter_index.clone(),
            self.has_section_index.clone(),
            self.has_section_text.clone(),
            self.has_section_url.clone(),
        ];
        v.extend(ObligationRole::ALL.map(|r| self.role_instance(r)));
        v
    }
}

pub fn vocab() -> &'static Vocabulary {
    static VOCAB: OnceLock<Vocabulary> = OnceLock::new();
    VOCAB.get_or_init(|| Vocabulary {
        rdf_type: Iri::new(RDF_TYPE).unwrap(),
        label: Iri::new(RDFS_LABEL).unwrap(),
        providers: cc("Providers"),
        regulations: cc("Regulations"),
        chapter_class: cc("GDPR_Chapter"),
        article_class: cc("GDPR_Articles"),
        obligation_class: cc("GDPR_Obligations"),
        has_regulation: cc("hasRegulation"),
        complies_with_section: cc("compliesWithSection"),
        requires_compliance_with: cc("requiresComplianceWith"),
        part_of_chapter: cc("partOfChapter"),
        defines_obligations_for: cc("definesObligationsFor"),
        has_chapter_index: cc("hasChapterIndex"),
        has_section_index: cc("hasSectionIndex"),
        has_section_text: cc("hasSectionText"),
        has_section_url: cc("hasSectionURL"),
    })
}

pub fn regulation_iri(regulation_id: &str) -> Iri {
    cc(regulation_id)
}

pub fn chapter_iri(regulation_id: &str, index: u32) -> Iri {
    cc(&format!("{regulation_id}_Chapter_{index}"))
}

pub fn article_iri(regulation_id: &str, number: u32) -> Iri {
    cc(&format!("{regulation_id}_Article_{number}"))
}

pub fn provider_iri(provider_id: &str) -> Iri {
    cc(provider_id)
}

/// Adds chapters, articles, the five obligation instances and the
/// `definesObligationsFor` links.
pub fn populate_regulation(
    graph: &mut Graph,
    doc: &RegulationDoc,
    obligations: &[ObligationAssignment],
) -> Result<(), KgError> {
    let v = vocab();
    let known: HashSet<u32> = doc.articles().map(|(_, a)| a.number).collect();
    if let Some(bad) = obligations.iter().find(|o| !known.contains(&o.article_number)) {
        return Err(KgError::UnknownArticle(bad.article_number));
    }
    let reg = doc.regulation_id.as_str();

    for ch in &doc.chapters {
        let chapter = chapter_iri(reg, ch.index);
        graph.insert(Triple::new(chapter.clone(), v.rdf_type.clone(), v.chapter_class.clone()));
        graph.insert(Triple::new(
            chapter.clone(),
            v.has_chapter_index.clone(),
            Literal::integer(ch.index.into()),
        ));
        for art in &ch.articles {
            let article = article_iri(reg, art.number);
            graph.insert(Triple::new(article.clone(), v.rdf_type.clone(), v.article_class.clone()));
            graph.insert(Triple::new(
                article.clone(),
                v.has_section_index.clone(),
                Literal::integer(art.number.into()),
            ));
            graph.insert(Triple::new(
                article.clone(),
                v.has_section_text.clone(),
                Literal::string(art.full_text()),
            ));
            if let Some(url) = &art.source_url {
                graph.insert(Triple::new(
                    article.clone(),
                    v.has_section_url.clone(),
                    Literal::any_uri(url),
                ));
            }
            graph.insert(Triple::new(article, v.part_of_chapter.clone(), chapter.clone()));
        }
    }

    for role in ObligationRole::ALL {
        graph.insert(Triple::new(
            v.role_instance(role),
            v.rdf_type.clone(),
            v.obligation_class.clone(),
        ));
    }
    for o in obligations {
        graph.insert(Triple::new(
            article_iri(reg, o.article_number),
            v.defines_obligations_for.clone(),
            v.role_instance(o.role),
        ));
    }
    Ok(())
}

/// Adds `rdfs:label` titles for the regulation, its chapters and articles.
pub fn annotate_labels(graph: &mut Graph, doc: &RegulationDoc) {
    let v = vocab();
    let reg = doc.regulation_id.as_str();
    graph.insert(Triple::new(regulation_iri(reg), v.label.clone(), Literal::string(&doc.title)));
    for ch in &doc.chapters {
        graph.insert(Triple::new(chapter_iri(reg, ch.index), v.label.clone(), Literal::string(&ch.title)));
        for art in &ch.articles {
            graph.insert(Triple::new(
                article_iri(reg, art.number),
                v.label.clone(),
                Literal::string(&art.title),
            ));
        }
    }
}

/// Types the provider and links it to its regulation.
pub fn populate_provider(graph: &mut Graph, provider_id: &str, regulation_id: &str) -> Result<(), KgError> {
    if !is_valid_provider_id(provider_id) {
        return Err(KgError::InvalidProviderId(provider_id.to_string()));
    }
    let v = vocab();
    let provider = provider_iri(provider_id);
    let regulation = Iri::new(format!("{CC_NS}{regulation_id}"))?;
    graph.insert(Triple::new(provider.clone(), v.rdf_type.clone(), v.providers.clone()));
    graph.insert(Triple::new(provider, v.has_regulation.clone(), regulation.clone()));
    graph.insert(Triple::new(regulation, v.rdf_type.clone(), v.regulations.clone()));
    Ok(())
}
