//! In-memory triple store, Turtle import/export and the compliance schema.

mod graph;
pub mod schema;
mod term;
mod turtle;

pub use graph::{substitute, Binding, Graph};
pub use schema::{
    annotate_labels, article_iri, cc, chapter_iri, populate_provider, populate_regulation,
    provider_iri, regulation_iri, vocab, Vocabulary,
};
pub use term::{Datatype, Iri, Literal, Object, Term, Triple, TriplePattern};
pub use turtle::{parse_turtle, serialize_turtle};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KgError {
    #[error("triple contains a variable")]
    NonGroundTriple,
    #[error("invalid term position: {0}")]
    InvalidPosition(&'static str),
    #[error("invalid IRI `{0}`")]
    InvalidIri(String),
    #[error("invalid literal: {0}")]
    InvalidLiteral(String),
    #[error("turtle syntax error at line {line}: {message}")]
    TurtleSyntax { line: usize, message: String },
    #[error("article {0} is not part of the regulation")]
    UnknownArticle(u32),
    #[error("invalid provider id `{0}`")]
    InvalidProviderId(String),
}
