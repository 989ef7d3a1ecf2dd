//! Regulation knowledge graph, retrieval-grounded policy mapping, rule
//! inference and compliance gap reporting.

pub mod compliance;
pub mod eval;
pub mod kg;
pub mod policy;
pub mod rag;
pub mod regulation;
pub mod retrieval;
pub mod rules;

pub use compliance::{compute_gap, record_compliance, render_report, ComplianceError, ComplianceReport, ReportFormat};
pub use eval::{correctness_at, render_sweep_table, sweep, CorrectnessResult, EvalError, SweepConfig};
pub use kg::{Graph, Iri, KgError, Literal, Object, Term, Triple, TriplePattern};
pub use policy::{GroundTruth, PolicyDocument, PolicyError, PolicySegment};
pub use rag::{
    map_policy_to_articles, ExternalBackend, ExtractiveBackend, GeneratorBackend, PolicyArticleMap, RagError,
};
pub use regulation::{ArticleChunk, ObligationAssignment, ObligationRole, RegulationDoc, RegulationError};
pub use retrieval::{build_index, Index, RetrievalError, RetrievalHit, RetrieverConfig};
pub use rules::{builtin_rules, infer_fixpoint, Rule, RuleAtom, RuleError, RuleSet};
