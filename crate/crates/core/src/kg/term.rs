use std::fmt;
use std::sync::Arc;

use super::KgError;

/// An absolute identifier. Cheap to clone.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Iri(Arc<str>);

impl Iri {
    pub fn new(value: impl AsRef<str>) -> Result<Self, KgError> {
        let value = value.as_ref();
        if value.is_empty()
            || value
                .chars()
                .any(|c| c.is_whitespace() || matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\'))
        {
            return Err(KgError::InvalidIri(value.to_string()));
        }
        Ok(Iri(Arc::from(value)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    // Sorts before every valid IRI; only used as a range bound.
    pub(crate) fn min_value() -> Self {
        Iri(Arc::from(""))
    }
}

impl fmt::Debug for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.0)
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Datatype {
    String,
    Integer,
    AnyUri,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    lexical: Arc<str>,
    datatype: Datatype,
}

impl Literal {
    pub fn new(lexical: impl AsRef<str>, datatype: Datatype) -> Result<Self, KgError> {
        let lexical = lexical.as_ref();
        if datatype == Datatype::Integer && lexical.parse::<i64>().is_err() {
            return Err(KgError::InvalidLiteral(format!(
                "`{lexical}` is not an integer"
            )));
        }
        Ok(Literal {
            lexical: Arc::from(lexical),
            datatype,
        })
    }

    pub fn string(value: impl AsRef<str>) -> Self {
        Literal {
            lexical: Arc::from(value.as_ref()),
            datatype: Datatype::String,
        }
    }

    pub fn integer(value: i64) -> Self {
        Literal {
            lexical: Arc::from(value.to_string()),
            datatype: Datatype::Integer,
        }
    }

    pub fn any_uri(value: impl AsRef<str>) -> Self {
        Literal {
            lexical: Arc::from(value.as_ref()),
            datatype: Datatype::AnyUri,
        }
    }

    pub fn lexical(&self) -> &str {
        &self.lexical
    }

    pub fn datatype(&self) -> Datatype {
        self.datatype
    }

    pub fn as_integer(&self) -> Option<i64> {
        match self.datatype {
            Datatype::Integer => self.lexical.parse().ok(),
            _ => None,
        }
    }
}

/// A ground value in object position.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Object {
    Iri(Iri),
    Literal(Literal),
}

impl Object {
    pub fn as_iri(&self) -> Option<&Iri> {
        match self {
            Object::Iri(i) => Some(i),
            Object::Literal(_) => None,
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            Object::Literal(l) => Some(l),
            Object::Iri(_) => None,
        }
    }
}

impl From<Iri> for Object {
    fn from(i: Iri) -> Self {
        Object::Iri(i)
    }
}

impl From<Literal> for Object {
    fn from(l: Literal) -> Self {
        Object::Literal(l)
    }
}

/// A pattern or rule-atom position: a ground value or a named variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Iri(Iri),
    Literal(Literal),
    Var(Arc<str>),
}

impl Term {
    pub fn var(name: impl AsRef<str>) -> Self {
        Term::Var(Arc::from(name.as_ref().trim_start_matches('?')))
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn var_name(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_object(&self) -> Option<Object> {
        match self {
            Term::Iri(i) => Some(Object::Iri(i.clone())),
            Term::Literal(l) => Some(Object::Literal(l.clone())),
            Term::Var(_) => None,
        }
    }
}

impl From<Iri> for Term {
    fn from(i: Iri) -> Self {
        Term::Iri(i)
    }
}

impl From<Literal> for Term {
    fn from(l: Literal) -> Self {
        Term::Literal(l)
    }
}

impl From<Object> for Term {
    fn from(o: Object) -> Self {
        match o {
            Object::Iri(i) => Term::Iri(i),
            Object::Literal(l) => Term::Literal(l),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(i) => write!(f, "<{i}>"),
            Term::Literal(l) => write!(f, "{:?}", l.lexical()),
            Term::Var(v) => write!(f, "?{v}"),
        }
    }
}

/// A ground subject-predicate-object assertion.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: Iri,
    pub predicate: Iri,
    pub object: Object,
}

impl Triple {
    pub fn new(subject: Iri, predicate: Iri, object: impl Into<Object>) -> Self {
        Triple {
            subject,
            predicate,
            object: object.into(),
        }
    }

    /// Builds a triple from pattern terms, rejecting variables and literal
    /// subjects or predicates.
    pub fn from_terms(subject: &Term, predicate: &Term, object: &Term) -> Result<Self, KgError> {
        if subject.is_var() || predicate.is_var() || object.is_var() {
            return Err(KgError::NonGroundTriple);
        }
        let subject = match subject {
            Term::Iri(i) => i.clone(),
            _ => return Err(KgError::InvalidPosition("subject must be an IRI")),
        };
        let predicate = match predicate {
            Term::Iri(i) => i.clone(),
            _ => return Err(KgError::InvalidPosition("predicate must be an IRI")),
        };
        let object = object.as_object().expect("checked non-variable");
        Ok(Triple {
            subject,
            predicate,
            object,
        })
    }
}

/// A triple pattern; any position may hold a variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TriplePattern {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

impl TriplePattern {
    pub fn new(subject: impl Into<Term>, predicate: impl Into<Term>, object: impl Into<Term>) -> Self {
        TriplePattern {
            subject: subject.into(),
            predicate: predicate.into(),
            object: object.into(),
        }
    }

    pub fn terms(&self) -> [&Term; 3] {
        [&self.subject, &self.predicate, &self.object]
    }
}
