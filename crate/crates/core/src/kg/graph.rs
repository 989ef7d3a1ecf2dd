use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::term::{Iri, Object, Term, Triple, TriplePattern};
use super::KgError;

/// Variable name to ground value.
pub type Binding = BTreeMap<String, Object>;

/// A set of ground triples with a predicate index.
///
/// Mutation goes through `&mut self`, so a graph has a single writer at a
/// time; clones are independent snapshots that can be shared across threads.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    triples: BTreeSet<Triple>,
    by_predicate: HashMap<Iri, BTreeSet<(Iri, Object)>>,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.triples == other.triples
    }
}

impl Eq for Graph {}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Triples in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triples.contains(t)
    }

    /// Returns `true` when the triple was not already present.
    pub fn insert(&mut self, t: Triple) -> bool {
        if self.triples.contains(&t) {
            return false;
        }
        self.by_predicate
            .entry(t.predicate.clone())
            .or_default()
            .insert((t.subject.clone(), t.object.clone()));
        self.triples.insert(t)
    }

    /// Asserts a triple given as pattern terms; fails on variables.
    pub fn assert_terms(&mut self, s: &Term, p: &Term, o: &Term) -> Result<bool, KgError> {
        Ok(self.insert(Triple::from_terms(s, p, o)?))
    }

    pub fn with(mut self, t: Triple) -> Self {
        self.insert(t);
        self
    }

    /// Number of triples added.
    pub fn extend<I: IntoIterator<Item = Triple>>(&mut self, triples: I) -> usize {
        triples.into_iter().filter(|t| self.insert(t.clone())).count()
    }

    pub fn is_subset(&self, other: &Graph) -> bool {
        self.triples.is_subset(&other.triples)
    }

    /// Triples with the given predicate, as `(subject, object)` pairs.
    pub fn with_predicate<'a>(&'a self, p: &Iri) -> impl Iterator<Item = &'a (Iri, Object)> + 'a {
        self.by_predicate.get(p).into_iter().flatten()
    }

    /// Objects of `(subject, predicate, ?)`.
    pub fn objects<'a>(&'a self, s: &'a Iri, p: &Iri) -> impl Iterator<Item = &'a Object> + 'a {
        self.with_predicate(p)
            .filter(move |(subj, _)| subj == s)
            .map(|(_, o)| o)
    }

    /// Subjects of `(?, predicate, object)`.
    pub fn subjects<'a>(&'a self, p: &Iri, o: &'a Object) -> impl Iterator<Item = &'a Iri> + 'a {
        self.with_predicate(p)
            .filter(move |(_, obj)| obj == o)
            .map(|(s, _)| s)
    }

    /// All bindings under which `pattern` becomes a triple of this graph,
    /// sorted by bound values. A ground pattern yields one empty binding
    /// when present and none otherwise.
    pub fn match_pattern(&self, pattern: &TriplePattern) -> Vec<Binding> {
        let mut out = Vec::new();
        self.for_each_match(pattern, &Binding::new(), |b| out.push(b));
        out.sort();
        out
    }

    /// Calls `f` with every extension of `seed` matching `pattern`, in
    /// unspecified order.
    pub fn for_each_match(&self, pattern: &TriplePattern, seed: &Binding, mut f: impl FnMut(Binding)) {
        let s = resolve(&pattern.subject, seed);
        let p = resolve(&pattern.predicate, seed);
        let o = resolve(&pattern.object, seed);

        let mut try_triple = |subj: &Iri, pred: &Iri, obj: &Object| {
            let mut b = seed.clone();
            if unify(&s, &Object::Iri(subj.clone()), &mut b)
                && unify(&p, &Object::Iri(pred.clone()), &mut b)
                && unify(&o, obj, &mut b)
            {
                f(b);
            }
        };

        match &p {
            Term::Iri(pred) => {
                let Some(pairs) = self.by_predicate.get(pred) else {
                    return;
                };
                match &s {
                    Term::Iri(subj) => {
                        for (ps, po) in pairs.range(lower_bound(subj)..) {
                            if ps != subj {
                                break;
                            }
                            try_triple(ps, pred, po);
                        }
                    }
                    _ => {
                        for (ps, po) in pairs {
                            try_triple(ps, pred, po);
                        }
                    }
                }
            }
            Term::Literal(_) => {}
            Term::Var(_) => {
                for t in &self.triples {
                    try_triple(&t.subject, &t.predicate, &t.object);
                }
            }
        }
    }
}

impl FromIterator<Triple> for Graph {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        let mut g = Graph::new();
        g.extend(iter);
        g
    }
}

impl<'a> IntoIterator for &'a Graph {
    type Item = &'a Triple;
    type IntoIter = std::collections::btree_set::Iter<'a, Triple>;

    fn into_iter(self) -> Self::IntoIter {
        self.triples.iter()
    }
}

// Smallest (subject, object) pair for `subj`: IRI objects sort before
// literals, and the empty-string IRI sorts first among IRIs.
fn lower_bound(subj: &Iri) -> (Iri, Object) {
    (subj.clone(), Object::Iri(Iri::min_value()))
}

fn resolve(t: &Term, b: &Binding) -> Term {
    match t {
        Term::Var(v) => b.get(&**v).cloned().map(Term::from).unwrap_or_else(|| t.clone()),
        _ => t.clone(),
    }
}

fn unify(t: &Term, value: &Object, b: &mut Binding) -> bool {
    match t {
        Term::Var(v) => match b.get(&**v) {
            Some(bound) => bound == value,
            None => {
                b.insert(v.to_string(), value.clone());
                true
            }
        },
        Term::Iri(i) => matches!(value, Object::Iri(vi) if vi == i),
        Term::Literal(l) => matches!(value, Object::Literal(vl) if vl == l),
    }
}

/// Substitutes bound variables; unbound ones are left in place.
pub fn substitute(t: &Term, b: &Binding) -> Term {
    resolve(t, b)
}
