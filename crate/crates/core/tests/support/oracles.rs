//! Brute-force reference implementations used by the integration and
//! acceptance tests. Nothing here calls into the library's algorithms;
//! only its data types are shared.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use privcomp::kg::{cc, Graph, Iri, Object, Term, Triple};
use privcomp::regulation::ArticleChunk;
use privcomp::rules::{Rule, RuleAtom};
use privcomp::GroundTruth;
use rand::seq::SliceRandom;
use rand::Rng;

// ---- rules ----

fn value_of(t: &Term, assignment: &HashMap<&str, Object>) -> Object {
    match t {
        Term::Var(v) => assignment[&**v].clone(),
        Term::Iri(i) => Object::Iri(i.clone()),
        Term::Literal(l) => Object::Literal(l.clone()),
    }
}

fn ground(atom: &RuleAtom, assignment: &HashMap<&str, Object>) -> Option<Triple> {
    let Object::Iri(s) = value_of(&atom.subject, assignment) else {
        return None;
    };
    Some(Triple::new(s, atom.predicate.clone(), value_of(&atom.object, assignment)))
}

fn rule_vars(rule: &Rule) -> Vec<&str> {
    let mut vars: Vec<&str> = Vec::new();
    for a in rule.body() {
        for t in [&a.subject, &a.object] {
            if let Some(v) = t.var_name() {
                if !vars.contains(&v) {
                    vars.push(v);
                }
            }
        }
    }
    vars
}

/// Every head instantiation over all assignments of the rule's variables
/// to terms of `graph` whose body is fully contained in `graph`.
pub fn naive_consequences(graph: &HashSet<Triple>, universe: &[Object], rule: &Rule) -> HashSet<Triple> {
    let vars = rule_vars(rule);
    let mut out = HashSet::new();
    let total = universe.len().pow(vars.len() as u32);
    let mut assignment: HashMap<&str, Object> = HashMap::new();
    for mut code in 0..total {
        for v in &vars {
            assignment.insert(v, universe[code % universe.len()].clone());
            code /= universe.len();
        }
        let body_holds = rule
            .body()
            .iter()
            .all(|a| ground(a, &assignment).is_some_and(|t| graph.contains(&t)));
        if body_holds {
            if let Some(t) = ground(rule.head(), &assignment) {
                out.insert(t);
            }
        }
    }
    out
}

fn universe_of(graph: &HashSet<Triple>) -> Vec<Object> {
    let set: BTreeSet<Object> = graph
        .iter()
        .flat_map(|t| [Object::Iri(t.subject.clone()), t.object.clone()])
        .collect();
    set.into_iter().collect()
}

/// Naive bottom-up evaluation: apply every rule to the whole graph until a
/// round adds nothing.
pub fn naive_fixpoint(graph: &Graph, rules: &[Rule]) -> BTreeSet<Triple> {
    let mut current: HashSet<Triple> = graph.iter().cloned().collect();
    loop {
        let universe = universe_of(&current);
        let mut added = false;
        let mut new = Vec::new();
        for r in rules {
            new.extend(naive_consequences(&current, &universe, r));
        }
        for t in new {
            added |= current.insert(t);
        }
        if !added {
            return current.into_iter().collect();
        }
    }
}

pub struct RandomRuleWorld {
    pub constants: Vec<Iri>,
    pub predicates: Vec<Iri>,
}

impl RandomRuleWorld {
    pub fn new(n_constants: usize, n_predicates: usize) -> Self {
        RandomRuleWorld {
            constants: (0..n_constants).map(|i| cc(&format!("c{i}"))).collect(),
            predicates: (0..n_predicates).map(|i| cc(&format!("q{i}"))).collect(),
        }
    }

    pub fn graph(&self, rng: &mut impl Rng, max_triples: usize) -> Graph {
        let n = rng.gen_range(0..=max_triples);
        let mut g = Graph::new();
        for _ in 0..n {
            g.insert(Triple::new(
                self.constants.choose(rng).unwrap().clone(),
                self.predicates.choose(rng).unwrap().clone(),
                self.constants.choose(rng).unwrap().clone(),
            ));
        }
        g
    }

    fn term(&self, rng: &mut impl Rng, vars: &[&str]) -> Term {
        if rng.gen_bool(0.8) {
            Term::var(vars.choose(rng).unwrap())
        } else {
            Term::Iri(self.constants.choose(rng).unwrap().clone())
        }
    }

    /// A safe rule with 1 to 3 body atoms over at most three variables.
    pub fn rule(&self, rng: &mut impl Rng, name: String) -> Rule {
        const VARS: [&str; 3] = ["x", "y", "z"];
        loop {
            let body: Vec<RuleAtom> = (0..rng.gen_range(1..=3))
                .map(|_| {
                    RuleAtom::new(
                        self.predicates.choose(rng).unwrap().clone(),
                        self.term(rng, &VARS),
                        self.term(rng, &VARS),
                    )
                })
                .collect();
            let bound: Vec<&str> = body.iter().flat_map(|a| a.variables()).collect();
            let head = if bound.is_empty() {
                RuleAtom::new(
                    self.predicates.choose(rng).unwrap().clone(),
                    Term::Iri(self.constants.choose(rng).unwrap().clone()),
                    Term::Iri(self.constants.choose(rng).unwrap().clone()),
                )
            } else {
                RuleAtom::new(
                    self.predicates.choose(rng).unwrap().clone(),
                    self.term(rng, &bound),
                    self.term(rng, &bound),
                )
            };
            if let Ok(r) = Rule::new(name.clone(), body, head) {
                return r;
            }
        }
    }

    pub fn rules(&self, rng: &mut impl Rng, max_rules: usize) -> Vec<Rule> {
        (0..rng.gen_range(1..=max_rules))
            .map(|i| self.rule(rng, format!("r{i}")))
            .collect()
    }
}

// ---- retrieval ----

fn words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Dense-by-term TF-IDF with `idf = ln((1 + N) / (1 + df)) + 1`.
pub struct DenseTfIdf {
    idf: HashMap<String, f64>,
}

impl DenseTfIdf {
    pub fn fit(texts: &[&str]) -> Self {
        let n = texts.len() as f64;
        let mut df: HashMap<String, f64> = HashMap::new();
        for t in texts {
            let uniq: HashSet<String> = words(t).into_iter().collect();
            for w in uniq {
                *df.entry(w).or_default() += 1.0;
            }
        }
        DenseTfIdf {
            idf: df
                .into_iter()
                .map(|(w, d)| (w, ((1.0 + n) / (1.0 + d)).ln() + 1.0))
                .collect(),
        }
    }

    fn weights(&self, text: &str) -> HashMap<String, f64> {
        let mut w: HashMap<String, f64> = HashMap::new();
        for t in words(text) {
            if let Some(idf) = self.idf.get(&t) {
                *w.entry(t).or_default() += idf;
            }
        }
        w
    }

    /// `1 - cos`; `None` when either side has no known terms.
    pub fn distance(&self, a: &str, b: &str) -> Option<f64> {
        let (wa, wb) = (self.weights(a), self.weights(b));
        let na = wa.values().map(|x| x * x).sum::<f64>().sqrt();
        let nb = wb.values().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            return None;
        }
        let dot: f64 = wa.iter().filter_map(|(k, x)| wb.get(k).map(|y| x * y)).sum();
        Some(1.0 - dot / (na * nb))
    }
}

/// All chunks within `threshold` of `query`, by exhaustive scan.
pub fn scan_hits(chunks: &[ArticleChunk], query: &str, threshold: f64) -> BTreeMap<String, f64> {
    let texts: Vec<&str> = chunks.iter().map(|c| c.text.as_str()).collect();
    let model = DenseTfIdf::fit(&texts);
    chunks
        .iter()
        .filter_map(|c| {
            let d = model.distance(query, &c.text)?;
            (d <= threshold).then(|| (c.chunk_id.clone(), d))
        })
        .collect()
}

const WORDS: [&str; 24] = [
    "data", "personal", "consent", "erasure", "processing", "controller", "processor", "subject", "right",
    "object", "transfer", "security", "breach", "notify", "access", "portability", "lawful", "purpose",
    "marketing", "cookies", "children", "retention", "third", "party",
];

pub fn random_sentence(rng: &mut impl Rng, min: usize, max: usize) -> String {
    (0..rng.gen_range(min..=max))
        .map(|_| *WORDS.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn random_chunks(rng: &mut impl Rng, n: usize) -> Vec<ArticleChunk> {
    (0..n)
        .map(|i| {
            let article = (i / 3 + 1) as u32;
            let para = (i % 3 + 1) as u32;
            ArticleChunk {
                chunk_id: ArticleChunk::make_id(article, para),
                article_number: article,
                paragraph_index: para,
                text: random_sentence(rng, 4, 14),
            }
        })
        .collect()
}

// ---- evaluation ----

/// Confusion counts summed over annotated segments by checking every
/// article number in `universe` one at a time.
pub fn tally(
    predictions: &BTreeMap<(String, String), BTreeSet<u32>>,
    truth: &GroundTruth,
    universe: std::ops::RangeInclusive<u32>,
) -> (usize, usize, usize) {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (key, expected) in &truth.entries {
        let predicted = predictions.get(key);
        for a in universe.clone() {
            let p = predicted.is_some_and(|s| s.contains(&a));
            let e = expected.contains(&a);
            match (p, e) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
    }
    (tp, fp, fn_)
}

pub fn f1_from(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f = if tp == 0 { 0.0 } else { 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64 };
    (p, r, f)
}

// ---- regulation text ----

/// Chunk count read straight off the marker lines of a regulation source:
/// each `#ART` contributes its number of `#P` markers, or one if it has
/// none.
pub fn count_chunks_in_source(source: &str) -> usize {
    let mut total = 0;
    let mut paras: Option<usize> = None;
    for line in source.lines() {
        let marker = line.split_whitespace().next().unwrap_or("");
        match marker {
            "#ART" | "#CH" => {
                if let Some(p) = paras.take() {
                    total += p.max(1);
                }
                if marker == "#ART" {
                    paras = Some(0);
                }
            }
            "#P" => {
                if let Some(p) = paras.as_mut() {
                    *p += 1;
                }
            }
            _ => {}
        }
    }
    total + paras.map_or(0, |p| p.max(1))
}
