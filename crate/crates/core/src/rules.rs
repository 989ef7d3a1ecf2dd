//! Positive Horn rules over the triple store, evaluated bottom-up to a
//! fixpoint.
//!
//! Rule text uses one rule per line:
//!
//! ```text
//! S1: Cloud_Providers(?p) ^ GDPR_Articles(?a) ^ definesObligationsFor(?a, Provider_Obligations) -> requiresComplianceWith(?p, ?a)
//! ```
//!
//! One-argument atoms are class memberships and become `rdf:type` patterns.
//! Bare names live in the `cc:` namespace; `rdf:`, `rdfs:`, `xsd:` and
//! `cc:` prefixes and `<...>` IRIs are also accepted. `#` starts a comment
//! line.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use thiserror::Error;

use crate::kg::schema::{CC_NS, RDFS_NS, RDF_NS, XSD_NS};
use crate::kg::{cc, substitute, vocab, Binding, Graph, Iri, Literal, Term, Triple, TriplePattern};
use crate::regulation::ObligationRole;

pub const DEFAULT_ITERATION_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("at least one obligation role is required")]
    EmptyRoleSet,
    #[error("rule `{0}` has an empty body")]
    EmptyBody(String),
    #[error("rule `{rule}` is unsafe: head variable ?{var} does not occur in the body")]
    UnsafeRule { rule: String, var: String },
    #[error("rule `{0}` has a literal in a subject position")]
    LiteralSubject(String),
    #[error("duplicate rule name `{0}`")]
    DuplicateName(String),
    #[error("rule syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("no fixpoint after {0} rounds")]
    IterationCap(usize),
}

/// `predicate(subject, object)`; class atoms `C(?x)` are
/// `rdf:type(?x, C)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RuleAtom {
    pub predicate: Iri,
    pub subject: Term,
    pub object: Term,
}

impl RuleAtom {
    pub fn new(predicate: Iri, subject: impl Into<Term>, object: impl Into<Term>) -> Self {
        RuleAtom {
            predicate,
            subject: subject.into(),
            object: object.into(),
        }
    }

    pub fn class(class: Iri, subject: impl Into<Term>) -> Self {
        RuleAtom::new(vocab().rdf_type.clone(), subject, class)
    }

    pub fn pattern(&self) -> TriplePattern {
        TriplePattern::new(self.subject.clone(), self.predicate.clone(), self.object.clone())
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        [&self.subject, &self.object].into_iter().filter_map(|t| t.var_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    name: String,
    body: Vec<RuleAtom>,
    head: RuleAtom,
}

impl Rule {
    pub fn new(name: impl Into<String>, body: Vec<RuleAtom>, head: RuleAtom) -> Result<Rule, RuleError> {
        let name = name.into();
        if body.is_empty() {
            return Err(RuleError::EmptyBody(name));
        }
        if body.iter().chain([&head]).any(|a| matches!(a.subject, Term::Literal(_))) {
            return Err(RuleError::LiteralSubject(name));
        }
        let bound: HashSet<&str> = body.iter().flat_map(RuleAtom::variables).collect();
        if let Some(var) = head.variables().find(|v| !bound.contains(v)) {
            return Err(RuleError::UnsafeRule {
                var: var.to_string(),
                rule: name,
            });
        }
        Ok(Rule { name, body, head })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn body(&self) -> &[RuleAtom] {
        &self.body
    }

    pub fn head(&self) -> &RuleAtom {
        &self.head
    }

    pub fn variables(&self) -> BTreeSet<&str> {
        self.body.iter().flat_map(RuleAtom::variables).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RuleSet {
    rules: Vec<Rule>,
}

impl RuleSet {
    pub fn new(rules: Vec<Rule>) -> Result<RuleSet, RuleError> {
        let mut seen = HashSet::new();
        for r in &rules {
            if !seen.insert(r.name.as_str()) {
                return Err(RuleError::DuplicateName(r.name.clone()));
            }
        }
        Ok(RuleSet { rules })
    }

    pub fn empty() -> RuleSet {
        RuleSet::default()
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.name == name)
    }

    /// Concatenation; fails on a name clash.
    pub fn merged(&self, other: &RuleSet) -> Result<RuleSet, RuleError> {
        RuleSet::new(self.rules.iter().chain(&other.rules).cloned().collect())
    }
}

pub fn default_roles() -> BTreeSet<ObligationRole> {
    BTreeSet::from([ObligationRole::Provider, ObligationRole::Common])
}

/// Name of the built-in rule for a role: `S1` for provider obligations,
/// `S2` for common obligations, `S_<Role>` otherwise.
pub fn builtin_rule_name(role: ObligationRole) -> String {
    match role {
        ObligationRole::Provider => "S1".into(),
        ObligationRole::Common => "S2".into(),
        other => format!("S_{}", other.name()),
    }
}

fn builtin_rule(role: ObligationRole) -> Rule {
    let v = vocab();
    let p = Term::var("cloud_provider");
    let a = Term::var("gdpr_article");
    Rule::new(
        builtin_rule_name(role),
        vec![
            RuleAtom::class(v.providers.clone(), p.clone()),
            RuleAtom::class(v.article_class.clone(), a.clone()),
            RuleAtom::new(v.defines_obligations_for.clone(), a.clone(), v.role_instance(role)),
        ],
        RuleAtom::new(v.requires_compliance_with.clone(), p, a),
    )
    .expect("built-in rules are safe")
}

/// One rule per role: a provider must comply with every article defining
/// obligations for that role. Provider and common rules come first.
pub fn builtin_rules(roles: &BTreeSet<ObligationRole>) -> Result<RuleSet, RuleError> {
    if roles.is_empty() {
        return Err(RuleError::EmptyRoleSet);
    }
    const ORDER: [ObligationRole; 5] = [
        ObligationRole::Provider,
        ObligationRole::Common,
        ObligationRole::General,
        ObligationRole::Consumer,
        ObligationRole::DataSubject,
    ];
    RuleSet::new(
        ORDER
            .into_iter()
            .filter(|r| roles.contains(r))
            .map(builtin_rule)
            .collect(),
    )
}

fn join<'g>(atoms: &[(TriplePattern, &'g Graph)], binding: Binding, f: &mut dyn FnMut(&Binding)) {
    match atoms.split_first() {
        None => f(&binding),
        Some(((pattern, graph), rest)) => graph.for_each_match(pattern, &binding, |b| join(rest, b, f)),
    }
}

fn instantiate(head: &RuleAtom, b: &Binding) -> Option<Triple> {
    let s = substitute(&head.subject, b);
    let o = substitute(&head.object, b);
    Triple::from_terms(&s, &Term::Iri(head.predicate.clone()), &o).ok()
}

fn fire(rule: &Rule, full: &Graph, delta: Option<&Graph>, out: &mut BTreeSet<Triple>) {
    let patterns: Vec<TriplePattern> = rule.body.iter().map(RuleAtom::pattern).collect();
    let mut emit = |b: &Binding| {
        if let Some(t) = instantiate(&rule.head, b) {
            if !full.contains(&t) {
                out.insert(t);
            }
        }
    };
    match delta {
        None => {
            let atoms: Vec<_> = patterns.iter().map(|p| (p.clone(), full)).collect();
            join(&atoms, Binding::new(), &mut emit);
        }
        Some(delta) => {
            for i in 0..patterns.len() {
                if delta.with_predicate(&rule.body[i].predicate).next().is_none() {
                    continue;
                }
                let mut atoms = vec![(patterns[i].clone(), delta)];
                atoms.extend(
                    patterns
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, p)| (p.clone(), full)),
                );
                join(&atoms, Binding::new(), &mut emit);
            }
        }
    }
}

/// Head instantiations of every body match that are not yet in `graph`.
/// Instantiations that would put a literal in subject position are dropped.
pub fn apply_rule(graph: &Graph, rule: &Rule) -> BTreeSet<Triple> {
    let mut out = BTreeSet::new();
    fire(rule, graph, None, &mut out);
    out
}

pub fn infer_fixpoint(graph: &Graph, rules: &RuleSet) -> Result<Graph, RuleError> {
    infer_fixpoint_capped(graph, rules, DEFAULT_ITERATION_CAP)
}

/// Semi-naive evaluation: after the first round, only bindings that use at
/// least one triple derived in the previous round are considered. New
/// triples are merged between rounds, so rule order does not matter.
pub fn infer_fixpoint_capped(graph: &Graph, rules: &RuleSet, cap: usize) -> Result<Graph, RuleError> {
    let mut full = graph.clone();
    let mut delta: Option<Graph> = None;
    for _ in 0..cap {
        let mut new = BTreeSet::new();
        for rule in &rules.rules {
            fire(rule, &full, delta.as_ref(), &mut new);
        }
        if new.is_empty() {
            return Ok(full);
        }
        full.extend(new.iter().cloned());
        delta = Some(new.into_iter().collect());
    }
    Err(RuleError::IterationCap(cap))
}

const PREFIXES: [(&str, &str); 4] = [("cc", CC_NS), ("rdf", RDF_NS), ("rdfs", RDFS_NS), ("xsd", XSD_NS)];

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '.')
}

fn class_alias(name: &str) -> &str {
    match name {
        "Cloud_Providers" => "Providers",
        other => other,
    }
}

fn parse_iri_token(tok: &str) -> Result<Iri, String> {
    if let Some(inner) = tok.strip_prefix('<').and_then(|t| t.strip_suffix('>')) {
        return Iri::new(inner).map_err(|e| e.to_string());
    }
    if let Some((prefix, local)) = tok.split_once(':') {
        let ns = PREFIXES
            .iter()
            .find(|(p, _)| *p == prefix)
            .map(|(_, ns)| *ns)
            .ok_or_else(|| format!("unknown prefix `{prefix}`"))?;
        if local.is_empty() || !local.chars().all(is_name_char) {
            return Err(format!("bad name `{tok}`"));
        }
        return Iri::new(format!("{ns}{local}")).map_err(|e| e.to_string());
    }
    if tok.is_empty() || !tok.chars().all(is_name_char) {
        return Err(format!("bad name `{tok}`"));
    }
    Ok(cc(tok))
}

fn parse_term(tok: &str) -> Result<Term, String> {
    let tok = tok.trim();
    if let Some(v) = tok.strip_prefix('?') {
        if v.is_empty() || !v.chars().all(|c| c.is_alphanumeric() || c == '_') {
            return Err(format!("bad variable `{tok}`"));
        }
        return Ok(Term::var(v));
    }
    if tok.starts_with('"') {
        let s: String = serde_json::from_str(tok).map_err(|_| format!("bad string literal {tok}"))?;
        return Ok(Term::Literal(Literal::string(s)));
    }
    if tok.starts_with(|c: char| c.is_ascii_digit() || c == '-') && tok.parse::<i64>().is_ok() {
        return Ok(Term::Literal(Literal::integer(tok.parse().unwrap())));
    }
    parse_iri_token(tok).map(Term::Iri)
}

/// Splits `a, b` at the top-level comma, ignoring commas in quotes.
fn split_args(args: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let (mut start, mut in_str, mut escaped) = (0, false, false);
    for (i, c) in args.char_indices() {
        if in_str {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_str = false,
                _ => {}
            }
        } else if c == '"' {
            in_str = true;
        } else if c == ',' {
            parts.push(&args[start..i]);
            start = i + 1;
        }
    }
    parts.push(&args[start..]);
    parts
}

fn parse_atom(text: &str) -> Result<RuleAtom, String> {
    let text = text.trim();
    let open = text.find('(').ok_or_else(|| format!("expected `(` in `{text}`"))?;
    let inner = text[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| format!("expected `)` at end of `{text}`"))?;
    let name = text[..open].trim();
    let args = split_args(inner);
    match args.as_slice() {
        [x] => {
            let class = match name.split_once(':') {
                Some(_) => parse_iri_token(name)?,
                None => parse_iri_token(class_alias(name))?,
            };
            Ok(RuleAtom::class(class, parse_term(x)?))
        }
        [s, o] => Ok(RuleAtom::new(parse_iri_token(name)?, parse_term(s)?, parse_term(o)?)),
        _ => Err(format!("atom `{text}` must have one or two arguments")),
    }
}

/// Splits a body at `^` separators outside string literals.
fn split_body(body: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let (mut start, mut in_str, mut escaped) = (0, false, false);
    for (i, c) in body.char_indices() {
        if in_str {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_str = false,
                _ => {}
            }
        } else if c == '"' {
            in_str = true;
        } else if c == '^' {
            parts.push(&body[start..i]);
            start = i + 1;
        }
    }
    parts.push(&body[start..]);
    parts
}

pub fn parse_rules(text: &str) -> Result<RuleSet, RuleError> {
    let mut rules = Vec::new();
    let mut names = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let syntax = |message: String| RuleError::Syntax { line, message };
        let (name, rest) = trimmed
            .split_once(':')
            .filter(|(n, _)| !n.contains('(') && !n.trim().is_empty())
            .ok_or_else(|| syntax("expected `name:` prefix".into()))?;
        let name = name.trim();
        if name.chars().any(char::is_whitespace) {
            return Err(syntax(format!("rule name `{name}` contains whitespace")));
        }
        let (body, head) = rest
            .rsplit_once("->")
            .ok_or_else(|| syntax("expected `->`".into()))?;
        let body = split_body(body)
            .into_iter()
            .map(parse_atom)
            .collect::<Result<Vec<_>, _>>()
            .map_err(syntax)?;
        let head = parse_atom(head).map_err(syntax)?;
        if !names.insert(name.to_string()) {
            return Err(RuleError::DuplicateName(name.to_string()));
        }
        rules.push(Rule::new(name, body, head)?);
    }
    RuleSet::new(rules)
}

fn write_iri(f: &mut fmt::Formatter<'_>, iri: &Iri) -> fmt::Result {
    let s = iri.as_str();
    for (prefix, ns) in PREFIXES {
        if let Some(local) = s.strip_prefix(ns) {
            if !local.is_empty() && local.chars().all(is_name_char) {
                return if prefix == "cc" {
                    write!(f, "{local}")
                } else {
                    write!(f, "{prefix}:{local}")
                };
            }
        }
    }
    write!(f, "<{s}>")
}

fn write_term(f: &mut fmt::Formatter<'_>, t: &Term) -> fmt::Result {
    match t {
        Term::Iri(i) => write_iri(f, i),
        Term::Var(v) => write!(f, "?{v}"),
        Term::Literal(l) => match l.as_integer() {
            Some(n) => write!(f, "{n}"),
            None => write!(f, "{}", serde_json::Value::String(l.lexical().to_string())),
        },
    }
}

impl fmt::Display for RuleAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let class = match (&self.object, self.predicate == vocab().rdf_type) {
            (Term::Iri(c), true) => Some(c),
            _ => None,
        };
        match class {
            Some(c) => {
                write_iri(f, c)?;
                f.write_str("(")?;
                write_term(f, &self.subject)?;
            }
            None => {
                write_iri(f, &self.predicate)?;
                f.write_str("(")?;
                write_term(f, &self.subject)?;
                f.write_str(", ")?;
                write_term(f, &self.object)?;
            }
        }
        f.write_str(")")
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.name)?;
        for (i, a) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(" ^ ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, " -> {}", self.head)
    }
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}
