//! A Turtle subset: prefixes, IRIs, prefixed names, `a`, string, integer
//! and `xsd:anyURI` literals, with `;` and `,` abbreviations on input.
//! Blank nodes, collections, language tags and other datatypes are
//! rejected.

use super::schema::{CC_NS, RDFS_NS, RDF_NS, RDF_TYPE, XSD_NS};
use super::term::{Datatype, Iri, Literal, Object, Triple};
use super::{Graph, KgError};

const XSD_STRING: &str = "http://www.w3.org/2001/XMLSchema#string";
const XSD_INTEGER: &str = "http://www.w3.org/2001/XMLSchema#integer";
const XSD_ANY_URI: &str = "http://www.w3.org/2001/XMLSchema#anyURI";

const PREFIXES: [(&str, &str); 4] = [
    ("cc", CC_NS),
    ("rdf", RDF_NS),
    ("rdfs", RDFS_NS),
    ("xsd", XSD_NS),
];

/// Serializes the graph with a fixed prefix block, one triple per line in
/// sorted order.
pub fn serialize_turtle(graph: &Graph) -> String {
    let mut out = String::new();
    for (prefix, ns) in PREFIXES {
        out.push_str(&format!("@prefix {prefix}: <{ns}> .\n"));
    }
    if !graph.is_empty() {
        out.push('\n');
    }
    for t in graph.iter() {
        write_iri(&mut out, &t.subject);
        out.push(' ');
        write_iri(&mut out, &t.predicate);
        out.push(' ');
        match &t.object {
            Object::Iri(i) => write_iri(&mut out, i),
            Object::Literal(l) => write_literal(&mut out, l),
        }
        out.push_str(" .\n");
    }
    out
}

fn is_safe_local(local: &str) -> bool {
    let bytes = local.as_bytes();
    match (bytes.first(), bytes.last()) {
        (Some(&first), Some(&last)) => {
            (first.is_ascii_alphanumeric() || first == b'_')
                && last != b'.'
                && bytes
                    .iter()
                    .all(|&b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.'))
        }
        _ => false,
    }
}

fn write_iri(out: &mut String, iri: &Iri) {
    let s = iri.as_str();
    for (prefix, ns) in PREFIXES {
        if let Some(local) = s.strip_prefix(ns) {
            if is_safe_local(local) {
                out.push_str(prefix);
                out.push(':');
                out.push_str(local);
                return;
            }
        }
    }
    out.push('<');
    out.push_str(s);
    out.push('>');
}

fn write_string(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn write_literal(out: &mut String, l: &Literal) {
    match l.datatype() {
        Datatype::Integer => out.push_str(l.lexical()),
        Datatype::String => write_string(out, l.lexical()),
        Datatype::AnyUri => {
            write_string(out, l.lexical());
            out.push_str("^^xsd:anyURI");
        }
    }
}

pub fn parse_turtle(text: &str) -> Result<Graph, KgError> {
    Parser::new(text).parse()
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    prefixes: Vec<(String, String)>,
}

enum Node {
    Iri(Iri),
    Literal(Literal),
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src,
            pos: 0,
            line: 1,
            prefixes: Vec::new(),
        }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, KgError> {
        Err(KgError::TurtleSyntax {
            line: self.line,
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
        }
        Some(c)
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn expect(&mut self, c: char) -> Result<(), KgError> {
        self.skip_ws();
        match self.peek() {
            Some(got) if got == c => {
                self.bump();
                Ok(())
            }
            Some(got) => self.err(format!("expected `{c}`, found `{got}`")),
            None => self.err(format!("expected `{c}`, found end of input")),
        }
    }

    fn keyword(&mut self, kw: &str) -> bool {
        let rest = self.rest();
        if rest.len() >= kw.len() && rest[..kw.len()].eq_ignore_ascii_case(kw) {
            let after = rest[kw.len()..].chars().next();
            if after.is_none_or(|c| c.is_whitespace() || c == '<') {
                for _ in 0..kw.chars().count() {
                    self.bump();
                }
                return true;
            }
        }
        false
    }

    fn parse(mut self) -> Result<Graph, KgError> {
        let mut graph = Graph::new();
        loop {
            self.skip_ws();
            if self.peek().is_none() {
                return Ok(graph);
            }
            if self.rest().starts_with("@prefix") {
                self.pos += "@prefix".len();
                self.prefix_decl()?;
                self.expect('.')?;
            } else if self.keyword("PREFIX") {
                self.prefix_decl()?;
            } else if self.rest().starts_with("@base") || self.keyword("BASE") {
                return self.err("base declarations are not supported");
            } else {
                self.statement(&mut graph)?;
            }
        }
    }

    fn prefix_decl(&mut self) -> Result<(), KgError> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c == ':' {
                break;
            }
            if !(c.is_alphanumeric() || c == '_' || c == '-' || c == '.') {
                return self.err(format!("invalid character `{c}` in prefix name"));
            }
            self.bump();
        }
        let name = self.src[start..self.pos].to_string();
        self.expect(':')?;
        self.skip_ws();
        let ns = self.iri_ref()?;
        self.prefixes.retain(|(p, _)| *p != name);
        self.prefixes.push((name, ns));
        Ok(())
    }

    fn statement(&mut self, graph: &mut Graph) -> Result<(), KgError> {
        let subject = match self.node()? {
            Node::Iri(i) => i,
            Node::Literal(_) => return self.err("literal in subject position"),
        };
        loop {
            self.skip_ws();
            let predicate = if self.peek() == Some('a')
                && self.rest()[1..].starts_with(|c: char| c.is_whitespace())
            {
                self.bump();
                Iri::new(RDF_TYPE)?
            } else {
                match self.node()? {
                    Node::Iri(i) => i,
                    Node::Literal(_) => return self.err("literal in predicate position"),
                }
            };
            loop {
                let object = match self.node()? {
                    Node::Iri(i) => Object::Iri(i),
                    Node::Literal(l) => Object::Literal(l),
                };
                graph.insert(Triple::new(subject.clone(), predicate.clone(), object));
                self.skip_ws();
                if self.peek() == Some(',') {
                    self.bump();
                } else {
                    break;
                }
            }
            self.skip_ws();
            match self.peek() {
                Some(';') => {
                    self.bump();
                    self.skip_ws();
                    // trailing `;` before `.`
                    if self.peek() == Some('.') {
                        self.bump();
                        return Ok(());
                    }
                }
                Some('.') => {
                    self.bump();
                    return Ok(());
                }
                Some(c) => return self.err(format!("expected `.`, `;` or `,`, found `{c}`")),
                None => return self.err("unterminated statement"),
            }
        }
    }

    fn node(&mut self) -> Result<Node, KgError> {
        self.skip_ws();
        match self.peek() {
            None => self.err("unexpected end of input"),
            Some('<') => Ok(Node::Iri(Iri::new(self.iri_ref()?)?)),
            Some('"') => self.literal(),
            Some('\'') => self.err("single-quoted strings are not supported"),
            Some('_') if self.rest().starts_with("_:") => self.err("blank nodes are not supported"),
            Some('[') => self.err("blank nodes are not supported"),
            Some('(') => self.err("collections are not supported"),
            Some(c) if c == '+' || c == '-' || c.is_ascii_digit() => self.integer(),
            Some(_) => Ok(Node::Iri(self.prefixed_name()?)),
        }
    }

    fn iri_ref(&mut self) -> Result<String, KgError> {
        if self.bump() != Some('<') {
            return self.err("expected `<`");
        }
        let start = self.pos;
        loop {
            match self.bump() {
                Some('>') => break,
                Some(c) if c.is_whitespace() => return self.err("whitespace inside IRI"),
                Some(_) => {}
                None => return self.err("unterminated IRI"),
            }
        }
        Ok(self.src[start..self.pos - 1].to_string())
    }

    fn prefixed_name(&mut self) -> Result<Iri, KgError> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | ':') {
                self.bump();
            } else {
                break;
            }
        }
        // a trailing `.` terminates the statement rather than the name
        while self.src[start..self.pos].ends_with('.') {
            self.pos -= 1;
        }
        let token = &self.src[start..self.pos];
        if token.is_empty() {
            let c = self.peek().unwrap_or(' ');
            return self.err(format!("unexpected character `{c}`"));
        }
        let Some((prefix, local)) = token.split_once(':') else {
            return self.err(format!("`{token}` is not a prefixed name"));
        };
        if matches!(token, "true" | "false") {
            return self.err("boolean literals are not supported");
        }
        let Some((_, ns)) = self.prefixes.iter().find(|(p, _)| p == prefix) else {
            return self.err(format!("undeclared prefix `{prefix}:`"));
        };
        Iri::new(format!("{ns}{local}")).or_else(|e| self.err(e.to_string()))
    }

    fn integer(&mut self) -> Result<Node, KgError> {
        let start = self.pos;
        if matches!(self.peek(), Some('+' | '-')) {
            self.bump();
        }
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        // `1.5` or `1e3`: only bare integers are in the subset
        if let Some(c) = self.peek() {
            let next = self.rest()[c.len_utf8()..].chars().next();
            if (c == '.' && next.is_some_and(|n| n.is_ascii_digit())) || c == 'e' || c == 'E' {
                return self.err("decimal and double literals are not supported");
            }
        }
        let lexical = &self.src[start..self.pos];
        Literal::new(lexical, Datatype::Integer)
            .map(Node::Literal)
            .or_else(|e| self.err(e.to_string()))
    }

    fn literal(&mut self) -> Result<Node, KgError> {
        self.bump(); // opening quote
        if self.rest().starts_with("\"\"") {
            return self.err("long strings are not supported");
        }
        let mut value = String::new();
        loop {
            if matches!(self.peek(), None | Some('\n')) {
                return self.err("unterminated string literal");
            }
            match self.bump().expect("peeked") {
                '"' => break,
                '\\' => match self.bump() {
                    Some('n') => value.push('\n'),
                    Some('r') => value.push('\r'),
                    Some('t') => value.push('\t'),
                    Some('"') => value.push('"'),
                    Some('\'') => value.push('\''),
                    Some('\\') => value.push('\\'),
                    Some(c) => return self.err(format!("unsupported escape `\\{c}`")),
                    None => return self.err("unterminated string literal"),
                },
                c => value.push(c),
            }
        }
        if self.peek() == Some('@') {
            return self.err("language tags are not supported");
        }
        if self.rest().starts_with("^^") {
            self.pos += 2;
            let dt = match self.peek() {
                Some('<') => self.iri_ref()?,
                _ => self.prefixed_name()?.as_str().to_string(),
            };
            let datatype = match dt.as_str() {
                XSD_STRING => Datatype::String,
                XSD_INTEGER => Datatype::Integer,
                XSD_ANY_URI => Datatype::AnyUri,
                other => return self.err(format!("unsupported datatype <{other}>")),
            };
            return Literal::new(value, datatype)
                .map(Node::Literal)
                .or_else(|e| self.err(e.to_string()));
        }
        Ok(Node::Literal(Literal::string(value)))
    }
}
