//! Regulation documents: parsing, chunking and obligation-role assignments.
//!
//! The on-disk format is line oriented:
//!
//! ```text
//! #REG GDPR General Data Protection Regulation
//! #CH 1 General provisions
//! #ART 1 Subject-matter and objectives https://gdpr-info.eu/art-1-gdpr/
//! #P 1
//! This Regulation lays down rules ...
//! ```
//!
//! Paragraph text runs until the next marker line. A line starting with `# `
//! (or a bare `#`) is a comment. Text lines that would otherwise start with
//! `#` or `\` are written with a leading `\`, which the parser strips.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegulationError {
    #[error("malformed source at line {line}: {message}")]
    MalformedSource { line: usize, message: String },
    #[error("article {number} appears more than once (line {line})")]
    DuplicateArticle { number: u32, line: usize },
    #[error("regulation source contains no chapters")]
    EmptyDocument,
    #[error("line {line}: article {number} does not exist in the regulation")]
    UnknownArticle { number: u32, line: usize },
    #[error("line {line}: unknown obligation role `{role}`")]
    UnknownRole { role: String, line: usize },
}

fn malformed(line: usize, message: impl Into<String>) -> RegulationError {
    RegulationError::MalformedSource {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegulationDoc {
    pub regulation_id: String,
    pub title: String,
    pub chapters: Vec<Chapter>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chapter {
    pub index: u32,
    pub title: String,
    pub articles: Vec<Article>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Article {
    pub number: u32,
    pub title: String,
    pub source_url: Option<String>,
    pub paragraphs: Vec<Paragraph>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Paragraph {
    pub index: u32,
    pub text: String,
}

/// One retrieval unit: a single paragraph, or the article title when the
/// article has no paragraphs (paragraph index 0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArticleChunk {
    pub chunk_id: String,
    pub article_number: u32,
    pub paragraph_index: u32,
    pub text: String,
}

impl ArticleChunk {
    pub fn make_id(article_number: u32, paragraph_index: u32) -> String {
        format!("ART{article_number}-P{paragraph_index}")
    }
}

impl RegulationDoc {
    pub fn articles(&self) -> impl Iterator<Item = (&Chapter, &Article)> {
        self.chapters
            .iter()
            .flat_map(|c| c.articles.iter().map(move |a| (c, a)))
    }

    pub fn article(&self, number: u32) -> Option<&Article> {
        self.articles()
            .map(|(_, a)| a)
            .find(|a| a.number == number)
    }

    pub fn article_count(&self) -> usize {
        self.chapters.iter().map(|c| c.articles.len()).sum()
    }
}

impl Article {
    /// Paragraph texts joined with a single newline.
    pub fn full_text(&self) -> String {
        self.paragraphs
            .iter()
            .map(|p| p.text.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Obligation categories attached to articles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ObligationRole {
    Consumer,
    Common,
    DataSubject,
    General,
    Provider,
}

impl ObligationRole {
    pub const ALL: [ObligationRole; 5] = [
        ObligationRole::Consumer,
        ObligationRole::Common,
        ObligationRole::DataSubject,
        ObligationRole::General,
        ObligationRole::Provider,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObligationRole::Consumer => "Consumer",
            ObligationRole::Common => "Common",
            ObligationRole::DataSubject => "DataSubject",
            ObligationRole::General => "General",
            ObligationRole::Provider => "Provider",
        }
    }

    /// Local name of the knowledge-graph instance for this role.
    pub fn instance_name(self) -> &'static str {
        match self {
            ObligationRole::Consumer => "Consumer_Obligations",
            ObligationRole::Common => "Common_Obligations",
            ObligationRole::DataSubject => "Data_Subject_Obligations",
            ObligationRole::General => "General_Obligations",
            ObligationRole::Provider => "Provider_Obligations",
        }
    }
}

impl fmt::Display for ObligationRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownRoleName(pub String);

impl FromStr for ObligationRole {
    type Err = UnknownRoleName;

    /// Accepts the role name (`DataSubject`, `Data_Subject`) or the
    /// instance name (`Data_Subject_Obligations`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ObligationRole::ALL
            .into_iter()
            .find(|r| {
                s == r.name()
                    || s == r.instance_name()
                    || s == r.instance_name().trim_end_matches("_Obligations")
            })
            .ok_or_else(|| UnknownRoleName(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObligationAssignment {
    pub article_number: u32,
    pub role: ObligationRole,
}

enum Marker<'a> {
    Reg(&'a str),
    Chapter(&'a str),
    Article(&'a str),
    Paragraph(&'a str),
}

fn classify(line: &str) -> Option<Result<Marker<'_>, String>> {
    if !line.starts_with('#') {
        return None;
    }
    if line == "#" || line.starts_with("# ") {
        return None; // comment, handled by caller
    }
    let (tag, rest) = match line.find(char::is_whitespace) {
        Some(i) => (&line[..i], line[i..].trim()),
        None => (line, ""),
    };
    Some(match tag {
        "#REG" => Ok(Marker::Reg(rest)),
        "#CH" => Ok(Marker::Chapter(rest)),
        "#ART" => Ok(Marker::Article(rest)),
        "#P" => Ok(Marker::Paragraph(rest)),
        other => Err(format!("unknown marker `{other}`")),
    })
}

fn is_comment(line: &str) -> bool {
    line == "#" || line.starts_with("# ")
}

fn split_number(rest: &str, line: usize, what: &str) -> Result<(u32, String), RegulationError> {
    let mut parts = rest.splitn(2, char::is_whitespace);
    let num = parts.next().unwrap_or("");
    let n: u32 = num
        .parse()
        .map_err(|_| malformed(line, format!("{what} number `{num}` is not a positive integer")))?;
    if n == 0 {
        return Err(malformed(line, format!("{what} number must be >= 1")));
    }
    Ok((n, parts.next().unwrap_or("").trim().to_string()))
}

fn looks_like_url(token: &str) -> bool {
    token.starts_with("http://") || token.starts_with("https://")
}

struct PendingParagraph {
    index: u32,
    line: usize,
    lines: Vec<String>,
}

#[derive(Default)]
struct Builder {
    doc: Option<RegulationDoc>,
    paragraph: Option<PendingParagraph>,
    seen_articles: HashSet<u32>,
}

impl Builder {
    fn doc_mut(&mut self, line: usize) -> Result<&mut RegulationDoc, RegulationError> {
        self.doc
            .as_mut()
            .ok_or_else(|| malformed(line, "content before the #REG header"))
    }

    fn flush_paragraph(&mut self) -> Result<(), RegulationError> {
        let Some(p) = self.paragraph.take() else {
            return Ok(());
        };
        let text = p.lines.join("\n").trim().to_string();
        if text.is_empty() {
            return Err(malformed(p.line, format!("paragraph {} has no text", p.index)));
        }
        let article = self
            .doc
            .as_mut()
            .and_then(|d| d.chapters.last_mut())
            .and_then(|c| c.articles.last_mut())
            .expect("paragraph is only opened inside an article");
        article.paragraphs.push(Paragraph {
            index: p.index,
            text,
        });
        Ok(())
    }

    fn close_chapter_check(&self, line: usize) -> Result<(), RegulationError> {
        if let Some(ch) = self.doc.as_ref().and_then(|d| d.chapters.last()) {
            if ch.articles.is_empty() {
                return Err(malformed(line, format!("chapter {} has no articles", ch.index)));
            }
        }
        Ok(())
    }
}

/// Parses a regulation file. See the module docs for the format.
pub fn parse_regulation(source: &str) -> Result<RegulationDoc, RegulationError> {
    let mut b = Builder::default();

    for (i, raw) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');

        if is_comment(line) {
            continue;
        }
        let marker = match classify(line) {
            None => {
                let text = line.strip_prefix('\\').unwrap_or(line);
                match b.paragraph.as_mut() {
                    Some(p) => p.lines.push(text.to_string()),
                    None if line.trim().is_empty() => {}
                    None => return Err(malformed(line_no, "text outside of a paragraph")),
                }
                continue;
            }
            Some(Err(msg)) => return Err(malformed(line_no, msg)),
            Some(Ok(m)) => m,
        };

        b.flush_paragraph()?;
        match marker {
            Marker::Reg(rest) => {
                if b.doc.is_some() {
                    return Err(malformed(line_no, "duplicate #REG header"));
                }
                let mut parts = rest.splitn(2, char::is_whitespace);
                let id = parts.next().unwrap_or("").to_string();
                let title = parts.next().unwrap_or("").trim().to_string();
                if id.is_empty() || title.is_empty() {
                    return Err(malformed(line_no, "#REG needs an id and a title"));
                }
                b.doc = Some(RegulationDoc {
                    regulation_id: id,
                    title,
                    chapters: Vec::new(),
                });
            }
            Marker::Chapter(rest) => {
                b.close_chapter_check(line_no)?;
                let (index, title) = split_number(rest, line_no, "chapter")?;
                let doc = b.doc_mut(line_no)?;
                if let Some(prev) = doc.chapters.last() {
                    if index <= prev.index {
                        return Err(malformed(
                            line_no,
                            format!("chapter index {index} does not follow {}", prev.index),
                        ));
                    }
                }
                if title.is_empty() {
                    return Err(malformed(line_no, "chapter title is empty"));
                }
                doc.chapters.push(Chapter {
                    index,
                    title,
                    articles: Vec::new(),
                });
            }
            Marker::Article(rest) => {
                let (number, rest) = split_number(rest, line_no, "article")?;
                let (title, source_url) = match rest.rsplit_once(char::is_whitespace) {
                    Some((t, url)) if looks_like_url(url) => (t.trim().to_string(), Some(url.to_string())),
                    _ if looks_like_url(&rest) => (String::new(), Some(rest.clone())),
                    _ => (rest, None),
                };
                if title.is_empty() {
                    return Err(malformed(line_no, "article title is empty"));
                }
                if !b.seen_articles.insert(number) {
                    return Err(RegulationError::DuplicateArticle {
                        number,
                        line: line_no,
                    });
                }
                let chapter = b
                    .doc_mut(line_no)?
                    .chapters
                    .last_mut()
                    .ok_or_else(|| malformed(line_no, "#ART before any #CH"))?;
                chapter.articles.push(Article {
                    number,
                    title,
                    source_url,
                    paragraphs: Vec::new(),
                });
            }
            Marker::Paragraph(rest) => {
                let index: u32 = rest
                    .parse()
                    .ok()
                    .filter(|&n| n >= 1)
                    .ok_or_else(|| malformed(line_no, format!("bad paragraph index `{rest}`")))?;
                let article = b
                    .doc_mut(line_no)?
                    .chapters
                    .last_mut()
                    .and_then(|c| c.articles.last_mut())
                    .ok_or_else(|| malformed(line_no, "#P before any #ART"))?;
                if article.paragraphs.iter().any(|p| p.index == index) {
                    return Err(malformed(
                        line_no,
                        format!("paragraph {index} repeated in article {}", article.number),
                    ));
                }
                b.paragraph = Some(PendingParagraph {
                    index,
                    line: line_no,
                    lines: Vec::new(),
                });
            }
        }
    }

    b.flush_paragraph()?;
    let end = source.lines().count() + 1;
    b.close_chapter_check(end)?;
    let doc = b.doc.ok_or(RegulationError::EmptyDocument)?;
    if doc.chapters.is_empty() {
        return Err(RegulationError::EmptyDocument);
    }
    Ok(doc)
}

/// Writes a document back into the regulation file format.
pub fn serialize_regulation(doc: &RegulationDoc) -> String {
    let mut out = String::new();
    out.push_str(&format!("#REG {} {}\n", doc.regulation_id, doc.title));
    for ch in &doc.chapters {
        out.push_str(&format!("#CH {} {}\n", ch.index, ch.title));
        for art in &ch.articles {
            match &art.source_url {
                Some(url) => out.push_str(&format!("#ART {} {} {}\n", art.number, art.title, url)),
                None => out.push_str(&format!("#ART {} {}\n", art.number, art.title)),
            }
            for p in &art.paragraphs {
                out.push_str(&format!("#P {}\n", p.index));
                for line in p.text.lines() {
                    if line.starts_with('#') || line.starts_with('\\') {
                        out.push('\\');
                    }
                    out.push_str(line);
                    out.push('\n');
                }
            }
        }
    }
    out
}

/// One chunk per paragraph in document order; articles without paragraphs
/// get a single title chunk with paragraph index 0.
pub fn chunk_regulation(doc: &RegulationDoc) -> Vec<ArticleChunk> {
    let mut chunks = Vec::new();
    for (_, art) in doc.articles() {
        if art.paragraphs.is_empty() {
            chunks.push(ArticleChunk {
                chunk_id: ArticleChunk::make_id(art.number, 0),
                article_number: art.number,
                paragraph_index: 0,
                text: art.title.clone(),
            });
            continue;
        }
        for p in &art.paragraphs {
            chunks.push(ArticleChunk {
                chunk_id: ArticleChunk::make_id(art.number, p.index),
                article_number: art.number,
                paragraph_index: p.index,
                text: p.text.clone(),
            });
        }
    }
    chunks
}

/// Parses `article_number,role` rows and checks them against `doc`.
pub fn load_obligation_map(
    source: &str,
    doc: &RegulationDoc,
) -> Result<Vec<ObligationAssignment>, RegulationError> {
    let known: HashSet<u32> = doc.articles().map(|(_, a)| a.number).collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();

    for (i, raw) in source.lines().enumerate() {
        let line = i + 1;
        let row = raw.trim();
        if row.is_empty() || row.starts_with('#') {
            continue;
        }
        let (num, role) = row
            .split_once(',')
            .ok_or_else(|| malformed(line, "expected `article_number,role`"))?;
        let (num, role) = (num.trim(), role.trim());
        if role.contains(',') {
            return Err(malformed(line, "too many fields"));
        }
        let article_number: u32 = num
            .parse()
            .map_err(|_| malformed(line, format!("`{num}` is not an article number")))?;
        let role: ObligationRole = role.parse().map_err(|e: UnknownRoleName| {
            RegulationError::UnknownRole { role: e.0, line }
        })?;
        if !known.contains(&article_number) {
            return Err(RegulationError::UnknownArticle {
                number: article_number,
                line,
            });
        }
        let a = ObligationAssignment {
            article_number,
            role,
        };
        // Repeated rows collapse; pairs stay unique.
        if seen.insert(a) {
            out.push(a);
        }
    }
    Ok(out)
}

/// Upper-case Roman numeral for chapter headings in reports.
pub fn roman_numeral(mut n: u32) -> String {
    const TABLE: [(u32, &str); 13] = [
        (1000, "M"),
        (900, "CM"),
        (500, "D"),
        (400, "CD"),
        (100, "C"),
        (90, "XC"),
        (50, "L"),
        (40, "XL"),
        (10, "X"),
        (9, "IX"),
        (5, "V"),
        (4, "IV"),
        (1, "I"),
    ];
    let mut out = String::new();
    for (value, glyph) in TABLE {
        while n >= value {
            out.push_str(glyph);
            n -= value;
        }
    }
    out
}
