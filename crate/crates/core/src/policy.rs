//! Provider privacy-policy corpora and ground-truth article annotations.
//!
//! Corpus format:
//!
//! ```text
//! #PROVIDER lids.com Lids
//! #SEG s1 First Party Collection/Use
//! We collect your email address when you sign up.
//! ```
//!
//! The category after the segment id is optional and may contain spaces.
//! Ground truth is a list of `provider_id,segment_id,article_number` rows.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("malformed source at line {line}: {message}")]
    MalformedSource { line: usize, message: String },
    #[error("provider `{provider_id}` appears more than once (line {line})")]
    DuplicateProvider { provider_id: String, line: usize },
    #[error("segment `{segment_id}` of provider `{provider_id}` has no text (line {line})")]
    EmptySegment {
        provider_id: String,
        segment_id: String,
        line: usize,
    },
    #[error("line {line}: no segment `{segment_id}` for provider `{provider_id}`")]
    UnknownSegment {
        provider_id: String,
        segment_id: String,
        line: usize,
    },
}

fn malformed(line: usize, message: impl Into<String>) -> PolicyError {
    PolicyError::MalformedSource {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyDocument {
    pub provider_id: String,
    pub provider_name: String,
    pub segments: Vec<PolicySegment>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicySegment {
    pub segment_id: String,
    pub text: String,
    pub category: Option<String>,
}

impl PolicySegment {
    pub fn new(segment_id: impl Into<String>, text: impl Into<String>) -> Self {
        PolicySegment {
            segment_id: segment_id.into(),
            text: text.into(),
            category: None,
        }
    }
}

/// Annotated articles per `(provider_id, segment_id)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub entries: BTreeMap<(String, String), BTreeSet<u32>>,
}

impl GroundTruth {
    pub fn get(&self, provider_id: &str, segment_id: &str) -> Option<&BTreeSet<u32>> {
        self.entries
            .get(&(provider_id.to_string(), segment_id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Keeps only entries whose segment still exists in `docs`.
    pub fn restricted_to(&self, docs: &[PolicyDocument]) -> GroundTruth {
        let live: HashSet<(&str, &str)> = docs
            .iter()
            .flat_map(|d| {
                d.segments
                    .iter()
                    .map(move |s| (d.provider_id.as_str(), s.segment_id.as_str()))
            })
            .collect();
        GroundTruth {
            entries: self
                .entries
                .iter()
                .filter(|((p, s), _)| live.contains(&(p.as_str(), s.as_str())))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }
}

/// Lowercase ASCII letters, digits, `.`, `-` and `_`; must start with a
/// letter or digit.
pub fn is_valid_provider_id(id: &str) -> bool {
    let mut chars = id.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase() || c.is_ascii_digit())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || matches!(c, '.' | '-' | '_'))
}

/// Number of maximal non-whitespace runs.
pub fn token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

struct OpenSegment {
    segment_id: String,
    category: Option<String>,
    line: usize,
    lines: Vec<String>,
}

fn close_segment(
    doc: &mut PolicyDocument,
    seg: Option<OpenSegment>,
) -> Result<(), PolicyError> {
    let Some(seg) = seg else { return Ok(()) };
    let text = seg.lines.join("\n").trim().to_string();
    if text.is_empty() {
        return Err(PolicyError::EmptySegment {
            provider_id: doc.provider_id.clone(),
            segment_id: seg.segment_id,
            line: seg.line,
        });
    }
    doc.segments.push(PolicySegment {
        segment_id: seg.segment_id,
        text,
        category: seg.category,
    });
    Ok(())
}

fn close_document(
    docs: &mut Vec<PolicyDocument>,
    doc: Option<(PolicyDocument, usize)>,
    seg: Option<OpenSegment>,
) -> Result<(), PolicyError> {
    let Some((mut doc, line)) = doc else { return Ok(()) };
    close_segment(&mut doc, seg)?;
    if doc.segments.is_empty() {
        return Err(malformed(
            line,
            format!("provider `{}` has no segments", doc.provider_id),
        ));
    }
    docs.push(doc);
    Ok(())
}

pub fn load_policies(source: &str) -> Result<Vec<PolicyDocument>, PolicyError> {
    let mut docs: Vec<PolicyDocument> = Vec::new();
    let mut providers: HashSet<String> = HashSet::new();
    let mut current: Option<(PolicyDocument, usize)> = None;
    let mut segment: Option<OpenSegment> = None;
    let mut segment_ids: HashSet<String> = HashSet::new();

    for (i, raw) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');

        if line == "#" || line.starts_with("# ") {
            continue;
        }
        if let Some(rest) = line.strip_prefix("#PROVIDER") {
            if !rest.is_empty() && !rest.starts_with(char::is_whitespace) {
                return Err(malformed(line_no, "unknown marker"));
            }
            close_document(&mut docs, current.take(), segment.take())?;
            let rest = rest.trim();
            let mut parts = rest.splitn(2, char::is_whitespace);
            let id = parts.next().unwrap_or("").to_string();
            let name = parts.next().unwrap_or("").trim().to_string();
            if !is_valid_provider_id(&id) {
                return Err(malformed(line_no, format!("invalid provider id `{id}`")));
            }
            if !providers.insert(id.clone()) {
                return Err(PolicyError::DuplicateProvider {
                    provider_id: id,
                    line: line_no,
                });
            }
            segment_ids.clear();
            current = Some((
                PolicyDocument {
                    provider_name: if name.is_empty() { id.clone() } else { name },
                    provider_id: id,
                    segments: Vec::new(),
                },
                line_no,
            ));
        } else if let Some(rest) = line.strip_prefix("#SEG") {
            if !rest.is_empty() && !rest.starts_with(char::is_whitespace) {
                return Err(malformed(line_no, "unknown marker"));
            }
            let (doc, _) = current
                .as_mut()
                .ok_or_else(|| malformed(line_no, "#SEG before any #PROVIDER"))?;
            close_segment(doc, segment.take())?;
            let rest = rest.trim();
            let mut parts = rest.splitn(2, char::is_whitespace);
            let id = parts.next().unwrap_or("").to_string();
            if id.is_empty() {
                return Err(malformed(line_no, "#SEG needs a segment id"));
            }
            if !segment_ids.insert(id.clone()) {
                return Err(malformed(
                    line_no,
                    format!("segment `{id}` repeated in provider `{}`", doc.provider_id),
                ));
            }
            let category = parts
                .next()
                .map(str::trim)
                .filter(|c| !c.is_empty())
                .map(str::to_string);
            segment = Some(OpenSegment {
                segment_id: id,
                category,
                line: line_no,
                lines: Vec::new(),
            });
        } else if line.starts_with('#') {
            return Err(malformed(line_no, "unknown marker"));
        } else {
            let text = line.strip_prefix('\\').unwrap_or(line);
            match segment.as_mut() {
                Some(seg) => seg.lines.push(text.to_string()),
                None if line.trim().is_empty() => {}
                None => return Err(malformed(line_no, "text outside of a segment")),
            }
        }
    }
    close_document(&mut docs, current, segment)?;
    Ok(docs)
}

/// Drops segments with fewer than `min_tokens` tokens, then drops documents
/// left without segments.
pub fn filter_short_segments(docs: &[PolicyDocument], min_tokens: usize) -> Vec<PolicyDocument> {
    docs.iter()
        .filter_map(|doc| {
            let segments: Vec<_> = doc
                .segments
                .iter()
                .filter(|s| token_count(&s.text) >= min_tokens)
                .cloned()
                .collect();
            (!segments.is_empty()).then(|| PolicyDocument {
                segments,
                ..doc.clone()
            })
        })
        .collect()
}

pub fn load_ground_truth(source: &str, docs: &[PolicyDocument]) -> Result<GroundTruth, PolicyError> {
    let segments: HashMap<&str, HashSet<&str>> = docs
        .iter()
        .map(|d| {
            (
                d.provider_id.as_str(),
                d.segments.iter().map(|s| s.segment_id.as_str()).collect(),
            )
        })
        .collect();

    let mut truth = GroundTruth::default();
    for (i, raw) in source.lines().enumerate() {
        let line = i + 1;
        let row = raw.trim();
        if row.is_empty() || row.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        let [provider, segment, article] = fields[..] else {
            return Err(malformed(line, "expected `provider_id,segment_id,article_number`"));
        };
        let article: u32 = article
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| malformed(line, format!("`{article}` is not a positive article number")))?;
        if !segments.get(provider).is_some_and(|s| s.contains(segment)) {
            return Err(PolicyError::UnknownSegment {
                provider_id: provider.to_string(),
                segment_id: segment.to_string(),
                line,
            });
        }
        truth
            .entries
            .entry((provider.to_string(), segment.to_string()))
            .or_default()
            .insert(article);
    }
    Ok(truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TWO_BY_THREE: &str = "\
#PROVIDER alpha.com Alpha Inc
#SEG s1 First Party Collection/Use
We collect email.
#SEG s2
We share data with partners
for advertising.
#SEG s3 Data Retention
Kept for one year.
# a comment between providers
#PROVIDER beta.org Beta
#SEG a
one
#SEG b
two
#SEG c
three
";

    #[test]
    fn loads_two_providers() {
        let docs = load_policies(TWO_BY_THREE).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs.iter().map(|d| d.segments.len()).sum::<usize>(), 6);
        assert_eq!(docs[0].provider_name, "Alpha Inc");
        assert_eq!(
            docs[0].segments[0].category.as_deref(),
            Some("First Party Collection/Use")
        );
        assert_eq!(docs[0].segments[1].category, None);
        assert_eq!(
            docs[0].segments[1].text,
            "We share data with partners\nfor advertising."
        );
        assert_eq!(load_policies(TWO_BY_THREE).unwrap(), docs);
    }

    #[test]
    fn duplicate_provider() {
        let src = "#PROVIDER a.com A\n#SEG 1\nx\n#PROVIDER a.com Again\n#SEG 1\ny\n";
        assert_eq!(
            load_policies(src),
            Err(PolicyError::DuplicateProvider {
                provider_id: "a.com".into(),
                line: 4
            })
        );
    }

    #[test]
    fn empty_segment() {
        let src = "#PROVIDER a.com A\n#SEG 1\n  \n#SEG 2\nx\n";
        assert!(matches!(
            load_policies(src),
            Err(PolicyError::EmptySegment { line: 2, .. })
        ));
    }

    #[test]
    fn malformed_corpora() {
        for src in [
            "#PROVIDER Upper.com A\n#SEG 1\nx\n",
            "#SEG 1\nx\n",
            "loose text\n",
            "#PROVIDER a.com A\n",
            "#PROVIDER a.com A\n#SEG 1\nx\n#SEG 1\ny\n",
            "#PROVIDER a.com A\n#SEGMENT 1\nx\n",
            "#PROVIDER a.com A\n#SEG 1\nx\n#FOO\n",
        ] {
            assert!(
                matches!(load_policies(src), Err(PolicyError::MalformedSource { .. })),
                "{src:?}"
            );
        }
    }

    #[test]
    fn filters_short_segments() {
        let doc = PolicyDocument {
            provider_id: "p.com".into(),
            provider_name: "P".into(),
            segments: vec![
                PolicySegment::new("a", "one two three"),
                PolicySegment::new("b", "1 2 3 4 5 6 7 8 9 10"),
                PolicySegment::new("c", vec!["w"; 25].join(" ")),
            ],
        };
        let out = filter_short_segments(std::slice::from_ref(&doc), 5);
        let ids: Vec<_> = out[0].segments.iter().map(|s| s.segment_id.as_str()).collect();
        assert_eq!(ids, ["b", "c"]);
        assert_eq!(filter_short_segments(std::slice::from_ref(&doc), 1), vec![doc.clone()]);
        assert!(filter_short_segments(&[doc], 100).is_empty());
    }

    #[test]
    fn ground_truth_rows() {
        let docs = load_policies(TWO_BY_THREE).unwrap();
        let truth =
            load_ground_truth("# header\nalpha.com,s1,6\nalpha.com,s1,13\nbeta.org,c,5\n", &docs)
                .unwrap();
        assert_eq!(truth.len(), 2);
        assert_eq!(
            truth.get("alpha.com", "s1").unwrap().iter().copied().collect::<Vec<_>>(),
            [6, 13]
        );
        assert!(matches!(
            load_ground_truth("alpha.com,zz,6\n", &docs),
            Err(PolicyError::UnknownSegment { line: 1, .. })
        ));
        assert!(matches!(
            load_ground_truth("alpha.com,s1,0\n", &docs),
            Err(PolicyError::MalformedSource { line: 1, .. })
        ));
        assert!(matches!(
            load_ground_truth("alpha.com,s1\n", &docs),
            Err(PolicyError::MalformedSource { line: 1, .. })
        ));
    }

    fn arb_docs() -> impl Strategy<Value = Vec<PolicyDocument>> {
        let segment = proptest::collection::vec(1usize..30, 1..6);
        proptest::collection::vec(segment, 1..6).prop_map(|docs| {
            docs.into_iter()
                .enumerate()
                .map(|(d, lens)| PolicyDocument {
                    provider_id: format!("p{d}.com"),
                    provider_name: format!("P{d}"),
                    segments: lens
                        .into_iter()
                        .enumerate()
                        .map(|(s, n)| {
                            // tokens separated by a mix of whitespace
                            let text = (0..n)
                                .map(|t| format!("t{t}"))
                                .collect::<Vec<_>>()
                                .join(if s % 2 == 0 { " " } else { " \n\t" });
                            PolicySegment::new(format!("s{s}"), text)
                        })
                        .collect(),
                })
                .collect()
        })
    }

    // Independent counter: walks characters and counts whitespace-to-token
    // transitions.
    fn brute_token_count(text: &str) -> usize {
        let mut count = 0;
        let mut in_token = false;
        for c in text.chars() {
            if c.is_whitespace() {
                in_token = false;
            } else if !in_token {
                in_token = true;
                count += 1;
            }
        }
        count
    }

    proptest! {
        #[test]
        fn filtered_count_matches_brute_force(docs in arb_docs(), min in 1usize..20) {
            let expected = docs
                .iter()
                .flat_map(|d| &d.segments)
                .filter(|s| brute_token_count(&s.text) >= min)
                .count();
            let out = filter_short_segments(&docs, min);
            prop_assert_eq!(out.iter().map(|d| d.segments.len()).sum::<usize>(), expected);
            prop_assert!(out.iter().all(|d| !d.segments.is_empty()));
        }

        #[test]
        fn filter_is_idempotent(docs in arb_docs(), min in 1usize..20) {
            let once = filter_short_segments(&docs, min);
            prop_assert_eq!(filter_short_segments(&once, min), once);
        }
    }
}
