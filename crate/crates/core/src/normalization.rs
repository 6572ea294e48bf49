//! Controlled-vocabulary normalization: canonical language codes,
//! publication types, and MIME extraction from free-text format values.
//!
//! Mappings live in rule files, not code, so they can be extended without
//! rebuilding. A rule file is UTF-8 text, one rule per line,
//! `<matcher>TAB<pattern>TAB<canonical>`, with "#" comment lines; rules
//! apply top to bottom and the first match wins, which makes rule order
//! the precedence for compound values. The rule sets shipped with this
//! crate are embedded from `rules/`.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus_store::Corpus;
use crate::fold::fold;
use crate::record_model::DcElement;

/// The controlled publication-type vocabulary of [`normalize_type`].
pub const CONTROLLED_TYPES: [&str; 13] = [
    "article",
    "conferenceObject",
    "review",
    "bachelorThesis",
    "doctoralThesis",
    "masterThesis",
    "book",
    "bookPart",
    "report",
    "legislation",
    "image",
    "text",
    "other",
];

/// How a rule's pattern is compared against a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Matcher {
    /// Byte-for-byte equality.
    Exact,
    /// Unicode-lowercased equality; accents stay significant.
    CaseInsensitive,
    /// Case- and accent-folded token comparison: the pattern's token
    /// sequence must appear contiguously among the value's tokens.
    /// Tokens are maximal alphanumeric runs, so ";", "/", ":" all split.
    TokenContains,
}

impl Matcher {
    fn parse(text: &str) -> Option<Matcher> {
        match text {
            "exact" => Some(Matcher::Exact),
            "case-insensitive" => Some(Matcher::CaseInsensitive),
            "token-contains" => Some(Matcher::TokenContains),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingRule {
    pub matcher: Matcher,
    pub pattern: String,
    pub canonical: String,
    /// Pattern preprocessed for the matcher: lowercased, or folded tokens.
    prepared: Prepared,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Prepared {
    Verbatim,
    Lowered(String),
    Tokens(Vec<String>),
}

impl MappingRule {
    pub fn new(
        matcher: Matcher,
        pattern: impl Into<String>,
        canonical: impl Into<String>,
    ) -> MappingRule {
        let pattern = pattern.into();
        let prepared = match matcher {
            Matcher::Exact => Prepared::Verbatim,
            Matcher::CaseInsensitive => Prepared::Lowered(pattern.to_lowercase()),
            Matcher::TokenContains => Prepared::Tokens(tokenize(&pattern)),
        };
        MappingRule {
            matcher,
            pattern,
            canonical: canonical.into(),
            prepared,
        }
    }
}

/// The unit a rule set classifies when applied to a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    /// Each ";"-separated token of each value is classified on its own,
    /// the language convention: "es;spa" is two units.
    PerToken,
    /// Each record's joined value is classified as one unit, the type
    /// convention: compounds resolve via rule precedence.
    PerRecord,
}

/// An ordered rule list targeting one field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingRuleSet {
    pub field: DcElement,
    pub granularity: Granularity,
    pub rules: Vec<MappingRule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("rule file line {line}: {message}")]
pub struct RuleParseError {
    pub line: u64,
    pub message: String,
}

impl MappingRuleSet {
    /// Parses the TAB-separated rule file format.
    pub fn parse(
        field: DcElement,
        granularity: Granularity,
        text: &str,
    ) -> Result<MappingRuleSet, RuleParseError> {
        let mut rules = Vec::new();
        for (index, raw_line) in text.lines().enumerate() {
            let line = index as u64 + 1;
            let content = raw_line.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = raw_line.trim_end().split('\t').collect();
            let [matcher, pattern, canonical] = parts[..] else {
                return Err(RuleParseError {
                    line,
                    message: format!(
                        "expected matcher<TAB>pattern<TAB>canonical, got {} fields",
                        parts.len()
                    ),
                });
            };
            let matcher = Matcher::parse(matcher).ok_or_else(|| RuleParseError {
                line,
                message: format!("unknown matcher {matcher:?}"),
            })?;
            if pattern.is_empty() || canonical.is_empty() {
                return Err(RuleParseError {
                    line,
                    message: "pattern and canonical must be non-empty".into(),
                });
            }
            rules.push(MappingRule::new(matcher, pattern, canonical));
        }
        Ok(MappingRuleSet {
            field,
            granularity,
            rules,
        })
    }

    /// The canonical form of a value under the first matching rule, or
    /// None when no rule matches.
    pub fn resolve(&self, value: &str) -> Option<&str> {
        // Derived forms of the value are computed at most once.
        let mut lowered: Option<String> = None;
        let mut tokens: Option<Vec<String>> = None;
        for rule in &self.rules {
            let hit = match &rule.prepared {
                Prepared::Verbatim => value == rule.pattern,
                Prepared::Lowered(pattern) => {
                    lowered.get_or_insert_with(|| value.to_lowercase()) == pattern
                }
                Prepared::Tokens(pattern) => {
                    let tokens = tokens.get_or_insert_with(|| tokenize(value));
                    contains_sequence(tokens, pattern)
                }
            };
            if hit {
                return Some(&rule.canonical);
            }
        }
        None
    }
}

/// Folded alphanumeric token runs of a string.
fn tokenize(text: &str) -> Vec<String> {
    fold(text)
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}

fn contains_sequence(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty()
        && haystack.len() >= needle.len()
        && haystack.windows(needle.len()).any(|w| w == needle)
}

static LANGUAGE_RULES: LazyLock<MappingRuleSet> = LazyLock::new(|| {
    MappingRuleSet::parse(
        DcElement::Language,
        Granularity::PerToken,
        include_str!("../rules/language.rules"),
    )
    .expect("shipped language rules are well-formed")
});

static TYPE_RULES: LazyLock<MappingRuleSet> = LazyLock::new(|| {
    MappingRuleSet::parse(
        DcElement::Type,
        Granularity::PerRecord,
        include_str!("../rules/type.rules"),
    )
    .expect("shipped type rules are well-formed")
});

/// The language rule set embedded in this crate.
pub fn shipped_language_rules() -> &'static MappingRuleSet {
    &LANGUAGE_RULES
}

/// The publication-type rule set embedded in this crate.
pub fn shipped_type_rules() -> &'static MappingRuleSet {
    &TYPE_RULES
}

/// Splits a possibly compound value on ";", trimming each part and
/// dropping empties: "es;spa" → ["es", "spa"].
pub fn split_multivalue(value: &str) -> Vec<&str> {
    value
        .split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .collect()
}

/// Canonical ISO 639-1 code for one already-split language token, under
/// the shipped rules.
pub fn normalize_language(value: &str) -> Option<&'static str> {
    shipped_language_rules().resolve(value)
}

/// Controlled vocabulary term for a raw (possibly compound) type string,
/// under the shipped rules.
pub fn normalize_type(value: &str) -> Option<&'static str> {
    shipped_type_rules().resolve(value)
}

/// Result of MIME extraction from one format value.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FormatNormalization {
    /// Extracted MIME types, lowercased, deduplicated, in order of first
    /// appearance.
    pub mime_types: Vec<String>,
    /// ";"-separated segments that yielded no MIME type, kept verbatim
    /// (trimmed) for diagnostics.
    pub residue: String,
}

static MIME_PATTERN: LazyLock<regex::Regex> = LazyLock::new(|| {
    regex::Regex::new(r"[A-Za-z0-9.+-]+/[A-Za-z0-9.+-]+").expect("static pattern")
});

/// Extracts MIME types from a free-text format value.
///
/// The value is split on ";". Every `type/subtype` substring in a segment
/// is extracted; a bare "pdf" segment counts as application/pdf; a value
/// that is nothing but "text" counts as text/plain. Segments yielding no
/// MIME type land in the residue.
pub fn normalize_format(value: &str) -> FormatNormalization {
    if value.trim().eq_ignore_ascii_case("text") {
        return FormatNormalization {
            mime_types: vec!["text/plain".into()],
            residue: String::new(),
        };
    }
    let mut result = FormatNormalization::default();
    let mut residues: Vec<&str> = Vec::new();
    let push_mime = |mime: String, mimes: &mut Vec<String>| {
        if !mimes.contains(&mime) {
            mimes.push(mime);
        }
    };
    for segment in value.split(';') {
        let trimmed = segment.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut found = false;
        for hit in MIME_PATTERN.find_iter(trimmed) {
            push_mime(hit.as_str().to_lowercase(), &mut result.mime_types);
            found = true;
        }
        if !found {
            if trimmed.eq_ignore_ascii_case("pdf") {
                push_mime("application/pdf".into(), &mut result.mime_types);
            } else {
                residues.push(trimmed);
            }
        }
    }
    result.residue = residues.join(";");
    result
}

/// One classified unit: the raw text and its canonical form, if any.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedValue {
    pub raw: String,
    pub canonical: Option<String>,
}

/// One record's classification under one rule set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedField {
    pub field: DcElement,
    pub values: Vec<NormalizedValue>,
}

/// Canonical values for one record, keyed by its corpus identity. The
/// original record is untouched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedRecord {
    pub repo_id: String,
    pub identifier: String,
    pub fields: Vec<NormalizedField>,
}

/// Coverage of one rule set over a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationReport {
    pub field: DcElement,
    /// Units classified; every unit is either resolved or listed under
    /// `unresolved_values`.
    pub total_values: u64,
    pub resolved: u64,
    /// Unresolved raw values with occurrence counts, count descending
    /// then value ascending.
    pub unresolved_values: Vec<(String, u64)>,
    pub canonical_distribution: BTreeMap<String, u64>,
}

/// Classifies a corpus under each rule set. Returns per-record views (in
/// corpus order, records with no classified unit included with empty
/// value lists omitted per field) and one report per rule set.
pub fn apply_normalization(
    corpus: &Corpus,
    rule_sets: &[MappingRuleSet],
) -> (Vec<NormalizedRecord>, Vec<NormalizationReport>) {
    let mut reports: Vec<NormalizationReport> = rule_sets
        .iter()
        .map(|set| NormalizationReport {
            field: set.field,
            total_values: 0,
            resolved: 0,
            unresolved_values: Vec::new(),
            canonical_distribution: BTreeMap::new(),
        })
        .collect();
    let mut unresolved: Vec<BTreeMap<String, u64>> = vec![BTreeMap::new(); rule_sets.len()];
    let mut records = Vec::new();

    for record in corpus.records() {
        let mut fields = Vec::new();
        for (set_index, set) in rule_sets.iter().enumerate() {
            let mut units: Vec<String> = Vec::new();
            match set.granularity {
                Granularity::PerToken => {
                    for value in record.metadata.values(set.field) {
                        units.extend(split_multivalue(value).into_iter().map(String::from));
                    }
                }
                Granularity::PerRecord => {
                    if record.metadata.is_filled(set.field) {
                        units.push(record.metadata.joined_value(set.field));
                    }
                }
            }
            if units.is_empty() {
                continue;
            }
            let report = &mut reports[set_index];
            let mut values = Vec::new();
            for raw in units {
                report.total_values += 1;
                match set.resolve(&raw) {
                    Some(canonical) => {
                        report.resolved += 1;
                        *report
                            .canonical_distribution
                            .entry(canonical.to_string())
                            .or_default() += 1;
                        values.push(NormalizedValue {
                            raw,
                            canonical: Some(canonical.to_string()),
                        });
                    }
                    None => {
                        *unresolved[set_index].entry(raw.clone()).or_default() += 1;
                        values.push(NormalizedValue {
                            raw,
                            canonical: None,
                        });
                    }
                }
            }
            fields.push(NormalizedField {
                field: set.field,
                values,
            });
        }
        if !fields.is_empty() {
            records.push(NormalizedRecord {
                repo_id: record.repo_id.clone(),
                identifier: record.header.identifier.clone(),
                fields,
            });
        }
    }

    for (report, misses) in reports.iter_mut().zip(unresolved) {
        let mut list: Vec<(String, u64)> = misses.into_iter().collect();
        list.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        report.unresolved_values = list;
    }
    (records, reports)
}
