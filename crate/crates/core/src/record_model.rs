//! Dublin Core record types and the oai_dc metadata fragment parser.
//!
//! A harvested record stores the OAI-PMH header fields next to the fifteen
//! simple Dublin Core elements. Every element holds a list of raw values in
//! document order; repeated elements append, values are never merged or
//! trimmed. The metadata `dc:identifier` is stored under its own name and is
//! reported as `identifier2` by the metric layer to keep it distinct from
//! the header identifier.

use chrono::{DateTime, Utc};
use quick_xml::events::Event;
use quick_xml::name::ResolveResult;
use quick_xml::reader::NsReader;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// XML namespace of the simple Dublin Core element set.
pub const DC_NAMESPACE: &str = "http://purl.org/dc/elements/1.1/";

/// XML namespace of the oai_dc container element.
pub const OAI_DC_NAMESPACE: &str = "http://www.openarchives.org/OAI/2.0/oai_dc/";

/// The fifteen elements of the simple Dublin Core set, in canonical order.
/// Serializes as the lowercase element local name ("type", "title", ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DcElement {
    Title,
    Creator,
    Subject,
    Description,
    Publisher,
    Contributor,
    Date,
    Type,
    Format,
    Identifier,
    Source,
    Language,
    Relation,
    Coverage,
    Rights,
}

impl DcElement {
    /// All fifteen elements in canonical order.
    pub const ALL: [DcElement; 15] = [
        DcElement::Title,
        DcElement::Creator,
        DcElement::Subject,
        DcElement::Description,
        DcElement::Publisher,
        DcElement::Contributor,
        DcElement::Date,
        DcElement::Type,
        DcElement::Format,
        DcElement::Identifier,
        DcElement::Source,
        DcElement::Language,
        DcElement::Relation,
        DcElement::Coverage,
        DcElement::Rights,
    ];

    /// The element's local name inside the DC namespace.
    pub fn local_name(self) -> &'static str {
        match self {
            DcElement::Title => "title",
            DcElement::Creator => "creator",
            DcElement::Subject => "subject",
            DcElement::Description => "description",
            DcElement::Publisher => "publisher",
            DcElement::Contributor => "contributor",
            DcElement::Date => "date",
            DcElement::Type => "type",
            DcElement::Format => "format",
            DcElement::Identifier => "identifier",
            DcElement::Source => "source",
            DcElement::Language => "language",
            DcElement::Relation => "relation",
            DcElement::Coverage => "coverage",
            DcElement::Rights => "rights",
        }
    }

    /// The label used in metric and report output. Identical to
    /// [`local_name`](Self::local_name) except for the metadata identifier,
    /// which is reported as "identifier2" to distinguish it from the OAI
    /// header identifier.
    pub fn metric_label(self) -> &'static str {
        match self {
            DcElement::Identifier => "identifier2",
            other => other.local_name(),
        }
    }

    /// Resolves a local name to an element. Accepts exact local names only.
    pub fn from_local_name(name: &str) -> Option<DcElement> {
        DcElement::ALL
            .iter()
            .copied()
            .find(|e| e.local_name() == name)
    }
}

impl std::fmt::Display for DcElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.local_name())
    }
}

/// The simple Dublin Core element set of one record: a list of raw values
/// per element, in document order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DublinCoreRecord {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub title: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub creator: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub subject: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub description: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub publisher: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contributor: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub date: Vec<String>,
    #[serde(rename = "type", default, skip_serializing_if = "Vec::is_empty")]
    pub dc_type: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub format: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub identifier: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub source: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub language: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relation: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coverage: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rights: Vec<String>,
}

impl DublinCoreRecord {
    /// The raw values of one element, in document order.
    pub fn values(&self, element: DcElement) -> &[String] {
        match element {
            DcElement::Title => &self.title,
            DcElement::Creator => &self.creator,
            DcElement::Subject => &self.subject,
            DcElement::Description => &self.description,
            DcElement::Publisher => &self.publisher,
            DcElement::Contributor => &self.contributor,
            DcElement::Date => &self.date,
            DcElement::Type => &self.dc_type,
            DcElement::Format => &self.format,
            DcElement::Identifier => &self.identifier,
            DcElement::Source => &self.source,
            DcElement::Language => &self.language,
            DcElement::Relation => &self.relation,
            DcElement::Coverage => &self.coverage,
            DcElement::Rights => &self.rights,
        }
    }

    pub fn values_mut(&mut self, element: DcElement) -> &mut Vec<String> {
        match element {
            DcElement::Title => &mut self.title,
            DcElement::Creator => &mut self.creator,
            DcElement::Subject => &mut self.subject,
            DcElement::Description => &mut self.description,
            DcElement::Publisher => &mut self.publisher,
            DcElement::Contributor => &mut self.contributor,
            DcElement::Date => &mut self.date,
            DcElement::Type => &mut self.dc_type,
            DcElement::Format => &mut self.format,
            DcElement::Identifier => &mut self.identifier,
            DcElement::Source => &mut self.source,
            DcElement::Language => &mut self.language,
            DcElement::Relation => &mut self.relation,
            DcElement::Coverage => &mut self.coverage,
            DcElement::Rights => &mut self.rights,
        }
    }

    pub fn push(&mut self, element: DcElement, value: impl Into<String>) {
        self.values_mut(element).push(value.into());
    }

    /// All values of the element joined with ";" and no added spaces.
    /// An element without values joins to the empty string.
    pub fn joined_value(&self, element: DcElement) -> String {
        self.values(element).join(";")
    }

    /// True when [`DublinCoreRecord::joined_value`] contains a
    /// non-whitespace character. A single empty or whitespace-only value
    /// does not fill a field; two values always do, even empty ones,
    /// because the ";" separator joining them is itself visible text.
    pub fn is_filled(&self, element: DcElement) -> bool {
        let values = self.values(element);
        values.len() > 1 || values.iter().any(|v| v.chars().any(|c| !c.is_whitespace()))
    }
}

/// OAI-PMH record header: identifier, datestamp and set memberships as
/// received, plus the deleted status flag.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub identifier: String,
    pub datestamp: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub set_specs: Vec<String>,
    #[serde(default)]
    pub deleted: bool,
}

/// One non-deleted record attributed to the repository it came from,
/// stamped with the harvest time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarvestedRecord {
    pub repo_id: String,
    pub header: RecordHeader,
    pub metadata: DublinCoreRecord,
    pub harvested_at: DateTime<Utc>,
}

/// Counters for anomalies seen while parsing one metadata fragment.
/// `unknown_elements` counts direct children outside the DC namespace or
/// with an unrecognized local name; `blank_values` counts captured values
/// without a single non-whitespace character.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DcParseDiagnostics {
    pub unknown_elements: u32,
    pub blank_values: u32,
}

/// Result of parsing one oai_dc fragment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedDc {
    pub record: DublinCoreRecord,
    pub diagnostics: DcParseDiagnostics,
}

#[derive(Debug, Error)]
pub enum DcParseError {
    #[error("malformed metadata fragment: {0}")]
    MalformedXml(String),
}

/// Parses the `<oai_dc:dc>` element of one record.
///
/// Every direct child in the DC namespace whose local name matches one of
/// the fifteen elements contributes its text content, in document order.
/// Text is entity-resolved but otherwise verbatim: no trimming, no case
/// changes. Children of other namespaces or with unknown names are skipped
/// and counted in the diagnostics. A fragment without children parses to an
/// all-empty record.
pub fn parse_dc(fragment: &[u8]) -> Result<ParsedDc, DcParseError> {
    let mut reader = NsReader::from_reader(fragment);
    reader.config_mut().expand_empty_elements = true;

    // Find the container element.
    loop {
        match reader
            .read_resolved_event()
            .map_err(|e| DcParseError::MalformedXml(e.to_string()))?
        {
            (_, Event::Start(_)) => break,
            (_, Event::Eof) => {
                return Err(DcParseError::MalformedXml(
                    "fragment has no root element".into(),
                ));
            }
            _ => {}
        }
    }

    read_dc_children(&mut reader)
}

/// Reads the children of a DC container whose Start event was already
/// consumed, through the container's matching End. Shared between
/// [`parse_dc`] and the in-stream record parsing of the protocol module.
pub(crate) fn read_dc_children(reader: &mut NsReader<&[u8]>) -> Result<ParsedDc, DcParseError> {
    let mut parsed = ParsedDc::default();
    loop {
        match reader
            .read_resolved_event()
            .map_err(|e| DcParseError::MalformedXml(e.to_string()))?
        {
            (resolve, Event::Start(start)) => {
                let local = String::from_utf8_lossy(start.local_name().as_ref()).into_owned();
                let element = match resolve {
                    ResolveResult::Bound(ns) if ns.as_ref() == DC_NAMESPACE.as_bytes() => {
                        DcElement::from_local_name(&local)
                    }
                    _ => None,
                };
                let text = read_element_text(reader)?;
                match element {
                    Some(element) => {
                        if text.trim().is_empty() {
                            parsed.diagnostics.blank_values += 1;
                        }
                        parsed.record.push(element, text);
                    }
                    None => parsed.diagnostics.unknown_elements += 1,
                }
            }
            (_, Event::End(_)) => break,
            (_, Event::Eof) => {
                return Err(DcParseError::MalformedXml(
                    "unexpected end of fragment inside container".into(),
                ));
            }
            _ => {}
        }
    }
    Ok(parsed)
}

/// Reads the text content of the element whose Start event was just
/// consumed, up to its matching End. Text of nested elements is included;
/// the nested tags themselves are not.
pub(crate) fn read_element_text(reader: &mut NsReader<&[u8]>) -> Result<String, DcParseError> {
    let mut depth = 1u32;
    let mut text = String::new();
    loop {
        match reader
            .read_resolved_event()
            .map_err(|e| DcParseError::MalformedXml(e.to_string()))?
        {
            (_, Event::Start(_)) => depth += 1,
            (_, Event::End(_)) => {
                depth -= 1;
                if depth == 0 {
                    return Ok(text);
                }
            }
            (_, Event::Text(t)) => {
                let piece = t
                    .unescape()
                    .map_err(|e| DcParseError::MalformedXml(e.to_string()))?;
                text.push_str(&piece);
            }
            (_, Event::CData(c)) => {
                let bytes = c.into_inner();
                let piece = std::str::from_utf8(&bytes)
                    .map_err(|e| DcParseError::MalformedXml(e.to_string()))?;
                text.push_str(piece);
            }
            (_, Event::Eof) => {
                return Err(DcParseError::MalformedXml(
                    "unexpected end of fragment inside element".into(),
                ));
            }
            _ => {}
        }
    }
}
