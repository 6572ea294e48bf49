//! OAI-PMH 2.0 client: request construction, response parsing, endpoint
//! verification, and resumption-token paging with fault recovery.
//!
//! Requests are plain HTTP GET with a deterministic query string: the verb
//! first, remaining keys in alphabetical order, values percent-encoded
//! (space encodes as `%20`). Responses are parsed with a namespace-aware
//! streaming reader. The harvester retries transient failures with
//! exponential backoff, honors `Retry-After` on 503, waits a politeness
//! delay between page requests, and restarts a list exactly once when the
//! provider rejects a resumption token.

use std::collections::BTreeMap;
use std::time::Duration;

use chrono::Utc;
use percent_encoding::{AsciiSet, NON_ALPHANUMERIC, utf8_percent_encode};
use quick_xml::events::{BytesStart, Event};
use quick_xml::reader::NsReader;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::record_model::{
    DublinCoreRecord, HarvestedRecord, RecordHeader, read_dc_children, read_element_text,
};

/// Characters percent-encoded in query values: everything except the
/// RFC 3986 unreserved set. Space therefore encodes as `%20`, never `+`.
const QUERY_VALUE_ENCODE: &AsciiSet = &NON_ALPHANUMERIC
    .remove(b'-')
    .remove(b'.')
    .remove(b'_')
    .remove(b'~');

/// The six OAI-PMH 2.0 verbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OaiVerb {
    Identify,
    ListMetadataFormats,
    ListSets,
    ListIdentifiers,
    ListRecords,
    GetRecord,
}

impl OaiVerb {
    pub fn as_str(self) -> &'static str {
        match self {
            OaiVerb::Identify => "Identify",
            OaiVerb::ListMetadataFormats => "ListMetadataFormats",
            OaiVerb::ListSets => "ListSets",
            OaiVerb::ListIdentifiers => "ListIdentifiers",
            OaiVerb::ListRecords => "ListRecords",
            OaiVerb::GetRecord => "GetRecord",
        }
    }

    /// Request keys the protocol allows for this verb, besides `verb`.
    pub fn legal_params(self) -> &'static [&'static str] {
        match self {
            OaiVerb::Identify => &[],
            OaiVerb::ListMetadataFormats => &["identifier"],
            OaiVerb::ListSets => &["resumptionToken"],
            OaiVerb::ListIdentifiers | OaiVerb::ListRecords => {
                &["from", "metadataPrefix", "resumptionToken", "set", "until"]
            }
            OaiVerb::GetRecord => &["identifier", "metadataPrefix"],
        }
    }
}

impl std::fmt::Display for OaiVerb {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The eight protocol error codes of OAI-PMH 2.0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OaiErrorCode {
    BadArgument,
    BadResumptionToken,
    BadVerb,
    CannotDisseminateFormat,
    IdDoesNotExist,
    NoRecordsMatch,
    NoMetadataFormats,
    NoSetHierarchy,
}

impl OaiErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            OaiErrorCode::BadArgument => "badArgument",
            OaiErrorCode::BadResumptionToken => "badResumptionToken",
            OaiErrorCode::BadVerb => "badVerb",
            OaiErrorCode::CannotDisseminateFormat => "cannotDisseminateFormat",
            OaiErrorCode::IdDoesNotExist => "idDoesNotExist",
            OaiErrorCode::NoRecordsMatch => "noRecordsMatch",
            OaiErrorCode::NoMetadataFormats => "noMetadataFormats",
            OaiErrorCode::NoSetHierarchy => "noSetHierarchy",
        }
    }

    pub const ALL: [OaiErrorCode; 8] = [
        OaiErrorCode::BadArgument,
        OaiErrorCode::BadResumptionToken,
        OaiErrorCode::BadVerb,
        OaiErrorCode::CannotDisseminateFormat,
        OaiErrorCode::IdDoesNotExist,
        OaiErrorCode::NoRecordsMatch,
        OaiErrorCode::NoMetadataFormats,
        OaiErrorCode::NoSetHierarchy,
    ];

    /// Resolves the code attribute of an error element. Anything outside
    /// the closed set is a parse error, not a protocol error.
    pub fn from_code(code: &str) -> Option<OaiErrorCode> {
        OaiErrorCode::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == code)
    }
}

impl std::fmt::Display for OaiErrorCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A protocol-level error reported by the provider inside a well-formed
/// OAI-PMH response.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{code}: {message}")]
pub struct OaiProtocolError {
    pub code: OaiErrorCode,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum OaiError {
    /// Transport failure: unreachable host, timeout, unexpected HTTP
    /// status, retries exhausted.
    #[error("network error: {0}")]
    Network(String),
    /// The provider speaks a protocol version other than 2.0.
    #[error("unsupported OAI-PMH protocol version {0:?}")]
    UnsupportedVersion(String),
    /// Request construction was asked for keys the verb does not allow,
    /// or an endpoint value failed validation.
    #[error("illegal argument: {0}")]
    IllegalArgument(String),
    /// The response body is not well-formed XML or violates the protocol
    /// schema.
    #[error("malformed response: {0}")]
    MalformedXml(String),
    /// The response parses but its root element is not OAI-PMH, e.g. an
    /// HTML error page.
    #[error("not an OAI-PMH response: {0}")]
    NotOaiPmh(String),
    /// A child element the protocol requires is absent.
    #[error("missing element: {0}")]
    MissingElement(String),
    /// The provider answered with a protocol error code.
    #[error("protocol error {0}")]
    Protocol(OaiProtocolError),
    /// The record sink rejected a delivery; carries the caller's error.
    #[error("record sink failed: {0}")]
    Sink(#[source] Box<dyn std::error::Error + Send + Sync>),
}

/// One repository endpoint. The identifier doubles as the store file stem,
/// so it is restricted to `[A-Za-z0-9._-]`; the base URL must be absolute
/// http(s) without query or fragment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoint {
    pub repo_id: String,
    pub base_url: String,
}

impl Endpoint {
    pub fn new(repo_id: impl Into<String>, base_url: impl Into<String>) -> Result<Self, OaiError> {
        let repo_id = repo_id.into();
        let base_url = base_url.into();
        if repo_id.is_empty()
            || !repo_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
        {
            return Err(OaiError::IllegalArgument(format!(
                "repo id {repo_id:?} must be non-empty and use only letters, digits, '.', '_' or '-'"
            )));
        }
        validate_base_url(&base_url)?;
        Ok(Endpoint { repo_id, base_url })
    }
}

fn validate_base_url(base_url: &str) -> Result<(), OaiError> {
    let url = Url::parse(base_url)
        .map_err(|e| OaiError::IllegalArgument(format!("base URL {base_url:?}: {e}")))?;
    if !matches!(url.scheme(), "http" | "https") {
        return Err(OaiError::IllegalArgument(format!(
            "base URL {base_url:?} must use http or https"
        )));
    }
    if url.query().is_some() || url.fragment().is_some() {
        return Err(OaiError::IllegalArgument(format!(
            "base URL {base_url:?} must not carry a query or fragment"
        )));
    }
    Ok(())
}

/// Builds the GET URL for a verb. The query places `verb` first and the
/// remaining keys in alphabetical order, so equal inputs produce equal
/// URLs. Values are percent-encoded with space as `%20`.
///
/// Keys must be legal for the verb, appear at most once, and
/// `resumptionToken` must be the only key besides the verb when present.
pub fn build_request(
    base_url: &str,
    verb: OaiVerb,
    params: &[(&str, &str)],
) -> Result<String, OaiError> {
    validate_base_url(base_url)?;
    let legal = verb.legal_params();
    let mut sorted: BTreeMap<&str, &str> = BTreeMap::new();
    for (key, value) in params {
        if !legal.contains(key) {
            return Err(OaiError::IllegalArgument(format!(
                "key {key:?} is not legal for verb {verb}"
            )));
        }
        if sorted.insert(key, value).is_some() {
            return Err(OaiError::IllegalArgument(format!(
                "key {key:?} appears twice"
            )));
        }
    }
    if sorted.contains_key("resumptionToken") && sorted.len() > 1 {
        return Err(OaiError::IllegalArgument(
            "resumptionToken must be the only key besides the verb".into(),
        ));
    }
    let mut query = format!("verb={}", verb.as_str());
    for (key, value) in &sorted {
        query.push('&');
        query.push_str(key);
        query.push('=');
        query.push_str(&utf8_percent_encode(value, QUERY_VALUE_ENCODE).to_string());
    }
    Ok(format!("{base_url}?{query}"))
}

/// What a provider reports about itself in an Identify response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepositoryIdentity {
    pub repository_name: String,
    pub protocol_version: String,
    pub earliest_datestamp: String,
    pub deleted_record_policy: String,
    pub granularity: String,
    pub admin_emails: Vec<String>,
}

/// A resumption token as received: the token text plus the optional
/// bookkeeping attributes. An empty token on a served page means the list
/// is complete.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResumptionToken {
    pub token: String,
    pub complete_list_size: Option<u64>,
    pub cursor: Option<u64>,
}

/// One record as split from a list response: the header plus the parsed
/// oai_dc metadata. Deleted records and bare ListIdentifiers headers carry
/// no metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub header: RecordHeader,
    pub metadata: Option<DublinCoreRecord>,
}

/// One page of a ListRecords, ListIdentifiers or GetRecord response.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RecordsPage {
    pub records: Vec<RawRecord>,
    pub resumption_token: Option<ResumptionToken>,
}

/// A metadata format advertised by ListMetadataFormats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetadataFormat {
    pub prefix: String,
    pub schema: String,
    pub namespace: String,
}

/// A set advertised by ListSets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OaiSet {
    pub spec: String,
    pub name: String,
}

/// The parsed payload of one OAI-PMH response.
#[derive(Debug, Clone, PartialEq)]
pub enum OaiResponse {
    Identity(RepositoryIdentity),
    Records(RecordsPage),
    Sets(Vec<OaiSet>),
    Formats(Vec<MetadataFormat>),
    ProtocolError(OaiProtocolError),
}

/// Parses one response body. GetRecord and ListIdentifiers payloads fold
/// into [`OaiResponse::Records`]: a GetRecord is a one-record page and
/// ListIdentifiers entries are records without metadata.
pub fn parse_response(body: &[u8]) -> Result<OaiResponse, OaiError> {
    let mut reader = NsReader::from_reader(body);
    reader.config_mut().expand_empty_elements = true;

    loop {
        match reader.read_resolved_event() {
            Ok((_, Event::Start(start))) => {
                if start.local_name().as_ref() != b"OAI-PMH" {
                    return Err(OaiError::NotOaiPmh(format!(
                        "root element is <{}>",
                        String::from_utf8_lossy(start.name().as_ref())
                    )));
                }
                break;
            }
            Ok((_, Event::Eof)) => {
                return Err(OaiError::NotOaiPmh("body has no root element".into()));
            }
            Ok(_) => {}
            Err(e) => return Err(OaiError::MalformedXml(e.to_string())),
        }
    }

    let mut payload: Option<OaiResponse> = None;
    loop {
        match read_event(&mut reader)? {
            Event::Start(start) => match start.local_name().as_ref() {
                b"responseDate" | b"request" => skip_subtree(&mut reader)?,
                b"error" => {
                    let code_attr = attribute(&start, "code")?
                        .ok_or_else(|| OaiError::MissingElement("error code attribute".into()))?;
                    let message = read_text(&mut reader)?;
                    let code = OaiErrorCode::from_code(&code_attr).ok_or_else(|| {
                        OaiError::MalformedXml(format!("unknown error code {code_attr:?}"))
                    })?;
                    return Ok(OaiResponse::ProtocolError(OaiProtocolError {
                        code,
                        message: message.trim().to_string(),
                    }));
                }
                b"Identify" => {
                    payload = Some(OaiResponse::Identity(parse_identify(&mut reader)?));
                }
                b"ListRecords" | b"GetRecord" => {
                    payload = Some(OaiResponse::Records(parse_record_list(&mut reader)?));
                }
                b"ListIdentifiers" => {
                    payload = Some(OaiResponse::Records(parse_identifier_list(&mut reader)?));
                }
                b"ListSets" => {
                    payload = Some(OaiResponse::Sets(parse_sets(&mut reader)?));
                }
                b"ListMetadataFormats" => {
                    payload = Some(OaiResponse::Formats(parse_formats(&mut reader)?));
                }
                _ => skip_subtree(&mut reader)?,
            },
            Event::End(_) => break,
            Event::Eof => {
                return Err(OaiError::MalformedXml("response truncated".into()));
            }
            _ => {}
        }
    }
    payload.ok_or_else(|| OaiError::MissingElement("response carries no verb payload".into()))
}

fn read_event<'a>(reader: &mut NsReader<&'a [u8]>) -> Result<Event<'a>, OaiError> {
    let (_, event) = reader
        .read_resolved_event()
        .map_err(|e| OaiError::MalformedXml(e.to_string()))?;
    Ok(event)
}

fn attribute(start: &BytesStart<'_>, name: &str) -> Result<Option<String>, OaiError> {
    match start.try_get_attribute(name) {
        Ok(Some(attr)) => attr
            .unescape_value()
            .map(|v| Some(v.into_owned()))
            .map_err(|e| OaiError::MalformedXml(e.to_string())),
        Ok(None) => Ok(None),
        Err(e) => Err(OaiError::MalformedXml(e.to_string())),
    }
}

fn read_text(reader: &mut NsReader<&[u8]>) -> Result<String, OaiError> {
    read_element_text(reader).map_err(|e| OaiError::MalformedXml(e.to_string()))
}

fn skip_subtree(reader: &mut NsReader<&[u8]>) -> Result<(), OaiError> {
    let mut depth = 1u32;
    loop {
        match read_event(reader)? {
            Event::Start(_) => depth += 1,
            Event::End(_) => {
                depth -= 1;
                if depth == 0 {
                    return Ok(());
                }
            }
            Event::Eof => return Err(OaiError::MalformedXml("response truncated".into())),
            _ => {}
        }
    }
}

fn parse_identify(reader: &mut NsReader<&[u8]>) -> Result<RepositoryIdentity, OaiError> {
    let mut name = None;
    let mut version = None;
    let mut earliest = None;
    let mut deleted = None;
    let mut granularity = None;
    let mut emails = Vec::new();
    loop {
        match read_event(reader)? {
            Event::Start(start) => match start.local_name().as_ref() {
                b"repositoryName" => name = Some(read_text(reader)?),
                b"protocolVersion" => version = Some(read_text(reader)?),
                b"earliestDatestamp" => earliest = Some(read_text(reader)?),
                b"deletedRecord" => deleted = Some(read_text(reader)?),
                b"granularity" => granularity = Some(read_text(reader)?),
                b"adminEmail" => emails.push(read_text(reader)?),
                _ => skip_subtree(reader)?,
            },
            Event::End(_) => break,
            Event::Eof => return Err(OaiError::MalformedXml("response truncated".into())),
            _ => {}
        }
    }
    let require = |field: Option<String>, what: &str| {
        field.ok_or_else(|| OaiError::MissingElement(format!("Identify/{what}")))
    };
    Ok(RepositoryIdentity {
        repository_name: require(name, "repositoryName")?,
        protocol_version: require(version, "protocolVersion")?,
        earliest_datestamp: require(earliest, "earliestDatestamp")?,
        deleted_record_policy: require(deleted, "deletedRecord")?,
        granularity: require(granularity, "granularity")?,
        admin_emails: emails,
    })
}

fn parse_record_list(reader: &mut NsReader<&[u8]>) -> Result<RecordsPage, OaiError> {
    let mut page = RecordsPage::default();
    loop {
        match read_event(reader)? {
            Event::Start(start) => match start.local_name().as_ref() {
                b"record" => page.records.push(parse_record(reader)?),
                b"resumptionToken" => {
                    page.resumption_token = Some(parse_token(reader, &start)?);
                }
                _ => skip_subtree(reader)?,
            },
            Event::End(_) => break,
            Event::Eof => return Err(OaiError::MalformedXml("response truncated".into())),
            _ => {}
        }
    }
    Ok(page)
}

fn parse_identifier_list(reader: &mut NsReader<&[u8]>) -> Result<RecordsPage, OaiError> {
    let mut page = RecordsPage::default();
    loop {
        match read_event(reader)? {
            Event::Start(start) => match start.local_name().as_ref() {
                b"header" => {
                    let deleted = header_is_deleted(&start)?;
                    page.records.push(RawRecord {
                        header: parse_header(reader, deleted)?,
                        metadata: None,
                    });
                }
                b"resumptionToken" => {
                    page.resumption_token = Some(parse_token(reader, &start)?);
                }
                _ => skip_subtree(reader)?,
            },
            Event::End(_) => break,
            Event::Eof => return Err(OaiError::MalformedXml("response truncated".into())),
            _ => {}
        }
    }
    Ok(page)
}

fn parse_token(
    reader: &mut NsReader<&[u8]>,
    start: &BytesStart<'_>,
) -> Result<ResumptionToken, OaiError> {
    let complete_list_size = attribute(start, "completeListSize")?.and_then(|v| v.parse().ok());
    let cursor = attribute(start, "cursor")?.and_then(|v| v.parse().ok());
    let token = read_text(reader)?.trim().to_string();
    Ok(ResumptionToken {
        token,
        complete_list_size,
        cursor,
    })
}

fn header_is_deleted(start: &BytesStart<'_>) -> Result<bool, OaiError> {
    Ok(attribute(start, "status")?.as_deref() == Some("deleted"))
}

fn parse_record(reader: &mut NsReader<&[u8]>) -> Result<RawRecord, OaiError> {
    let mut header: Option<RecordHeader> = None;
    let mut metadata: Option<DublinCoreRecord> = None;
    loop {
        match read_event(reader)? {
            Event::Start(start) => match start.local_name().as_ref() {
                b"header" => {
                    let deleted = header_is_deleted(&start)?;
                    header = Some(parse_header(reader, deleted)?);
                }
                b"metadata" => metadata = parse_metadata(reader)?,
                _ => skip_subtree(reader)?,
            },
            Event::End(_) => break,
            Event::Eof => return Err(OaiError::MalformedXml("response truncated".into())),
            _ => {}
        }
    }
    let header = header.ok_or_else(|| OaiError::MissingElement("record/header".into()))?;
    Ok(RawRecord { header, metadata })
}

fn parse_header(reader: &mut NsReader<&[u8]>, deleted: bool) -> Result<RecordHeader, OaiError> {
    let mut identifier = None;
    let mut datestamp = None;
    let mut set_specs = Vec::new();
    loop {
        match read_event(reader)? {
            Event::Start(start) => match start.local_name().as_ref() {
                b"identifier" => identifier = Some(read_text(reader)?),
                b"datestamp" => datestamp = Some(read_text(reader)?),
                b"setSpec" => set_specs.push(read_text(reader)?),
                _ => skip_subtree(reader)?,
            },
            Event::End(_) => break,
            Event::Eof => return Err(OaiError::MalformedXml("response truncated".into())),
            _ => {}
        }
    }
    Ok(RecordHeader {
        identifier: identifier
            .ok_or_else(|| OaiError::MissingElement("header/identifier".into()))?,
        datestamp: datestamp.ok_or_else(|| OaiError::MissingElement("header/datestamp".into()))?,
        set_specs,
        deleted,
    })
}

/// Reads a `<metadata>` element: descends to the first child element (the
/// DC container), parses its children, then skips to the end of the
/// metadata element.
fn parse_metadata(reader: &mut NsReader<&[u8]>) -> Result<Option<DublinCoreRecord>, OaiError> {
    let mut record = None;
    loop {
        match read_event(reader)? {
            Event::Start(_) if record.is_none() => {
                let parsed =
                    read_dc_children(reader).map_err(|e| OaiError::MalformedXml(e.to_string()))?;
                record = Some(parsed.record);
            }
            Event::Start(_) => skip_subtree(reader)?,
            Event::End(_) => break,
            Event::Eof => return Err(OaiError::MalformedXml("response truncated".into())),
            _ => {}
        }
    }
    Ok(record)
}

fn parse_sets(reader: &mut NsReader<&[u8]>) -> Result<Vec<OaiSet>, OaiError> {
    let mut sets = Vec::new();
    loop {
        match read_event(reader)? {
            Event::Start(start) if start.local_name().as_ref() == b"set" => {
                let mut spec = None;
                let mut name = String::new();
                loop {
                    match read_event(reader)? {
                        Event::Start(child) => match child.local_name().as_ref() {
                            b"setSpec" => spec = Some(read_text(reader)?),
                            b"setName" => name = read_text(reader)?,
                            _ => skip_subtree(reader)?,
                        },
                        Event::End(_) => break,
                        Event::Eof => {
                            return Err(OaiError::MalformedXml("response truncated".into()));
                        }
                        _ => {}
                    }
                }
                sets.push(OaiSet {
                    spec: spec.ok_or_else(|| OaiError::MissingElement("set/setSpec".into()))?,
                    name,
                });
            }
            Event::Start(_) => skip_subtree(reader)?,
            Event::End(_) => break,
            Event::Eof => return Err(OaiError::MalformedXml("response truncated".into())),
            _ => {}
        }
    }
    Ok(sets)
}

fn parse_formats(reader: &mut NsReader<&[u8]>) -> Result<Vec<MetadataFormat>, OaiError> {
    let mut formats = Vec::new();
    loop {
        match read_event(reader)? {
            Event::Start(start) if start.local_name().as_ref() == b"metadataFormat" => {
                let mut prefix = None;
                let mut schema = String::new();
                let mut namespace = String::new();
                loop {
                    match read_event(reader)? {
                        Event::Start(child) => match child.local_name().as_ref() {
                            b"metadataPrefix" => prefix = Some(read_text(reader)?),
                            b"schema" => schema = read_text(reader)?,
                            b"metadataNamespace" => namespace = read_text(reader)?,
                            _ => skip_subtree(reader)?,
                        },
                        Event::End(_) => break,
                        Event::Eof => {
                            return Err(OaiError::MalformedXml("response truncated".into()));
                        }
                        _ => {}
                    }
                }
                formats.push(MetadataFormat {
                    prefix: prefix.ok_or_else(|| {
                        OaiError::MissingElement("metadataFormat/metadataPrefix".into())
                    })?,
                    schema,
                    namespace,
                });
            }
            Event::Start(_) => skip_subtree(reader)?,
            Event::End(_) => break,
            Event::Eof => return Err(OaiError::MalformedXml("response truncated".into())),
            _ => {}
        }
    }
    Ok(formats)
}

/// Retry, timeout and politeness settings for one client.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchPolicy {
    /// Retries after the first attempt for transient failures (5xx,
    /// timeout, connection errors).
    pub max_retries: u32,
    /// First retry delay; doubles per attempt. A 503 with a parseable
    /// Retry-After header sleeps the header value instead.
    pub base_backoff: Duration,
    /// Total per-request timeout.
    pub timeout: Duration,
    /// Pause between successive page requests against the same endpoint.
    pub polite_delay: Duration,
}

impl Default for FetchPolicy {
    fn default() -> Self {
        FetchPolicy {
            max_retries: 3,
            base_backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(30),
            polite_delay: Duration::from_millis(100),
        }
    }
}

/// Outcome of [`OaiClient::verify_endpoint`]. Verification never fails;
/// problems land in `detail`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationResult {
    pub alive: bool,
    pub supports_oai_dc: bool,
    pub detail: String,
}

/// Counters for one harvest run. After a list restart the counters describe
/// the successful pass only.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarvestSummary {
    pub pages: u64,
    pub records: u64,
    pub deleted: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

/// A failed harvest, carrying the progress made before the failure.
#[derive(Debug, Error)]
#[error("{error} (partial progress: {} pages, {} records)", partial.pages, partial.records)]
pub struct HarvestFailure {
    pub error: OaiError,
    pub partial: HarvestSummary,
}

/// Consumer of harvested records.
pub trait RecordSink {
    /// Receives one non-deleted record with parsed metadata.
    fn record(
        &mut self,
        record: HarvestedRecord,
    ) -> Result<(), Box<dyn std::error::Error + Send + Sync>>;

    /// Called when a rejected resumption token forces a list restart.
    /// Records delivered before the restart will be delivered again.
    fn list_restarted(&mut self) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
        Ok(())
    }
}

impl<F: FnMut(HarvestedRecord)> RecordSink for F {
    fn record(
        &mut self,
        record: HarvestedRecord,
    ) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
        self(record);
        Ok(())
    }
}

/// Blocking OAI-PMH client. Immutable once built; safe to share across
/// threads harvesting different endpoints.
pub struct OaiClient {
    http: reqwest::blocking::Client,
    policy: FetchPolicy,
}

impl OaiClient {
    /// Builds a client. The User-Agent is `dcqual/<version>`, extended
    /// with `(+contact)` when a contact address is configured.
    pub fn new(policy: FetchPolicy, contact: Option<&str>) -> Result<OaiClient, OaiError> {
        let http = reqwest::blocking::Client::builder()
            .user_agent(user_agent(contact))
            .timeout(policy.timeout)
            .build()
            .map_err(|e| OaiError::Network(e.to_string()))?;
        Ok(OaiClient { http, policy })
    }

    pub fn policy(&self) -> &FetchPolicy {
        &self.policy
    }

    /// Fetches and checks the provider identity. Errors when the provider
    /// speaks a version other than 2.0.
    pub fn identify(&self, endpoint: &Endpoint) -> Result<RepositoryIdentity, OaiError> {
        let url = build_request(&endpoint.base_url, OaiVerb::Identify, &[])?;
        match parse_response(&self.get(&url)?)? {
            OaiResponse::Identity(identity) => {
                if identity.protocol_version.trim() != "2.0" {
                    return Err(OaiError::UnsupportedVersion(identity.protocol_version));
                }
                Ok(identity)
            }
            OaiResponse::ProtocolError(e) => Err(OaiError::Protocol(e)),
            _ => Err(OaiError::MissingElement("Identify payload".into())),
        }
    }

    /// Probes an endpoint: is it alive, and does it serve oai_dc? Never
    /// fails; the outcome explains itself in `detail`.
    pub fn verify_endpoint(&self, endpoint: &Endpoint) -> VerificationResult {
        let identity = match self.identify(endpoint) {
            Ok(identity) => identity,
            Err(e) => {
                return VerificationResult {
                    alive: false,
                    supports_oai_dc: false,
                    detail: format!("identify failed: {e}"),
                };
            }
        };
        match self.list_metadata_formats(endpoint) {
            Ok(formats) => {
                let supports = formats.iter().any(|f| f.prefix == "oai_dc");
                let detail = if supports {
                    format!(
                        "{} (OAI-PMH {}), {} metadata formats",
                        identity.repository_name,
                        identity.protocol_version,
                        formats.len()
                    )
                } else {
                    format!(
                        "{} is alive but does not advertise oai_dc",
                        identity.repository_name
                    )
                };
                VerificationResult {
                    alive: true,
                    supports_oai_dc: supports,
                    detail,
                }
            }
            Err(e) => VerificationResult {
                alive: true,
                supports_oai_dc: false,
                detail: format!("ListMetadataFormats failed: {e}"),
            },
        }
    }

    fn list_metadata_formats(&self, endpoint: &Endpoint) -> Result<Vec<MetadataFormat>, OaiError> {
        let url = build_request(&endpoint.base_url, OaiVerb::ListMetadataFormats, &[])?;
        match parse_response(&self.get(&url)?)? {
            OaiResponse::Formats(formats) => Ok(formats),
            OaiResponse::ProtocolError(e) => Err(OaiError::Protocol(e)),
            _ => Err(OaiError::MissingElement(
                "ListMetadataFormats payload".into(),
            )),
        }
    }

    /// Pages through ListRecords and delivers every non-deleted record to
    /// the sink. An initial noRecordsMatch yields an empty summary. A
    /// rejected resumption token restarts the list once, resetting the
    /// counters; a second rejection fails the harvest. Network failures
    /// surface with the partial progress attached.
    pub fn harvest_list_records(
        &self,
        endpoint: &Endpoint,
        metadata_prefix: &str,
        sink: &mut dyn RecordSink,
    ) -> Result<HarvestSummary, Box<HarvestFailure>> {
        let mut summary = HarvestSummary::default();
        let mut restarted = false;
        let mut token: Option<String> = None;
        let fail = |error: OaiError, partial: &HarvestSummary| {
            Box::new(HarvestFailure {
                error,
                partial: partial.clone(),
            })
        };
        loop {
            let url = match &token {
                Some(t) => build_request(
                    &endpoint.base_url,
                    OaiVerb::ListRecords,
                    &[("resumptionToken", t.as_str())],
                ),
                None => build_request(
                    &endpoint.base_url,
                    OaiVerb::ListRecords,
                    &[("metadataPrefix", metadata_prefix)],
                ),
            }
            .map_err(|e| fail(e, &summary))?;

            let body = self.get(&url).map_err(|e| fail(e, &summary))?;
            match parse_response(&body).map_err(|e| fail(e, &summary))? {
                OaiResponse::Records(page) => {
                    summary.pages += 1;
                    for raw in page.records {
                        if raw.header.deleted {
                            summary.deleted += 1;
                            continue;
                        }
                        let record = HarvestedRecord {
                            repo_id: endpoint.repo_id.clone(),
                            header: raw.header,
                            metadata: raw.metadata.unwrap_or_default(),
                            harvested_at: Utc::now(),
                        };
                        sink.record(record)
                            .map_err(|e| fail(OaiError::Sink(e), &summary))?;
                        summary.records += 1;
                    }
                    match page.resumption_token {
                        Some(t) if !t.token.is_empty() => {
                            token = Some(t.token);
                            std::thread::sleep(self.policy.polite_delay);
                        }
                        _ => return Ok(summary),
                    }
                }
                OaiResponse::ProtocolError(e)
                    if e.code == OaiErrorCode::NoRecordsMatch && token.is_none() =>
                {
                    return Ok(summary);
                }
                OaiResponse::ProtocolError(e)
                    if e.code == OaiErrorCode::BadResumptionToken && !restarted =>
                {
                    restarted = true;
                    summary = HarvestSummary {
                        errors: vec![format!(
                            "resumption token rejected ({}); restarting the list",
                            e.message
                        )],
                        ..HarvestSummary::default()
                    };
                    sink.list_restarted()
                        .map_err(|e| fail(OaiError::Sink(e), &summary))?;
                    token = None;
                    std::thread::sleep(self.policy.polite_delay);
                }
                OaiResponse::ProtocolError(e) => {
                    return Err(fail(OaiError::Protocol(e), &summary));
                }
                _ => {
                    return Err(fail(
                        OaiError::MissingElement("ListRecords payload".into()),
                        &summary,
                    ));
                }
            }
        }
    }

    /// GET with retry. Transient failures (5xx, timeout, connection reset)
    /// back off exponentially; a 503 with Retry-After sleeps the announced
    /// duration instead. Non-5xx error statuses fail immediately.
    fn get(&self, url: &str) -> Result<Vec<u8>, OaiError> {
        let mut attempt: u32 = 0;
        loop {
            let (last_error, retry_after) = match self.http.get(url).send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        return match resp.bytes() {
                            Ok(bytes) => Ok(bytes.to_vec()),
                            Err(e) => Err(OaiError::Network(format!("reading body: {e}"))),
                        };
                    }
                    if !status.is_server_error() {
                        return Err(OaiError::Network(format!("HTTP {status} from {url}")));
                    }
                    let retry_after = if status == reqwest::StatusCode::SERVICE_UNAVAILABLE {
                        parse_retry_after(resp.headers())
                    } else {
                        None
                    };
                    (format!("HTTP {status}"), retry_after)
                }
                Err(e) if e.is_timeout() || e.is_connect() => (e.to_string(), None),
                Err(e) => return Err(OaiError::Network(e.to_string())),
            };
            if attempt >= self.policy.max_retries {
                return Err(OaiError::Network(format!(
                    "{last_error} from {url}; retries exhausted after {} attempts",
                    attempt + 1
                )));
            }
            let delay = retry_after.unwrap_or_else(|| {
                self.policy
                    .base_backoff
                    .saturating_mul(1 << attempt.min(16))
            });
            std::thread::sleep(delay);
            attempt += 1;
        }
    }
}

/// User-Agent for outgoing requests.
pub fn user_agent(contact: Option<&str>) -> String {
    let base = concat!("dcqual/", env!("CARGO_PKG_VERSION"));
    match contact {
        Some(contact) if !contact.trim().is_empty() => format!("{base} (+{})", contact.trim()),
        _ => base.to_string(),
    }
}

fn parse_retry_after(headers: &reqwest::header::HeaderMap) -> Option<Duration> {
    let value = headers.get(reqwest::header::RETRY_AFTER)?.to_str().ok()?;
    if let Ok(secs) = value.trim().parse::<u64>() {
        return Some(Duration::from_secs(secs));
    }
    let when = chrono::DateTime::parse_from_rfc2822(value.trim()).ok()?;
    (when.with_timezone(&Utc) - Utc::now()).to_std().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "http://x/oai";

    #[test]
    fn identify_request_has_only_the_verb() {
        let url = build_request(BASE, OaiVerb::Identify, &[]).unwrap();
        assert_eq!(url, "http://x/oai?verb=Identify");
    }

    #[test]
    fn keys_order_verb_first_then_alphabetical() {
        let url = build_request(
            BASE,
            OaiVerb::ListRecords,
            &[
                ("until", "2017-03-23"),
                ("from", "2017-03-13"),
                ("set", "col"),
                ("metadataPrefix", "oai_dc"),
            ],
        )
        .unwrap();
        assert_eq!(
            url,
            "http://x/oai?verb=ListRecords&from=2017-03-13&metadataPrefix=oai_dc&set=col&until=2017-03-23"
        );
    }

    #[test]
    fn equal_params_in_any_order_build_equal_urls() {
        let a = build_request(
            BASE,
            OaiVerb::ListRecords,
            &[("metadataPrefix", "oai_dc"), ("set", "s")],
        );
        let b = build_request(
            BASE,
            OaiVerb::ListRecords,
            &[("set", "s"), ("metadataPrefix", "oai_dc")],
        );
        assert_eq!(a.unwrap(), b.unwrap());
    }

    #[test]
    fn space_encodes_as_percent_20() {
        let url = build_request(BASE, OaiVerb::ListRecords, &[("resumptionToken", "a b")]).unwrap();
        assert_eq!(url, "http://x/oai?verb=ListRecords&resumptionToken=a%20b");
    }

    #[test]
    fn reserved_characters_are_encoded() {
        let url = build_request(
            BASE,
            OaiVerb::GetRecord,
            &[
                ("identifier", "oai:site:a/b&c=d"),
                ("metadataPrefix", "oai_dc"),
            ],
        )
        .unwrap();
        assert_eq!(
            url,
            "http://x/oai?verb=GetRecord&identifier=oai%3Asite%3Aa%2Fb%26c%3Dd&metadataPrefix=oai_dc"
        );
    }

    #[test]
    fn illegal_keys_are_rejected() {
        assert!(matches!(
            build_request(BASE, OaiVerb::Identify, &[("resumptionToken", "x")]),
            Err(OaiError::IllegalArgument(_))
        ));
        assert!(matches!(
            build_request(BASE, OaiVerb::ListRecords, &[("identifier", "x")]),
            Err(OaiError::IllegalArgument(_))
        ));
        assert!(matches!(
            build_request(
                BASE,
                OaiVerb::ListRecords,
                &[("metadataPrefix", "oai_dc"), ("metadataPrefix", "oai_dc")]
            ),
            Err(OaiError::IllegalArgument(_))
        ));
    }

    #[test]
    fn resumption_token_must_travel_alone() {
        assert!(matches!(
            build_request(
                BASE,
                OaiVerb::ListRecords,
                &[("resumptionToken", "t"), ("metadataPrefix", "oai_dc")]
            ),
            Err(OaiError::IllegalArgument(_))
        ));
    }

    #[test]
    fn base_url_must_be_plain_http() {
        for bad in [
            "ftp://x/oai",
            "not a url",
            "http://x/oai?verb=Identify",
            "http://x/oai#frag",
        ] {
            assert!(build_request(bad, OaiVerb::Identify, &[]).is_err(), "{bad}");
        }
    }

    #[test]
    fn endpoint_validates_repo_id_and_url() {
        assert!(Endpoint::new("repo-1", "http://h/oai").is_ok());
        assert!(Endpoint::new("", "http://h/oai").is_err());
        assert!(Endpoint::new("has space", "http://h/oai").is_err());
        assert!(Endpoint::new("a/b", "http://h/oai").is_err());
        assert!(Endpoint::new("ok", "ftp://h/oai").is_err());
    }

    fn envelope(payload: &str) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\
             <OAI-PMH xmlns=\"http://www.openarchives.org/OAI/2.0/\">\
             <responseDate>2017-03-13T00:00:00Z</responseDate>\
             <request verb=\"ListRecords\">http://x/oai</request>{payload}</OAI-PMH>"
        )
    }

    fn record(id: &str, deleted: bool, dc_body: &str) -> String {
        let status = if deleted { " status=\"deleted\"" } else { "" };
        let metadata = if deleted {
            String::new()
        } else {
            format!(
                "<metadata><oai_dc:dc \
                 xmlns:oai_dc=\"http://www.openarchives.org/OAI/2.0/oai_dc/\" \
                 xmlns:dc=\"http://purl.org/dc/elements/1.1/\">{dc_body}</oai_dc:dc></metadata>"
            )
        };
        format!(
            "<record><header{status}><identifier>{id}</identifier>\
             <datestamp>2017-03-14</datestamp><setSpec>s1</setSpec></header>{metadata}</record>"
        )
    }

    #[test]
    fn parses_a_list_records_page() {
        let xml = envelope(&format!(
            "<ListRecords>{}{}{}<resumptionToken completeListSize=\"1234\" cursor=\"0\">t1</resumptionToken></ListRecords>",
            record("oai:x:1", false, "<dc:title>uno</dc:title>"),
            record(
                "oai:x:2",
                false,
                "<dc:language>es</dc:language><dc:language>spa</dc:language>"
            ),
            record("oai:x:3", true, ""),
        ));
        let OaiResponse::Records(page) = parse_response(xml.as_bytes()).unwrap() else {
            panic!("expected records");
        };
        assert_eq!(page.records.len(), 3);
        assert_eq!(page.records[0].header.identifier, "oai:x:1");
        assert_eq!(page.records[0].header.set_specs, vec!["s1"]);
        assert_eq!(
            page.records[0].metadata.as_ref().unwrap().title,
            vec!["uno"]
        );
        assert_eq!(
            page.records[1].metadata.as_ref().unwrap().language,
            vec!["es", "spa"]
        );
        assert!(page.records[2].header.deleted);
        assert!(page.records[2].metadata.is_none());
        let token = page.resumption_token.unwrap();
        assert_eq!(token.token, "t1");
        assert_eq!(token.complete_list_size, Some(1234));
        assert_eq!(token.cursor, Some(0));
    }

    #[test]
    fn empty_resumption_token_reads_as_empty_string() {
        let xml = envelope(&format!(
            "<ListRecords>{}<resumptionToken/></ListRecords>",
            record("oai:x:1", false, "<dc:title>a</dc:title>")
        ));
        let OaiResponse::Records(page) = parse_response(xml.as_bytes()).unwrap() else {
            panic!("expected records");
        };
        assert_eq!(page.resumption_token.unwrap().token, "");
    }

    #[test]
    fn get_record_folds_into_a_single_record_page() {
        let xml = envelope(&format!(
            "<GetRecord>{}</GetRecord>",
            record("oai:x:9", false, "<dc:title>only</dc:title>")
        ));
        let OaiResponse::Records(page) = parse_response(xml.as_bytes()).unwrap() else {
            panic!("expected records");
        };
        assert_eq!(page.records.len(), 1);
        assert!(page.resumption_token.is_none());
    }

    #[test]
    fn list_identifiers_yields_records_without_metadata() {
        let xml = envelope(
            "<ListIdentifiers><header><identifier>oai:x:1</identifier>\
             <datestamp>2017-01-01</datestamp></header>\
             <header status=\"deleted\"><identifier>oai:x:2</identifier>\
             <datestamp>2017-01-02</datestamp></header></ListIdentifiers>",
        );
        let OaiResponse::Records(page) = parse_response(xml.as_bytes()).unwrap() else {
            panic!("expected records");
        };
        assert_eq!(page.records.len(), 2);
        assert!(page.records.iter().all(|r| r.metadata.is_none()));
        assert!(page.records[1].header.deleted);
    }

    #[test]
    fn parses_identify() {
        let xml = envelope(
            "<Identify><repositoryName>Memoria</repositoryName>\
             <baseURL>http://x/oai</baseURL>\
             <protocolVersion>2.0</protocolVersion>\
             <adminEmail>a@x</adminEmail><adminEmail>b@x</adminEmail>\
             <earliestDatestamp>2002-01-01</earliestDatestamp>\
             <deletedRecord>persistent</deletedRecord>\
             <granularity>YYYY-MM-DD</granularity></Identify>",
        );
        let OaiResponse::Identity(id) = parse_response(xml.as_bytes()).unwrap() else {
            panic!("expected identity");
        };
        assert_eq!(id.repository_name, "Memoria");
        assert_eq!(id.protocol_version, "2.0");
        assert_eq!(id.admin_emails, vec!["a@x", "b@x"]);
        assert_eq!(id.deleted_record_policy, "persistent");
    }

    #[test]
    fn identify_without_version_is_missing_element() {
        let xml = envelope("<Identify><repositoryName>X</repositoryName></Identify>");
        assert!(matches!(
            parse_response(xml.as_bytes()),
            Err(OaiError::MissingElement(_))
        ));
    }

    #[test]
    fn parses_formats_and_sets() {
        let xml = envelope(
            "<ListMetadataFormats><metadataFormat>\
             <metadataPrefix>oai_dc</metadataPrefix><schema>s</schema>\
             <metadataNamespace>n</metadataNamespace></metadataFormat>\
             <metadataFormat><metadataPrefix>marcxml</metadataPrefix>\
             </metadataFormat></ListMetadataFormats>",
        );
        let OaiResponse::Formats(formats) = parse_response(xml.as_bytes()).unwrap() else {
            panic!("expected formats");
        };
        assert_eq!(formats.len(), 2);
        assert_eq!(formats[0].prefix, "oai_dc");

        let xml = envelope(
            "<ListSets><set><setSpec>col1</setSpec><setName>First</setName></set></ListSets>",
        );
        let OaiResponse::Sets(sets) = parse_response(xml.as_bytes()).unwrap() else {
            panic!("expected sets");
        };
        assert_eq!(
            sets,
            vec![OaiSet {
                spec: "col1".into(),
                name: "First".into()
            }]
        );
    }

    #[test]
    fn protocol_errors_pass_through() {
        let xml = envelope("<error code=\"noRecordsMatch\">nothing there</error>");
        let OaiResponse::ProtocolError(e) = parse_response(xml.as_bytes()).unwrap() else {
            panic!("expected protocol error");
        };
        assert_eq!(e.code, OaiErrorCode::NoRecordsMatch);
        assert_eq!(e.message, "nothing there");
    }

    #[test]
    fn unknown_error_code_is_a_parse_error() {
        let xml = envelope("<error code=\"tooBusy\">later</error>");
        assert!(matches!(
            parse_response(xml.as_bytes()),
            Err(OaiError::MalformedXml(_))
        ));
    }

    #[test]
    fn html_body_is_not_oai_pmh() {
        let html = b"<html><body><h1>It works!</h1></body></html>";
        assert!(matches!(parse_response(html), Err(OaiError::NotOaiPmh(_))));
        assert!(matches!(
            parse_response(b"plain text"),
            Err(OaiError::NotOaiPmh(_))
        ));
    }

    #[test]
    fn truncated_body_is_malformed() {
        let xml = envelope("<ListRecords><record><header><identifier>x</identifier>");
        let cut = &xml.as_bytes()[..xml.len() - 10];
        assert!(matches!(
            parse_response(cut),
            Err(OaiError::MalformedXml(_))
        ));
    }

    #[test]
    fn envelope_without_payload_is_missing_element() {
        let xml = envelope("");
        assert!(matches!(
            parse_response(xml.as_bytes()),
            Err(OaiError::MissingElement(_))
        ));
    }

    #[test]
    fn record_without_header_is_missing_element() {
        let xml = envelope("<ListRecords><record></record></ListRecords>");
        assert!(matches!(
            parse_response(xml.as_bytes()),
            Err(OaiError::MissingElement(_))
        ));
    }

    #[test]
    fn user_agent_includes_contact_when_configured() {
        let ua = user_agent(Some("mailto:ops@example.org"));
        assert_eq!(
            ua,
            concat!(
                "dcqual/",
                env!("CARGO_PKG_VERSION"),
                " (+mailto:ops@example.org)"
            )
        );
        assert_eq!(
            user_agent(None),
            concat!("dcqual/", env!("CARGO_PKG_VERSION"))
        );
        assert_eq!(
            user_agent(Some("  ")),
            concat!("dcqual/", env!("CARGO_PKG_VERSION"))
        );
    }

    #[test]
    fn error_code_round_trip() {
        for code in OaiErrorCode::ALL {
            assert_eq!(OaiErrorCode::from_code(code.as_str()), Some(code));
        }
        assert_eq!(OaiErrorCode::from_code("badarg"), None);
    }
}
