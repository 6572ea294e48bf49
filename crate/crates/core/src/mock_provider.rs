//! An in-process OAI-PMH 2.0 data provider for offline testing.
//!
//! The provider serves a fixed record fixture over HTTP, pages ListRecords
//! and ListIdentifiers with stateless `page:<n>` resumption tokens, and
//! answers every verb with protocol-correct responses or error codes. A
//! fault script can inject one-shot failures by page number: a 503 with
//! Retry-After, a malformed XML body, or a rejected (expired) resumption
//! token, which is how the harvester's recovery paths are exercised.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use chrono::Utc;
use thiserror::Error;

use crate::oai_protocol::{OaiErrorCode, OaiSet, OaiVerb};
use crate::record_model::{
    DC_NAMESPACE, DcElement, DublinCoreRecord, OAI_DC_NAMESPACE, RecordHeader,
};

/// One fixture record: header plus metadata. Records flagged deleted are
/// served with a status attribute and no metadata element.
#[derive(Debug, Clone, PartialEq)]
pub struct ProviderRecord {
    pub header: RecordHeader,
    pub metadata: DublinCoreRecord,
}

/// A one-shot fault keyed to the list page a request asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Answer the request for this page with 503 and a Retry-After header.
    ServiceUnavailable { page: u64, retry_after_secs: u64 },
    /// Answer the request for this page with a truncated XML body.
    MalformedBody { page: u64 },
    /// Reject the resumption token that asks for this page.
    ExpireToken { page: u64 },
}

/// An ordered list of one-shot faults. Each fault fires on the first list
/// request for its page, then clears.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FaultScript {
    pub faults: Vec<Fault>,
}

impl FaultScript {
    /// Parses a comma-separated script such as `503@2,expire@3` or
    /// `malformed@1`. A 503 entry takes an optional Retry-After override:
    /// `503@2:5` answers with `Retry-After: 5` (the default is 1).
    pub fn parse(script: &str) -> Result<FaultScript, String> {
        let mut faults = Vec::new();
        for part in script.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (kind, rest) = part
                .split_once('@')
                .ok_or_else(|| format!("fault {part:?} must look like kind@page"))?;
            let (page, secs) = match rest.split_once(':') {
                Some((page, secs)) => (page, Some(secs)),
                None => (rest, None),
            };
            let page: u64 = page
                .parse()
                .map_err(|_| format!("fault {part:?} has a non-numeric page"))?;
            if page == 0 {
                return Err(format!("fault {part:?}: pages are numbered from 1"));
            }
            let fault = match kind {
                "503" => Fault::ServiceUnavailable {
                    page,
                    retry_after_secs: match secs {
                        Some(s) => s
                            .parse()
                            .map_err(|_| format!("fault {part:?} has a non-numeric delay"))?,
                        None => 1,
                    },
                },
                "malformed" => Fault::MalformedBody { page },
                "expire" => Fault::ExpireToken { page },
                other => return Err(format!("unknown fault kind {other:?}")),
            };
            faults.push(fault);
        }
        Ok(FaultScript { faults })
    }
}

/// Everything the provider serves, fixed at startup.
#[derive(Debug, Clone, PartialEq)]
pub struct ProviderConfig {
    pub repository_name: String,
    pub admin_email: String,
    pub earliest_datestamp: String,
    pub records: Vec<ProviderRecord>,
    /// Records per ListRecords/ListIdentifiers page; at least 1.
    pub page_size: usize,
    /// Metadata prefixes advertised by ListMetadataFormats.
    pub formats: Vec<String>,
    pub sets: Vec<OaiSet>,
    pub faults: FaultScript,
    /// TCP port to bind on 127.0.0.1; 0 picks a free port.
    pub port: u16,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            repository_name: "Mock Repository".into(),
            admin_email: "admin@example.org".into(),
            earliest_datestamp: "2002-01-01".into(),
            records: Vec::new(),
            page_size: 100,
            formats: vec!["oai_dc".into()],
            sets: Vec::new(),
            faults: FaultScript::default(),
            port: 0,
        }
    }
}

/// One request as seen by the provider, for assertions in tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestLogEntry {
    pub verb: Option<String>,
    pub resumption_token: Option<String>,
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("provider config invalid: {0}")]
    InvalidConfig(String),
    #[error("failed to bind provider socket: {0}")]
    BindFailed(String),
}

struct ProviderState {
    pending_faults: Mutex<Vec<Fault>>,
    request_log: Mutex<Vec<RequestLogEntry>>,
}

/// A running provider bound to 127.0.0.1. Shuts down on drop.
pub struct MockProvider {
    base_url: String,
    server: Arc<tiny_http::Server>,
    state: Arc<ProviderState>,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl MockProvider {
    pub fn start(config: ProviderConfig) -> Result<MockProvider, ProviderError> {
        if config.page_size == 0 {
            return Err(ProviderError::InvalidConfig(
                "page_size must be at least 1".into(),
            ));
        }
        let server = tiny_http::Server::http(("127.0.0.1", config.port))
            .map_err(|e| ProviderError::BindFailed(e.to_string()))?;
        let server = Arc::new(server);
        let port = server
            .server_addr()
            .to_ip()
            .map(|a| a.port())
            .ok_or_else(|| ProviderError::BindFailed("no local address".into()))?;
        let base_url = format!("http://127.0.0.1:{port}/oai");
        let state = Arc::new(ProviderState {
            pending_faults: Mutex::new(config.faults.faults.clone()),
            request_log: Mutex::new(Vec::new()),
        });
        let stop = Arc::new(AtomicBool::new(false));
        let handle = {
            let server = Arc::clone(&server);
            let state = Arc::clone(&state);
            let stop = Arc::clone(&stop);
            let base_url = base_url.clone();
            std::thread::spawn(move || {
                while let Ok(request) = server.recv() {
                    if stop.load(Ordering::Relaxed) {
                        break;
                    }
                    let response = handle_request(&config, &state, &base_url, request.url());
                    let _ = match response {
                        Reply::Xml(body) => request.respond(
                            tiny_http::Response::from_string(body).with_header(content_type()),
                        ),
                        Reply::ServiceUnavailable { retry_after_secs } => request.respond(
                            tiny_http::Response::from_string("try later")
                                .with_status_code(503)
                                .with_header(
                                    tiny_http::Header::from_bytes(
                                        &b"Retry-After"[..],
                                        retry_after_secs.to_string().as_bytes(),
                                    )
                                    .expect("static header"),
                                ),
                        ),
                    };
                }
            })
        };
        Ok(MockProvider {
            base_url,
            server,
            state,
            stop,
            handle: Some(handle),
        })
    }

    /// The endpoint base URL, e.g. `http://127.0.0.1:49213/oai`.
    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    /// Requests seen so far, oldest first.
    pub fn request_log(&self) -> Vec<RequestLogEntry> {
        self.state
            .request_log
            .lock()
            .expect("request log lock")
            .clone()
    }

    /// Blocks the calling thread until the provider is dropped elsewhere
    /// or the process ends. Used by the CLI to serve in the foreground.
    pub fn wait(&self) -> ! {
        loop {
            std::thread::park();
        }
    }
}

impl Drop for MockProvider {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        self.server.unblock();
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn content_type() -> tiny_http::Header {
    tiny_http::Header::from_bytes(&b"Content-Type"[..], &b"text/xml; charset=utf-8"[..])
        .expect("static header")
}

enum Reply {
    Xml(String),
    ServiceUnavailable { retry_after_secs: u64 },
}

fn handle_request(
    config: &ProviderConfig,
    state: &ProviderState,
    base_url: &str,
    raw_url: &str,
) -> Reply {
    let query = raw_url.split_once('?').map(|(_, q)| q).unwrap_or("");
    let params = parse_query(query);
    let verb = first_value(&params, "verb");
    let token = first_value(&params, "resumptionToken");
    state
        .request_log
        .lock()
        .expect("request log lock")
        .push(RequestLogEntry {
            verb: verb.clone(),
            resumption_token: token.clone(),
        });

    respond(config, state, base_url, &params)
}

fn respond(
    config: &ProviderConfig,
    state: &ProviderState,
    base_url: &str,
    params: &[(String, String)],
) -> Reply {
    let verb_value = first_value(params, "verb");
    let envelope = |payload: &str| Reply::Xml(render_envelope(base_url, payload));
    let error = |code: OaiErrorCode, message: &str| {
        envelope(&format!(
            "<error code=\"{}\">{}</error>",
            code.as_str(),
            escape(message)
        ))
    };

    let Some(verb_value) = verb_value else {
        return error(OaiErrorCode::BadVerb, "request has no verb");
    };
    let verb = match verb_value.as_str() {
        "Identify" => OaiVerb::Identify,
        "ListMetadataFormats" => OaiVerb::ListMetadataFormats,
        "ListSets" => OaiVerb::ListSets,
        "ListIdentifiers" => OaiVerb::ListIdentifiers,
        "ListRecords" => OaiVerb::ListRecords,
        "GetRecord" => OaiVerb::GetRecord,
        other => return error(OaiErrorCode::BadVerb, &format!("unknown verb {other}")),
    };

    // Argument validation shared by all verbs.
    let mut seen = Vec::new();
    for (key, _) in params {
        if key == "verb" {
            continue;
        }
        if !verb.legal_params().contains(&key.as_str()) {
            return error(
                OaiErrorCode::BadArgument,
                &format!("argument {key} is not allowed for {verb_value}"),
            );
        }
        if seen.contains(key) {
            return error(
                OaiErrorCode::BadArgument,
                &format!("argument {key} repeated"),
            );
        }
        seen.push(key.clone());
    }
    let token = first_value(params, "resumptionToken");
    if token.is_some() && seen.len() > 1 {
        return error(
            OaiErrorCode::BadArgument,
            "resumptionToken must be the only argument",
        );
    }

    match verb {
        OaiVerb::Identify => envelope(&render_identify(config, base_url)),
        OaiVerb::ListMetadataFormats => {
            if let Some(id) = first_value(params, "identifier")
                && !config.records.iter().any(|r| r.header.identifier == id)
            {
                return error(
                    OaiErrorCode::IdDoesNotExist,
                    &format!("unknown identifier {id}"),
                );
            }
            if config.formats.is_empty() {
                return error(OaiErrorCode::NoMetadataFormats, "no formats available");
            }
            envelope(&render_formats(&config.formats))
        }
        OaiVerb::ListSets => {
            if token.is_some() {
                return error(
                    OaiErrorCode::BadResumptionToken,
                    "set lists are never paged here",
                );
            }
            if config.sets.is_empty() {
                return error(OaiErrorCode::NoSetHierarchy, "this repository has no sets");
            }
            envelope(&render_sets(&config.sets))
        }
        OaiVerb::GetRecord => {
            let Some(id) = first_value(params, "identifier") else {
                return error(OaiErrorCode::BadArgument, "identifier is required");
            };
            let Some(prefix) = first_value(params, "metadataPrefix") else {
                return error(OaiErrorCode::BadArgument, "metadataPrefix is required");
            };
            if !config.formats.contains(&prefix) {
                return error(
                    OaiErrorCode::CannotDisseminateFormat,
                    &format!("format {prefix} is not supported"),
                );
            }
            match config.records.iter().find(|r| r.header.identifier == id) {
                Some(record) => envelope(&format!(
                    "<GetRecord>{}</GetRecord>",
                    render_record(record, &prefix)
                )),
                None => error(
                    OaiErrorCode::IdDoesNotExist,
                    &format!("unknown identifier {id}"),
                ),
            }
        }
        OaiVerb::ListRecords | OaiVerb::ListIdentifiers => {
            list_reply(config, state, base_url, verb, params, token.as_deref())
        }
    }
}

fn list_reply(
    config: &ProviderConfig,
    state: &ProviderState,
    base_url: &str,
    verb: OaiVerb,
    params: &[(String, String)],
    token: Option<&str>,
) -> Reply {
    let envelope = |payload: &str| Reply::Xml(render_envelope(base_url, payload));
    let error = |code: OaiErrorCode, message: &str| {
        envelope(&format!(
            "<error code=\"{}\">{}</error>",
            code.as_str(),
            escape(message)
        ))
    };

    let total = config.records.len() as u64;
    let page_size = config.page_size as u64;
    let total_pages = total.div_ceil(page_size).max(1);

    // Resolve which page is being requested.
    let (page, prefix) = match token {
        Some(token) => {
            let page = token
                .strip_prefix("page:")
                .and_then(|n| n.parse::<u64>().ok());
            match page {
                // Tokens are only ever issued for pages 2 and up.
                Some(page) if (2..=total_pages).contains(&page) => (page, "oai_dc".to_string()),
                _ => {
                    return error(
                        OaiErrorCode::BadResumptionToken,
                        &format!("token {token:?} is not valid"),
                    );
                }
            }
        }
        None => {
            let Some(prefix) = first_value(params, "metadataPrefix") else {
                return error(OaiErrorCode::BadArgument, "metadataPrefix is required");
            };
            if !config.formats.contains(&prefix) {
                return error(
                    OaiErrorCode::CannotDisseminateFormat,
                    &format!("format {prefix} is not supported"),
                );
            }
            (1, prefix)
        }
    };

    // One-shot faults keyed to the requested page.
    {
        let mut pending = state.pending_faults.lock().expect("fault lock");
        if let Some(pos) = pending.iter().position(|f| match f {
            Fault::ServiceUnavailable { page: p, .. } | Fault::MalformedBody { page: p } => {
                *p == page
            }
            Fault::ExpireToken { page: p } => token.is_some() && *p == page,
        }) {
            let fault = pending.remove(pos);
            match fault {
                Fault::ServiceUnavailable {
                    retry_after_secs, ..
                } => {
                    return Reply::ServiceUnavailable { retry_after_secs };
                }
                Fault::MalformedBody { .. } => {
                    return Reply::Xml("<OAI-PMH><ListRecords><record><broken".into());
                }
                Fault::ExpireToken { .. } => {
                    return error(
                        OaiErrorCode::BadResumptionToken,
                        &format!("token for page {page} has expired"),
                    );
                }
            }
        }
    }

    if total == 0 {
        return error(OaiErrorCode::NoRecordsMatch, "the repository is empty");
    }

    let payload = match verb {
        OaiVerb::ListRecords => render_list_records(config, page, &prefix),
        _ => render_list_identifiers(config, page),
    };
    match payload {
        Some(payload) => envelope(&payload),
        None => error(OaiErrorCode::BadResumptionToken, "page out of range"),
    }
}

/// Renders the ListRecords payload for a 1-based page, or None when the
/// page is out of range. Public so tests can round-trip rendered pages
/// through the response parser without a socket.
pub fn render_list_records(config: &ProviderConfig, page: u64, prefix: &str) -> Option<String> {
    let (slice, token_xml) = page_slice(config, page)?;
    let mut body = String::from("<ListRecords>");
    for record in slice {
        body.push_str(&render_record(record, prefix));
    }
    body.push_str(&token_xml);
    body.push_str("</ListRecords>");
    Some(body)
}

fn render_list_identifiers(config: &ProviderConfig, page: u64) -> Option<String> {
    let (slice, token_xml) = page_slice(config, page)?;
    let mut body = String::from("<ListIdentifiers>");
    for record in slice {
        body.push_str(&render_header(&record.header));
    }
    body.push_str(&token_xml);
    body.push_str("</ListIdentifiers>");
    Some(body)
}

/// The records of a 1-based page plus the resumptionToken element to emit
/// after them: a forward token mid-list, an empty token on the last page of
/// a multi-page list, nothing for a single-page list.
fn page_slice(config: &ProviderConfig, page: u64) -> Option<(&[ProviderRecord], String)> {
    let total = config.records.len() as u64;
    let page_size = config.page_size as u64;
    if page == 0 || (page > 1 && (page - 1) * page_size >= total) {
        return None;
    }
    let start = (page - 1) * page_size;
    let end = (start + page_size).min(total);
    let slice = &config.records[start as usize..end as usize];
    let token_xml = if end < total {
        format!(
            "<resumptionToken completeListSize=\"{total}\" cursor=\"{start}\">page:{}</resumptionToken>",
            page + 1
        )
    } else if page > 1 {
        format!("<resumptionToken completeListSize=\"{total}\" cursor=\"{start}\"/>")
    } else {
        String::new()
    };
    Some((slice, token_xml))
}

fn render_envelope(base_url: &str, payload: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\
         <OAI-PMH xmlns=\"http://www.openarchives.org/OAI/2.0/\">\
         <responseDate>{}</responseDate>\
         <request>{}</request>{payload}</OAI-PMH>",
        Utc::now().format("%Y-%m-%dT%H:%M:%SZ"),
        escape(base_url),
    )
}

fn render_identify(config: &ProviderConfig, base_url: &str) -> String {
    format!(
        "<Identify><repositoryName>{}</repositoryName>\
         <baseURL>{}</baseURL>\
         <protocolVersion>2.0</protocolVersion>\
         <adminEmail>{}</adminEmail>\
         <earliestDatestamp>{}</earliestDatestamp>\
         <deletedRecord>transient</deletedRecord>\
         <granularity>YYYY-MM-DD</granularity></Identify>",
        escape(&config.repository_name),
        escape(base_url),
        escape(&config.admin_email),
        escape(&config.earliest_datestamp),
    )
}

fn render_formats(formats: &[String]) -> String {
    let mut body = String::from("<ListMetadataFormats>");
    for prefix in formats {
        let _ = write!(
            body,
            "<metadataFormat><metadataPrefix>{}</metadataPrefix>\
             <schema>http://www.openarchives.org/OAI/2.0/oai_dc.xsd</schema>\
             <metadataNamespace>{OAI_DC_NAMESPACE}</metadataNamespace></metadataFormat>",
            escape(prefix),
        );
    }
    body.push_str("</ListMetadataFormats>");
    body
}

fn render_sets(sets: &[OaiSet]) -> String {
    let mut body = String::from("<ListSets>");
    for set in sets {
        let _ = write!(
            body,
            "<set><setSpec>{}</setSpec><setName>{}</setName></set>",
            escape(&set.spec),
            escape(&set.name),
        );
    }
    body.push_str("</ListSets>");
    body
}

fn render_header(header: &RecordHeader) -> String {
    let status = if header.deleted {
        " status=\"deleted\""
    } else {
        ""
    };
    let mut xml = format!(
        "<header{status}><identifier>{}</identifier><datestamp>{}</datestamp>",
        escape(&header.identifier),
        escape(&header.datestamp),
    );
    for spec in &header.set_specs {
        let _ = write!(xml, "<setSpec>{}</setSpec>", escape(spec));
    }
    xml.push_str("</header>");
    xml
}

fn render_record(record: &ProviderRecord, _prefix: &str) -> String {
    let mut xml = String::from("<record>");
    xml.push_str(&render_header(&record.header));
    if !record.header.deleted {
        let _ = write!(
            xml,
            "<metadata><oai_dc:dc xmlns:oai_dc=\"{OAI_DC_NAMESPACE}\" xmlns:dc=\"{DC_NAMESPACE}\">"
        );
        for element in DcElement::ALL {
            for value in record.metadata.values(element) {
                let _ = write!(
                    xml,
                    "<dc:{name}>{}</dc:{name}>",
                    escape(value),
                    name = element.local_name(),
                );
            }
        }
        xml.push_str("</oai_dc:dc></metadata>");
    }
    xml.push_str("</record>");
    xml
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            other => out.push(other),
        }
    }
    out
}

fn parse_query(query: &str) -> Vec<(String, String)> {
    query
        .split('&')
        .filter(|p| !p.is_empty())
        .map(|pair| {
            let (key, value) = pair.split_once('=').unwrap_or((pair, ""));
            (decode(key), decode(value))
        })
        .collect()
}

fn decode(text: &str) -> String {
    percent_encoding::percent_decode_str(text)
        .decode_utf8_lossy()
        .into_owned()
}

fn first_value(params: &[(String, String)], key: &str) -> Option<String> {
    params
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.clone())
}
