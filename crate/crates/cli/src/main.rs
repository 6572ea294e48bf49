//! dcqual: harvest Dublin Core metadata over OAI-PMH, persist it, and
//! analyze its quality.
//!
//! Exit codes: 0 success, 1 degraded (dead endpoints, partial harvests,
//! empty corpus), 2 usage, config, or I/O errors.

use std::collections::{BTreeSet, VecDeque};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;
use std::time::Duration;
use std::{env, fs};

use anyhow::{Context, anyhow, bail};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dcqual_core::corpus_store::{CorpusStore, load_corpus};
use dcqual_core::mock_provider::{FaultScript, MockProvider, ProviderConfig, ProviderRecord};
use dcqual_core::normalization::{
    Granularity, MappingRuleSet, NormalizationReport, apply_normalization, shipped_language_rules,
    shipped_type_rules,
};
use dcqual_core::oai_protocol::{Endpoint, FetchPolicy, HarvestSummary, OaiClient, RecordSink};
use dcqual_core::quality_metrics::{AnalysisOptions, analyze_corpus};
use dcqual_core::report::{
    CompletenessStyle, ReportFormat, render_author_stats, render_completeness,
    render_descriptor_stats, render_full_report, render_length_histogram, render_repo_sizes,
    render_variant_table,
};
use dcqual_core::{DcElement, HarvestedRecord};

#[derive(Parser)]
#[command(
    name = "dcqual",
    version,
    about = "Harvest Dublin Core metadata over OAI-PMH and analyze its quality"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check which configured endpoints answer Identify and offer oai_dc.
    Verify {
        /// Endpoint list: one `<repo_id>TAB<base_url>` per line, "#" comments.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        policy: PolicyArgs,
    },
    /// Harvest every usable endpoint into a record store.
    Harvest {
        /// Endpoint list: one `<repo_id>TAB<base_url>` per line, "#" comments.
        #[arg(long)]
        config: PathBuf,
        /// Store directory; created if missing.
        #[arg(long)]
        store: PathBuf,
        /// Endpoints harvested in parallel.
        #[arg(long, default_value_t = 4)]
        concurrency: usize,
        #[command(flatten)]
        policy: PolicyArgs,
    },
    /// Compute all quality metrics over a store and write report files.
    Analyze {
        /// Store directory to load.
        #[arg(long)]
        store: PathBuf,
        /// Output directory; created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Format of the combined report file (tables are always CSV).
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
    },
    /// Apply vocabulary rules to a store and write coverage reports.
    Normalize {
        /// Store directory to load.
        #[arg(long)]
        store: PathBuf,
        /// Directory holding language.rules and/or type.rules; fields
        /// without a file here use the built-in rules.
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Output directory; created if missing.
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve a fixture file as an OAI-PMH provider until interrupted.
    ServeFixture {
        /// NDJSON fixture: one stored record per line (the store's line
        /// format). The repository name is the file stem.
        #[arg(long)]
        fixture: PathBuf,
        /// Port on 127.0.0.1; 0 picks a free one (printed on startup).
        #[arg(long, default_value_t = 0)]
        port: u16,
        #[arg(long, default_value_t = 100)]
        page_size: usize,
        /// Fault script, e.g. "503@2:1,expire@3,malformed@1".
        #[arg(long)]
        faults: Option<String>,
    },
}

#[derive(Args)]
struct PolicyArgs {
    /// Retries per request after the first attempt.
    #[arg(long, default_value_t = 3)]
    max_retries: u32,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 30)]
    timeout: u64,
    /// Pause between page requests to the same endpoint, in milliseconds.
    #[arg(long, default_value_t = 100)]
    polite_delay: u64,
}

impl PolicyArgs {
    fn policy(&self) -> FetchPolicy {
        FetchPolicy {
            max_retries: self.max_retries,
            timeout: Duration::from_secs(self.timeout),
            polite_delay: Duration::from_millis(self.polite_delay),
            ..FetchPolicy::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Md,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(error) => {
            eprintln!("dcqual: {error:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Verify { config, policy } => cmd_verify(&config, &policy),
        Command::Harvest {
            config,
            store,
            concurrency,
            policy,
        } => cmd_harvest(&config, &store, concurrency, &policy),
        Command::Analyze { store, out, format } => cmd_analyze(&store, &out, format),
        Command::Normalize { store, rules, out } => cmd_normalize(&store, rules.as_deref(), &out),
        Command::ServeFixture {
            fixture,
            port,
            page_size,
            faults,
        } => cmd_serve_fixture(&fixture, port, page_size, faults.as_deref()),
    }
}

/// The contact string appended to the User-Agent, if configured.
fn contact() -> Option<String> {
    env::var("DCQUAL_CONTACT")
        .ok()
        .filter(|v| !v.trim().is_empty())
}

/// Parses the endpoint config: `<repo_id>TAB<base_url>` lines, "#"
/// comments. Duplicate repo ids are rejected because each maps to one
/// store file.
fn read_endpoints(path: &Path) -> anyhow::Result<Vec<Endpoint>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut endpoints = Vec::new();
    let mut seen = BTreeSet::new();
    for (index, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let location = format!("{}:{}", path.display(), index + 1);
        let (repo_id, base_url) = line
            .split_once('\t')
            .ok_or_else(|| anyhow!("{location}: expected <repo_id>TAB<base_url>"))?;
        let endpoint = Endpoint::new(repo_id.trim(), base_url.trim())
            .map_err(|e| anyhow!("{location}: {e}"))?;
        if !seen.insert(endpoint.repo_id.clone()) {
            bail!("{location}: repo id {:?} appears twice", endpoint.repo_id);
        }
        endpoints.push(endpoint);
    }
    if endpoints.is_empty() {
        bail!("config {} lists no endpoints", path.display());
    }
    Ok(endpoints)
}

fn cmd_verify(config: &Path, policy: &PolicyArgs) -> anyhow::Result<ExitCode> {
    let endpoints = read_endpoints(config)?;
    let client = OaiClient::new(policy.policy(), contact().as_deref())?;
    let mut usable = 0;
    println!("{:<28} {:<6} {:<7} detail", "repository", "alive", "oai_dc");
    for endpoint in &endpoints {
        let result = client.verify_endpoint(endpoint);
        if result.alive && result.supports_oai_dc {
            usable += 1;
        }
        println!(
            "{:<28} {:<6} {:<7} {}",
            endpoint.repo_id, result.alive, result.supports_oai_dc, result.detail
        );
    }
    println!("{usable} of {} endpoints usable", endpoints.len());
    Ok(if usable > 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

/// Sink that appends to the shared store in buffered pages. A list
/// restart drops the buffer; records flushed before the restart are
/// superseded at load time by their re-delivered copies.
struct StoreSink<'a> {
    store: &'a Mutex<CorpusStore>,
    repo_id: String,
    buffer: Vec<HarvestedRecord>,
}

impl StoreSink<'_> {
    const PAGE: usize = 500;

    fn flush(&mut self) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
        if self.buffer.is_empty() {
            return Ok(());
        }
        let mut store = self.store.lock().expect("store lock");
        store.append_page(&self.repo_id, &self.buffer)?;
        self.buffer.clear();
        Ok(())
    }
}

impl RecordSink for StoreSink<'_> {
    fn record(
        &mut self,
        record: HarvestedRecord,
    ) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
        self.buffer.push(record);
        if self.buffer.len() >= Self::PAGE {
            self.flush()
        } else {
            Ok(())
        }
    }

    fn list_restarted(&mut self) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
        self.buffer.clear();
        Ok(())
    }
}

fn cmd_harvest(
    config: &Path,
    store_path: &Path,
    concurrency: usize,
    policy: &PolicyArgs,
) -> anyhow::Result<ExitCode> {
    let endpoints = read_endpoints(config)?;
    let store = Mutex::new(CorpusStore::open(store_path)?);
    let queue = Mutex::new(VecDeque::from(endpoints.clone()));
    let results: Mutex<Vec<(String, Result<HarvestSummary, String>)>> = Mutex::new(Vec::new());
    let policy = policy.policy();
    let contact = contact();

    let workers = concurrency.clamp(1, endpoints.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                let client = match OaiClient::new(policy.clone(), contact.as_deref()) {
                    Ok(client) => client,
                    Err(error) => {
                        // Without a client this worker cannot serve the
                        // queue; other workers still drain it.
                        let mut queue = queue.lock().expect("queue lock");
                        if let Some(endpoint) = queue.pop_front() {
                            results
                                .lock()
                                .expect("results lock")
                                .push((endpoint.repo_id, Err(error.to_string())));
                        }
                        return;
                    }
                };
                loop {
                    let next = queue.lock().expect("queue lock").pop_front();
                    let Some(endpoint) = next else { break };
                    let outcome = harvest_one(&client, &endpoint, &store);
                    results
                        .lock()
                        .expect("results lock")
                        .push((endpoint.repo_id.clone(), outcome));
                }
            });
        }
    });

    let mut results = results.into_inner().expect("results lock");
    results.sort_by(|a, b| a.0.cmp(&b.0));
    let mut failures = 0;
    for (repo_id, outcome) in &results {
        match outcome {
            Ok(summary) => {
                let notes = if summary.errors.is_empty() {
                    String::new()
                } else {
                    format!(" ({})", summary.errors.join("; "))
                };
                println!(
                    "{repo_id}: {} records, {} deleted, {} pages{notes}",
                    summary.records, summary.deleted, summary.pages
                );
            }
            Err(message) => {
                failures += 1;
                println!("{repo_id}: FAILED: {message}");
            }
        }
    }
    println!(
        "{} of {} harvests succeeded",
        results.len() - failures,
        results.len()
    );
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn harvest_one(
    client: &OaiClient,
    endpoint: &Endpoint,
    store: &Mutex<CorpusStore>,
) -> Result<HarvestSummary, String> {
    let check = client.verify_endpoint(endpoint);
    if !(check.alive && check.supports_oai_dc) {
        return Err(format!("endpoint unusable: {}", check.detail));
    }
    store
        .lock()
        .expect("store lock")
        .begin_harvest(&endpoint.repo_id)
        .map_err(|e| e.to_string())?;
    let mut sink = StoreSink {
        store,
        repo_id: endpoint.repo_id.clone(),
        buffer: Vec::new(),
    };
    match client.harvest_list_records(endpoint, "oai_dc", &mut sink) {
        Ok(summary) => {
            sink.flush().map_err(|e| e.to_string())?;
            store
                .lock()
                .expect("store lock")
                .finish_harvest(&endpoint.repo_id, &summary)
                .map_err(|e| e.to_string())?;
            Ok(summary)
        }
        Err(failure) => {
            // Keep whatever arrived before the failure; the manifest
            // shows the harvest as unfinished.
            let _ = sink.flush();
            Err(failure.to_string())
        }
    }
}

fn cmd_analyze(store: &Path, out: &Path, format: OutputFormat) -> anyhow::Result<ExitCode> {
    let load = load_corpus(store)?;
    if load.corpus.is_empty() {
        eprintln!("dcqual: empty corpus");
        return Ok(ExitCode::from(1));
    }
    let bundle = analyze_corpus(&load.corpus, &AnalysisOptions::default())?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let (report_name, report_format) = match format {
        OutputFormat::Csv => ("report.csv", ReportFormat::Csv),
        OutputFormat::Md => ("report.md", ReportFormat::Markdown),
    };
    let csv = ReportFormat::Csv;
    let matrix = &bundle.completeness;
    let files: Vec<(&str, String)> = vec![
        (report_name, render_full_report(&bundle, report_format)?),
        ("repo_sizes.csv", render_repo_sizes(&bundle.repo_sizes, csv)),
        (
            "completeness_relative.csv",
            render_completeness(matrix, CompletenessStyle::RelativeGrid, csv)?,
        ),
        (
            "completeness_absolute.csv",
            render_completeness(matrix, CompletenessStyle::AbsoluteList, csv)?,
        ),
        (
            "title_lengths.csv",
            render_length_histogram(&bundle.title_lengths, csv),
        ),
        (
            "description_lengths.csv",
            render_length_histogram(&bundle.description_lengths, csv),
        ),
        (
            "language_variants.csv",
            render_variant_table(&bundle.language_variants, csv),
        ),
        (
            "type_variants.csv",
            render_variant_table(&bundle.type_variants, csv),
        ),
        (
            "format_variants.csv",
            render_variant_table(&bundle.format_variants, csv),
        ),
        (
            "descriptor_stats.csv",
            render_descriptor_stats(&bundle.descriptor_stats, csv),
        ),
        (
            "author_stats.csv",
            render_author_stats(&bundle.author_stats, csv),
        ),
        ("diagnostics.csv", diagnostics_csv(&load.corrupt_lines)?),
    ];
    let count = files.len();
    for (name, contents) in files {
        let path = out.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "analyzed {} records from {} repositories; wrote {count} files to {}",
        load.corpus.len(),
        load.corpus.repos().count(),
        out.display()
    );
    if !load.corrupt_lines.is_empty() {
        eprintln!(
            "dcqual: skipped {} corrupt store lines; see diagnostics.csv",
            load.corrupt_lines.len()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn diagnostics_csv(corrupt: &[dcqual_core::corpus_store::CorruptLine]) -> anyhow::Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["file", "line", "message"])?;
    for line in corrupt {
        writer.write_record([
            line.file.display().to_string(),
            line.line.to_string(),
            line.message.clone(),
        ])?;
    }
    Ok(String::from_utf8(writer.into_inner()?)?)
}

fn cmd_normalize(store: &Path, rules: Option<&Path>, out: &Path) -> anyhow::Result<ExitCode> {
    let load = load_corpus(store)?;
    if load.corpus.is_empty() {
        eprintln!("dcqual: empty corpus");
        return Ok(ExitCode::from(1));
    }
    let language_rules = load_rule_file(
        rules,
        "language.rules",
        DcElement::Language,
        Granularity::PerToken,
    )?
    .unwrap_or_else(|| shipped_language_rules().clone());
    let type_rules = load_rule_file(rules, "type.rules", DcElement::Type, Granularity::PerRecord)?
        .unwrap_or_else(|| shipped_type_rules().clone());

    let (views, reports) = apply_normalization(&load.corpus, &[language_rules, type_rules]);
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    for report in &reports {
        let name = format!("normalization_{}.csv", report.field.local_name());
        let path = out.join(&name);
        fs::write(&path, normalization_csv(report)?)
            .with_context(|| format!("writing {}", path.display()))?;
        let pct = if report.total_values == 0 {
            0.0
        } else {
            100.0 * report.resolved as f64 / report.total_values as f64
        };
        println!(
            "{}: {} of {} units resolved ({pct:.2}%), {} distinct unresolved",
            report.field.local_name(),
            report.resolved,
            report.total_values,
            report.unresolved_values.len()
        );
    }

    let path = out.join("normalized_records.ndjson");
    let mut lines = String::new();
    for view in &views {
        lines.push_str(&serde_json::to_string(view)?);
        lines.push('\n');
    }
    fs::write(&path, lines).with_context(|| format!("writing {}", path.display()))?;
    Ok(ExitCode::SUCCESS)
}

/// Loads `<dir>/<name>` when a rules dir is given and the file exists;
/// None means the caller should fall back to the built-in rules.
fn load_rule_file(
    rules_dir: Option<&Path>,
    name: &str,
    field: DcElement,
    granularity: Granularity,
) -> anyhow::Result<Option<MappingRuleSet>> {
    let Some(dir) = rules_dir else {
        return Ok(None);
    };
    let path = dir.join(name);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let set = MappingRuleSet::parse(field, granularity, &text)
        .map_err(|e| anyhow!("{}: {e}", path.display()))?;
    Ok(Some(set))
}

fn normalization_csv(report: &NormalizationReport) -> anyhow::Result<String> {
    let mut out = String::from("# Summary\n");
    let mut summary = csv::Writer::from_writer(Vec::new());
    summary.write_record(["metric", "value"])?;
    summary.write_record(["field".into(), report.field.local_name().to_string()])?;
    summary.write_record(["total_values".into(), report.total_values.to_string()])?;
    summary.write_record(["resolved".into(), report.resolved.to_string()])?;
    let unresolved: u64 = report.unresolved_values.iter().map(|(_, n)| n).sum();
    summary.write_record(["unresolved".into(), unresolved.to_string()])?;
    out.push_str(&String::from_utf8(summary.into_inner()?)?);

    out.push_str("\n# Canonical distribution\n");
    let mut distribution = csv::Writer::from_writer(Vec::new());
    distribution.write_record(["canonical", "count"])?;
    for (canonical, count) in &report.canonical_distribution {
        distribution.write_record([canonical.clone(), count.to_string()])?;
    }
    out.push_str(&String::from_utf8(distribution.into_inner()?)?);

    out.push_str("\n# Unresolved values\n");
    let mut misses = csv::Writer::from_writer(Vec::new());
    misses.write_record(["value", "count"])?;
    for (value, count) in &report.unresolved_values {
        misses.write_record([value.clone(), count.to_string()])?;
    }
    out.push_str(&String::from_utf8(misses.into_inner()?)?);
    Ok(out)
}

fn cmd_serve_fixture(
    fixture: &Path,
    port: u16,
    page_size: usize,
    faults: Option<&str>,
) -> anyhow::Result<ExitCode> {
    let text = fs::read_to_string(fixture)
        .with_context(|| format!("reading fixture {}", fixture.display()))?;
    let mut records = Vec::new();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: HarvestedRecord = serde_json::from_str(line)
            .map_err(|e| anyhow!("{}:{}: {e}", fixture.display(), index + 1))?;
        records.push(ProviderRecord {
            header: record.header,
            metadata: record.metadata,
        });
    }
    let name = fixture
        .file_stem()
        .and_then(|stem| stem.to_str())
        .unwrap_or("fixture")
        .to_string();
    let faults = match faults {
        Some(script) => FaultScript::parse(script).map_err(|e| anyhow!("fault script: {e}"))?,
        None => FaultScript::default(),
    };
    let config = ProviderConfig {
        repository_name: name,
        records,
        page_size,
        faults,
        port,
        ..ProviderConfig::default()
    };
    let record_count = config.records.len();
    let provider = MockProvider::start(config)?;
    println!("serving {record_count} records at {}", provider.base_url());
    std::io::stdout().flush().ok();
    provider.wait()
}
