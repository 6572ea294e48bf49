//! Durable storage for harvested records.
//!
//! Layout under a store root:
//!
//! ```text
//! <root>/records/<repo_id>.ndjson   one JSON record per line, append-only
//! <root>/manifest.json              per-repository harvest bookkeeping
//! <root>/.lock                      advisory write lock
//! ```
//!
//! Each record line is the [`HarvestedRecord`] JSON object plus a schema
//! version field `v`. Appends never rewrite existing data; deduplication
//! happens when the corpus is loaded, which keeps the harvest hot path a
//! sequential write. The key is `(repo_id, header.identifier)`: the later
//! datestamp wins, ties go to the later harvest time.

use std::collections::BTreeMap;
use std::collections::btree_map::Entry;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oai_protocol::HarvestSummary;
use crate::record_model::HarvestedRecord;

/// Version stamped into every record line as field `v`.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("store {0:?} is locked by another writer; remove .lock if it is stale")]
    Locked(PathBuf),
    #[error("repository id {0:?} must match [A-Za-z0-9._-]+ to name a store file")]
    InvalidRepoId(String),
    #[error("record belongs to repository {record:?}, not to {target:?}")]
    RepoMismatch { record: String, target: String },
    #[error("encoding record: {0}")]
    Encode(#[from] serde_json::Error),
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> StoreError {
    let context = context.into();
    move |source| StoreError::Io { context, source }
}

/// A record line that could not be parsed during load. Loading skips the
/// line and carries on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorruptLine {
    pub file: PathBuf,
    /// 1-based line number.
    pub line: u64,
    pub message: String,
}

/// Per-repository harvest bookkeeping, kept in `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepoManifest {
    /// Window of the most recent harvest run against this repository.
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    /// Lines ever appended for this repository, duplicates included.
    pub appended_records: u64,
    /// Counters of the most recent completed harvest; None while a run is
    /// in flight or after a crash mid-run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<HarvestSummary>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub repos: BTreeMap<String, RepoManifest>,
}

/// Write handle for one store. Holds the advisory lock from open until
/// drop; only one writer may hold a store at a time.
pub struct CorpusStore {
    root: PathBuf,
    manifest: Manifest,
}

impl CorpusStore {
    /// Opens a store for writing, creating the directory layout when
    /// needed, and takes the advisory lock.
    pub fn open(root: impl Into<PathBuf>) -> Result<CorpusStore, StoreError> {
        let root = root.into();
        fs::create_dir_all(records_dir(&root))
            .map_err(io_err(format!("creating {}", records_dir(&root).display())))?;
        let lock = lock_path(&root);
        let mut file = match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(file) => file,
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(StoreError::Locked(root));
            }
            Err(e) => return Err(io_err(format!("creating {}", lock.display()))(e)),
        };
        let _ = writeln!(file, "pid {} at {}", std::process::id(), Utc::now());
        let manifest = read_manifest(&root)?;
        Ok(CorpusStore { root, manifest })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Marks the start of a harvest run: resets the repository's window
    /// and clears its summary until [`CorpusStore::finish_harvest`].
    pub fn begin_harvest(&mut self, repo_id: &str) -> Result<(), StoreError> {
        validate_repo_id(repo_id)?;
        let now = Utc::now();
        let entry = self
            .manifest
            .repos
            .entry(repo_id.to_string())
            .or_insert(RepoManifest {
                started_at: now,
                finished_at: now,
                appended_records: 0,
                summary: None,
            });
        entry.started_at = now;
        entry.finished_at = now;
        entry.summary = None;
        self.save_manifest()
    }

    /// Appends one page of records for a repository, in arrival order.
    /// Returns the number of lines written.
    pub fn append_page(
        &mut self,
        repo_id: &str,
        records: &[HarvestedRecord],
    ) -> Result<usize, StoreError> {
        validate_repo_id(repo_id)?;
        for record in records {
            if record.repo_id != repo_id {
                return Err(StoreError::RepoMismatch {
                    record: record.repo_id.clone(),
                    target: repo_id.to_string(),
                });
            }
        }
        let path = record_file(&self.root, repo_id);
        let file = OpenOptions::new()
            .append(true)
            .create(true)
            .open(&path)
            .map_err(io_err(format!("opening {}", path.display())))?;
        let mut out = BufWriter::new(file);
        for record in records {
            let line = serde_json::to_string(&StoredLine {
                v: SCHEMA_VERSION,
                record,
            })?;
            out.write_all(line.as_bytes())
                .and_then(|()| out.write_all(b"\n"))
                .map_err(io_err(format!("writing {}", path.display())))?;
        }
        out.flush()
            .map_err(io_err(format!("writing {}", path.display())))?;
        out.get_ref()
            .sync_data()
            .map_err(io_err(format!("syncing {}", path.display())))?;

        let now = Utc::now();
        let entry = self
            .manifest
            .repos
            .entry(repo_id.to_string())
            .or_insert(RepoManifest {
                started_at: now,
                finished_at: now,
                appended_records: 0,
                summary: None,
            });
        entry.finished_at = now;
        entry.appended_records += records.len() as u64;
        self.save_manifest()?;
        Ok(records.len())
    }

    /// Closes a harvest run: stamps the window end and stores the run's
    /// counters.
    pub fn finish_harvest(
        &mut self,
        repo_id: &str,
        summary: &HarvestSummary,
    ) -> Result<(), StoreError> {
        validate_repo_id(repo_id)?;
        let now = Utc::now();
        let entry = self
            .manifest
            .repos
            .entry(repo_id.to_string())
            .or_insert(RepoManifest {
                started_at: now,
                finished_at: now,
                appended_records: 0,
                summary: None,
            });
        entry.finished_at = now;
        entry.summary = Some(summary.clone());
        self.save_manifest()
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// Writes the manifest atomically: temp file, sync, rename.
    fn save_manifest(&self) -> Result<(), StoreError> {
        let path = manifest_path(&self.root);
        let tmp = self.root.join("manifest.json.tmp");
        let file = File::create(&tmp).map_err(io_err(format!("creating {}", tmp.display())))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut out, &self.manifest)?;
        out.write_all(b"\n")
            .and_then(|()| out.flush())
            .map_err(io_err(format!("writing {}", tmp.display())))?;
        out.get_ref()
            .sync_data()
            .map_err(io_err(format!("syncing {}", tmp.display())))?;
        fs::rename(&tmp, &path).map_err(io_err(format!("replacing {}", path.display())))
    }
}

impl Drop for CorpusStore {
    fn drop(&mut self) {
        let _ = fs::remove_file(lock_path(&self.root));
    }
}

#[derive(Serialize)]
struct StoredLine<'a> {
    v: u32,
    #[serde(flatten)]
    record: &'a HarvestedRecord,
}

#[derive(Deserialize)]
struct LoadedLine {
    v: u32,
    #[serde(flatten)]
    record: HarvestedRecord,
}

/// The deduplicated, order-stable view of a store. Iteration is always
/// repository id ascending, then record identifier ascending.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    repos: BTreeMap<String, BTreeMap<String, HarvestedRecord>>,
    manifest: Manifest,
}

impl Corpus {
    /// Builds a corpus in memory, applying the same deduplication rule as
    /// a store load.
    pub fn from_records(records: impl IntoIterator<Item = HarvestedRecord>) -> Corpus {
        let mut corpus = Corpus::default();
        for record in records {
            corpus.insert(record);
        }
        corpus
    }

    fn insert(&mut self, record: HarvestedRecord) {
        let repo = self.repos.entry(record.repo_id.clone()).or_default();
        match repo.entry(record.header.identifier.clone()) {
            Entry::Vacant(slot) => {
                slot.insert(record);
            }
            Entry::Occupied(mut slot) => {
                if replaces(slot.get(), &record) {
                    slot.insert(record);
                }
            }
        }
    }

    /// Total records after deduplication.
    pub fn len(&self) -> usize {
        self.repos.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.repos.values().all(BTreeMap::is_empty)
    }

    /// All records, repository id ascending then identifier ascending.
    pub fn records(&self) -> impl Iterator<Item = &HarvestedRecord> {
        self.repos.values().flat_map(BTreeMap::values)
    }

    /// Repository ids with their record counts, id ascending.
    pub fn repos(&self) -> impl Iterator<Item = (&str, usize)> {
        self.repos
            .iter()
            .map(|(id, records)| (id.as_str(), records.len()))
    }

    /// Records of one repository, identifier ascending.
    pub fn records_for(&self, repo_id: &str) -> impl Iterator<Item = &HarvestedRecord> {
        self.repos
            .get(repo_id)
            .into_iter()
            .flat_map(BTreeMap::values)
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }
}

/// The newer record under the dedup rule: later datestamp wins
/// (datestamps are ISO 8601 UTC, so string order is time order), equal
/// datestamps go to the later harvest, and a full tie keeps the newcomer.
fn replaces(old: &HarvestedRecord, new: &HarvestedRecord) -> bool {
    match new.header.datestamp.cmp(&old.header.datestamp) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => new.harvested_at >= old.harvested_at,
    }
}

/// A loaded corpus plus whatever could not be read.
#[derive(Debug, Default)]
pub struct CorpusLoad {
    pub corpus: Corpus,
    pub corrupt_lines: Vec<CorruptLine>,
}

/// Reads and deduplicates a whole store. Individual malformed lines are
/// reported with their location and skipped; only filesystem problems
/// fail the load. Read-only: does not take the writer lock.
pub fn load_corpus(root: impl AsRef<Path>) -> Result<CorpusLoad, StoreError> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(StoreError::Io {
            context: format!("store root {}", root.display()),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such directory"),
        });
    }
    let mut load = CorpusLoad {
        corpus: Corpus {
            manifest: read_manifest(root)?,
            ..Corpus::default()
        },
        ..CorpusLoad::default()
    };

    let records = records_dir(root);
    if !records.is_dir() {
        return Ok(load);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(&records)
        .map_err(io_err(format!("listing {}", records.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "ndjson"))
        .collect();
    files.sort();

    for path in files {
        let file = File::open(&path).map_err(io_err(format!("opening {}", path.display())))?;
        let reader = BufReader::new(file);
        for (index, line) in reader.lines().enumerate() {
            let number = index as u64 + 1;
            let line = line.map_err(io_err(format!("reading {}", path.display())))?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<LoadedLine>(&line) {
                Ok(parsed) if parsed.v == SCHEMA_VERSION => load.corpus.insert(parsed.record),
                Ok(parsed) => load.corrupt_lines.push(CorruptLine {
                    file: path.clone(),
                    line: number,
                    message: format!("unsupported schema version {}", parsed.v),
                }),
                Err(e) => load.corrupt_lines.push(CorruptLine {
                    file: path.clone(),
                    line: number,
                    message: e.to_string(),
                }),
            }
        }
    }
    Ok(load)
}

/// Reads just the manifest; an absent manifest is an empty one.
pub fn read_manifest(root: impl AsRef<Path>) -> Result<Manifest, StoreError> {
    let path = manifest_path(root.as_ref());
    match fs::read(&path) {
        Ok(bytes) => Ok(serde_json::from_slice(&bytes)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Manifest::default()),
        Err(e) => Err(io_err(format!("reading {}", path.display()))(e)),
    }
}

fn validate_repo_id(repo_id: &str) -> Result<(), StoreError> {
    let valid = !repo_id.is_empty()
        && repo_id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
    if valid {
        Ok(())
    } else {
        Err(StoreError::InvalidRepoId(repo_id.to_string()))
    }
}

fn records_dir(root: &Path) -> PathBuf {
    root.join("records")
}

fn record_file(root: &Path, repo_id: &str) -> PathBuf {
    records_dir(root).join(format!("{repo_id}.ndjson"))
}

fn manifest_path(root: &Path) -> PathBuf {
    root.join("manifest.json")
}

fn lock_path(root: &Path) -> PathBuf {
    root.join(".lock")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record_model::{DcElement, DublinCoreRecord, RecordHeader};
    use chrono::TimeZone;

    fn record(repo: &str, id: &str, datestamp: &str, title: &str) -> HarvestedRecord {
        let mut metadata = DublinCoreRecord::default();
        metadata.push(DcElement::Title, title);
        HarvestedRecord {
            repo_id: repo.into(),
            header: RecordHeader {
                identifier: id.into(),
                datestamp: datestamp.into(),
                set_specs: vec![],
                deleted: false,
            },
            metadata,
            harvested_at: Utc.with_ymd_and_hms(2017, 3, 14, 12, 0, 0).unwrap(),
        }
    }

    #[test]
    fn append_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = CorpusStore::open(dir.path()).unwrap();
        let page = vec![
            record("alpha", "oai:a:1", "2017-01-01", "uno"),
            record("alpha", "oai:a:2", "2017-01-02", "dos"),
            record("alpha", "oai:a:3", "2017-01-03", "tres"),
        ];
        assert_eq!(store.append_page("alpha", &page).unwrap(), 3);
        drop(store);

        let load = load_corpus(dir.path()).unwrap();
        assert!(load.corrupt_lines.is_empty());
        assert_eq!(load.corpus.len(), 3);
        let titles: Vec<_> = load
            .corpus
            .records()
            .map(|r| r.metadata.title[0].clone())
            .collect();
        assert_eq!(titles, ["uno", "dos", "tres"]);
    }

    #[test]
    fn appending_the_same_page_twice_deduplicates_at_load() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = CorpusStore::open(dir.path()).unwrap();
        let page = vec![
            record("alpha", "oai:a:1", "2017-01-01", "uno"),
            record("alpha", "oai:a:2", "2017-01-02", "dos"),
            record("alpha", "oai:a:3", "2017-01-03", "tres"),
        ];
        store.append_page("alpha", &page).unwrap();
        store.append_page("alpha", &page).unwrap();
        drop(store);
        let load = load_corpus(dir.path()).unwrap();
        assert_eq!(load.corpus.len(), 3);
    }

    #[test]
    fn later_datestamp_wins_regardless_of_append_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = CorpusStore::open(dir.path()).unwrap();
        store
            .append_page(
                "alpha",
                &[
                    record("alpha", "oai:a:1", "2017-06-01", "nuevo"),
                    record("alpha", "oai:a:1", "2017-01-01", "viejo"),
                ],
            )
            .unwrap();
        drop(store);
        let load = load_corpus(dir.path()).unwrap();
        assert_eq!(load.corpus.len(), 1);
        assert_eq!(
            load.corpus.records().next().unwrap().metadata.title,
            vec!["nuevo"]
        );
    }

    #[test]
    fn datestamp_tie_goes_to_the_later_harvest() {
        let mut first = record("alpha", "oai:a:1", "2017-01-01", "temprano");
        first.harvested_at = Utc.with_ymd_and_hms(2017, 3, 14, 8, 0, 0).unwrap();
        let mut second = record("alpha", "oai:a:1", "2017-01-01", "tarde");
        second.harvested_at = Utc.with_ymd_and_hms(2017, 3, 14, 9, 0, 0).unwrap();

        let corpus = Corpus::from_records([second.clone(), first.clone()]);
        assert_eq!(
            corpus.records().next().unwrap().metadata.title,
            vec!["tarde"]
        );
        let corpus = Corpus::from_records([first, second]);
        assert_eq!(
            corpus.records().next().unwrap().metadata.title,
            vec!["tarde"]
        );
    }

    #[test]
    fn iteration_is_repo_then_identifier_ascending() {
        let corpus = Corpus::from_records([
            record("beta", "oai:b:2", "2017-01-01", "b2"),
            record("alpha", "oai:a:9", "2017-01-01", "a9"),
            record("beta", "oai:b:1", "2017-01-01", "b1"),
            record("alpha", "oai:a:10", "2017-01-01", "a10"),
        ]);
        let keys: Vec<_> = corpus
            .records()
            .map(|r| (r.repo_id.clone(), r.header.identifier.clone()))
            .collect();
        // Identifier order is plain string order: "oai:a:10" < "oai:a:9".
        assert_eq!(
            keys,
            [
                ("alpha".to_string(), "oai:a:10".to_string()),
                ("alpha".to_string(), "oai:a:9".to_string()),
                ("beta".to_string(), "oai:b:1".to_string()),
                ("beta".to_string(), "oai:b:2".to_string()),
            ]
        );
        let repos: Vec<_> = corpus.repos().collect();
        assert_eq!(repos, [("alpha", 2), ("beta", 2)]);
        assert_eq!(corpus.records_for("beta").count(), 2);
        assert_eq!(corpus.records_for("missing").count(), 0);
    }

    #[test]
    fn corrupt_lines_are_reported_and_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = CorpusStore::open(dir.path()).unwrap();
        let page: Vec<_> = (0..10)
            .map(|i| record("alpha", &format!("oai:a:{i}"), "2017-01-01", "t"))
            .collect();
        store.append_page("alpha", &page).unwrap();
        drop(store);

        // Wedge garbage into the middle of the file.
        let path = dir.path().join("records/alpha.ndjson");
        let mut lines: Vec<String> = fs::read_to_string(&path)
            .unwrap()
            .lines()
            .map(String::from)
            .collect();
        lines.insert(4, "{not json at all".into());
        lines.insert(7, String::new());
        fs::write(&path, lines.join("\n") + "\n").unwrap();

        let load = load_corpus(dir.path()).unwrap();
        assert_eq!(load.corpus.len(), 10);
        assert_eq!(load.corrupt_lines.len(), 1);
        assert_eq!(load.corrupt_lines[0].file, path);
        assert_eq!(load.corrupt_lines[0].line, 5);
    }

    #[test]
    fn unsupported_schema_version_is_a_corrupt_line() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = CorpusStore::open(dir.path()).unwrap();
        store
            .append_page("alpha", &[record("alpha", "oai:a:1", "2017-01-01", "t")])
            .unwrap();
        drop(store);

        let path = dir.path().join("records/alpha.ndjson");
        let line = fs::read_to_string(&path)
            .unwrap()
            .replace("\"v\":1", "\"v\":99");
        fs::write(&path, line).unwrap();
        let load = load_corpus(dir.path()).unwrap();
        assert_eq!(load.corpus.len(), 0);
        assert_eq!(load.corrupt_lines.len(), 1);
        assert!(load.corrupt_lines[0].message.contains("schema version 99"));
    }

    #[test]
    fn empty_store_loads_as_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        drop(CorpusStore::open(dir.path()).unwrap());
        let load = load_corpus(dir.path()).unwrap();
        assert!(load.corpus.is_empty());
        assert_eq!(load.corpus.len(), 0);
        assert!(load.corrupt_lines.is_empty());
    }

    #[test]
    fn loading_a_missing_store_fails() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope");
        assert!(matches!(load_corpus(&missing), Err(StoreError::Io { .. })));
    }

    #[test]
    fn append_to_an_unwritable_target_fails_with_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = CorpusStore::open(dir.path()).unwrap();
        // A directory where the record file should be forces the append
        // open to fail, whoever runs the test.
        fs::create_dir(dir.path().join("records/alpha.ndjson")).unwrap();
        let result = store.append_page("alpha", &[record("alpha", "oai:a:1", "2017-01-01", "t")]);
        assert!(matches!(result, Err(StoreError::Io { .. })));
    }

    #[test]
    fn second_writer_is_rejected_until_the_first_closes() {
        let dir = tempfile::tempdir().unwrap();
        let store = CorpusStore::open(dir.path()).unwrap();
        assert!(matches!(
            CorpusStore::open(dir.path()),
            Err(StoreError::Locked(_))
        ));
        drop(store);
        CorpusStore::open(dir.path()).unwrap();
    }

    #[test]
    fn repo_id_and_membership_are_validated() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = CorpusStore::open(dir.path()).unwrap();
        assert!(matches!(
            store.append_page("../escape", &[]),
            Err(StoreError::InvalidRepoId(_))
        ));
        assert!(matches!(
            store.append_page("beta", &[record("alpha", "oai:a:1", "2017-01-01", "t")]),
            Err(StoreError::RepoMismatch { .. })
        ));
    }

    #[test]
    fn manifest_tracks_harvest_windows_and_summaries() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = CorpusStore::open(dir.path()).unwrap();
        store.begin_harvest("alpha").unwrap();
        store
            .append_page("alpha", &[record("alpha", "oai:a:1", "2017-01-01", "t")])
            .unwrap();
        let in_flight = read_manifest(dir.path()).unwrap();
        assert!(in_flight.repos["alpha"].summary.is_none());
        assert_eq!(in_flight.repos["alpha"].appended_records, 1);

        let summary = HarvestSummary {
            pages: 1,
            records: 1,
            ..HarvestSummary::default()
        };
        store.finish_harvest("alpha", &summary).unwrap();
        drop(store);

        let manifest = read_manifest(dir.path()).unwrap();
        let repo = &manifest.repos["alpha"];
        assert_eq!(repo.summary.as_ref().unwrap().records, 1);
        assert!(repo.started_at <= repo.finished_at);

        // A fresh run resets the window and clears the stale summary.
        let mut store = CorpusStore::open(dir.path()).unwrap();
        store.begin_harvest("alpha").unwrap();
        let manifest = store.manifest().clone();
        assert!(manifest.repos["alpha"].summary.is_none());
        assert!(manifest.repos["alpha"].started_at >= repo.finished_at);

        // The loaded corpus exposes the same manifest.
        drop(store);
        let load = load_corpus(dir.path()).unwrap();
        assert_eq!(load.corpus.manifest().repos["alpha"].appended_records, 1);
    }

    #[test]
    fn from_records_matches_a_store_round_trip() {
        let records = vec![
            record("beta", "oai:b:1", "2017-01-01", "b"),
            record("alpha", "oai:a:1", "2017-01-01", "a"),
            record("alpha", "oai:a:1", "2017-02-01", "a2"),
        ];
        let dir = tempfile::tempdir().unwrap();
        let mut store = CorpusStore::open(dir.path()).unwrap();
        for record in &records {
            store
                .append_page(&record.repo_id.clone(), std::slice::from_ref(record))
                .unwrap();
        }
        drop(store);
        let loaded = load_corpus(dir.path()).unwrap().corpus;
        let in_memory = Corpus::from_records(records);
        assert_eq!(
            loaded.records().collect::<Vec<_>>(),
            in_memory.records().collect::<Vec<_>>()
        );
    }
}
