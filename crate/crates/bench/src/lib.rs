//! Deterministic synthetic-corpus generation for the benchmarks. The
//! value pools mimic real harvests: messy language codes, repeated type
//! phrases, comma-form author names, and skewed element fill rates.

use chrono::{TimeZone, Utc};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dcqual_core::corpus_store::Corpus;
use dcqual_core::mock_provider::{ProviderConfig, ProviderRecord, render_list_records};
use dcqual_core::{DcElement, DublinCoreRecord, HarvestedRecord, RecordHeader};

const WORDS: &[&str] = &[
    "historia",
    "análisis",
    "educación",
    "sistema",
    "modelo",
    "región",
    "universidad",
    "derecho",
    "social",
    "química",
    "literatura",
    "salud",
    "política",
    "datos",
    "estudio",
    "desarrollo",
];

const SUBJECTS: &[&str] = &[
    "Ciencias Informáticas",
    "Humanidades",
    "EDUCACION SUPERIOR",
    "Educación",
    "HISTORIA",
    "PLAN DE ESTUDIOS",
    "enseñanza universitaria",
    "CIENCIAS NATURALES Y EXACTAS",
    "Literatura",
    "Medio ambiente",
    "Economía",
    "Salud pública",
];

const LANGUAGES: &[(&str, u32)] = &[
    ("spa", 28),
    ("es", 26),
    ("eng", 3),
    ("Español", 3),
    ("en", 2),
    ("spa;spa", 1),
    ("por", 1),
    ("pt", 1),
    ("es;spa", 1),
    ("", 34),
];

const TYPES: &[(&str, u32)] = &[
    ("info:eu-repo/semantics/article", 10),
    ("Artículo revisado por pares", 9),
    ("info:eu-repo/semantics/conferenceObject", 8),
    ("Articulo", 7),
    ("Objeto de conferencia", 7),
    ("tesis doctoral", 2),
    ("Revisión", 2),
    ("Libro", 1),
    ("imagen fija", 1),
    ("", 4),
];

const FORMATS: &[(&str, u32)] = &[
    ("application/pdf", 40),
    ("application/pdf; 1.2 MB", 5),
    ("PDF", 3),
    ("text/html", 2),
    ("", 50),
];

/// A weighted draw from a (value, weight) pool.
fn weighted<'a>(pool: &[(&'a str, u32)], rng: &mut ChaCha8Rng) -> &'a str {
    let total: u32 = pool.iter().map(|(_, w)| w).sum();
    let mut at = rng.random_range(0..total);
    for (value, weight) in pool {
        if at < *weight {
            return value;
        }
        at -= weight;
    }
    unreachable!("weights sum to total");
}

fn phrase(rng: &mut ChaCha8Rng, words: usize) -> String {
    let picks: Vec<&str> = (0..words)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())])
        .collect();
    picks.join(" ")
}

fn fill_metadata(metadata: &mut DublinCoreRecord, index: usize, rng: &mut ChaCha8Rng) {
    if rng.random_bool(0.72) {
        let words = rng.random_range(2..9);
        metadata.push(DcElement::Title, phrase(rng, words));
    }
    if rng.random_bool(0.66) {
        for _ in 0..rng.random_range(1..4usize) {
            let surname_first = rng.random_bool(0.92);
            let given = WORDS[rng.random_range(0..WORDS.len())];
            let name = if surname_first {
                format!("Apellido{}, {given}", rng.random_range(0..5000))
            } else {
                format!("{given} Apellido{}", rng.random_range(0..5000))
            };
            metadata.push(DcElement::Creator, name);
        }
    }
    if rng.random_bool(0.69) {
        for _ in 0..rng.random_range(1..7usize) {
            metadata.push(
                DcElement::Subject,
                SUBJECTS[rng.random_range(0..SUBJECTS.len())],
            );
        }
    }
    if rng.random_bool(0.53) {
        let words = rng.random_range(10..60);
        metadata.push(DcElement::Description, phrase(rng, words));
    }
    if rng.random_bool(0.71) {
        metadata.push(
            DcElement::Date,
            format!(
                "{:04}-{:02}-{:02}",
                1990 + index % 30,
                1 + index % 12,
                1 + index % 28
            ),
        );
    }
    let language = weighted(LANGUAGES, rng);
    if !language.is_empty() {
        metadata.push(DcElement::Language, language);
    }
    let dc_type = weighted(TYPES, rng);
    if !dc_type.is_empty() {
        metadata.push(DcElement::Type, dc_type);
    }
    let format = weighted(FORMATS, rng);
    if !format.is_empty() {
        metadata.push(DcElement::Format, format);
    }
    if rng.random_bool(0.53) {
        metadata.push(DcElement::Rights, "info:eu-repo/semantics/openAccess");
    }
    metadata.push(
        DcElement::Identifier,
        format!("http://example.org/item/{index}"),
    );
}

/// One synthetic record; the distribution depends only on the rng state.
pub fn synthetic_record(repo_id: &str, index: usize, rng: &mut ChaCha8Rng) -> HarvestedRecord {
    let mut metadata = DublinCoreRecord::default();
    fill_metadata(&mut metadata, index, rng);
    HarvestedRecord {
        repo_id: repo_id.to_string(),
        header: RecordHeader {
            identifier: format!("oai:{repo_id}:{index}"),
            datestamp: format!("2017-{:02}-{:02}", 1 + index % 12, 1 + index % 28),
            set_specs: vec![format!("set{}", index % 7)],
            deleted: false,
        },
        metadata,
        harvested_at: Utc.with_ymd_and_hms(2017, 6, 1, 0, 0, 0).unwrap(),
    }
}

/// An in-memory corpus of `records` synthetic records spread over `repos`
/// repositories. The same arguments always produce the same corpus.
pub fn synthetic_corpus(records: usize, repos: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..repos.max(1)).map(|r| format!("repo{r}")).collect();
    Corpus::from_records((0..records).map(|i| {
        let repo = &names[i % names.len()];
        synthetic_record(repo, i, &mut rng)
    }))
}

/// The raw records behind `synthetic_corpus`, for writing into a store.
pub fn synthetic_records(records: usize, repos: usize, seed: u64) -> Vec<HarvestedRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..repos.max(1)).map(|r| format!("repo{r}")).collect();
    (0..records)
        .map(|i| synthetic_record(&names[i % names.len()], i, &mut rng))
        .collect()
}

/// Pre-rendered ListRecords response pages for a synthetic repository,
/// ready to feed the parser.
pub fn rendered_pages(records: usize, page_size: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let provider_records: Vec<ProviderRecord> = (0..records)
        .map(|i| {
            let full = synthetic_record("fixture", i, &mut rng);
            ProviderRecord {
                header: full.header,
                metadata: full.metadata,
            }
        })
        .collect();
    let config = ProviderConfig {
        records: provider_records,
        page_size,
        ..ProviderConfig::default()
    };
    let mut pages = Vec::new();
    for page in 1.. {
        match render_list_records(&config, page, "oai_dc") {
            Some(payload) => pages.push(format!(
                "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\
                 <OAI-PMH xmlns=\"http://www.openarchives.org/OAI/2.0/\">\
                 <responseDate>2017-06-01T00:00:00Z</responseDate>\
                 <request>http://127.0.0.1/oai</request>{payload}</OAI-PMH>"
            )),
            None => break,
        }
    }
    pages
}
