//! Shared fixtures for the acceptance suite: a seeded generator that
//! produces messy, collision-rich corpora, plus small builders.

pub mod oracle;

use chrono::{TimeZone, Utc};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dcqual_core::{DcElement, DublinCoreRecord, HarvestedRecord, RecordHeader};

/// Descriptor pool small enough that values repeat across records, so
/// top-descriptor rankings and tie-breaks get exercised.
pub const DESCRIPTORS: &[&str] = &[
    "Ciencias Informáticas",
    "Educación",
    "HISTORIA",
    "Literatura",
    "enseñanza universitaria",
    "Salud pública",
    "Química",
    "derecho;constitucional",
    "  ",
    "",
];

const CREATORS: &[&str] = &[
    "García, Juan",
    "Pérez, Ana María",
    "Juan García",
    "ÁLVAREZ, JOSÉ",
    "= , =",
    " , ",
    "Muñoz Torres, María",
    "A,B",
];

const LANGUAGES: &[&str] = &[
    "spa", "es", "Español", "eng", "en", "spa;spa", "por", "", "  ", "klingon",
];

const TYPES: &[&str] = &[
    "info:eu-repo/semantics/article",
    "Artículo",
    "article",
    "Article",
    "Objeto de conferencia",
    "tesis",
    "",
    "texto; más texto",
];

const WORDS: &[&str] = &[
    "historia",
    "análisis",
    "educación",
    "región",
    "química",
    "ñandú",
    "término",
    "vacío",
    "semi;colon",
    "a",
    "de",
    "la",
];

fn words(rng: &mut ChaCha8Rng, count: usize) -> String {
    let picks: Vec<&str> = (0..count)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())])
        .collect();
    picks.join(" ")
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.random_range(0..pool.len())]
}

/// One corpus of 1..=1000 records over up to three repositories, with
/// unique identifiers so nothing deduplicates away.
pub fn random_corpus(seed: u64) -> Vec<HarvestedRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=1000);
    let repo_count = rng.random_range(1..=3usize);
    generate(rng, n, repo_count)
}

/// A corpus of exactly `n` records over `repo_count` repositories.
pub fn corpus_sized(n: usize, repo_count: usize, seed: u64) -> Vec<HarvestedRecord> {
    generate(ChaCha8Rng::seed_from_u64(seed), n, repo_count)
}

fn generate(mut rng: ChaCha8Rng, n: usize, repo_count: usize) -> Vec<HarvestedRecord> {
    let repos: Vec<String> = (0..repo_count.max(1)).map(|r| format!("repo{r}")).collect();

    (0..n)
        .map(|i| {
            let repo = repos[rng.random_range(0..repos.len())].as_str();
            let mut metadata = DublinCoreRecord::default();

            // Titles vary in length across the histogram buckets and
            // sometimes embed a descriptor to trigger in-title matches.
            if rng.random_bool(0.8) {
                let count = match rng.random_range(0..4) {
                    0 => rng.random_range(1..4),
                    1 => rng.random_range(4..20),
                    2 => rng.random_range(20..60),
                    _ => 0,
                };
                let mut title = words(&mut rng, count);
                if rng.random_bool(0.4) {
                    title.push(' ');
                    title.push_str(pick(&mut rng, DESCRIPTORS));
                }
                metadata.push(DcElement::Title, title);
            }
            if rng.random_bool(0.6) {
                let count = rng.random_range(1..40);
                let mut description = words(&mut rng, count);
                if rng.random_bool(0.4) {
                    description.push(' ');
                    description.push_str(pick(&mut rng, DESCRIPTORS));
                }
                metadata.push(DcElement::Description, description);
            }

            let creators = match rng.random_range(0..10) {
                0..=4 => rng.random_range(0..=3usize),
                5..=8 => rng.random_range(4..=10usize),
                _ => rng.random_range(11..=13usize),
            };
            for _ in 0..creators {
                metadata.push(DcElement::Creator, pick(&mut rng, CREATORS));
            }

            for _ in 0..rng.random_range(0..=6usize) {
                metadata.push(DcElement::Subject, pick(&mut rng, DESCRIPTORS));
            }
            for _ in 0..rng.random_range(0..=2usize) {
                metadata.push(DcElement::Language, pick(&mut rng, LANGUAGES));
            }
            for _ in 0..rng.random_range(0..=2usize) {
                metadata.push(DcElement::Type, pick(&mut rng, TYPES));
            }
            if rng.random_bool(0.4) {
                metadata.push(
                    DcElement::Format,
                    pick(&mut rng, &["application/pdf", "PDF", ""]),
                );
            }
            if rng.random_bool(0.5) {
                metadata.push(DcElement::Date, format!("20{:02}", rng.random_range(0..18)));
            }
            if rng.random_bool(0.3) {
                metadata.push(DcElement::Rights, "info:eu-repo/semantics/openAccess");
            }
            if rng.random_bool(0.7) {
                metadata.push(DcElement::Identifier, format!("http://example.org/{i}"));
            }

            let set_specs = match rng.random_range(0..5) {
                0 => vec![],
                1 => vec!["  ".to_string()],
                _ => vec![format!("set{}", rng.random_range(0..3))],
            };
            HarvestedRecord {
                repo_id: repo.to_string(),
                header: RecordHeader {
                    identifier: format!("oai:{repo}:{i}"),
                    datestamp: "2017-03-14".into(),
                    set_specs,
                    deleted: false,
                },
                metadata,
                harvested_at: Utc.with_ymd_and_hms(2017, 3, 14, 0, 0, 0).unwrap(),
            }
        })
        .collect()
}

/// A minimal record: one repo, unique identifier, the given metadata.
pub fn record_with(repo: &str, index: usize, metadata: DublinCoreRecord) -> HarvestedRecord {
    HarvestedRecord {
        repo_id: repo.to_string(),
        header: RecordHeader {
            identifier: format!("oai:{repo}:{index}"),
            datestamp: "2017-03-14".into(),
            set_specs: vec!["col".into()],
            deleted: false,
        },
        metadata,
        harvested_at: Utc.with_ymd_and_hms(2017, 3, 14, 0, 0, 0).unwrap(),
    }
}
