//! Brute-force reference computations for every corpus metric, written
//! as plain nested loops over the records with no logic shared with the
//! library. Deliberately naive: correctness over speed.

use std::collections::{BTreeMap, BTreeSet};

use dcqual_core::{DcElement, HarvestedRecord};

/// Completeness column labels paired with the element they report on.
/// The metadata identifier is reported as "identifier2"; "setSpec" comes
/// from the header and is handled separately.
pub const DC_LABELS: [(&str, DcElement); 15] = [
    ("title", DcElement::Title),
    ("creator", DcElement::Creator),
    ("subject", DcElement::Subject),
    ("description", DcElement::Description),
    ("publisher", DcElement::Publisher),
    ("contributor", DcElement::Contributor),
    ("date", DcElement::Date),
    ("type", DcElement::Type),
    ("format", DcElement::Format),
    ("source", DcElement::Source),
    ("language", DcElement::Language),
    ("relation", DcElement::Relation),
    ("coverage", DcElement::Coverage),
    ("rights", DcElement::Rights),
    ("identifier2", DcElement::Identifier),
];

pub fn join(record: &HarvestedRecord, element: DcElement) -> String {
    record.metadata.values(element).join(";")
}

pub fn filled(record: &HarvestedRecord, element: DcElement) -> bool {
    join(record, element).chars().any(|c| !c.is_whitespace())
}

pub fn setspec_filled(record: &HarvestedRecord) -> bool {
    record
        .header
        .set_specs
        .iter()
        .any(|s| s.chars().any(|c| !c.is_whitespace()))
}

/// Case and accent folding via an explicit character map covering the
/// alphabet the fixtures use.
pub fn fold(text: &str) -> String {
    text.chars()
        .map(|c| match c {
            'á' | 'Á' => 'a',
            'é' | 'É' => 'e',
            'í' | 'Í' => 'i',
            'ó' | 'Ó' => 'o',
            'ú' | 'Ú' | 'ü' | 'Ü' => 'u',
            'ñ' | 'Ñ' => 'n',
            other => other.to_ascii_lowercase(),
        })
        .collect()
}

/// (repo, records, share percent), largest first, ties by id.
pub fn repo_sizes(records: &[HarvestedRecord]) -> Vec<(String, u64, f64)> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for record in records {
        *counts.entry(record.repo_id.clone()).or_default() += 1;
    }
    let total: u64 = counts.values().sum();
    let mut rows: Vec<(String, u64, f64)> = counts
        .into_iter()
        .map(|(repo, n)| (repo, n, 100.0 * n as f64 / total as f64))
        .collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    rows
}

/// Corpus-wide fill percentage per column label.
pub fn absolute_completeness(records: &[HarvestedRecord]) -> BTreeMap<&'static str, f64> {
    let total = records.len() as f64;
    let mut out = BTreeMap::new();
    for (label, element) in DC_LABELS {
        let count = records.iter().filter(|r| filled(r, element)).count();
        out.insert(label, 100.0 * count as f64 / total);
    }
    let count = records.iter().filter(|r| setspec_filled(r)).count();
    out.insert("setSpec", 100.0 * count as f64 / total);
    out
}

/// Per-repository fill percentage per column label.
pub fn relative_completeness(
    records: &[HarvestedRecord],
) -> BTreeMap<String, BTreeMap<&'static str, f64>> {
    let mut repos: BTreeSet<String> = BTreeSet::new();
    for record in records {
        repos.insert(record.repo_id.clone());
    }
    let mut out = BTreeMap::new();
    for repo in repos {
        let subset: Vec<HarvestedRecord> = records
            .iter()
            .filter(|r| r.repo_id == repo)
            .cloned()
            .collect();
        out.insert(repo, absolute_completeness(&subset));
    }
    out
}

/// Distinct variants with their record (joined) or occurrence
/// (individual) counts, sorted count descending then value ascending,
/// plus the unfilled-record count.
pub fn variant_counts(
    records: &[HarvestedRecord],
    element: DcElement,
    joined: bool,
) -> (Vec<(String, u64)>, u64) {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut empty = 0u64;
    for record in records {
        if !filled(record, element) {
            empty += 1;
            continue;
        }
        if joined {
            *counts.entry(join(record, element)).or_default() += 1;
        } else {
            for value in record.metadata.values(element) {
                if value.chars().any(|c| !c.is_whitespace()) {
                    *counts.entry(value.clone()).or_default() += 1;
                }
            }
        }
    }
    let mut rows: Vec<(String, u64)> = counts.into_iter().collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    (rows, empty)
}

pub fn distinct_variants(records: &[HarvestedRecord], element: DcElement, joined: bool) -> u64 {
    variant_counts(records, element, joined).0.len() as u64
}

/// Distinct joined variants whose folded text contains any folded
/// pattern, with the per-repository breakdown.
pub fn pattern_variants(
    records: &[HarvestedRecord],
    element: DcElement,
    patterns: &[&str],
) -> (u64, BTreeMap<String, u64>) {
    let folded_patterns: Vec<String> = patterns.iter().map(|p| fold(p)).collect();
    let mut matching: BTreeSet<String> = BTreeSet::new();
    let mut per_repo: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for record in records {
        if !filled(record, element) {
            continue;
        }
        let variant = join(record, element);
        let folded = fold(&variant);
        if folded_patterns.iter().any(|p| folded.contains(p.as_str())) {
            per_repo
                .entry(record.repo_id.clone())
                .or_default()
                .insert(variant.clone());
            matching.insert(variant);
        }
    }
    (
        matching.len() as u64,
        per_repo
            .into_iter()
            .map(|(repo, set)| (repo, set.len() as u64))
            .collect(),
    )
}

/// Exact joined-value length (in chars) per filled record, plus the
/// filled count.
pub fn length_tally(records: &[HarvestedRecord], element: DcElement) -> (BTreeMap<u64, u64>, u64) {
    let mut by_length: BTreeMap<u64, u64> = BTreeMap::new();
    let mut filled_count = 0u64;
    for record in records {
        if !filled(record, element) {
            continue;
        }
        filled_count += 1;
        let length = join(record, element).chars().count() as u64;
        *by_length.entry(length).or_default() += 1;
    }
    (by_length, filled_count)
}

#[derive(Debug, Default, PartialEq)]
pub struct Descriptors {
    pub distinct: u64,
    pub per_record: BTreeMap<u64, u64>,
    pub without: u64,
    pub mean: f64,
    pub max: u64,
    pub in_title: BTreeMap<u64, u64>,
    pub in_description: BTreeMap<u64, u64>,
    /// Full usage ranking, count descending then value ascending.
    pub ranking: Vec<(String, u64)>,
}

pub fn descriptors(records: &[HarvestedRecord]) -> Descriptors {
    let mut out = Descriptors::default();
    let mut distinct: BTreeSet<String> = BTreeSet::new();
    let mut uses: BTreeMap<String, u64> = BTreeMap::new();
    let mut total = 0u64;
    let mut with = 0u64;
    for record in records {
        let mut descriptors: Vec<String> = Vec::new();
        for value in record.metadata.values(DcElement::Subject) {
            if value.chars().any(|c| !c.is_whitespace()) {
                descriptors.push(value.clone());
            }
        }
        let k = descriptors.len() as u64;
        if k == 0 {
            out.without += 1;
            continue;
        }
        with += 1;
        total += k;
        if k > out.max {
            out.max = k;
        }
        *out.per_record.entry(k).or_default() += 1;

        let title = fold(&join(record, DcElement::Title));
        if !title.is_empty() && descriptors.iter().any(|d| title.contains(&fold(d))) {
            *out.in_title.entry(k).or_default() += 1;
        }
        let description = fold(&join(record, DcElement::Description));
        if !description.is_empty() && descriptors.iter().any(|d| description.contains(&fold(d))) {
            *out.in_description.entry(k).or_default() += 1;
        }
        for descriptor in descriptors {
            *uses.entry(descriptor.clone()).or_default() += 1;
            distinct.insert(descriptor);
        }
    }
    out.distinct = distinct.len() as u64;
    out.mean = if with == 0 {
        0.0
    } else {
        total as f64 / with as f64
    };
    out.ranking = uses.into_iter().collect();
    out.ranking
        .sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

#[derive(Debug, Default, PartialEq)]
pub struct Authors {
    pub per_record: BTreeMap<u64, u64>,
    pub more_than_ten: u64,
    pub without: u64,
    pub distinct: u64,
    pub surname_first_pct: f64,
}

pub fn authors(records: &[HarvestedRecord]) -> Authors {
    let mut out = Authors::default();
    let mut distinct: BTreeSet<String> = BTreeSet::new();
    for record in records {
        let mut count = 0u64;
        for value in record.metadata.values(DcElement::Creator) {
            if value.chars().any(|c| !c.is_whitespace()) {
                count += 1;
                distinct.insert(value.clone());
            }
        }
        if count == 0 {
            out.without += 1;
        } else if count > 10 {
            out.more_than_ten += 1;
        } else {
            *out.per_record.entry(count).or_default() += 1;
        }
    }
    let comma_form = distinct
        .iter()
        .filter(|author| {
            author.char_indices().any(|(i, c)| {
                c == ','
                    && author[..i].chars().any(|b| !b.is_whitespace())
                    && author[i + 1..].chars().any(|a| !a.is_whitespace())
            })
        })
        .count();
    out.distinct = distinct.len() as u64;
    out.surname_first_pct = if distinct.is_empty() {
        0.0
    } else {
        100.0 * comma_form as f64 / distinct.len() as f64
    };
    out
}
