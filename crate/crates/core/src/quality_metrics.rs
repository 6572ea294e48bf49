//! Corpus-wide quality measurements: completeness percentages, value
//! variant tables, length histograms, descriptor and author statistics.
//!
//! Everything here is a pure function over an immutable [`Corpus`].
//! Percentages are kept unrounded in the result types; the rounding used
//! for presentation lives in explicit helpers so tests can check both.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::corpus_store::Corpus;
use crate::fold::fold;
use crate::record_model::{DcElement, HarvestedRecord};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("the corpus has no records")]
    EmptyCorpus,
    #[error("invalid length buckets: {0}")]
    InvalidBuckets(String),
}

/// Rounds half away from zero to `decimals` places. A tiny nudge absorbs
/// binary representation error so exact decimal halves round up.
pub fn round_half_up(value: f64, decimals: u32) -> f64 {
    let factor = 10f64.powi(decimals as i32);
    ((value * factor) + 0.5 + 1e-9).floor() / factor
}

/// One column of the completeness analysis: the 15 Dublin Core elements
/// (metadata dc:identifier reported as "identifier2") plus the header
/// setSpec.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricField {
    Dc(DcElement),
    SetSpec,
}

impl MetricField {
    pub const COUNT: usize = DcElement::ALL.len() + 1;

    /// All 16 fields: the DC elements in canonical order, then setSpec.
    pub fn all() -> [MetricField; Self::COUNT] {
        let mut fields = [MetricField::SetSpec; Self::COUNT];
        for (slot, element) in fields.iter_mut().zip(DcElement::ALL) {
            *slot = MetricField::Dc(element);
        }
        fields
    }

    pub fn label(&self) -> &'static str {
        match self {
            MetricField::Dc(element) => element.metric_label(),
            MetricField::SetSpec => "setSpec",
        }
    }

    /// Position in [`MetricField::all`], used to index percentage arrays.
    pub fn index(&self) -> usize {
        match self {
            MetricField::Dc(element) => DcElement::ALL
                .iter()
                .position(|e| e == element)
                .expect("element is in ALL"),
            MetricField::SetSpec => DcElement::ALL.len(),
        }
    }
}

/// Whether a record fills a metric field with at least one value that has
/// visible content.
pub fn field_is_filled(record: &HarvestedRecord, field: MetricField) -> bool {
    match field {
        MetricField::Dc(element) => record.metadata.is_filled(element),
        MetricField::SetSpec => record
            .header
            .set_specs
            .iter()
            .any(|s| s.chars().any(|c| !c.is_whitespace())),
    }
}

/// Percentages per field, indexed by [`MetricField::index`]. Unrounded.
pub type FieldPercentages = [f64; MetricField::COUNT];

/// Fill percentages, per repository and corpus-wide.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletenessMatrix {
    /// Per-repository percentage of that repository's records filling
    /// each field.
    pub per_repo: BTreeMap<String, FieldPercentages>,
    /// Corpus-wide percentage of all records filling each field.
    pub absolute: FieldPercentages,
    pub per_repo_totals: BTreeMap<String, u64>,
    pub total_records: u64,
}

impl CompletenessMatrix {
    /// Per-repository row rounded to whole percent (half up), the grid
    /// presentation.
    pub fn relative_rounded(&self, repo_id: &str) -> Option<FieldPercentages> {
        self.per_repo
            .get(repo_id)
            .map(|row| row.map(|p| round_half_up(p, 0)))
    }

    /// Corpus-wide percentages rounded to two decimals (half up), the
    /// list presentation.
    pub fn absolute_rounded(&self) -> FieldPercentages {
        self.absolute.map(|p| round_half_up(p, 2))
    }
}

/// Builds the full completeness matrix in one pass.
pub fn completeness_matrix(corpus: &Corpus) -> Result<CompletenessMatrix, MetricsError> {
    if corpus.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let fields = MetricField::all();
    let mut per_repo_filled: BTreeMap<String, [u64; MetricField::COUNT]> = BTreeMap::new();
    let mut per_repo_totals: BTreeMap<String, u64> = BTreeMap::new();
    for record in corpus.records() {
        let filled = per_repo_filled.entry(record.repo_id.clone()).or_default();
        for field in fields {
            if field_is_filled(record, field) {
                filled[field.index()] += 1;
            }
        }
        *per_repo_totals.entry(record.repo_id.clone()).or_default() += 1;
    }

    let mut absolute_filled = [0u64; MetricField::COUNT];
    let mut per_repo = BTreeMap::new();
    let mut total_records = 0u64;
    for (repo_id, filled) in &per_repo_filled {
        let total = per_repo_totals[repo_id];
        total_records += total;
        let mut row = [0f64; MetricField::COUNT];
        for (i, count) in filled.iter().enumerate() {
            absolute_filled[i] += count;
            row[i] = 100.0 * *count as f64 / total as f64;
        }
        per_repo.insert(repo_id.clone(), row);
    }
    let mut absolute = [0f64; MetricField::COUNT];
    for (i, count) in absolute_filled.iter().enumerate() {
        absolute[i] = 100.0 * *count as f64 / total_records as f64;
    }
    Ok(CompletenessMatrix {
        per_repo,
        absolute,
        per_repo_totals,
        total_records,
    })
}

/// Per-repository fill percentages; see [`completeness_matrix`].
pub fn relative_completeness(
    corpus: &Corpus,
) -> Result<BTreeMap<String, FieldPercentages>, MetricsError> {
    Ok(completeness_matrix(corpus)?.per_repo)
}

/// Corpus-wide fill percentages; see [`completeness_matrix`].
pub fn absolute_completeness(corpus: &Corpus) -> Result<FieldPercentages, MetricsError> {
    Ok(completeness_matrix(corpus)?.absolute)
}

/// One repository's size within the corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct RepoShare {
    pub repo_id: String,
    pub records: u64,
    /// Unrounded percentage of the corpus; shares sum to 100.
    pub share_pct: f64,
}

impl RepoShare {
    /// Whole-percent presentation of the share. Truncates: a repository
    /// holding 31.97% of the corpus is reported as 31.
    pub fn share_display(&self) -> u64 {
        self.share_pct as u64
    }
}

/// Repository sizes, largest first (ties by id ascending).
pub fn repo_size_summary(corpus: &Corpus) -> Result<Vec<RepoShare>, MetricsError> {
    if corpus.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let total: u64 = corpus.repos().map(|(_, n)| n as u64).sum();
    let mut shares: Vec<RepoShare> = corpus
        .repos()
        .map(|(repo_id, records)| RepoShare {
            repo_id: repo_id.to_string(),
            records: records as u64,
            share_pct: 100.0 * records as f64 / total as f64,
        })
        .collect();
    shares.sort_by(|a, b| {
        b.records
            .cmp(&a.records)
            .then_with(|| a.repo_id.cmp(&b.repo_id))
    });
    Ok(shares)
}

/// How values are grouped in variant analyses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueMode {
    /// One variant per record: its values joined with ";", verbatim.
    Joined,
    /// Each value occurrence counted separately.
    Individual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantRow {
    pub value: String,
    pub count: u64,
    /// Unrounded percentage of total records.
    pub pct_of_total: f64,
}

/// Distinct-value table for one field: the `top_k` most frequent variants,
/// an aggregate of the remainder, and the count of records leaving the
/// field empty.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantTable {
    pub field: DcElement,
    pub mode: ValueMode,
    /// Sorted by count descending, ties by value ascending.
    pub rows: Vec<VariantRow>,
    /// Occurrences aggregated from variants beyond `top_k`.
    pub other_count: u64,
    pub other_distinct: u64,
    pub other_pct: f64,
    /// Records where the field is not filled.
    pub empty_count: u64,
    pub empty_pct: f64,
    pub total_records: u64,
    /// Distinct variants before the `top_k` cut.
    pub distinct_values: u64,
}

/// Tallies variants of `field` under `mode`. Values compare verbatim and
/// case-sensitively: "Article" and "article" are distinct variants.
pub fn variant_table(
    corpus: &Corpus,
    field: DcElement,
    mode: ValueMode,
    top_k: usize,
) -> VariantTable {
    assert!(top_k >= 1, "top_k must be at least 1");
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut empty_count = 0u64;
    let mut total_records = 0u64;
    for record in corpus.records() {
        total_records += 1;
        if !record.metadata.is_filled(field) {
            empty_count += 1;
            continue;
        }
        match mode {
            ValueMode::Joined => {
                *counts
                    .entry(record.metadata.joined_value(field))
                    .or_default() += 1;
            }
            ValueMode::Individual => {
                for value in record.metadata.values(field) {
                    if value.chars().any(|c| !c.is_whitespace()) {
                        *counts.entry(value.clone()).or_default() += 1;
                    }
                }
            }
        }
    }

    let pct = |count: u64| {
        if total_records == 0 {
            0.0
        } else {
            100.0 * count as f64 / total_records as f64
        }
    };
    let distinct_values = counts.len() as u64;
    let mut rows: Vec<VariantRow> = counts
        .into_iter()
        .map(|(value, count)| VariantRow {
            value,
            count,
            pct_of_total: pct(count),
        })
        .collect();
    rows.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.value.cmp(&b.value)));
    let tail = rows.split_off(top_k.min(rows.len()));
    let other_count: u64 = tail.iter().map(|r| r.count).sum();
    VariantTable {
        field,
        mode,
        rows,
        other_count,
        other_distinct: tail.len() as u64,
        other_pct: pct(other_count),
        empty_count,
        empty_pct: pct(empty_count),
        total_records,
        distinct_values,
    }
}

/// Number of distinct non-empty variants of a field under a mode.
pub fn distinct_variant_count(corpus: &Corpus, field: DcElement, mode: ValueMode) -> u64 {
    match mode {
        ValueMode::Joined => {
            let mut joined = std::collections::BTreeSet::new();
            for record in corpus.records() {
                if record.metadata.is_filled(field) {
                    joined.insert(record.metadata.joined_value(field));
                }
            }
            joined.len() as u64
        }
        ValueMode::Individual => {
            let mut singles = std::collections::BTreeSet::new();
            for record in corpus.records() {
                for value in record.metadata.values(field) {
                    if value.chars().any(|c| !c.is_whitespace()) {
                        singles.insert(value.as_str());
                    }
                }
            }
            singles.len() as u64
        }
    }
}

/// Distinct variants matching a pattern list, corpus-wide and per repo.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternVariantCount {
    pub distinct_matching: u64,
    /// Distinct matching variants present in each repository.
    pub per_repo: BTreeMap<String, u64>,
}

/// Counts distinct Joined-mode variants of `field` whose folded form
/// contains any of the folded `patterns` as a substring. Case- and
/// accent-insensitive, so "Artículo científico" matches pattern "articulo".
pub fn pattern_variant_count(
    corpus: &Corpus,
    field: DcElement,
    patterns: &[&str],
) -> PatternVariantCount {
    let folded_patterns: Vec<String> = patterns.iter().map(|p| fold(p)).collect();
    let mut matching: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    let mut per_repo: BTreeMap<String, std::collections::BTreeSet<String>> = BTreeMap::new();
    for record in corpus.records() {
        if !record.metadata.is_filled(field) {
            continue;
        }
        let variant = record.metadata.joined_value(field);
        let folded = fold(&variant);
        if folded_patterns.iter().any(|p| folded.contains(p.as_str())) {
            per_repo
                .entry(record.repo_id.clone())
                .or_default()
                .insert(variant.clone());
            matching.insert(variant);
        }
    }
    PatternVariantCount {
        distinct_matching: matching.len() as u64,
        per_repo: per_repo
            .into_iter()
            .map(|(repo, set)| (repo, set.len() as u64))
            .collect(),
    }
}

/// An inclusive length range; `max: None` means unbounded above.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LengthRange {
    pub min: u64,
    pub max: Option<u64>,
}

impl LengthRange {
    pub fn contains(&self, length: u64) -> bool {
        length >= self.min && self.max.is_none_or(|max| length <= max)
    }

    pub fn label(&self) -> String {
        match self.max {
            Some(max) if max == self.min => format!("{}", self.min),
            Some(max) => format!("{}-{max}", self.min),
            None => format!("{}+", self.min),
        }
    }
}

/// A validated bucket layout: contiguous inclusive ranges covering
/// every possible length from 1 upward, so every filled record lands in
/// exactly one bucket.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LengthBuckets(Vec<LengthRange>);

impl LengthBuckets {
    pub fn new(ranges: Vec<LengthRange>) -> Result<LengthBuckets, MetricsError> {
        if ranges.is_empty() {
            return Err(MetricsError::InvalidBuckets("no ranges given".into()));
        }
        if ranges[0].min != 1 {
            return Err(MetricsError::InvalidBuckets(
                "first range must start at 1".into(),
            ));
        }
        for pair in ranges.windows(2) {
            let Some(max) = pair[0].max else {
                return Err(MetricsError::InvalidBuckets(
                    "an unbounded range must come last".into(),
                ));
            };
            if max < pair[0].min {
                return Err(MetricsError::InvalidBuckets(format!(
                    "range {} is empty",
                    pair[0].label()
                )));
            }
            if pair[1].min != max + 1 {
                return Err(MetricsError::InvalidBuckets(format!(
                    "gap between {} and {}",
                    pair[0].label(),
                    pair[1].label()
                )));
            }
        }
        if ranges.last().expect("non-empty").max.is_some() {
            return Err(MetricsError::InvalidBuckets(
                "last range must be unbounded".into(),
            ));
        }
        Ok(LengthBuckets(ranges))
    }

    /// `1-100, 101-1000, 1001-10000, 10001+`.
    pub fn standard() -> LengthBuckets {
        LengthBuckets::new(vec![
            LengthRange {
                min: 1,
                max: Some(100),
            },
            LengthRange {
                min: 101,
                max: Some(1000),
            },
            LengthRange {
                min: 1001,
                max: Some(10000),
            },
            LengthRange {
                min: 10001,
                max: None,
            },
        ])
        .expect("standard buckets are valid")
    }

    pub fn ranges(&self) -> &[LengthRange] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LengthBucketCount {
    pub range: LengthRange,
    pub count: u64,
    /// Unrounded percentage of filled records.
    pub pct_of_filled: f64,
}

/// Value-length distribution for one field over filled records. Lengths
/// count Unicode scalar values of the joined value.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthHistogram {
    pub field: DcElement,
    pub buckets: Vec<LengthBucketCount>,
    pub filled: u64,
    /// Most frequent exact lengths, count descending then length ascending.
    pub top_lengths: Vec<(u64, u64)>,
}

pub fn length_histogram(
    corpus: &Corpus,
    field: DcElement,
    buckets: &LengthBuckets,
    top_n: usize,
) -> LengthHistogram {
    let mut counts = vec![0u64; buckets.ranges().len()];
    let mut by_length: BTreeMap<u64, u64> = BTreeMap::new();
    let mut filled = 0u64;
    for record in corpus.records() {
        if !record.metadata.is_filled(field) {
            continue;
        }
        filled += 1;
        let length = record.metadata.joined_value(field).chars().count() as u64;
        *by_length.entry(length).or_default() += 1;
        let slot = buckets
            .ranges()
            .iter()
            .position(|r| r.contains(length))
            .expect("buckets cover every length >= 1");
        counts[slot] += 1;
    }
    let mut top_lengths: Vec<(u64, u64)> = by_length.into_iter().collect();
    top_lengths.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    top_lengths.truncate(top_n);
    LengthHistogram {
        field,
        buckets: buckets
            .ranges()
            .iter()
            .zip(counts)
            .map(|(range, count)| LengthBucketCount {
                range: *range,
                count,
                pct_of_filled: if filled == 0 {
                    0.0
                } else {
                    100.0 * count as f64 / filled as f64
                },
            })
            .collect(),
        filled,
        top_lengths,
    }
}

/// Subject descriptor usage across the corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorStats {
    /// Distinct descriptor values, verbatim.
    pub distinct_count: u64,
    /// k → records carrying exactly k descriptors (k ≥ 1).
    pub per_record_counts: BTreeMap<u64, u64>,
    pub records_without_descriptors: u64,
    /// Mean descriptors over records with at least one.
    pub mean_per_record: f64,
    pub max_per_record: u64,
    /// k → records with exactly k descriptors where at least one
    /// descriptor occurs (folded) inside the title.
    pub in_title: BTreeMap<u64, u64>,
    /// Same against the description.
    pub in_description: BTreeMap<u64, u64>,
    /// Most used descriptors, count descending then value ascending.
    pub top_descriptors: Vec<(String, u64)>,
}

/// Computes descriptor statistics. A descriptor is one subject value; it
/// counts as present in a title or description when its case- and
/// accent-folded form is a substring of the folded field text.
pub fn descriptor_stats(corpus: &Corpus, top_n: usize) -> DescriptorStats {
    let mut distinct: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    let mut uses: BTreeMap<String, u64> = BTreeMap::new();
    let mut per_record_counts: BTreeMap<u64, u64> = BTreeMap::new();
    let mut in_title: BTreeMap<u64, u64> = BTreeMap::new();
    let mut in_description: BTreeMap<u64, u64> = BTreeMap::new();
    let mut records_without = 0u64;
    let mut descriptor_total = 0u64;
    let mut records_with = 0u64;
    let mut max_per_record = 0u64;

    for record in corpus.records() {
        let descriptors: Vec<&String> = record
            .metadata
            .values(DcElement::Subject)
            .iter()
            .filter(|v| v.chars().any(|c| !c.is_whitespace()))
            .collect();
        let k = descriptors.len() as u64;
        if k == 0 {
            records_without += 1;
            continue;
        }
        records_with += 1;
        descriptor_total += k;
        max_per_record = max_per_record.max(k);
        *per_record_counts.entry(k).or_default() += 1;

        let folded: Vec<String> = descriptors.iter().map(|d| fold(d)).collect();
        let title = fold(&record.metadata.joined_value(DcElement::Title));
        if !title.is_empty() && folded.iter().any(|d| title.contains(d.as_str())) {
            *in_title.entry(k).or_default() += 1;
        }
        let description = fold(&record.metadata.joined_value(DcElement::Description));
        if !description.is_empty() && folded.iter().any(|d| description.contains(d.as_str())) {
            *in_description.entry(k).or_default() += 1;
        }
        for descriptor in descriptors {
            *uses.entry(descriptor.clone()).or_default() += 1;
            distinct.insert(descriptor.clone());
        }
    }

    let mut top_descriptors: Vec<(String, u64)> = uses.into_iter().collect();
    top_descriptors.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    top_descriptors.truncate(top_n);

    DescriptorStats {
        distinct_count: distinct.len() as u64,
        per_record_counts,
        records_without_descriptors: records_without,
        mean_per_record: if records_with == 0 {
            0.0
        } else {
            descriptor_total as f64 / records_with as f64
        },
        max_per_record,
        in_title,
        in_description,
        top_descriptors,
    }
}

/// Creator statistics across the corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct AuthorStats {
    /// Exact author count 1..=10 → records with that many creators.
    pub per_record_counts: BTreeMap<u64, u64>,
    /// Records with 11 or more creators.
    pub more_than_ten: u64,
    /// Records with no creator; kept out of the buckets above.
    pub without_author: u64,
    /// Distinct creator values, verbatim.
    pub distinct_authors: u64,
    /// Unrounded share of distinct authors written "Surname, Names":
    /// containing a comma with visible text on both sides.
    pub surname_first_pct: f64,
}

pub fn author_stats(corpus: &Corpus) -> AuthorStats {
    let mut per_record_counts: BTreeMap<u64, u64> = BTreeMap::new();
    let mut more_than_ten = 0u64;
    let mut without_author = 0u64;
    let mut distinct: std::collections::BTreeSet<&str> = std::collections::BTreeSet::new();
    for record in corpus.records() {
        let authors: Vec<&str> = record
            .metadata
            .values(DcElement::Creator)
            .iter()
            .filter(|v| v.chars().any(|c| !c.is_whitespace()))
            .map(String::as_str)
            .collect();
        let k = authors.len() as u64;
        if k == 0 {
            without_author += 1;
        } else if k > 10 {
            more_than_ten += 1;
        } else {
            *per_record_counts.entry(k).or_default() += 1;
        }
        distinct.extend(authors);
    }
    let surname_first = distinct.iter().filter(|a| is_surname_first(a)).count();
    AuthorStats {
        per_record_counts,
        more_than_ten,
        without_author,
        distinct_authors: distinct.len() as u64,
        surname_first_pct: if distinct.is_empty() {
            0.0
        } else {
            100.0 * surname_first as f64 / distinct.len() as f64
        },
    }
}

/// "Surname, Names" form: some comma has visible text on both sides.
pub fn is_surname_first(author: &str) -> bool {
    author.match_indices(',').any(|(i, _)| {
        let before = &author[..i];
        let after = &author[i + 1..];
        before.chars().any(|c| !c.is_whitespace()) && after.chars().any(|c| !c.is_whitespace())
    })
}

/// Knobs for [`analyze_corpus`].
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    /// Rows kept in each variant table before the remainder aggregates.
    pub variant_top_k: usize,
    pub length_buckets: LengthBuckets,
    /// Exact lengths listed per histogram.
    pub top_lengths: usize,
    /// Descriptors listed in the most-used ranking.
    pub top_descriptors: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            variant_top_k: 21,
            length_buckets: LengthBuckets::standard(),
            top_lengths: 5,
            top_descriptors: 10,
        }
    }
}

/// Every analysis the report renders, computed in one call.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisBundle {
    pub repo_sizes: Vec<RepoShare>,
    pub completeness: CompletenessMatrix,
    pub title_lengths: LengthHistogram,
    pub description_lengths: LengthHistogram,
    pub language_variants: VariantTable,
    pub descriptor_stats: DescriptorStats,
    pub type_variants: VariantTable,
    pub format_variants: VariantTable,
    pub author_stats: AuthorStats,
}

pub fn analyze_corpus(
    corpus: &Corpus,
    options: &AnalysisOptions,
) -> Result<AnalysisBundle, MetricsError> {
    Ok(AnalysisBundle {
        repo_sizes: repo_size_summary(corpus)?,
        completeness: completeness_matrix(corpus)?,
        title_lengths: length_histogram(
            corpus,
            DcElement::Title,
            &options.length_buckets,
            options.top_lengths,
        ),
        description_lengths: length_histogram(
            corpus,
            DcElement::Description,
            &options.length_buckets,
            options.top_lengths,
        ),
        language_variants: variant_table(
            corpus,
            DcElement::Language,
            ValueMode::Joined,
            options.variant_top_k,
        ),
        descriptor_stats: descriptor_stats(corpus, options.top_descriptors),
        type_variants: variant_table(
            corpus,
            DcElement::Type,
            ValueMode::Joined,
            options.variant_top_k,
        ),
        format_variants: variant_table(
            corpus,
            DcElement::Format,
            ValueMode::Joined,
            options.variant_top_k,
        ),
        author_stats: author_stats(corpus),
    })
}
