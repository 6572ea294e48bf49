//! Deterministic rendering of the analysis results as CSV or Markdown
//! tables. Same input, same bytes: all orderings are total and no
//! rendering step consults the clock, locale, or environment.
//!
//! Numbers use "." as the decimal separator in every output format.

use thiserror::Error;

use crate::quality_metrics::{
    AnalysisBundle, AuthorStats, CompletenessMatrix, DescriptorStats, LengthHistogram, MetricField,
    RepoShare, VariantTable, round_half_up,
};
use crate::record_model::DcElement;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

/// The two completeness layouts: the per-repository grid and the
/// corpus-wide two-column list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompletenessStyle {
    /// Rows are repositories (largest first), columns the 15 metadata
    /// fields; cells are integer percentages.
    RelativeGrid,
    /// One row per field label including setSpec, percentage to two
    /// decimals, largest first.
    AbsoluteList,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("nothing to render: the input is empty")]
    EmptyInput,
}

/// Grid column order: canonical Dublin Core order with the metadata
/// identifier moved to the end, where completeness tables conventionally
/// put it under its "identifier2" label.
pub fn relative_grid_columns() -> [DcElement; 15] {
    let mut columns = [DcElement::Title; 15];
    let mut next = 0;
    for element in DcElement::ALL {
        if element != DcElement::Identifier {
            columns[next] = element;
            next += 1;
        }
    }
    columns[14] = DcElement::Identifier;
    columns
}

/// Renders the completeness matrix in the requested layout.
pub fn render_completeness(
    matrix: &CompletenessMatrix,
    style: CompletenessStyle,
    format: ReportFormat,
) -> Result<String, ReportError> {
    if matrix.per_repo.is_empty() || matrix.total_records == 0 {
        return Err(ReportError::EmptyInput);
    }
    let table = match style {
        CompletenessStyle::RelativeGrid => relative_grid_table(matrix),
        CompletenessStyle::AbsoluteList => absolute_list_table(matrix),
    };
    Ok(document(&[Block::Table(table)], format))
}

/// Renders repository sizes: record count and integer share of the
/// corpus (truncated, so a 31.97% share prints as 31).
pub fn render_repo_sizes(shares: &[RepoShare], format: ReportFormat) -> String {
    document(&[Block::Table(repo_sizes_table(shares))], format)
}

/// Renders a variant table: the kept rows, then an "otros" row
/// aggregating the remainder (emitted even at zero), then a "vacíos" row
/// counting records without the field.
pub fn render_variant_table(table: &VariantTable, format: ReportFormat) -> String {
    document(&[Block::Table(variant_rows_table(table))], format)
}

/// Renders a length histogram: bucket distribution plus the most
/// frequent exact lengths.
pub fn render_length_histogram(histogram: &LengthHistogram, format: ReportFormat) -> String {
    document(&length_blocks(histogram), format)
}

/// Renders descriptor usage: summary figures, the per-record-count
/// distribution, and the most used descriptors.
pub fn render_descriptor_stats(stats: &DescriptorStats, format: ReportFormat) -> String {
    document(&descriptor_blocks(stats), format)
}

/// Renders creator statistics: the authors-per-record distribution with
/// its "+ de 10" and "sin autor" rows, and the distinct-author summary.
pub fn render_author_stats(stats: &AuthorStats, format: ReportFormat) -> String {
    document(&author_blocks(stats), format)
}

/// Renders every analysis as one document, sections in a fixed order:
/// repository sizes, relative completeness, absolute completeness,
/// length histograms, language variants, descriptor statistics, type
/// variants, format variants, author statistics.
pub fn render_full_report(
    bundle: &AnalysisBundle,
    format: ReportFormat,
) -> Result<String, ReportError> {
    if bundle.completeness.per_repo.is_empty() || bundle.completeness.total_records == 0 {
        return Err(ReportError::EmptyInput);
    }
    let mut blocks = vec![
        Block::Heading("Repository sizes"),
        Block::Table(repo_sizes_table(&bundle.repo_sizes)),
        Block::Heading("Relative completeness by repository (percent)"),
        Block::Table(relative_grid_table(&bundle.completeness)),
        Block::Heading("Absolute completeness (percent)"),
        Block::Table(absolute_list_table(&bundle.completeness)),
        Block::Heading("Length histograms"),
    ];
    blocks.extend(length_blocks(&bundle.title_lengths));
    blocks.extend(length_blocks(&bundle.description_lengths));
    blocks.push(Block::Heading("Language variants"));
    blocks.push(Block::Table(variant_rows_table(&bundle.language_variants)));
    blocks.push(Block::Heading("Descriptor statistics"));
    blocks.extend(descriptor_blocks(&bundle.descriptor_stats));
    blocks.push(Block::Heading("Type variants"));
    blocks.push(Block::Table(variant_rows_table(&bundle.type_variants)));
    blocks.push(Block::Heading("Format variants"));
    blocks.extend([Block::Table(variant_rows_table(&bundle.format_variants))]);
    blocks.push(Block::Heading("Author statistics"));
    blocks.extend(author_blocks(&bundle.author_stats));
    Ok(document(&blocks, format))
}

enum Block {
    Heading(&'static str),
    Note(&'static str),
    Table(Table),
}

struct Table {
    caption: Option<String>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Table {
        Table {
            caption: None,
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn captioned(mut self, caption: impl Into<String>) -> Table {
        self.caption = Some(caption.into());
        self
    }

    fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) {
        let cells: Vec<String> = cells.into_iter().collect();
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    fn render(&self, format: ReportFormat) -> String {
        let mut out = String::new();
        if let Some(caption) = &self.caption {
            match format {
                ReportFormat::Csv => out.push_str(&format!("# {caption}\n")),
                ReportFormat::Markdown => out.push_str(&format!("### {caption}\n\n")),
            }
        }
        match format {
            ReportFormat::Csv => out.push_str(&self.to_csv()),
            ReportFormat::Markdown => out.push_str(&self.to_markdown()),
        }
        out
    }

    fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            writer.write_record(row).expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv is UTF-8")
    }

    fn to_markdown(&self) -> String {
        let mut out = String::new();
        let line = |cells: &[String]| {
            let escaped: Vec<String> = cells.iter().map(|c| markdown_cell(c)).collect();
            format!("| {} |\n", escaped.join(" | "))
        };
        out.push_str(&line(&self.header));
        out.push_str(&format!("|{}\n", " --- |".repeat(self.header.len())));
        for row in &self.rows {
            out.push_str(&line(row));
        }
        out
    }
}

/// Markdown table cells cannot hold pipes or line breaks.
fn markdown_cell(cell: &str) -> String {
    cell.replace('|', "\\|").replace(['\r', '\n'], " ")
}

/// Blocks end with "\n"; joining on "\n" leaves one blank line between
/// blocks, so re-rendering is reproducible byte for byte.
fn document(blocks: &[Block], format: ReportFormat) -> String {
    let parts: Vec<String> = blocks
        .iter()
        .map(|block| match block {
            Block::Heading(text) => match format {
                ReportFormat::Csv => format!("# {text}\n"),
                ReportFormat::Markdown => format!("## {text}\n"),
            },
            Block::Note(text) => match format {
                ReportFormat::Csv => format!("# note: {text}\n"),
                ReportFormat::Markdown => format!("*{text}*\n"),
            },
            Block::Table(table) => table.render(format),
        })
        .collect();
    parts.join("\n")
}

fn pct2(value: f64) -> String {
    format!("{:.2}", round_half_up(value, 2))
}

fn repo_sizes_table(shares: &[RepoShare]) -> Table {
    let mut table = Table::new(&["repository", "records", "share_pct"]);
    for share in shares {
        table.row([
            share.repo_id.clone(),
            share.records.to_string(),
            share.share_display().to_string(),
        ]);
    }
    table
}

fn relative_grid_table(matrix: &CompletenessMatrix) -> Table {
    let columns = relative_grid_columns();
    let mut header = vec!["repository"];
    header.extend(columns.iter().map(|c| c.metric_label()));
    let mut table = Table::new(&header);

    let mut repos: Vec<(&String, u64)> = matrix
        .per_repo_totals
        .iter()
        .map(|(id, total)| (id, *total))
        .collect();
    repos.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    for (repo_id, _) in repos {
        let rounded = matrix
            .relative_rounded(repo_id)
            .expect("repo comes from the matrix");
        let mut cells = vec![repo_id.clone()];
        cells.extend(
            columns
                .iter()
                .map(|c| (rounded[MetricField::Dc(*c).index()] as u64).to_string()),
        );
        table.row(cells);
    }
    table
}

fn absolute_list_table(matrix: &CompletenessMatrix) -> Table {
    let rounded = matrix.absolute_rounded();
    let mut rows: Vec<(&'static str, f64)> = MetricField::all()
        .iter()
        .map(|f| (f.label(), rounded[f.index()]))
        .collect();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let mut table = Table::new(&["attribute", "percent"]);
    for (label, value) in rows {
        table.row([label.to_string(), format!("{value:.2}")]);
    }
    table
}

fn variant_rows_table(variants: &VariantTable) -> Table {
    let mut table = Table::new(&["value", "count", "percent"]);
    for row in &variants.rows {
        table.row([
            row.value.clone(),
            row.count.to_string(),
            pct2(row.pct_of_total),
        ]);
    }
    table.row([
        "otros".into(),
        variants.other_count.to_string(),
        pct2(variants.other_pct),
    ]);
    table.row([
        "vacíos".into(),
        variants.empty_count.to_string(),
        pct2(variants.empty_pct),
    ]);
    table
}

fn length_blocks(histogram: &LengthHistogram) -> Vec<Block> {
    let label = histogram.field.metric_label();
    let mut buckets = Table::new(&["range", "records", "percent_of_filled"])
        .captioned(format!("Length distribution ({label})"));
    for bucket in &histogram.buckets {
        buckets.row([
            bucket.range.label(),
            bucket.count.to_string(),
            pct2(bucket.pct_of_filled),
        ]);
    }
    let mut top =
        Table::new(&["length", "records"]).captioned(format!("Most frequent lengths ({label})"));
    for (length, count) in &histogram.top_lengths {
        top.row([length.to_string(), count.to_string()]);
    }
    vec![
        Block::Note("length is the character count of all values of the field joined with \";\""),
        Block::Table(buckets),
        Block::Table(top),
    ]
}

fn descriptor_blocks(stats: &DescriptorStats) -> Vec<Block> {
    let records_with: u64 = stats.per_record_counts.values().sum();
    let in_title: u64 = stats.in_title.values().sum();
    let in_description: u64 = stats.in_description.values().sum();

    let mut summary = Table::new(&["metric", "value"]).captioned("Descriptor summary");
    summary.row([
        "distinct_descriptors".into(),
        stats.distinct_count.to_string(),
    ]);
    summary.row(["records_with_descriptors".into(), records_with.to_string()]);
    summary.row([
        "records_without_descriptors".into(),
        stats.records_without_descriptors.to_string(),
    ]);
    summary.row([
        "mean_descriptors_per_record".into(),
        format!("{:.2}", stats.mean_per_record),
    ]);
    summary.row([
        "max_descriptors_per_record".into(),
        stats.max_per_record.to_string(),
    ]);
    summary.row([
        "records_with_descriptor_in_title".into(),
        in_title.to_string(),
    ]);
    summary.row([
        "records_with_descriptor_in_description".into(),
        in_description.to_string(),
    ]);

    let mut distribution = Table::new(&["descriptors", "records", "in_title", "in_description"])
        .captioned("Descriptors per record");
    for (k, records) in &stats.per_record_counts {
        distribution.row([
            k.to_string(),
            records.to_string(),
            stats.in_title.get(k).copied().unwrap_or(0).to_string(),
            stats
                .in_description
                .get(k)
                .copied()
                .unwrap_or(0)
                .to_string(),
        ]);
    }

    let mut top = Table::new(&["descriptor", "count"]).captioned("Most used descriptors");
    for (descriptor, count) in &stats.top_descriptors {
        top.row([descriptor.clone(), count.to_string()]);
    }

    vec![
        Block::Table(summary),
        Block::Table(distribution),
        Block::Table(top),
    ]
}

fn author_blocks(stats: &AuthorStats) -> Vec<Block> {
    let mut distribution = Table::new(&["authors", "records"]).captioned("Authors per record");
    for (k, records) in &stats.per_record_counts {
        distribution.row([k.to_string(), records.to_string()]);
    }
    distribution.row(["+ de 10".into(), stats.more_than_ten.to_string()]);
    distribution.row(["sin autor".into(), stats.without_author.to_string()]);

    let mut summary = Table::new(&["metric", "value"]).captioned("Author summary");
    summary.row([
        "distinct_authors".into(),
        stats.distinct_authors.to_string(),
    ]);
    summary.row(["surname_first_pct".into(), pct2(stats.surname_first_pct)]);

    vec![Block::Table(distribution), Block::Table(summary)]
}
