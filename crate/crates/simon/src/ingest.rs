//! Dataset plumbing: CSV column extraction, corpus manifests, casting
//! free-text documents to columns, GeoNames dump loading, and a
//! catalog-API client for CKAN-style repositories.
//!
//! Everything here is file-shaped and streaming-friendly: memory is
//! bounded by the columns of the file being read, never by a corpus.
//! The network client is feature-gated (`catalog-http`) and all its
//! tests run against recorded fixtures.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use percent_encoding::{utf8_percent_encode, NON_ALPHANUMERIC};
use serde::{Deserialize, Serialize};

use crate::encode::Column;
use crate::error::{Result, SimonError};
use crate::model::{LabelSpace, LabeledDataset, LabeledExample, Split};

pub const MANIFEST_VERSION: u32 = 1;

/// Read a CSV file as columns. With `has_header`, the first row becomes
/// the column source names; otherwise columns are named `column_{i}`.
/// Ragged rows are tolerated: short rows pad the missing columns with
/// empty strings, and a long row widens the table (earlier rows of the
/// new column read as empty).
pub fn read_csv_columns(path: &Path, has_header: bool) -> Result<Vec<Column>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| map_csv_error(e, path))?;
    let mut names: Option<Vec<String>> = None;
    let mut cells: Vec<Vec<String>> = Vec::new();
    let mut n_rows = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| map_csv_error(e, path))?;
        if has_header && names.is_none() {
            names = Some(record.iter().map(|s| s.to_string()).collect());
            continue;
        }
        while cells.len() < record.len() {
            cells.push(vec![String::new(); n_rows]);
        }
        for (i, col) in cells.iter_mut().enumerate() {
            col.push(record.get(i).unwrap_or("").to_string());
        }
        n_rows += 1;
    }
    let names = names.unwrap_or_default();
    Ok(cells
        .into_iter()
        .enumerate()
        .map(|(i, col)| {
            let name = names.get(i).cloned().unwrap_or_else(|| format!("column_{i}"));
            Column::new(name, col)
        })
        .collect())
}

/// Write columns to one CSV file: a header row of source names, then
/// the transposed cells. Columns shorter than the longest are padded
/// with empty strings, so exact round-trips need equal-length columns.
pub fn write_csv_columns(path: &Path, columns: &[Column]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| map_csv_error(e, path))?;
    writer
        .write_record(columns.iter().map(|c| c.source_name.as_str()))
        .map_err(|e| map_csv_error(e, path))?;
    let n_rows = columns.iter().map(|c| c.cells.len()).max().unwrap_or(0);
    for row in 0..n_rows {
        let record: Vec<&str> =
            columns.iter().map(|c| c.cells.get(row).map_or("", |s| s.as_str())).collect();
        writer.write_record(&record).map_err(|e| map_csv_error(e, path))?;
    }
    writer.flush()?;
    Ok(())
}

fn map_csv_error(e: csv::Error, path: &Path) -> SimonError {
    let row = e.position().map(|p| p.record() + 1);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => SimonError::Io(io),
        kind => SimonError::Parse {
            row: row.unwrap_or(0),
            message: format!("{} in {}", kind_message(&kind), path.display()),
        },
    }
}

fn kind_message(kind: &csv::ErrorKind) -> String {
    match kind {
        csv::ErrorKind::Utf8 { err, .. } => format!("invalid UTF-8: {err}"),
        other => format!("{other:?}"),
    }
}

/// One corpus column reference: which file, which column, what it is
/// labeled, and where it sits in the train/validate/test split.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub column: String,
    pub labels: Vec<String>,
    pub split: Split,
}

/// A replayable description of a labeled corpus: CSV files on disk plus
/// per-column labels and split assignments.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub name: String,
    pub labels: Vec<String>,
    pub columns: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn new(name: impl Into<String>, labels: Vec<String>) -> Self {
        DatasetManifest {
            format_version: MANIFEST_VERSION,
            name: name.into(),
            labels,
            columns: Vec::new(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| SimonError::Format(format!("manifest: {e}")))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let manifest: DatasetManifest = serde_json::from_str(&text)
            .map_err(|e| SimonError::Format(format!("manifest does not parse: {e}")))?;
        if manifest.format_version != MANIFEST_VERSION {
            return Err(SimonError::Format(format!(
                "manifest is format version {}, this build reads version {MANIFEST_VERSION}",
                manifest.format_version
            )));
        }
        for entry in &manifest.columns {
            for label in &entry.labels {
                if !manifest.labels.contains(label) {
                    return Err(SimonError::Data(format!(
                        "column '{}' carries label '{label}' outside the declared label set",
                        entry.column
                    )));
                }
            }
        }
        Ok(manifest)
    }

    /// Resolve every entry against CSV files under `root` and build the
    /// labeled dataset. An entry whose file or column cannot be found
    /// is a data error.
    pub fn materialize(&self, root: &Path) -> Result<LabeledDataset> {
        let labels = LabelSpace::new(self.labels.clone())?;
        let mut file_cache: HashMap<&str, Vec<Column>> = HashMap::new();
        let mut examples = Vec::with_capacity(self.columns.len());
        for entry in &self.columns {
            if !file_cache.contains_key(entry.file.as_str()) {
                let columns = read_csv_columns(&root.join(&entry.file), true)?;
                file_cache.insert(&entry.file, columns);
            }
            let columns = &file_cache[entry.file.as_str()];
            let column = columns
                .iter()
                .find(|c| c.source_name == entry.column)
                .ok_or_else(|| {
                    SimonError::Data(format!(
                        "column '{}' not found in '{}'",
                        entry.column, entry.file
                    ))
                })?;
            let targets = labels
                .names()
                .iter()
                .map(|n| if entry.labels.contains(n) { 1.0 } else { 0.0 })
                .collect();
            examples.push(LabeledExample { column: column.clone(), targets, split: entry.split });
        }
        LabeledDataset::new(labels, examples)
    }
}

/// Write a labeled dataset as a corpus directory: one CSV file per
/// column plus `manifest.json` describing labels and splits. The
/// manifest `materialize`s back to an equivalent dataset.
pub fn save_corpus(root: &Path, name: &str, dataset: &LabeledDataset) -> Result<DatasetManifest> {
    fs::create_dir_all(root)?;
    let mut manifest = DatasetManifest::new(name, dataset.labels.names().to_vec());
    for (i, example) in dataset.examples.iter().enumerate() {
        let file = format!("col_{i:05}.csv");
        write_csv_columns(&root.join(&file), std::slice::from_ref(&example.column))?;
        let labels = dataset
            .labels
            .names()
            .iter()
            .zip(&example.targets)
            .filter(|(_, &t)| t >= 0.5)
            .map(|(n, _)| n.clone())
            .collect();
        manifest.columns.push(ManifestEntry {
            file,
            column: example.column.source_name.clone(),
            labels,
            split: example.split,
        });
    }
    manifest.save(&root.join("manifest.json"))?;
    Ok(manifest)
}

/// Sentence boundary rule: terminal punctuation plus newlines.
#[derive(Clone, Debug)]
pub struct SentenceSplitter {
    terminals: Vec<char>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        SentenceSplitter { terminals: vec!['.', '!', '?'] }
    }
}

impl SentenceSplitter {
    pub fn new(terminals: Vec<char>) -> Self {
        SentenceSplitter { terminals }
    }

    /// Split one document into trimmed sentences. Terminal punctuation
    /// stays with its sentence; newlines split and are dropped; empty
    /// fragments vanish.
    pub fn split(&self, document: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut current = String::new();
        for c in document.chars() {
            if c == '\n' {
                flush(&mut current, &mut out);
            } else {
                current.push(c);
                if self.terminals.contains(&c) {
                    flush(&mut current, &mut out);
                }
            }
        }
        flush(&mut current, &mut out);
        out
    }
}

fn flush(current: &mut String, out: &mut Vec<String>) {
    let trimmed = current.trim();
    if !trimmed.is_empty() {
        out.push(trimmed.to_string());
    }
    current.clear();
}

/// A document that produced no sentences.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkippedDocument {
    pub index: usize,
    pub reason: String,
}

/// Columns cast from documents plus the skip records for empty ones.
#[derive(Clone, Debug)]
pub struct CastOutcome {
    pub columns: Vec<Column>,
    pub skipped: Vec<SkippedDocument>,
}

/// Turn free-text documents into one column per document, one sentence
/// per cell. Cells are never truncated here and cell counts are never
/// normalized here: `max_len` is applied by cell encoding and
/// `max_cells` by column sampling, downstream. Both are validated up
/// front so a misconfigured pipeline fails at the boundary.
pub fn cast_documents_to_table(
    documents: &[String],
    splitter: &SentenceSplitter,
    max_cells: usize,
    max_len: usize,
) -> Result<CastOutcome> {
    if max_cells == 0 || max_len == 0 {
        return Err(SimonError::InvalidParameter(
            "max_cells and max_len must be >= 1".into(),
        ));
    }
    let mut columns = Vec::new();
    let mut skipped = Vec::new();
    for (index, doc) in documents.iter().enumerate() {
        let sentences = splitter.split(doc);
        if sentences.is_empty() {
            skipped.push(SkippedDocument {
                index,
                reason: "document contains no sentences".into(),
            });
            continue;
        }
        columns.push(
            Column::new(format!("document_{index}"), sentences)
                .with_provenance("cast_documents_to_table"),
        );
    }
    Ok(CastOutcome { columns, skipped })
}

/// One GeoNames-style place record.
#[derive(Clone, Debug, PartialEq)]
pub struct GeoRecord {
    pub name: String,
    pub country: String,
    pub country_code: String,
    pub admin: String,
    pub postal: String,
    pub latitude: Option<f64>,
    pub longitude: Option<f64>,
}

/// Accepted place records plus the count of rejected input rows.
#[derive(Clone, Debug, Default)]
pub struct GeoTable {
    pub records: Vec<GeoRecord>,
    pub rejected: usize,
}

const GEO_FIELDS: usize = 7;

/// Load a tab-separated place dump with columns
/// name, country, country_code, admin, postal, latitude, longitude.
/// Rows with out-of-range or unparseable coordinates, or a country
/// code that is not exactly two letters, are rejected and counted.
/// A row with the wrong column count fails the whole file.
pub fn load_geonames(path: &Path) -> Result<GeoTable> {
    let reader = BufReader::new(File::open(path)?);
    let mut table = GeoTable::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != GEO_FIELDS {
            return Err(SimonError::Format(format!(
                "row {}: expected {GEO_FIELDS} tab-separated fields, found {}",
                i + 1,
                fields.len()
            )));
        }
        let latitude = match parse_coordinate(fields[5], 90.0) {
            Ok(v) => v,
            Err(()) => {
                table.rejected += 1;
                continue;
            }
        };
        let longitude = match parse_coordinate(fields[6], 180.0) {
            Ok(v) => v,
            Err(()) => {
                table.rejected += 1;
                continue;
            }
        };
        let country_code = fields[2].trim();
        if country_code.len() != 2 || !country_code.chars().all(|c| c.is_ascii_alphabetic()) {
            table.rejected += 1;
            continue;
        }
        table.records.push(GeoRecord {
            name: fields[0].trim().to_string(),
            country: fields[1].trim().to_string(),
            country_code: country_code.to_string(),
            admin: fields[3].trim().to_string(),
            postal: fields[4].trim().to_string(),
            latitude,
            longitude,
        });
    }
    Ok(table)
}

/// Empty is absent; otherwise must parse and sit within ±bound.
fn parse_coordinate(field: &str, bound: f64) -> std::result::Result<Option<f64>, ()> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(None);
    }
    match field.parse::<f64>() {
        Ok(v) if v.abs() <= bound && v.is_finite() => Ok(Some(v)),
        _ => Err(()),
    }
}

/// One downloadable file advertised by a catalog.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResourceDescriptor {
    pub id: String,
    pub name: String,
    pub format: String,
    pub url: String,
}

/// Transport abstraction for the catalog client. The real HTTP
/// implementation lives behind the `catalog-http` feature; tests
/// substitute recorded fixtures.
pub trait CatalogTransport {
    /// One GET returning the response body, or a transport-level
    /// failure message.
    fn get(&self, url: &str) -> std::result::Result<Vec<u8>, String>;
}

/// Client for a CKAN-style catalog action API.
pub struct CatalogClient<T: CatalogTransport> {
    base_url: String,
    transport: T,
    retries: u32,
}

#[derive(Deserialize)]
struct CkanSearch {
    success: bool,
    #[serde(default)]
    result: CkanResult,
}

#[derive(Deserialize, Default)]
struct CkanResult {
    #[serde(default)]
    results: Vec<CkanPackage>,
}

#[derive(Deserialize)]
struct CkanPackage {
    #[serde(default)]
    resources: Vec<CkanResource>,
}

#[derive(Deserialize)]
struct CkanResource {
    id: String,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    format: Option<String>,
    #[serde(default)]
    url: Option<String>,
}

impl<T: CatalogTransport> CatalogClient<T> {
    /// Client with the default of 3 attempts per request.
    pub fn new(base_url: impl Into<String>, transport: T) -> Self {
        CatalogClient { base_url: base_url.into(), transport, retries: 3 }
    }

    /// Total attempts per request (>= 1).
    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries.max(1);
        self
    }

    fn get_with_retries(&self, url: &str) -> Result<Vec<u8>> {
        let mut last = String::new();
        for _ in 0..self.retries {
            match self.transport.get(url) {
                Ok(body) => return Ok(body),
                Err(message) => last = message,
            }
        }
        Err(SimonError::Transport { retries: self.retries, message: last })
    }

    /// Search the catalog and return descriptors for its CSV resources,
    /// at most `limit` of them.
    pub fn fetch_catalog_resources(
        &self,
        query: &str,
        limit: usize,
    ) -> Result<Vec<ResourceDescriptor>> {
        let url = format!(
            "{}/api/3/action/package_search?q={}&rows={}",
            self.base_url,
            utf8_percent_encode(query, NON_ALPHANUMERIC),
            limit
        );
        let body = self.get_with_retries(&url)?;
        let parsed: CkanSearch = serde_json::from_slice(&body)
            .map_err(|e| SimonError::Format(format!("catalog response does not parse: {e}")))?;
        if !parsed.success {
            return Err(SimonError::Format("catalog reports success=false".into()));
        }
        let mut out = Vec::new();
        for package in parsed.result.results {
            for r in package.resources {
                let format = r.format.unwrap_or_default();
                let url = r.url.unwrap_or_default();
                if format.eq_ignore_ascii_case("csv") && !url.is_empty() {
                    out.push(ResourceDescriptor {
                        id: r.id,
                        name: r.name.unwrap_or_default(),
                        format,
                        url,
                    });
                    if out.len() == limit {
                        return Ok(out);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Download one CSV resource to `dest`, atomically: the body lands
    /// in a temp file next to `dest` and is renamed into place, so a
    /// failed download never leaves a partial file at `dest`.
    pub fn download_resource(&self, descriptor: &ResourceDescriptor, dest: &Path) -> Result<()> {
        if !descriptor.format.eq_ignore_ascii_case("csv") {
            return Err(SimonError::Usage(format!(
                "resource '{}' has format '{}', only CSV downloads are supported",
                descriptor.id, descriptor.format
            )));
        }
        let body = self.get_with_retries(&descriptor.url)?;
        let dir = dest.parent().unwrap_or_else(|| Path::new("."));
        let tmp = dir.join(format!(
            ".{}.{}.part",
            dest.file_name().and_then(|n| n.to_str()).unwrap_or("download"),
            std::process::id()
        ));
        let write = (|| -> Result<()> {
            let mut f = File::create(&tmp)?;
            f.write_all(&body)?;
            f.sync_all()?;
            Ok(())
        })();
        if let Err(e) = write {
            let _ = fs::remove_file(&tmp);
            return Err(e);
        }
        fs::rename(&tmp, dest)?;
        Ok(())
    }
}

impl<T: CatalogTransport + Sync> CatalogClient<T> {
    /// Download many resources into `dir` as `{id}.csv`, at most
    /// `workers` in flight. Returns the file paths in input order.
    pub fn download_all(
        &self,
        descriptors: &[ResourceDescriptor],
        dir: &Path,
        workers: usize,
    ) -> Result<Vec<PathBuf>> {
        use rayon::prelude::*;
        let chunk = descriptors.len().div_ceil(workers.max(1)).max(1);
        let per_chunk: Result<Vec<Vec<PathBuf>>> = descriptors
            .par_chunks(chunk)
            .map(|chunk| {
                chunk
                    .iter()
                    .map(|d| {
                        let dest = dir.join(format!("{}.csv", d.id));
                        self.download_resource(d, &dest)?;
                        Ok(dest)
                    })
                    .collect()
            })
            .collect();
        Ok(per_chunk?.into_iter().flatten().collect())
    }
}

/// Real HTTP transport. Compiled only with the `catalog-http` feature;
/// continuous tests never construct it.
#[cfg(feature = "catalog-http")]
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

#[cfg(feature = "catalog-http")]
impl HttpTransport {
    pub fn new() -> std::result::Result<Self, String> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(60))
            .build()
            .map_err(|e| e.to_string())?;
        Ok(HttpTransport { client })
    }
}

#[cfg(feature = "catalog-http")]
impl CatalogTransport for HttpTransport {
    fn get(&self, url: &str) -> std::result::Result<Vec<u8>, String> {
        let resp = self.client.get(url).send().map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("HTTP {status}"));
        }
        resp.bytes().map(|b| b.to_vec()).map_err(|e| e.to_string())
    }
}
