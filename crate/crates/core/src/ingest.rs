//! Line-delimited record parsing and the on-disk corpus store.
//!
//! One JSON object per line describes one page. Malformed lines and broken
//! invariants become [`Violation`]s; only a schema-version mismatch or an
//! unreadable stream aborts.
//!
//! The store is a directory holding `index.json` and one JSONL file per
//! (source, city) under `records/`, each sorted by date then page number.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{
    validate_edition, BoundingBox, Containment, Edition, EditionKey, PageRecord, Rule, Segment,
    SegmentKind, Sentiment, Violation,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawSegment {
    kind: String,
    #[serde(rename = "box")]
    bbox: RawBox,
    #[serde(default)]
    text: String,
    #[serde(default)]
    sentiment: Option<i64>,
    #[serde(default)]
    topic: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawPage {
    schema: u32,
    source: String,
    city: String,
    date: String,
    page_number: i64,
    total_pages: i64,
    width: f64,
    height: f64,
    #[serde(default)]
    physical_width_cm: Option<f64>,
    #[serde(default)]
    physical_height_cm: Option<f64>,
    segments: Vec<RawSegment>,
}

impl From<&PageRecord> for RawPage {
    fn from(p: &PageRecord) -> Self {
        RawPage {
            schema: SCHEMA_VERSION,
            source: p.source.clone(),
            city: p.city.clone(),
            date: p.date.to_string(),
            page_number: p.page_number.into(),
            total_pages: p.total_pages.into(),
            width: p.width,
            height: p.height,
            physical_width_cm: p.physical_width_cm,
            physical_height_cm: p.physical_height_cm,
            segments: p
                .segments
                .iter()
                .map(|s| RawSegment {
                    kind: s.kind.to_string(),
                    bbox: RawBox {
                        x: s.bbox.x,
                        y: s.bbox.y,
                        w: s.bbox.width,
                        h: s.bbox.height,
                    },
                    text: s.text.clone(),
                    sentiment: s.sentiment.map(Sentiment::value),
                    topic: s.topic.clone(),
                })
                .collect(),
        }
    }
}

/// Serialize one page as a single schema line (no trailing newline).
pub fn page_to_line(page: &PageRecord) -> String {
    serde_json::to_string(&RawPage::from(page)).expect("page records always serialize")
}

fn positive_u32(v: i64) -> Option<u32> {
    u32::try_from(v).ok().filter(|&n| n >= 1)
}

fn positive_dim(v: Option<f64>) -> Option<f64> {
    v.filter(|d| d.is_finite() && *d > 0.0)
}

/// Convert one decoded line into a page, dropping invalid segments.
fn convert_page(raw: RawPage, record: &str, violations: &mut Vec<Violation>) -> Option<PageRecord> {
    let date = match NaiveDate::parse_from_str(&raw.date, "%Y-%m-%d") {
        Ok(d) => d,
        Err(_) => {
            violations.push(Violation::error(
                record,
                Rule::SchemaField,
                format!("date `{}`", raw.date),
            ));
            return None;
        }
    };
    let (Some(page_number), Some(total_pages)) =
        (positive_u32(raw.page_number), positive_u32(raw.total_pages))
    else {
        violations.push(Violation::error(
            record,
            Rule::PageNumberOutOfRange,
            format!("{} of {}", raw.page_number, raw.total_pages),
        ));
        return None;
    };
    if page_number > total_pages {
        violations.push(Violation::error(
            record,
            Rule::PageNumberOutOfRange,
            format!("{page_number} of {total_pages}"),
        ));
        return None;
    }
    if !(raw.width.is_finite() && raw.height.is_finite() && raw.width > 0.0 && raw.height > 0.0) {
        violations.push(Violation::error(
            record,
            Rule::DegeneratePage,
            format!("{} x {}", raw.width, raw.height),
        ));
        return None;
    }
    for (name, v) in [
        ("physical_width_cm", raw.physical_width_cm),
        ("physical_height_cm", raw.physical_height_cm),
    ] {
        if v.is_some() && positive_dim(v).is_none() {
            violations.push(Violation::warning(
                record,
                Rule::SchemaField,
                format!("{name} must be positive; treated as absent"),
            ));
        }
    }

    let mut segments = Vec::with_capacity(raw.segments.len());
    for (i, rs) in raw.segments.into_iter().enumerate() {
        let seg_record = format!("{record}/s{i}");
        let kind = match rs.kind.as_str() {
            "ad" => SegmentKind::Ad,
            "article" => SegmentKind::Article,
            other => {
                violations.push(Violation::error(
                    &seg_record,
                    Rule::SchemaField,
                    format!("kind `{other}`"),
                ));
                continue;
            }
        };
        let sentiment = match rs.sentiment {
            None => None,
            Some(v) => match Sentiment::from_label(v) {
                Some(s) => Some(s),
                None => {
                    violations.push(Violation::error(
                        &seg_record,
                        Rule::SentimentOutOfDomain,
                        format!("sentiment = {v}"),
                    ));
                    continue;
                }
            },
        };
        let bbox = BoundingBox::new(rs.bbox.x, rs.bbox.y, rs.bbox.w, rs.bbox.h);
        if bbox.is_degenerate() {
            violations.push(Violation::error(
                &seg_record,
                Rule::DegenerateBox,
                format!("{bbox:?}"),
            ));
            continue;
        }
        let bbox = match bbox.containment(raw.width, raw.height) {
            Containment::Inside => bbox,
            Containment::Clamped(c) => {
                log::warn!("{seg_record}: box clamped to page edge");
                violations.push(Violation::warning(
                    &seg_record,
                    Rule::BoxClamped,
                    format!("{bbox:?}"),
                ));
                c
            }
            Containment::Outside => {
                violations.push(Violation::error(
                    &seg_record,
                    Rule::BoxOutsidePage,
                    format!("{bbox:?}"),
                ));
                continue;
            }
        };
        segments.push(Segment {
            kind,
            bbox,
            text: rs.text,
            sentiment,
            topic: rs.topic,
        });
    }

    Some(PageRecord {
        source: raw.source,
        city: raw.city,
        date,
        page_number,
        total_pages,
        width: raw.width,
        height: raw.height,
        physical_width_cm: positive_dim(raw.physical_width_cm),
        physical_height_cm: positive_dim(raw.physical_height_cm),
        segments,
    })
}

/// Decode page lines from a reader. `origin` names the stream in violations.
pub fn parse_pages<R: BufRead>(
    reader: R,
    origin: &str,
) -> Result<(Vec<PageRecord>, Vec<Violation>)> {
    let mut pages = Vec::new();
    let mut violations = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let record = format!("{origin}:{}", i + 1);
        let value: serde_json::Value = match serde_json::from_str(trimmed) {
            Ok(v) => v,
            Err(e) => {
                violations.push(Violation::error(
                    &record,
                    Rule::MalformedRecord,
                    e.to_string(),
                ));
                continue;
            }
        };
        match value.get("schema").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(v) => {
                return Err(Error::Config(format!(
                    "{record}: schema version {v}, expected {SCHEMA_VERSION}"
                )))
            }
            None => {
                violations.push(Violation::error(
                    &record,
                    Rule::MalformedRecord,
                    "missing `schema`",
                ));
                continue;
            }
        }
        let raw: RawPage = match serde_json::from_value(value) {
            Ok(r) => r,
            Err(e) => {
                violations.push(Violation::error(
                    &record,
                    Rule::MalformedRecord,
                    e.to_string(),
                ));
                continue;
            }
        };
        if let Some(page) = convert_page(raw, &record, &mut violations) {
            pages.push(page);
        }
    }
    Ok((pages, violations))
}

/// Group pages into editions keyed by (source, city, date).
///
/// Duplicate page numbers keep the first occurrence with a warning. Editions
/// that still break an edition invariant (gaps, inconsistent totals) are
/// dropped and reported.
pub fn assemble_editions(pages: Vec<PageRecord>) -> (Vec<Edition>, Vec<Violation>) {
    let mut grouped: BTreeMap<EditionKey, Vec<PageRecord>> = BTreeMap::new();
    for p in pages {
        grouped.entry(p.edition_key()).or_default().push(p);
    }
    let mut editions = Vec::with_capacity(grouped.len());
    let mut violations = Vec::new();
    for (key, pages) in grouped {
        let mut seen = BTreeSet::new();
        let mut kept = Vec::with_capacity(pages.len());
        for p in pages {
            if seen.insert(p.page_number) {
                kept.push(p);
            } else {
                log::warn!("{}: duplicate page_number, keeping first", p.label());
                violations.push(Violation::warning(
                    p.label(),
                    Rule::DuplicatePageNumber,
                    "kept first",
                ));
            }
        }
        kept.sort_by_key(|p| p.page_number);
        let edition = Edition { key, pages: kept };
        let problems = validate_edition(&edition);
        if problems.iter().any(Violation::is_error) {
            violations.extend(problems);
        } else {
            editions.push(edition);
        }
    }
    (editions, violations)
}

/// Parse a stream of page lines into editions.
pub fn parse_records<R: BufRead>(
    reader: R,
    origin: &str,
) -> Result<(Vec<Edition>, Vec<Violation>)> {
    let (pages, mut violations) = parse_pages(reader, origin)?;
    let (editions, more) = assemble_editions(pages);
    violations.extend(more);
    Ok((editions, violations))
}

/// Expand glob patterns into a sorted, de-duplicated file list.
pub fn expand_inputs(patterns: &[String]) -> Result<Vec<PathBuf>> {
    let mut files = BTreeSet::new();
    for pat in patterns {
        let paths = glob::glob(pat).map_err(|e| Error::Config(format!("bad glob `{pat}`: {e}")))?;
        for entry in paths {
            let path = entry.map_err(|e| Error::Input(e.to_string()))?;
            if path.is_file() {
                files.insert(path);
            }
        }
    }
    if files.is_empty() {
        return Err(Error::Input(format!("no input files match {patterns:?}")));
    }
    Ok(files.into_iter().collect())
}

/// Parse several files in parallel and assemble editions across all of them.
pub fn parse_files(files: &[PathBuf]) -> Result<(Vec<Edition>, Vec<Violation>)> {
    let parsed: Vec<Result<(Vec<PageRecord>, Vec<Violation>)>> = files
        .par_iter()
        .map(|path| {
            let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            parse_pages(BufReader::new(f), &path.display().to_string())
        })
        .collect();
    let mut pages = Vec::new();
    let mut violations = Vec::new();
    for r in parsed {
        let (p, v) = r?;
        pages.extend(p);
        violations.extend(v);
    }
    let (editions, more) = assemble_editions(pages);
    violations.extend(more);
    Ok((editions, violations))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceStats {
    pub editions: u64,
    pub pages: u64,
    pub articles: u64,
    pub ads: u64,
}

impl SourceStats {
    fn add(&mut self, other: &SourceStats) {
        self.editions += other.editions;
        self.pages += other.pages;
        self.articles += other.articles;
        self.ads += other.ads;
    }

    fn of_edition(e: &Edition) -> Self {
        SourceStats {
            editions: 1,
            pages: e.pages.len() as u64,
            articles: e.segment_count(SegmentKind::Article) as u64,
            ads: e.segment_count(SegmentKind::Ad) as u64,
        }
    }
}

/// Per-source counts of editions, pages, articles and ads.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsTable {
    pub sources: BTreeMap<String, SourceStats>,
}

impl StatsTable {
    pub fn from_editions<'a>(editions: impl IntoIterator<Item = &'a Edition>) -> Self {
        let mut t = StatsTable::default();
        for e in editions {
            t.sources
                .entry(e.key.source.clone())
                .or_default()
                .add(&SourceStats::of_edition(e));
        }
        t
    }

    pub fn total(&self) -> SourceStats {
        let mut s = SourceStats::default();
        for v in self.sources.values() {
            s.add(v);
        }
        s
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("source,editions,pages,articles,ads\n");
        for (src, s) in &self.sources {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                csv_field(src),
                s.editions,
                s.pages,
                s.articles,
                s.ads
            ));
        }
        out
    }
}

/// `record,rule,severity,detail` rows, one per violation.
pub fn violations_csv(violations: &[Violation]) -> String {
    let mut out = String::from("record,rule,severity,detail\n");
    for v in violations {
        let severity = if v.is_error() { "error" } else { "warning" };
        out.push_str(&format!(
            "{},{},{severity},{}\n",
            csv_field(&v.record),
            csv_field(v.rule.describe()),
            csv_field(&v.detail)
        ));
    }
    out
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub source: String,
    pub city: String,
    pub date: NaiveDate,
    pub file: String,
    pub pages: u64,
    pub articles: u64,
    pub ads: u64,
}

impl IndexEntry {
    pub fn key(&self) -> EditionKey {
        EditionKey {
            source: self.source.clone(),
            city: self.city.clone(),
            date: self.date,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct IndexFile {
    schema: u32,
    editions: Vec<IndexEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub added_editions: usize,
    pub skipped_editions: usize,
    pub violations: Vec<Violation>,
}

/// Directory-backed corpus: JSONL record files plus an edition index.
#[derive(Debug, Clone)]
pub struct CorpusStore {
    root: PathBuf,
    index: BTreeMap<EditionKey, IndexEntry>,
}

const INDEX_FILE: &str = "index.json";
const RECORDS_DIR: &str = "records";

fn record_file_name(source: &str, city: &str) -> String {
    let slug: String = format!("{source}-{city}")
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '-'
            }
        })
        .collect();
    let digest = Sha256::digest(format!("{source}\u{1f}{city}").as_bytes());
    format!("{slug}-{}.jsonl", &hex::encode(digest)[..8])
}

impl CorpusStore {
    /// Open a store, creating an empty one if `root` has no index yet.
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let index_path = root.join(INDEX_FILE);
        let mut index = BTreeMap::new();
        if index_path.exists() {
            let bytes = fs::read(&index_path).map_err(|e| Error::io(&index_path, e))?;
            let file: IndexFile = serde_json::from_slice(&bytes)
                .map_err(|e| Error::Input(format!("{}: {e}", index_path.display())))?;
            if file.schema != SCHEMA_VERSION {
                return Err(Error::Config(format!(
                    "store schema {} unsupported (expected {SCHEMA_VERSION})",
                    file.schema
                )));
            }
            for entry in file.editions {
                if index.insert(entry.key(), entry.clone()).is_some() {
                    return Err(Error::Input(format!(
                        "duplicate index entry {}",
                        entry.key()
                    )));
                }
            }
        }
        Ok(CorpusStore { root, index })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn index(&self) -> impl Iterator<Item = &IndexEntry> {
        self.index.values()
    }

    pub fn contains(&self, key: &EditionKey) -> bool {
        self.index.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Add editions to the store and persist it.
    ///
    /// An edition whose key is already stored is skipped. With `dedup` off
    /// the skip is also reported as a [`Rule::DuplicateEdition`] violation.
    pub fn ingest(&mut self, editions: Vec<Edition>, dedup: bool) -> Result<IngestReport> {
        let mut report = IngestReport::default();
        let mut by_file: BTreeMap<String, Vec<Edition>> = BTreeMap::new();
        for e in editions {
            if self.index.contains_key(&e.key) {
                report.skipped_editions += 1;
                if !dedup {
                    log::warn!("{}: edition already stored, keeping existing", e.key);
                    report.violations.push(Violation::warning(
                        e.key.to_string(),
                        Rule::DuplicateEdition,
                        "",
                    ));
                }
                continue;
            }
            let file = record_file_name(&e.key.source, &e.key.city);
            by_file.entry(file).or_default().push(e);
        }
        if by_file.is_empty() {
            if !self.root.join(INDEX_FILE).exists() {
                self.write_index()?;
            }
            return Ok(report);
        }

        let records = self.root.join(RECORDS_DIR);
        fs::create_dir_all(&records).map_err(|e| Error::io(&records, e))?;
        for (file, new_editions) in by_file {
            let path = records.join(&file);
            let mut all: BTreeMap<EditionKey, Edition> = BTreeMap::new();
            if path.exists() {
                for e in self.read_file(&path)? {
                    all.insert(e.key.clone(), e);
                }
            }
            for e in new_editions {
                let entry = IndexEntry {
                    source: e.key.source.clone(),
                    city: e.key.city.clone(),
                    date: e.key.date,
                    file: file.clone(),
                    pages: e.pages.len() as u64,
                    articles: e.segment_count(SegmentKind::Article) as u64,
                    ads: e.segment_count(SegmentKind::Ad) as u64,
                };
                self.index.insert(e.key.clone(), entry);
                all.insert(e.key.clone(), e);
                report.added_editions += 1;
            }
            write_editions(&path, all.values())?;
        }
        self.write_index()?;
        Ok(report)
    }

    fn write_index(&self) -> Result<()> {
        fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        let file = IndexFile {
            schema: SCHEMA_VERSION,
            editions: self.index.values().cloned().collect(),
        };
        let path = self.root.join(INDEX_FILE);
        let mut text = serde_json::to_string_pretty(&file).expect("index serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    fn read_file(&self, path: &Path) -> Result<Vec<Edition>> {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let (editions, violations) = parse_records(BufReader::new(f), &path.display().to_string())?;
        if let Some(v) = violations.iter().find(|v| v.is_error()) {
            return Err(Error::Input(format!("corrupt store file: {v}")));
        }
        Ok(editions)
    }

    /// Load every stored edition, ordered by (source, city, date).
    pub fn editions(&self) -> Result<Vec<Edition>> {
        let files: BTreeSet<&str> = self.index.values().map(|e| e.file.as_str()).collect();
        let paths: Vec<PathBuf> = files
            .iter()
            .map(|f| self.root.join(RECORDS_DIR).join(f))
            .collect();
        let loaded: Vec<Result<Vec<Edition>>> =
            paths.par_iter().map(|p| self.read_file(p)).collect();
        let mut out = Vec::with_capacity(self.index.len());
        for r in loaded {
            out.extend(r?.into_iter().filter(|e| self.index.contains_key(&e.key)));
        }
        out.sort_by(|a, b| a.key.cmp(&b.key));
        Ok(out)
    }
}

fn write_editions<'a>(path: &Path, editions: impl Iterator<Item = &'a Edition>) -> Result<()> {
    let tmp = path.with_extension("jsonl.tmp");
    {
        let f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut w = BufWriter::new(f);
        for e in editions {
            for p in &e.pages {
                writeln!(w, "{}", page_to_line(p)).map_err(|e| Error::io(&tmp, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Per-source counts read from the store index.
pub fn corpus_stats(store: &CorpusStore) -> StatsTable {
    let mut t = StatsTable::default();
    for e in store.index() {
        t.sources
            .entry(e.source.clone())
            .or_default()
            .add(&SourceStats {
                editions: 1,
                pages: e.pages,
                articles: e.articles,
                ads: e.ads,
            });
    }
    t
}
