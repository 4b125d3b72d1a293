//! Validated in-memory corpus model.
//!
//! Coordinates are page-relative with a top-left origin: `x` grows to the
//! right and `y` grows downward, in whatever unit the upstream extractor
//! emitted (normally pixels). Analytics only use dimensionless ratios.

use std::collections::BTreeMap;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// Relative overshoot beyond the page edge that is clamped instead of rejected.
pub const CLAMP_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    #[serde(rename = "w")]
    pub width: f64,
    #[serde(rename = "h")]
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Containment {
    Inside,
    /// Overshoot within tolerance; carries the clamped box.
    Clamped(BoundingBox),
    Outside,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, width: f64, height: f64) -> Self {
        Self {
            x,
            y,
            width,
            height,
        }
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn right(&self) -> f64 {
        self.x + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.height
    }

    pub fn is_degenerate(&self) -> bool {
        let finite = [self.x, self.y, self.width, self.height]
            .iter()
            .all(|v| v.is_finite());
        !finite || self.width <= 0.0 || self.height <= 0.0
    }

    /// Strict containment in a `page_width` x `page_height` page.
    pub fn fits(&self, page_width: f64, page_height: f64) -> bool {
        self.x >= 0.0 && self.y >= 0.0 && self.right() <= page_width && self.bottom() <= page_height
    }

    /// Classify the box against the page, clamping overshoot of at most
    /// [`CLAMP_TOLERANCE`] of the page dimension on each edge.
    pub fn containment(&self, page_width: f64, page_height: f64) -> Containment {
        if self.fits(page_width, page_height) {
            return Containment::Inside;
        }
        let tol_x = CLAMP_TOLERANCE * page_width;
        let tol_y = CLAMP_TOLERANCE * page_height;
        if self.x < -tol_x
            || self.y < -tol_y
            || self.right() > page_width + tol_x
            || self.bottom() > page_height + tol_y
        {
            return Containment::Outside;
        }
        let x0 = self.x.max(0.0);
        let y0 = self.y.max(0.0);
        let x1 = self.right().min(page_width);
        let y1 = self.bottom().min(page_height);
        if x1 <= x0 || y1 <= y0 {
            return Containment::Outside;
        }
        Containment::Clamped(BoundingBox::new(x0, y0, x1 - x0, y1 - y0))
    }

    /// Horizontal overlap length with another box.
    pub fn x_overlap(&self, other: &BoundingBox) -> f64 {
        (self.right().min(other.right()) - self.x.max(other.x)).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Ad,
    Article,
}

impl fmt::Display for SegmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SegmentKind::Ad => "ad",
            SegmentKind::Article => "article",
        })
    }
}

/// Article or ad sentiment label: negative, neutral or positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sentiment {
    Negative,
    Neutral,
    Positive,
}

impl Sentiment {
    pub fn from_label(v: i64) -> Option<Self> {
        match v {
            -1 => Some(Sentiment::Negative),
            0 => Some(Sentiment::Neutral),
            1 => Some(Sentiment::Positive),
            _ => None,
        }
    }

    pub fn value(self) -> i64 {
        match self {
            Sentiment::Negative => -1,
            Sentiment::Neutral => 0,
            Sentiment::Positive => 1,
        }
    }
}

impl Serialize for Sentiment {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i64(self.value())
    }
}

impl<'de> Deserialize<'de> for Sentiment {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Sentiment::from_label(v)
            .ok_or_else(|| serde::de::Error::custom(format!("sentiment {v} not in {{-1, 0, 1}}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub bbox: BoundingBox,
    pub text: String,
    pub sentiment: Option<Sentiment>,
    pub topic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EditionKey {
    pub source: String,
    pub city: String,
    pub date: NaiveDate,
}

impl fmt::Display for EditionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.source, self.city, self.date)
    }
}

/// Stable identity of a segment: edition, page number and position on the page.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SegmentId {
    #[serde(flatten)]
    pub edition: EditionKey,
    pub page: u32,
    pub index: usize,
}

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/p{}/s{}", self.edition, self.page, self.index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageRecord {
    pub source: String,
    pub city: String,
    pub date: NaiveDate,
    pub page_number: u32,
    pub total_pages: u32,
    pub width: f64,
    pub height: f64,
    pub physical_width_cm: Option<f64>,
    pub physical_height_cm: Option<f64>,
    pub segments: Vec<Segment>,
}

impl PageRecord {
    pub fn edition_key(&self) -> EditionKey {
        EditionKey {
            source: self.source.clone(),
            city: self.city.clone(),
            date: self.date,
        }
    }

    pub fn label(&self) -> String {
        format!(
            "{}/{}/{}/p{}",
            self.source, self.city, self.date, self.page_number
        )
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn segment_id(&self, index: usize) -> SegmentId {
        SegmentId {
            edition: self.edition_key(),
            page: self.page_number,
            index,
        }
    }

    /// Physical page area in cm², when both dimensions are known.
    pub fn physical_area_cm2(&self) -> Option<f64> {
        Some(self.physical_width_cm? * self.physical_height_cm?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edition {
    pub key: EditionKey,
    pub pages: Vec<PageRecord>,
}

impl Edition {
    pub fn segment_count(&self, kind: SegmentKind) -> usize {
        self.pages
            .iter()
            .flat_map(|p| &p.segments)
            .filter(|s| s.kind == kind)
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    MalformedRecord,
    SchemaField,
    SentimentOutOfDomain,
    DegenerateBox,
    BoxOutsidePage,
    BoxClamped,
    DegeneratePage,
    PageNumberOutOfRange,
    DuplicatePageNumber,
    MissingPage,
    InconsistentTotalPages,
    PagesOutOfOrder,
    ForeignPage,
    DuplicateEdition,
}

impl Rule {
    pub fn describe(self) -> &'static str {
        match self {
            Rule::MalformedRecord => "malformed record",
            Rule::SchemaField => "invalid field",
            Rule::SentimentOutOfDomain => "sentiment out of domain",
            Rule::DegenerateBox => "degenerate box",
            Rule::BoxOutsidePage => "box outside page",
            Rule::BoxClamped => "box clamped to page edge",
            Rule::DegeneratePage => "degenerate page dimensions",
            Rule::PageNumberOutOfRange => "page_number out of range",
            Rule::DuplicatePageNumber => "duplicate page_number",
            Rule::MissingPage => "missing page_number",
            Rule::InconsistentTotalPages => "inconsistent total_pages",
            Rule::PagesOutOfOrder => "pages out of order",
            Rule::ForeignPage => "page belongs to another edition",
            Rule::DuplicateEdition => "edition already stored",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.describe())
    }
}

/// One broken invariant, named by the record it was found on.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub record: String,
    pub rule: Rule,
    pub severity: Severity,
    pub detail: String,
}

impl Violation {
    pub fn error(record: impl Into<String>, rule: Rule, detail: impl Into<String>) -> Self {
        Self {
            record: record.into(),
            rule,
            severity: Severity::Error,
            detail: detail.into(),
        }
    }

    pub fn warning(record: impl Into<String>, rule: Rule, detail: impl Into<String>) -> Self {
        Self {
            record: record.into(),
            rule,
            severity: Severity::Warning,
            detail: detail.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.record, self.rule)?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

fn describe_box(b: &BoundingBox) -> String {
    format!("x={} y={} w={} h={}", b.x, b.y, b.width, b.height)
}

/// Check every segment of one page against the page geometry.
pub fn validate_page(page: &PageRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    let label = page.label();
    if !(page.width.is_finite() && page.height.is_finite() && page.width > 0.0 && page.height > 0.0)
    {
        out.push(Violation::error(
            &label,
            Rule::DegeneratePage,
            format!("{} x {}", page.width, page.height),
        ));
        return out;
    }
    if page.page_number < 1 || page.page_number > page.total_pages {
        out.push(Violation::error(
            &label,
            Rule::PageNumberOutOfRange,
            format!("{} of {}", page.page_number, page.total_pages),
        ));
    }
    for seg in &page.segments {
        if seg.bbox.is_degenerate() {
            out.push(Violation::error(
                &label,
                Rule::DegenerateBox,
                describe_box(&seg.bbox),
            ));
        } else if !seg.bbox.fits(page.width, page.height) {
            out.push(Violation::error(
                &label,
                Rule::BoxOutsidePage,
                describe_box(&seg.bbox),
            ));
        }
    }
    out
}

/// Check every edition and page invariant. Returns an empty list iff the
/// edition is valid. The result is sorted, so permuting segments or pages
/// does not change it.
pub fn validate_edition(edition: &Edition) -> Vec<Violation> {
    let mut out = Vec::new();
    let record = edition.key.to_string();

    for page in &edition.pages {
        if page.edition_key() != edition.key {
            out.push(Violation::error(
                page.label(),
                Rule::ForeignPage,
                record.clone(),
            ));
        }
        out.extend(validate_page(page));
    }

    if let Some(first) = edition.pages.first() {
        let total = first.total_pages;
        if edition.pages.iter().any(|p| p.total_pages != total) {
            let mut seen: Vec<u32> = edition.pages.iter().map(|p| p.total_pages).collect();
            seen.sort_unstable();
            seen.dedup();
            out.push(Violation::error(
                &record,
                Rule::InconsistentTotalPages,
                format!("{seen:?}"),
            ));
        }

        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for p in &edition.pages {
            *counts.entry(p.page_number).or_default() += 1;
        }
        for (&n, &c) in &counts {
            if c > 1 {
                out.push(Violation::error(
                    format!("{record}/p{n}"),
                    Rule::DuplicatePageNumber,
                    format!("{c} copies"),
                ));
            }
        }
        let expected = edition
            .pages
            .iter()
            .map(|p| p.total_pages)
            .max()
            .unwrap_or(0);
        for n in 1..=expected {
            if !counts.contains_key(&n) {
                out.push(Violation::error(
                    format!("{record}/p{n}"),
                    Rule::MissingPage,
                    "",
                ));
            }
        }
        if edition
            .pages
            .windows(2)
            .any(|w| w[0].page_number > w[1].page_number)
        {
            out.push(Violation::error(&record, Rule::PagesOutOfOrder, ""));
        }
    }

    out.sort();
    out
}
