//! Panel construction from classified and priced corpora, and panel CSV I/O.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::classify::{MatchResult, GOVERNMENT};
use crate::error::{Error, Result};
use crate::ingest::csv_field;
use crate::metrics::stable_sum;
use crate::model::{Edition, SegmentId, SegmentKind};
use crate::pricing::PricedAd;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeriodBucket {
    Day,
    Week,
    #[default]
    Month,
}

impl PeriodBucket {
    /// Sortable period label: `YYYY-MM-DD`, the Monday `YYYY-MM-DD` of the
    /// week, or `YYYY-MM`.
    pub fn label(self, date: NaiveDate) -> String {
        match self {
            PeriodBucket::Day => date.to_string(),
            PeriodBucket::Week => {
                let monday =
                    date - chrono::Days::new(u64::from(date.weekday().num_days_from_monday()));
                monday.to_string()
            }
            PeriodBucket::Month => format!("{:04}-{:02}", date.year(), date.month()),
        }
    }
}

impl FromStr for PeriodBucket {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "day" | "daily" => Ok(PeriodBucket::Day),
            "week" | "weekly" => Ok(PeriodBucket::Week),
            "month" | "monthly" => Ok(PeriodBucket::Month),
            _ => Err(Error::Config(format!("unknown period bucket `{s}`"))),
        }
    }
}

/// Which advertiser family a panel describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PanelFocus {
    /// One entity per company; ads and articles credited by company keywords.
    Companies,
    /// The single government entity; articles via the corruption rule.
    Government,
}

impl fmt::Display for PanelFocus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PanelFocus::Companies => "companies",
            PanelFocus::Government => "government",
        })
    }
}

/// One (entity, source, period) row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelObservation {
    pub entity: String,
    pub source: String,
    pub period: String,
    pub weighted_ad_ratio: f64,
    pub sentiment_total: i64,
    pub article_count: u64,
    pub popularity: Option<f64>,
}

impl PanelObservation {
    pub fn key(&self) -> (&str, &str, &str) {
        (&self.entity, &self.source, &self.period)
    }

    pub fn check(&self) -> Result<()> {
        let id = format!("{}/{}/{}", self.entity, self.source, self.period);
        if !(self.weighted_ad_ratio.is_finite() && self.weighted_ad_ratio >= 0.0) {
            return Err(Error::Input(format!(
                "{id}: weighted_ad_ratio {} must be >= 0",
                self.weighted_ad_ratio
            )));
        }
        if self.sentiment_total.unsigned_abs() > self.article_count {
            return Err(Error::Input(format!(
                "{id}: |sentiment_total| {} exceeds article_count {}",
                self.sentiment_total, self.article_count
            )));
        }
        if let Some(p) = self.popularity {
            if !(0.0..=100.0).contains(&p) {
                return Err(Error::Input(format!(
                    "{id}: popularity {p} outside [0, 100]"
                )));
            }
        }
        Ok(())
    }
}

/// Reject duplicate keys and rows breaking a field invariant.
pub fn check_panel(rows: &[PanelObservation]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for r in rows {
        r.check()?;
        if !seen.insert(r.key()) {
            return Err(Error::Input(format!("duplicate panel row {:?}", r.key())));
        }
    }
    Ok(())
}

/// Popularity index per (entity, period), on a 0–100 scale.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PopularitySeries {
    pub values: BTreeMap<(String, String), f64>,
}

#[derive(Debug, Deserialize)]
struct PopularityRow {
    entity: String,
    period: String,
    popularity: f64,
}

impl PopularitySeries {
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut values = BTreeMap::new();
        for row in rdr.deserialize::<PopularityRow>() {
            let r = row.map_err(|e| Error::Input(format!("popularity: {e}")))?;
            if !(0.0..=100.0).contains(&r.popularity) {
                return Err(Error::Input(format!(
                    "popularity {} outside [0, 100]",
                    r.popularity
                )));
            }
            if values
                .insert((r.entity.clone(), r.period.clone()), r.popularity)
                .is_some()
            {
                return Err(Error::Input(format!(
                    "popularity lists {}/{} twice",
                    r.entity, r.period
                )));
            }
        }
        Ok(PopularitySeries { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }

    /// Set each row's popularity from its (entity, period), clearing rows
    /// without an entry. Returns the number of entries whose entity has no
    /// row; those are ignored with a warning.
    pub fn join(&self, rows: &mut [PanelObservation]) -> usize {
        let entities: BTreeSet<&str> = rows.iter().map(|r| r.entity.as_str()).collect();
        let unknown: BTreeSet<&str> = self
            .values
            .keys()
            .map(|(e, _)| e.as_str())
            .filter(|e| !entities.contains(e))
            .collect();
        for e in &unknown {
            log::warn!("popularity series names unknown entity `{e}`; rows ignored");
        }
        let ignored = self
            .values
            .keys()
            .filter(|(e, _)| unknown.contains(e.as_str()))
            .count();
        for r in rows.iter_mut() {
            r.popularity = self
                .values
                .get(&(r.entity.clone(), r.period.clone()))
                .copied();
        }
        ignored
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanelOptions {
    pub bucket: PeriodBucket,
    /// Add zero rows for periods in which an active (entity, source) pair's
    /// source published but the entity had no activity.
    pub fill_zero_rows: bool,
}

impl Default for PanelOptions {
    fn default() -> Self {
        PanelOptions {
            bucket: PeriodBucket::Month,
            fill_zero_rows: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PanelBuild {
    pub rows: Vec<PanelObservation>,
    /// Popularity entries whose entity never appears in the panel.
    pub ignored_popularity: usize,
}

#[derive(Default)]
struct Cell {
    ratios: Vec<f64>,
    sentiment: i64,
    articles: u64,
}

fn entities_of(m: &MatchResult, focus: PanelFocus) -> Vec<&str> {
    match focus {
        PanelFocus::Companies => m.companies().collect(),
        PanelFocus::Government => {
            if m.is_government() {
                vec![GOVERNMENT]
            } else {
                vec![]
            }
        }
    }
}

/// Aggregate matched ads and articles into panel rows, sorted by
/// (entity, source, period).
///
/// An ad credits its full weighted ad ratio to every matched entity. Articles
/// add their sentiment label (unlabelled articles count as 0) and one to the
/// article count.
pub fn build_panel(
    editions: &[Edition],
    matches: &[MatchResult],
    priced: &[PricedAd],
    focus: PanelFocus,
    options: PanelOptions,
    popularity: Option<&PopularitySeries>,
) -> PanelBuild {
    let by_id: HashMap<&SegmentId, &MatchResult> =
        matches.iter().map(|m| (&m.segment, m)).collect();
    let war: HashMap<&SegmentId, f64> = priced
        .iter()
        .map(|a| (&a.id, a.weighted_ad_ratio))
        .collect();

    let mut cells: BTreeMap<(String, String, String), Cell> = BTreeMap::new();
    let mut source_periods: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for e in editions {
        let period = options.bucket.label(e.key.date);
        source_periods
            .entry(e.key.source.clone())
            .or_default()
            .insert(period.clone());
        for page in &e.pages {
            for (i, seg) in page.segments.iter().enumerate() {
                let id = page.segment_id(i);
                let Some(m) = by_id.get(&id) else { continue };
                for entity in entities_of(m, focus) {
                    let cell = cells
                        .entry((entity.to_string(), e.key.source.clone(), period.clone()))
                        .or_default();
                    match seg.kind {
                        SegmentKind::Ad => {
                            if let Some(w) = war.get(&id) {
                                cell.ratios.push(*w);
                            }
                        }
                        SegmentKind::Article => {
                            cell.sentiment += seg.sentiment.map_or(0, |s| s.value());
                            cell.articles += 1;
                        }
                    }
                }
            }
        }
    }

    if options.fill_zero_rows {
        let pairs: BTreeSet<(String, String)> = cells
            .keys()
            .map(|(e, s, _)| (e.clone(), s.clone()))
            .collect();
        for (entity, source) in pairs {
            for period in &source_periods[&source] {
                cells
                    .entry((entity.clone(), source.clone(), period.clone()))
                    .or_default();
            }
        }
    }

    let mut rows: Vec<PanelObservation> = cells
        .into_iter()
        .map(|((entity, source, period), c)| PanelObservation {
            weighted_ad_ratio: stable_sum(c.ratios),
            sentiment_total: c.sentiment,
            article_count: c.articles,
            popularity: None,
            entity,
            source,
            period,
        })
        .collect();
    let ignored_popularity = popularity.map_or(0, |p| p.join(&mut rows));
    PanelBuild {
        rows,
        ignored_popularity,
    }
}

pub const PANEL_HEADER: &str =
    "entity,source,period,weighted_ad_ratio,sentiment_total,article_count,popularity";

pub fn panel_to_csv(rows: &[PanelObservation]) -> String {
    let mut out = String::from(PANEL_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            csv_field(&r.entity),
            csv_field(&r.source),
            csv_field(&r.period),
            r.weighted_ad_ratio,
            r.sentiment_total,
            r.article_count,
            r.popularity.map(|p| p.to_string()).unwrap_or_default()
        ));
    }
    out
}

#[derive(Debug, Deserialize)]
struct PanelCsvRow {
    entity: String,
    source: String,
    period: String,
    weighted_ad_ratio: f64,
    sentiment_total: i64,
    article_count: u64,
    popularity: Option<f64>,
}

/// Parse a panel CSV with exactly the columns of [`PANEL_HEADER`].
pub fn panel_from_csv(text: &str) -> Result<Vec<PanelObservation>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::Input(format!("panel: {e}")))?;
    let got: Vec<&str> = headers.iter().collect();
    let want: Vec<&str> = PANEL_HEADER.split(',').collect();
    if got != want {
        return Err(Error::Input(format!(
            "panel columns {got:?}, expected {want:?}"
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<PanelCsvRow>().enumerate() {
        let r = rec.map_err(|e| Error::Input(format!("panel row {}: {e}", i + 2)))?;
        rows.push(PanelObservation {
            entity: r.entity,
            source: r.source,
            period: r.period,
            weighted_ad_ratio: r.weighted_ad_ratio,
            sentiment_total: r.sentiment_total,
            article_count: r.article_count,
            popularity: r.popularity,
        });
    }
    check_panel(&rows)?;
    Ok(rows)
}

pub fn read_panel(path: &Path) -> Result<Vec<PanelObservation>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    panel_from_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{classify_corpus, EntityRuleSet};
    use crate::model::{BoundingBox, EditionKey, PageRecord, Segment, Sentiment};
    use crate::pricing::{price_corpus, PageSizes, RateCard};

    fn seg(kind: SegmentKind, text: &str, frac: f64, sentiment: Option<Sentiment>) -> Segment {
        Segment {
            kind,
            bbox: BoundingBox::new(0.0, 0.0, 100.0, 100.0 * frac),
            text: text.into(),
            sentiment,
            topic: None,
        }
    }

    fn edition(source: &str, date: NaiveDate, pages: Vec<Vec<Segment>>) -> Edition {
        let total = pages.len() as u32;
        let key = EditionKey {
            source: source.into(),
            city: "Delhi".into(),
            date,
        };
        Edition {
            pages: pages
                .into_iter()
                .enumerate()
                .map(|(i, segments)| PageRecord {
                    source: source.into(),
                    city: "Delhi".into(),
                    date,
                    page_number: i as u32 + 1,
                    total_pages: total,
                    width: 100.0,
                    height: 100.0,
                    physical_width_cm: None,
                    physical_height_cm: None,
                    segments,
                })
                .collect(),
            key,
        }
    }

    fn d(m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2023, m, day).unwrap()
    }

    fn build(eds: &[Edition], focus: PanelFocus) -> Vec<PanelObservation> {
        let rules = EntityRuleSet::default_rules();
        let matches = classify_corpus(eds, &rules);
        let priced = price_corpus(eds, &RateCard::default_card(), &PageSizes::default()).unwrap();
        build_panel(
            eds,
            &matches,
            &priced.ads,
            focus,
            PanelOptions::default(),
            None,
        )
        .rows
    }

    #[test]
    fn zero_rows_fill_active_pairs() {
        let filler = || vec![seg(SegmentKind::Article, "weather", 0.1, None)];
        let eds = vec![
            edition(
                "Dainik Bhaskar",
                d(1, 10),
                vec![
                    filler(),
                    filler(),
                    filler(),
                    vec![seg(SegmentKind::Ad, "amul butter", 0.5, None)],
                ],
            ),
            edition(
                "Dainik Bhaskar",
                d(2, 10),
                vec![filler(), filler(), filler(), filler()],
            ),
        ];
        let rows = build(&eds, PanelFocus::Companies);
        assert_eq!(rows.len(), 2);
        // Last page is the back page: 774 against the 546 base.
        assert_eq!(rows[0].period, "2023-01");
        assert!((rows[0].weighted_ad_ratio - 0.5 * 774.0 / 546.0).abs() < 1e-12);
        assert_eq!(
            (rows[1].period.as_str(), rows[1].weighted_ad_ratio),
            ("2023-02", 0.0)
        );
    }

    #[test]
    fn sentiment_sums_and_counts() {
        let eds = vec![edition(
            "Telegraph",
            d(3, 1),
            vec![vec![
                seg(
                    SegmentKind::Article,
                    "samsung profits rise",
                    0.1,
                    Some(Sentiment::Positive),
                ),
                seg(
                    SegmentKind::Article,
                    "samsung recall",
                    0.1,
                    Some(Sentiment::Negative),
                ),
            ]],
        )];
        let rows = build(&eds, PanelFocus::Companies);
        assert_eq!(rows.len(), 1);
        assert_eq!((rows[0].sentiment_total, rows[0].article_count), (0, 2));
    }

    #[test]
    fn government_focus_uses_both_rules() {
        let eds = vec![edition(
            "Telegraph",
            d(3, 1),
            vec![
                vec![seg(SegmentKind::Ad, "e-tender notice", 0.25, None)],
                vec![seg(
                    SegmentKind::Article,
                    "state official held in bribe case",
                    0.1,
                    Some(Sentiment::Negative),
                )],
                vec![seg(
                    SegmentKind::Article,
                    "bribe claims by a shopkeeper",
                    0.1,
                    Some(Sentiment::Negative),
                )],
            ],
        )];
        let rows = build(&eds, PanelFocus::Government);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].entity, GOVERNMENT);
        // Page 1 of 3 is the front page: Telegraph Kolkata rates are not on
        // the card for Delhi, so the source mean (its only row) applies.
        assert!((rows[0].weighted_ad_ratio - 0.25 * 2641.0 / 2230.0).abs() < 1e-12);
        assert_eq!((rows[0].sentiment_total, rows[0].article_count), (-1, 1));
    }

    #[test]
    fn multi_company_ads_credit_each() {
        let eds = vec![edition(
            "Sakshi",
            d(5, 5),
            vec![
                vec![],
                vec![seg(SegmentKind::Ad, "samsung and vivo phones", 0.2, None)],
            ],
        )];
        let rows = build(&eds, PanelFocus::Companies);
        let names: Vec<&str> = rows.iter().map(|r| r.entity.as_str()).collect();
        assert_eq!(names, vec!["Samsung", "Vivo"]);
        // Back page; Sakshi has no Delhi row, and its mean row keeps back/base = 2.
        assert!(rows
            .iter()
            .all(|r| (r.weighted_ad_ratio - 0.4).abs() < 1e-12));
    }

    #[test]
    fn periods() {
        let date = NaiveDate::from_ymd_opt(2024, 2, 29).unwrap(); // Thursday
        assert_eq!(PeriodBucket::Day.label(date), "2024-02-29");
        assert_eq!(PeriodBucket::Week.label(date), "2024-02-26");
        assert_eq!(PeriodBucket::Month.label(date), "2024-02");
        assert!("fortnight".parse::<PeriodBucket>().is_err());
    }

    #[test]
    fn csv_roundtrip_and_checks() {
        let rows = vec![
            PanelObservation {
                entity: "Tata".into(),
                source: "Times of India".into(),
                period: "2023-01".into(),
                weighted_ad_ratio: 0.125,
                sentiment_total: -2,
                article_count: 3,
                popularity: Some(55.5),
            },
            PanelObservation {
                entity: "P&G, India".into(),
                source: "Times of India".into(),
                period: "2023-01".into(),
                weighted_ad_ratio: 0.0,
                sentiment_total: 0,
                article_count: 0,
                popularity: None,
            },
        ];
        assert_eq!(panel_from_csv(&panel_to_csv(&rows)).unwrap(), rows);

        let mut bad = rows.clone();
        bad[0].sentiment_total = 4;
        assert!(panel_from_csv(&panel_to_csv(&bad)).is_err());
        let dup = vec![rows[0].clone(), rows[0].clone()];
        assert!(panel_from_csv(&panel_to_csv(&dup)).is_err());
        assert!(panel_from_csv("entity,source\nA,B\n").is_err());
    }

    #[test]
    fn popularity_join() {
        let eds = vec![edition(
            "Sakshi",
            d(5, 5),
            vec![vec![seg(SegmentKind::Ad, "vivo", 0.2, None)]],
        )];
        let rules = EntityRuleSet::default_rules();
        let matches = classify_corpus(&eds, &rules);
        let priced = price_corpus(&eds, &RateCard::default_card(), &PageSizes::default()).unwrap();
        let pop = PopularitySeries::from_csv(
            "entity,period,popularity\nVivo,2023-05,40\nNokia,2023-05,10\nNokia,2023-06,12\n",
        )
        .unwrap();
        let b = build_panel(
            &eds,
            &matches,
            &priced.ads,
            PanelFocus::Companies,
            PanelOptions::default(),
            Some(&pop),
        );
        assert_eq!(b.rows[0].popularity, Some(40.0));
        assert_eq!(b.ignored_popularity, 2);
        assert!(PopularitySeries::from_csv("entity,period,popularity\nX,1,101\n").is_err());
    }
}
