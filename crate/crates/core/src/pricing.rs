//! Page categories, area fractions, rate-card scaling factors, weighted ad
//! ratios and cost estimates.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::normalize;
use crate::error::{Error, Result};
use crate::model::{Edition, PageRecord, Segment, SegmentId, SegmentKind};

pub const DEFAULT_RATE_CARD_CSV: &str = include_str!("../data/rate_card.csv");

/// Standard broadsheet page, used when a page carries no physical size.
pub const BROADSHEET_CM: (f64, f64) = (33.0, 52.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PageCategory {
    Front,
    Third,
    Back,
    Other,
}

impl PageCategory {
    pub const ALL: [PageCategory; 4] = [
        PageCategory::Front,
        PageCategory::Third,
        PageCategory::Back,
        PageCategory::Other,
    ];

    pub fn is_premium(self) -> bool {
        self != PageCategory::Other
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PageCategory::Front => "front",
            PageCategory::Third => "third",
            PageCategory::Back => "back",
            PageCategory::Other => "other",
        }
    }
}

impl fmt::Display for PageCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Category of a page. On papers of one or three pages, Front and Third
/// take precedence over Back.
pub fn page_category(page_number: u32, total_pages: u32) -> Result<PageCategory> {
    if page_number < 1 || page_number > total_pages {
        return Err(Error::Domain(format!(
            "page {page_number} of {total_pages}"
        )));
    }
    Ok(match page_number {
        1 => PageCategory::Front,
        3 => PageCategory::Third,
        n if n == total_pages => PageCategory::Back,
        _ => PageCategory::Other,
    })
}

/// Share of the page covered by the segment's box.
pub fn area_fraction(seg: &Segment, page: &PageRecord) -> f64 {
    seg.bbox.area() / page.area()
}

/// Rates per cm² for one (source, city).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub front: f64,
    pub third: f64,
    pub back: f64,
    pub base: f64,
}

impl RateRow {
    pub fn rate(&self, cat: PageCategory) -> f64 {
        match cat {
            PageCategory::Front => self.front,
            PageCategory::Third => self.third,
            PageCategory::Back => self.back,
            PageCategory::Other => self.base,
        }
    }
}

#[derive(Debug, Deserialize)]
struct RateCsvRow {
    source: String,
    city: String,
    front: f64,
    third: f64,
    back: f64,
    base: f64,
}

fn label_key(s: &str) -> String {
    normalize(s)
}

/// Resolved rates for a (source, city) lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub row: RateRow,
    /// The city is not on the card; `row` is the mean over the source's rows.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateCard {
    rows: BTreeMap<(String, String), RateRow>,
    source_means: BTreeMap<String, RateRow>,
    min_rate: f64,
    warnings: Vec<String>,
}

impl RateCard {
    /// Build a card from `(source, city, row)` entries. Source and city are
    /// matched case-insensitively.
    pub fn new(entries: impl IntoIterator<Item = (String, String, RateRow)>) -> Result<Self> {
        let mut rows = BTreeMap::new();
        let mut warnings = Vec::new();
        for (source, city, row) in entries {
            for (name, v) in [
                ("front", row.front),
                ("third", row.third),
                ("back", row.back),
                ("base", row.base),
            ] {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Config(format!(
                        "rate card {source}/{city}: {name} rate {v} must be positive"
                    )));
                }
            }
            if row.front < row.base {
                let w = format!(
                    "rate card {source}/{city}: front rate {} below base rate {}",
                    row.front, row.base
                );
                log::warn!("{w}");
                warnings.push(w);
            }
            let key = (label_key(&source), label_key(&city));
            if rows.insert(key, row).is_some() {
                return Err(Error::Config(format!(
                    "rate card lists {source}/{city} twice"
                )));
            }
        }
        if rows.is_empty() {
            return Err(Error::Config("rate card is empty".into()));
        }
        let min_rate = rows.values().map(|r| r.base).fold(f64::INFINITY, f64::min);

        let mut sums: BTreeMap<String, (RateRow, f64)> = BTreeMap::new();
        for ((source, _), r) in &rows {
            let e = sums.entry(source.clone()).or_insert((
                RateRow {
                    front: 0.0,
                    third: 0.0,
                    back: 0.0,
                    base: 0.0,
                },
                0.0,
            ));
            e.0.front += r.front;
            e.0.third += r.third;
            e.0.back += r.back;
            e.0.base += r.base;
            e.1 += 1.0;
        }
        let source_means = sums
            .into_iter()
            .map(|(s, (t, n))| {
                (
                    s,
                    RateRow {
                        front: t.front / n,
                        third: t.third / n,
                        back: t.back / n,
                        base: t.base / n,
                    },
                )
            })
            .collect();

        Ok(RateCard {
            rows,
            source_means,
            min_rate,
            warnings,
        })
    }

    /// Parse a `source,city,front,third,back,base` CSV.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut entries = Vec::new();
        for rec in reader.deserialize::<RateCsvRow>() {
            let r = rec.map_err(|e| Error::Config(format!("rate card: {e}")))?;
            entries.push((
                r.source,
                r.city,
                RateRow {
                    front: r.front,
                    third: r.third,
                    back: r.back,
                    base: r.base,
                },
            ));
        }
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }

    pub fn default_card() -> Self {
        Self::from_csv(DEFAULT_RATE_CARD_CSV).expect("shipped rate card is valid")
    }

    /// Smallest base rate on the card.
    pub fn min_rate(&self) -> f64 {
        self.min_rate
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn rows(&self) -> impl Iterator<Item = (&(String, String), &RateRow)> {
        self.rows.iter()
    }

    /// Rates for (source, city), falling back to the source's mean row when
    /// the city is missing. An unknown source is a configuration error.
    pub fn resolve(&self, source: &str, city: &str) -> Result<Rates> {
        let s = label_key(source);
        if let Some(row) = self.rows.get(&(s.clone(), label_key(city))) {
            return Ok(Rates {
                row: *row,
                fallback: false,
            });
        }
        match self.source_means.get(&s) {
            Some(row) => Ok(Rates {
                row: *row,
                fallback: true,
            }),
            None => Err(Error::Config(format!(
                "no rates for source `{source}` (city `{city}`)"
            ))),
        }
    }
}

/// Ratio of the category's rate to the base rate for (source, city).
pub fn scaling_factor(card: &RateCard, source: &str, city: &str, cat: PageCategory) -> Result<f64> {
    if cat == PageCategory::Other {
        // Still resolve so unknown sources fail consistently.
        card.resolve(source, city)?;
        return Ok(1.0);
    }
    let rates = card.resolve(source, city)?;
    Ok(rates.row.rate(cat) / rates.row.base)
}

/// Category rate divided by the card's minimum base rate.
pub fn normalized_rate(
    card: &RateCard,
    source: &str,
    city: &str,
    cat: PageCategory,
) -> Result<f64> {
    Ok(card.resolve(source, city)?.row.rate(cat) / card.min_rate())
}

/// Scaling factor times area fraction.
pub fn weighted_ad_ratio(seg: &Segment, page: &PageRecord, card: &RateCard) -> Result<f64> {
    if seg.kind != SegmentKind::Ad {
        return Err(Error::Domain(
            "weighted ad ratio is defined for ads only".into(),
        ));
    }
    let cat = page_category(page.page_number, page.total_pages)?;
    Ok(scaling_factor(card, &page.source, &page.city, cat)? * area_fraction(seg, page))
}

/// Physical page sizes used when a page record carries none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageSizes {
    /// Width and height in cm per source label.
    #[serde(default)]
    pub per_source: BTreeMap<String, (f64, f64)>,
    /// Size for sources without an entry; `None` leaves such pages unpriceable.
    #[serde(default)]
    pub fallback: Option<(f64, f64)>,
}

impl Default for PageSizes {
    fn default() -> Self {
        PageSizes {
            per_source: BTreeMap::new(),
            fallback: Some(BROADSHEET_CM),
        }
    }
}

impl PageSizes {
    /// No defaults at all: only pages with recorded dimensions are priced.
    pub fn recorded_only() -> Self {
        PageSizes {
            per_source: BTreeMap::new(),
            fallback: None,
        }
    }

    pub fn physical_area_cm2(&self, page: &PageRecord) -> Option<f64> {
        page.physical_area_cm2().or_else(|| {
            let key = label_key(&page.source);
            self.per_source
                .iter()
                .find(|(s, _)| label_key(s) == key)
                .map(|(_, d)| *d)
                .or(self.fallback)
                .map(|(w, h)| w * h)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cost {
    Priced(f64),
    Unpriceable,
}

impl Cost {
    pub fn amount(self) -> Option<f64> {
        match self {
            Cost::Priced(v) => Some(v),
            Cost::Unpriceable => None,
        }
    }
}

/// Area fraction times physical page area (cm²) times the category rate.
pub fn cost_estimate(
    seg: &Segment,
    page: &PageRecord,
    card: &RateCard,
    sizes: &PageSizes,
) -> Result<Cost> {
    let cat = page_category(page.page_number, page.total_pages)?;
    let rate = card.resolve(&page.source, &page.city)?.row.rate(cat);
    Ok(match sizes.physical_area_cm2(page) {
        Some(area_cm2) => Cost::Priced(area_fraction(seg, page) * area_cm2 * rate),
        None => Cost::Unpriceable,
    })
}

/// Geometry and money for one ad.
#[derive(Debug, Clone, PartialEq)]
pub struct PricedAd {
    pub id: SegmentId,
    pub page_number: u32,
    pub total_pages: u32,
    pub category: PageCategory,
    pub area_fraction: f64,
    pub scaling_factor: f64,
    pub weighted_ad_ratio: f64,
    pub cost: Cost,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PricingOutcome {
    pub ads: Vec<PricedAd>,
    /// (source, city) pairs priced with the source's mean rates.
    pub fallback_pairs: Vec<(String, String)>,
    pub unpriceable: usize,
}

fn price_page(
    page: &PageRecord,
    card: &RateCard,
    sizes: &PageSizes,
) -> Result<(Vec<PricedAd>, bool)> {
    let cat = page_category(page.page_number, page.total_pages)?;
    let rates = card.resolve(&page.source, &page.city)?;
    let scale = if cat == PageCategory::Other {
        1.0
    } else {
        rates.row.rate(cat) / rates.row.base
    };
    let area_cm2 = sizes.physical_area_cm2(page);
    let rate = rates.row.rate(cat);
    let ads = page
        .segments
        .iter()
        .enumerate()
        .filter(|(_, s)| s.kind == SegmentKind::Ad)
        .map(|(i, s)| {
            let frac = area_fraction(s, page);
            PricedAd {
                id: page.segment_id(i),
                page_number: page.page_number,
                total_pages: page.total_pages,
                category: cat,
                area_fraction: frac,
                scaling_factor: scale,
                weighted_ad_ratio: scale * frac,
                cost: match area_cm2 {
                    Some(a) => Cost::Priced(frac * a * rate),
                    None => Cost::Unpriceable,
                },
            }
        })
        .collect();
    Ok((ads, rates.fallback))
}

/// Price every ad in the corpus, in corpus order.
pub fn price_corpus(
    editions: &[Edition],
    card: &RateCard,
    sizes: &PageSizes,
) -> Result<PricingOutcome> {
    let per_page: Vec<Result<(Vec<PricedAd>, bool)>> = editions
        .par_iter()
        .flat_map_iter(|e| e.pages.iter())
        .map(|p| price_page(p, card, sizes))
        .collect();
    let mut out = PricingOutcome::default();
    for r in per_page {
        let (ads, fallback) = r?;
        if fallback {
            if let Some(a) = ads.first() {
                let pair = (a.id.edition.source.clone(), a.id.edition.city.clone());
                if !out.fallback_pairs.contains(&pair) {
                    out.fallback_pairs.push(pair);
                }
            }
        }
        out.unpriceable += ads.iter().filter(|a| a.cost == Cost::Unpriceable).count();
        out.ads.extend(ads);
    }
    out.fallback_pairs.sort();
    for (s, c) in &out.fallback_pairs {
        log::warn!("no rates for {s}/{c}; using the mean of {s}'s rows");
    }
    Ok(out)
}

/// CSV with one row per ad.
pub fn priced_csv(ads: &[PricedAd]) -> String {
    let mut out = String::from(
        "segment_id,category,area_fraction,scaling_factor,weighted_ad_ratio,cost,unpriceable\n",
    );
    for a in ads {
        let (cost, flag) = match a.cost {
            Cost::Priced(v) => (v.to_string(), "false"),
            Cost::Unpriceable => (String::new(), "true"),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            crate::ingest::csv_field(&a.id.to_string()),
            a.category,
            a.area_fraction,
            a.scaling_factor,
            a.weighted_ad_ratio,
            cost,
            flag
        ));
    }
    out
}
