//! Descriptive aggregates: placement shares, size distributions, page parity,
//! ad-area time series and per-advertiser breakdowns.
//!
//! Floating-point sums go through [`stable_sum`], which sorts before adding,
//! so every figure is independent of input order.

use std::collections::{BTreeMap, HashMap};

use chrono::{Datelike, Weekday};
use serde::Serialize;

use crate::classify::{EntityRuleSet, MatchResult};
use crate::error::{Error, Result};
use crate::ingest::csv_field;
use crate::model::{Edition, SegmentId, SegmentKind};
use crate::pricing::{area_fraction, PageCategory, PricedAd};

/// Order-independent compensated sum.
pub fn stable_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EntityClass {
    Government,
    Companies,
}

impl EntityClass {
    pub const ALL: [EntityClass; 2] = [EntityClass::Government, EntityClass::Companies];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityClass::Government => "government",
            EntityClass::Companies => "companies",
        }
    }
}

/// How to treat an ad matching both the government rule and a company.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub enum OverlapPolicy {
    #[default]
    CountInBoth,
    ExcludeOverlaps,
}

pub fn in_class(m: &MatchResult, class: EntityClass, policy: OverlapPolicy) -> bool {
    let gov = m.is_government();
    let com = m.has_company();
    if policy == OverlapPolicy::ExcludeOverlaps && gov && com {
        return false;
    }
    match class {
        EntityClass::Government => gov,
        EntityClass::Companies => com,
    }
}

pub fn match_index(matches: &[MatchResult]) -> HashMap<&SegmentId, &MatchResult> {
    matches.iter().map(|m| (&m.segment, m)).collect()
}

/// Ads of one entity class.
pub fn class_ads<'a>(
    ads: &'a [PricedAd],
    matches: &[MatchResult],
    class: EntityClass,
    policy: OverlapPolicy,
) -> Vec<&'a PricedAd> {
    let index = match_index(matches);
    ads.iter()
        .filter(|a| index.get(&a.id).is_some_and(|m| in_class(m, class, policy)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryPlacement {
    pub category: PageCategory,
    pub ads: usize,
    /// Percent of the class's ads on this category.
    pub ad_share: f64,
    /// Mean percent of the page covered per ad on this category; `None` without ads.
    pub mean_page_area_share: Option<f64>,
    /// Percent of the class's total ad area that lies on this category.
    pub total_area_share: f64,
    /// Percent of the class's priced spend on this category; `None` if nothing is priced.
    pub spend_share: Option<f64>,
    pub spend: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassPlacement {
    pub class: EntityClass,
    pub ads: usize,
    /// Ads left out of spend figures because they could not be priced.
    pub unpriceable: usize,
    pub total_spend: f64,
    /// Empty when the class has no ads ("no data").
    pub categories: Vec<CategoryPlacement>,
}

impl ClassPlacement {
    pub fn has_data(&self) -> bool {
        self.ads > 0
    }

    pub fn category(&self, cat: PageCategory) -> Option<&CategoryPlacement> {
        self.categories.iter().find(|c| c.category == cat)
    }

    pub fn premium_ad_share(&self) -> f64 {
        self.categories
            .iter()
            .filter(|c| c.category.is_premium())
            .map(|c| c.ad_share)
            .sum()
    }

    pub fn premium_area_share(&self) -> f64 {
        self.categories
            .iter()
            .filter(|c| c.category.is_premium())
            .map(|c| c.total_area_share)
            .sum()
    }

    pub fn premium_spend_share(&self) -> Option<f64> {
        self.categories
            .iter()
            .filter(|c| c.category.is_premium())
            .map(|c| c.spend_share)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlacementReport {
    pub classes: Vec<ClassPlacement>,
}

impl PlacementReport {
    pub fn class(&self, class: EntityClass) -> &ClassPlacement {
        self.classes
            .iter()
            .find(|c| c.class == class)
            .expect("report covers every class")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "entity_class,category,ads,ad_share,mean_page_area_share,total_area_share,spend_share,spend,unpriceable_excluded\n",
        );
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for c in &self.classes {
            if !c.has_data() {
                out.push_str(&format!("{},no data,0,,,,,,0\n", c.class.as_str()));
                continue;
            }
            for p in &c.categories {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    c.class.as_str(),
                    p.category,
                    p.ads,
                    p.ad_share,
                    opt(p.mean_page_area_share),
                    p.total_area_share,
                    opt(p.spend_share),
                    p.spend,
                    c.unpriceable
                ));
            }
        }
        out
    }
}

fn class_placement(class: EntityClass, ads: &[&PricedAd]) -> ClassPlacement {
    let n = ads.len();
    let unpriceable = ads.iter().filter(|a| a.cost.amount().is_none()).count();
    if n == 0 {
        return ClassPlacement {
            class,
            ads: 0,
            unpriceable: 0,
            total_spend: 0.0,
            categories: Vec::new(),
        };
    }
    let total_area = stable_sum(ads.iter().map(|a| a.area_fraction).collect());
    let total_spend = stable_sum(ads.iter().filter_map(|a| a.cost.amount()).collect());
    let categories = PageCategory::ALL
        .iter()
        .map(|&cat| {
            let here: Vec<&&PricedAd> = ads.iter().filter(|a| a.category == cat).collect();
            let area = stable_sum(here.iter().map(|a| a.area_fraction).collect());
            let spend = stable_sum(here.iter().filter_map(|a| a.cost.amount()).collect());
            CategoryPlacement {
                category: cat,
                ads: here.len(),
                ad_share: 100.0 * here.len() as f64 / n as f64,
                mean_page_area_share: (!here.is_empty()).then(|| 100.0 * area / here.len() as f64),
                total_area_share: 100.0 * area / total_area,
                spend_share: (total_spend > 0.0).then(|| 100.0 * spend / total_spend),
                spend,
            }
        })
        .collect();
    ClassPlacement {
        class,
        ads: n,
        unpriceable,
        total_spend,
        categories,
    }
}

/// The four placement variables for government and company ads.
pub fn placement_report(
    ads: &[PricedAd],
    matches: &[MatchResult],
    policy: OverlapPolicy,
) -> PlacementReport {
    let classes = EntityClass::ALL
        .iter()
        .map(|&class| class_placement(class, &class_ads(ads, matches, class, policy)))
        .collect();
    PlacementReport { classes }
}

/// Empirical CDF over area fractions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeCdf {
    samples: Vec<f64>,
}

impl SizeCdf {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Domain("size CDF of an empty sample".into()));
        }
        if let Some(bad) = samples.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
            return Err(Error::Domain(format!("area fraction {bad} outside (0, 1]")));
        }
        samples.sort_by(f64::total_cmp);
        Ok(SizeCdf { samples })
    }

    /// Share of samples at most `x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.samples.partition_point(|v| *v <= x) as f64 / self.samples.len() as f64
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Distinct sample values with the CDF at each.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let n = self.samples.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, v) in self.samples.iter().enumerate() {
            let f = (i + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == *v => last.1 = f,
                _ => out.push((*v, f)),
            }
        }
        out
    }
}

pub fn size_cdf(fractions: Vec<f64>) -> Result<SizeCdf> {
    SizeCdf::new(fractions)
}

/// CSV of CDF steps for each entity class with data.
pub fn cdf_csv(ads: &[PricedAd], matches: &[MatchResult], policy: OverlapPolicy) -> String {
    let mut out = String::from("entity_class,area_fraction,cdf\n");
    for class in EntityClass::ALL {
        let fr: Vec<f64> = class_ads(ads, matches, class, policy)
            .iter()
            .map(|a| a.area_fraction)
            .collect();
        if let Ok(cdf) = SizeCdf::new(fr) {
            for (x, f) in cdf.steps() {
                out.push_str(&format!("{},{x},{f}\n", class.as_str()));
            }
        }
    }
    out
}

/// Count page numbers by parity: `(odd, even)`.
pub fn parity_counts(pages: impl IntoIterator<Item = u32>) -> (u64, u64) {
    pages.into_iter().fold(
        (0, 0),
        |(o, e), p| if p % 2 == 1 { (o + 1, e) } else { (o, e + 1) },
    )
}

/// Odd- and even-page ad counts for one entity class.
pub fn odd_even_counts(
    ads: &[PricedAd],
    matches: &[MatchResult],
    class: EntityClass,
    policy: OverlapPolicy,
) -> (u64, u64) {
    parity_counts(
        class_ads(ads, matches, class, policy)
            .iter()
            .map(|a| a.page_number),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonthlyRatio {
    /// `None` for the all-source aggregate.
    pub source: Option<String>,
    pub month: String,
    pub pages: usize,
    pub ratio: f64,
}

/// Share of page area covered by ads, per page.
fn page_ratios(editions: &[Edition]) -> impl Iterator<Item = (&Edition, f64)> {
    editions.iter().flat_map(|e| {
        e.pages.iter().map(move |p| {
            let r = stable_sum(
                p.segments
                    .iter()
                    .filter(|s| s.kind == SegmentKind::Ad)
                    .map(|s| area_fraction(s, p))
                    .collect(),
            );
            (e, r)
        })
    })
}

/// Mean per-page ad-area ratio by calendar month. The aggregate series
/// weights every page equally; `by_source` adds one series per source.
pub fn monthly_area_ratio(editions: &[Edition], by_source: bool) -> Vec<MonthlyRatio> {
    let mut groups: BTreeMap<(Option<String>, String), Vec<f64>> = BTreeMap::new();
    for (e, r) in page_ratios(editions) {
        let month = e.key.date.format("%Y-%m").to_string();
        groups.entry((None, month.clone())).or_default().push(r);
        if by_source {
            groups
                .entry((Some(e.key.source.clone()), month))
                .or_default()
                .push(r);
        }
    }
    groups
        .into_iter()
        .map(|((source, month), rs)| MonthlyRatio {
            source,
            month,
            pages: rs.len(),
            ratio: stable_sum(rs.clone()) / rs.len() as f64,
        })
        .collect()
}

pub fn monthly_csv(series: &[MonthlyRatio]) -> String {
    let mut out = String::from("source,month,pages,ad_area_ratio\n");
    for m in series {
        let src = m
            .source
            .as_deref()
            .map(csv_field)
            .unwrap_or_else(|| "all".into());
        out.push_str(&format!("{src},{},{},{}\n", m.month, m.pages, m.ratio));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeekdayProfile {
    /// Monday first; `None` when no page falls on that weekday.
    pub ratios: [Option<f64>; 7],
    pub pages: [usize; 7],
}

pub fn weekday_area_profile(editions: &[Edition]) -> WeekdayProfile {
    let mut buckets: [Vec<f64>; 7] = Default::default();
    for (e, r) in page_ratios(editions) {
        buckets[e.key.date.weekday().num_days_from_monday() as usize].push(r);
    }
    let pages = std::array::from_fn(|i| buckets[i].len());
    let ratios = std::array::from_fn(|i| {
        let b = &buckets[i];
        (!b.is_empty()).then(|| stable_sum(b.clone()) / b.len() as f64)
    });
    WeekdayProfile { ratios, pages }
}

pub fn weekday_csv(p: &WeekdayProfile) -> String {
    let mut out = String::from("weekday,pages,ad_area_ratio\n");
    let mut day = Weekday::Mon;
    for i in 0..7 {
        let r = p.ratios[i]
            .map(|v| v.to_string())
            .unwrap_or_else(|| "absent".into());
        out.push_str(&format!("{day},{},{r}\n", p.pages[i]));
        day = day.succ();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompanyCount {
    pub company: String,
    pub ads: usize,
    /// Percent of all company-ad credits.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompanySourceShare {
    pub company: String,
    pub source: String,
    pub ads: usize,
    /// Percent of the company's ads that ran in this source.
    pub share: f64,
}

pub const SIZE_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorHistogram {
    pub sector: String,
    /// Counts of area fractions in `((k-1)/10, k/10]` for k = 1..=10.
    pub bins: [usize; SIZE_BINS],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntityBreakdown {
    /// Ranked by ad count, ties broken by name.
    pub companies: Vec<CompanyCount>,
    pub by_source: Vec<CompanySourceShare>,
    pub sectors: Vec<SectorHistogram>,
}

pub fn size_bin(fraction: f64) -> usize {
    ((fraction * SIZE_BINS as f64).ceil() as usize).clamp(1, SIZE_BINS) - 1
}

/// Per-company ad counts and shares, per-source splits and per-sector size
/// histograms. An ad naming several companies counts once for each.
pub fn entity_breakdown(
    ads: &[PricedAd],
    matches: &[MatchResult],
    rules: &EntityRuleSet,
) -> EntityBreakdown {
    let index = match_index(matches);
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut by_source: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    let mut sectors: BTreeMap<String, [usize; SIZE_BINS]> = BTreeMap::new();
    for a in ads {
        let Some(m) = index.get(&a.id) else { continue };
        for c in m.companies() {
            *counts.entry(c).or_default() += 1;
            *by_source
                .entry((c, a.id.edition.source.as_str()))
                .or_default() += 1;
            let sector = rules.sector_of(c).unwrap_or("Unassigned").to_string();
            sectors.entry(sector).or_insert([0; SIZE_BINS])[size_bin(a.area_fraction)] += 1;
        }
    }
    let total: usize = counts.values().sum();
    let mut companies: Vec<CompanyCount> = counts
        .iter()
        .map(|(c, n)| CompanyCount {
            company: c.to_string(),
            ads: *n,
            share: 100.0 * *n as f64 / total as f64,
        })
        .collect();
    companies.sort_by(|a, b| b.ads.cmp(&a.ads).then_with(|| a.company.cmp(&b.company)));
    let by_source = by_source
        .iter()
        .map(|((c, s), n)| CompanySourceShare {
            company: c.to_string(),
            source: s.to_string(),
            ads: *n,
            share: 100.0 * *n as f64 / counts[c] as f64,
        })
        .collect();
    let sectors = sectors
        .into_iter()
        .map(|(sector, bins)| SectorHistogram { sector, bins })
        .collect();
    EntityBreakdown {
        companies,
        by_source,
        sectors,
    }
}

impl EntityBreakdown {
    pub fn top(&self, n: usize) -> &[CompanyCount] {
        &self.companies[..n.min(self.companies.len())]
    }

    /// Three tables in one CSV, distinguished by the `table` column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("table,company,source,sector,bin_upper,ads,share\n");
        for c in &self.companies {
            out.push_str(&format!(
                "company,{},,,,{},{}\n",
                csv_field(&c.company),
                c.ads,
                c.share
            ));
        }
        for s in &self.by_source {
            out.push_str(&format!(
                "company_source,{},{},,,{},{}\n",
                csv_field(&s.company),
                csv_field(&s.source),
                s.ads,
                s.share
            ));
        }
        for h in &self.sectors {
            let total: usize = h.bins.iter().sum();
            for (k, n) in h.bins.iter().enumerate() {
                let share = if total > 0 {
                    100.0 * *n as f64 / total as f64
                } else {
                    0.0
                };
                out.push_str(&format!(
                    "sector_size,,,{},{},{n},{share}\n",
                    csv_field(&h.sector),
                    (k + 1) as f64 / SIZE_BINS as f64
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopicCount {
    pub kind: SegmentKind,
    pub topic: String,
    pub count: usize,
    /// Percent of labelled segments of this kind.
    pub share: f64,
}

/// Distribution of ingested topic labels for ads and articles.
pub fn topic_counts(editions: &[Edition]) -> Vec<TopicCount> {
    let mut counts: BTreeMap<(SegmentKind, &str), usize> = BTreeMap::new();
    for s in editions
        .iter()
        .flat_map(|e| &e.pages)
        .flat_map(|p| &p.segments)
    {
        if let Some(t) = &s.topic {
            *counts.entry((s.kind, t.as_str())).or_default() += 1;
        }
    }
    let mut totals: BTreeMap<SegmentKind, usize> = BTreeMap::new();
    for ((k, _), n) in &counts {
        *totals.entry(*k).or_default() += n;
    }
    counts
        .into_iter()
        .map(|((kind, topic), count)| TopicCount {
            kind,
            topic: topic.to_string(),
            count,
            share: 100.0 * count as f64 / totals[&kind] as f64,
        })
        .collect()
}

pub fn topics_csv(rows: &[TopicCount]) -> String {
    let mut out = String::from("kind,topic,count,share\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.kind,
            csv_field(&r.topic),
            r.count,
            r.share
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::GOVERNMENT;
    use crate::model::{BoundingBox, EditionKey, PageRecord, Segment};
    use crate::pricing::{page_category, Cost};
    use chrono::NaiveDate;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn key(source: &str, date: NaiveDate) -> EditionKey {
        EditionKey {
            source: source.into(),
            city: "Delhi".into(),
            date,
        }
    }

    fn day(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn priced(i: usize, page: u32, total: u32, frac: f64, cost: Option<f64>) -> PricedAd {
        PricedAd {
            id: SegmentId {
                edition: key("S", day(2022, 1, 1)),
                page,
                index: i,
            },
            page_number: page,
            total_pages: total,
            category: page_category(page, total).unwrap(),
            area_fraction: frac,
            scaling_factor: 1.0,
            weighted_ad_ratio: frac,
            cost: cost.map(Cost::Priced).unwrap_or(Cost::Unpriceable),
        }
    }

    fn tag(a: &PricedAd, entities: &[&str]) -> MatchResult {
        MatchResult {
            segment: a.id.clone(),
            kind: SegmentKind::Ad,
            entities: entities
                .iter()
                .map(|s| s.to_string())
                .collect::<BTreeSet<_>>(),
            keywords: entities
                .iter()
                .map(|s| (s.to_string(), vec!["k".to_string()]))
                .collect(),
        }
    }

    #[test]
    fn government_other_share_counts() {
        let mut ads = Vec::new();
        for i in 0..8 {
            ads.push(priced(i, 5, 20, 0.05, Some(10.0)));
        }
        ads.push(priced(8, 1, 20, 0.05, Some(10.0)));
        ads.push(priced(9, 20, 20, 0.05, Some(10.0)));
        let matches: Vec<_> = ads.iter().map(|a| tag(a, &[GOVERNMENT])).collect();
        let r = placement_report(&ads, &matches, OverlapPolicy::CountInBoth);
        let g = r.class(EntityClass::Government);
        assert_eq!(g.category(PageCategory::Other).unwrap().ad_share, 80.0);
        assert_eq!(
            g.category(PageCategory::Third)
                .unwrap()
                .mean_page_area_share,
            None
        );
        assert!(!r.class(EntityClass::Companies).has_data());
        assert!(r.to_csv().contains("companies,no data"));
    }

    #[test]
    fn single_full_page_front_ad() {
        let ads = vec![priced(0, 1, 20, 1.0, Some(5.0))];
        let matches = vec![tag(&ads[0], &["Tata"])];
        let r = placement_report(&ads, &matches, OverlapPolicy::CountInBoth);
        let c = r.class(EntityClass::Companies);
        assert_eq!(
            c.category(PageCategory::Front)
                .unwrap()
                .mean_page_area_share,
            Some(100.0)
        );
        assert_eq!(c.premium_spend_share(), Some(100.0));
    }

    #[test]
    fn unpriceable_ads_are_excluded_and_counted() {
        let ads = vec![
            priced(0, 1, 20, 0.5, None),
            priced(1, 5, 20, 0.5, Some(1.0)),
        ];
        let matches: Vec<_> = ads.iter().map(|a| tag(a, &["Tata"])).collect();
        let r = placement_report(&ads, &matches, OverlapPolicy::CountInBoth);
        let c = r.class(EntityClass::Companies);
        assert_eq!(c.unpriceable, 1);
        assert_eq!(
            c.category(PageCategory::Other).unwrap().spend_share,
            Some(100.0)
        );
        assert_eq!(c.category(PageCategory::Front).unwrap().ad_share, 50.0);
    }

    #[test]
    fn overlap_policy() {
        let ads = vec![priced(0, 5, 20, 0.1, Some(1.0))];
        let both = vec![tag(&ads[0], &[GOVERNMENT, "LIC"])];
        let r = placement_report(&ads, &both, OverlapPolicy::CountInBoth);
        assert!(
            r.class(EntityClass::Government).has_data()
                && r.class(EntityClass::Companies).has_data()
        );
        let r = placement_report(&ads, &both, OverlapPolicy::ExcludeOverlaps);
        assert!(
            !r.class(EntityClass::Government).has_data()
                && !r.class(EntityClass::Companies).has_data()
        );
    }

    #[test]
    fn cdf_examples() {
        let cdf = size_cdf(vec![0.25, 0.5, 1.0]).unwrap();
        assert!((cdf.eval(0.5) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(cdf.eval(1.0), 1.0);
        assert_eq!(cdf.eval(0.0), 0.0);
        assert!(size_cdf(vec![]).is_err());
        assert!(size_cdf(vec![0.0]).is_err());
        assert!(size_cdf(vec![1.5]).is_err());
        assert_eq!(
            size_cdf(vec![0.5, 0.5, 1.0]).unwrap().steps(),
            vec![(0.5, 2.0 / 3.0), (1.0, 1.0)]
        );
    }

    #[test]
    fn cdf_mixture_below_ten_percent() {
        // 85 small ads in (0, 0.1), 15 larger ones.
        let mut v: Vec<f64> = (0..85).map(|i| 0.01 + 0.001 * i as f64).collect();
        v.extend((0..15).map(|i| 0.25 + 0.05 * i as f64));
        let cdf = size_cdf(v).unwrap();
        assert!((cdf.eval(0.10) - 0.85).abs() < 1e-12);
    }

    #[test]
    fn parity() {
        assert_eq!(parity_counts([1, 3, 5, 2]), (3, 1));
        assert_eq!(parity_counts([]), (0, 0));
    }

    fn page(source: &str, date: NaiveDate, n: u32, ad_fracs: &[f64]) -> PageRecord {
        PageRecord {
            source: source.into(),
            city: "Delhi".into(),
            date,
            page_number: n,
            total_pages: n,
            width: 100.0,
            height: 100.0,
            physical_width_cm: None,
            physical_height_cm: None,
            segments: ad_fracs
                .iter()
                .map(|f| Segment {
                    kind: SegmentKind::Ad,
                    bbox: BoundingBox::new(0.0, 0.0, 100.0, 100.0 * f),
                    text: String::new(),
                    sentiment: None,
                    topic: None,
                })
                .collect(),
        }
    }

    fn edition(source: &str, date: NaiveDate, per_page: &[&[f64]]) -> Edition {
        let total = per_page.len() as u32;
        Edition {
            key: key(source, date),
            pages: per_page
                .iter()
                .enumerate()
                .map(|(i, f)| {
                    let mut p = page(source, date, i as u32 + 1, f);
                    p.total_pages = total;
                    p
                })
                .collect(),
        }
    }

    #[test]
    fn monthly_series() {
        let eds = vec![
            edition("A", day(2020, 3, 2), &[&[0.35], &[0.2, 0.15]]),
            edition("A", day(2020, 4, 2), &[&[0.1], &[0.05, 0.05]]),
        ];
        let s = monthly_area_ratio(&eds, false);
        assert_eq!(s.len(), 2);
        assert!((s[0].ratio - 0.35).abs() < 1e-12);
        assert!((s[1].ratio - 0.10).abs() < 1e-12);
        assert_eq!(s[0].month, "2020-03");
    }

    #[test]
    fn aggregate_is_page_weighted_mean_of_sources() {
        let eds = vec![
            edition("A", day(2021, 6, 1), &[&[0.4], &[0.2], &[0.3]]),
            edition("B", day(2021, 6, 3), &[&[0.1]]),
        ];
        let s = monthly_area_ratio(&eds, true);
        let all = s.iter().find(|m| m.source.is_none()).unwrap();
        let a = s.iter().find(|m| m.source.as_deref() == Some("A")).unwrap();
        let b = s.iter().find(|m| m.source.as_deref() == Some("B")).unwrap();
        let weighted =
            (a.ratio * a.pages as f64 + b.ratio * b.pages as f64) / (a.pages + b.pages) as f64;
        assert!((all.ratio - weighted).abs() < 1e-12);
        assert!((all.ratio - 0.25).abs() < 1e-12);
    }

    #[test]
    fn weekday_profile() {
        // 2022-01-01 is a Saturday.
        let eds: Vec<Edition> = (0..7)
            .map(|d| edition("A", day(2022, 1, 1) + chrono::Days::new(d), &[&[0.3]]))
            .collect();
        let p = weekday_area_profile(&eds);
        assert!(p.ratios.iter().all(|r| (r.unwrap() - 0.3).abs() < 1e-12));

        let p = weekday_area_profile(&eds[..1]);
        assert_eq!(p.ratios[5], Some(0.3));
        assert_eq!(p.ratios[0], None);
        assert!(weekday_csv(&p).contains("Mon,0,absent"));
    }

    #[test]
    fn company_shares_and_sectors() {
        let rules = EntityRuleSet::default_rules();
        let mut ads = Vec::new();
        let mut matches = Vec::new();
        for (name, n, frac) in [("Tata", 5, 0.25), ("FIITJEE", 3, 1.0), ("Amul", 2, 0.05)] {
            for _ in 0..n {
                let a = priced(ads.len(), 5, 20, frac, Some(1.0));
                matches.push(tag(&a, &[name]));
                ads.push(a);
            }
        }
        let b = entity_breakdown(&ads, &matches, &rules);
        let shares: Vec<(&str, f64)> = b
            .companies
            .iter()
            .map(|c| (c.company.as_str(), c.share))
            .collect();
        assert_eq!(
            shares,
            vec![("Tata", 50.0), ("FIITJEE", 30.0), ("Amul", 20.0)]
        );
        assert!(!b.companies.iter().any(|c| c.company == "Samsung"));
        let edu = b.sectors.iter().find(|s| s.sector == "Education").unwrap();
        assert_eq!(edu.bins[SIZE_BINS - 1], 3);
        assert_eq!(edu.bins.iter().sum::<usize>(), 3);
        assert_eq!(b.top(2).len(), 2);
    }

    #[test]
    fn ties_rank_lexicographically() {
        let rules = EntityRuleSet::default_rules();
        let ads: Vec<_> = (0..2).map(|i| priced(i, 4, 20, 0.1, None)).collect();
        let matches = vec![tag(&ads[0], &["Vivo"]), tag(&ads[1], &["Amul"])];
        let b = entity_breakdown(&ads, &matches, &rules);
        assert_eq!(b.companies[0].company, "Amul");
    }

    #[test]
    fn size_bins() {
        assert_eq!(size_bin(1.0), 9);
        assert_eq!(size_bin(0.1), 0);
        assert_eq!(size_bin(0.1000001), 1);
        assert_eq!(size_bin(1e-9), 0);
    }

    proptest! {
        #[test]
        fn shares_sum_to_hundred(
            raw in proptest::collection::vec((1u32..=24, 0.001f64..1.0, proptest::option::of(1.0f64..1e6), 0u8..4), 1..200),
            seed in any::<u64>(),
        ) {
            let ads: Vec<PricedAd> = raw.iter().enumerate().map(|(i, &(p, f, c, _))| priced(i, p, 24, f, c)).collect();
            let matches: Vec<MatchResult> = ads.iter().zip(&raw).map(|(a, r)| match r.3 {
                0 => tag(a, &[GOVERNMENT]),
                1 => tag(a, &["Tata"]),
                2 => tag(a, &[GOVERNMENT, "LIC"]),
                _ => tag(a, &[]),
            }).collect();
            let report = placement_report(&ads, &matches, OverlapPolicy::CountInBoth);
            for c in report.classes.iter().filter(|c| c.has_data()) {
                let ad: f64 = c.categories.iter().map(|x| x.ad_share).sum();
                let area: f64 = c.categories.iter().map(|x| x.total_area_share).sum();
                prop_assert!((ad - 100.0).abs() < 1e-9);
                prop_assert!((area - 100.0).abs() < 1e-9);
                if let Some(spend) = c.premium_spend_share() {
                    let other = c.category(PageCategory::Other).unwrap().spend_share.unwrap();
                    prop_assert!((spend + other - 100.0).abs() < 1e-9);
                }
                for x in &c.categories {
                    if let Some(m) = x.mean_page_area_share {
                        prop_assert!((0.0..=100.0).contains(&m));
                    }
                }
            }

            // Input order does not matter.
            let mut order: Vec<usize> = (0..ads.len()).collect();
            let mut s = seed;
            for i in (1..order.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                order.swap(i, (s >> 33) as usize % (i + 1));
            }
            let ads2: Vec<PricedAd> = order.iter().map(|&i| ads[i].clone()).collect();
            let matches2: Vec<MatchResult> = order.iter().rev().map(|&i| matches[i].clone()).collect();
            prop_assert_eq!(placement_report(&ads2, &matches2, OverlapPolicy::CountInBoth), report);
        }

        #[test]
        fn cdf_is_monotone(v in proptest::collection::vec(1e-6f64..=1.0, 1..100), xs in proptest::collection::vec(-0.5f64..1.5, 2..20)) {
            let cdf = size_cdf(v.clone()).unwrap();
            let mut xs = xs;
            xs.sort_by(f64::total_cmp);
            for w in xs.windows(2) {
                prop_assert!(cdf.eval(w[0]) <= cdf.eval(w[1]));
            }
            prop_assert_eq!(cdf.eval(1.0), 1.0);
            prop_assert_eq!(cdf.eval(0.0), 0.0);
            for x in &v {
                // Right-continuous: F(x) counts the sample at x.
                prop_assert!(cdf.eval(*x) >= v.iter().filter(|s| *s <= x).count() as f64 / v.len() as f64 - 1e-15);
            }
        }
    }
}
