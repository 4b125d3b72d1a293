//! Seeded generators for synthetic corpora and panels with known ground truth.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::page_to_line;
use crate::model::{BoundingBox, Edition, PageRecord, Segment, SegmentKind, Sentiment};
use crate::panel::PanelObservation;

pub const PAGE_WIDTH: f64 = 1000.0;
pub const PAGE_HEIGHT: f64 = 1600.0;

/// (source, city) pairs present in the default rate card.
pub const SOURCES: [(&str, &str); 5] = [
    ("Times of India", "Mumbai"),
    ("Hindustan Times", "Delhi"),
    ("Dainik Bhaskar", "Delhi"),
    ("Sakshi", "Andhra"),
    ("Telegraph", "Kolkata"),
];

const COMPANY_ADS: [&str; 12] = [
    "Samsung Galaxy festive offer",
    "Tata Motors new launch",
    "Reliance JioMart grocery sale",
    "Maruti Suzuki Nexa showroom",
    "FIITJEE admission test",
    "Allen Career Institute results",
    "Amul butter",
    "Hero MotoCorp splendor",
    "Airtel fibre broadband",
    "LIC jeevan policy",
    "Prestige lakeside homes",
    "Apple iPhone store",
];
const GOVERNMENT_ADS: [&str; 4] = [
    "e-tender notice for road works",
    "corrigendum to earlier procurement notice",
    "state health mission recruitment",
    "central scheme enrolment drive",
];
const OTHER_ADS: [&str; 3] = [
    "matrimonial classifieds",
    "property for rent",
    "coaching for dance",
];
const ARTICLES: [&str; 8] = [
    "Samsung posts record quarterly profit",
    "Tata group restructures holdings",
    "probe into scam at state board",
    "govt officials held in bribe case",
    "monsoon arrives early in the city",
    "local team wins cup final",
    "Reliance expands retail footprint",
    "Maruti Suzuki recalls vehicles",
];
const TOPICS: [&str; 6] = [
    "business",
    "politics",
    "sports",
    "weather",
    "crime",
    "technology",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub seed: u64,
    /// Editions per source; each edition has `pages_per_edition` pages.
    pub editions_per_source: usize,
    pub pages_per_edition: u32,
    pub start: NaiveDate,
    /// Days between consecutive editions of a source.
    pub day_step: u64,
    /// Probability that an ad is a government ad.
    pub government_share: f64,
    /// Probability that a government ad is small (area fraction below 0.1).
    pub government_small: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            seed: 0,
            editions_per_source: 100,
            pages_per_edition: 20,
            start: NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date"),
            day_step: 7,
            government_share: 0.3,
            government_small: 0.85,
        }
    }
}

impl CorpusSpec {
    /// Spec with at least `pages` pages in total.
    pub fn with_pages(seed: u64, pages: usize) -> Self {
        let d = CorpusSpec::default();
        let per_source = pages.div_ceil(SOURCES.len() * d.pages_per_edition as usize);
        CorpusSpec {
            seed,
            editions_per_source: per_source,
            ..d
        }
    }

    pub fn page_count(&self) -> usize {
        SOURCES.len() * self.editions_per_source * self.pages_per_edition as usize
    }
}

fn ad_fraction(rng: &mut ChaCha8Rng, government: bool, spec: &CorpusSpec) -> f64 {
    if government {
        if rng.random_bool(spec.government_small) {
            rng.random_range(0.01..0.099)
        } else {
            *[0.25, 0.5].choose(rng).expect("non-empty")
        }
    } else {
        *[0.125, 0.25, 0.5, 1.0].choose(rng).expect("non-empty")
    }
}

fn page(rng: &mut ChaCha8Rng, spec: &CorpusSpec, base: &PageRecord) -> PageRecord {
    let mut segments = Vec::new();
    let mut y = 0.0;
    let ads = rng.random_range(0..4);
    for _ in 0..ads {
        let government = rng.random_bool(spec.government_share);
        let frac = ad_fraction(rng, government, spec);
        let h = (frac * PAGE_HEIGHT).round();
        if y + h > PAGE_HEIGHT + 1e-9 {
            break;
        }
        let text = if government {
            GOVERNMENT_ADS.choose(rng)
        } else if rng.random_bool(0.8) {
            COMPANY_ADS.choose(rng)
        } else {
            OTHER_ADS.choose(rng)
        };
        segments.push(Segment {
            kind: SegmentKind::Ad,
            bbox: BoundingBox::new(0.0, y, PAGE_WIDTH, h),
            text: text.expect("non-empty").to_string(),
            sentiment: None,
            topic: None,
        });
        y += h;
    }
    let free = PAGE_HEIGHT - y;
    let articles = if free > 100.0 {
        rng.random_range(1..5)
    } else {
        0
    };
    // Whole-unit edges keep every box exactly inside the page.
    for i in 0..articles {
        let top = (free * i as f64 / articles as f64).floor();
        let bottom = if i + 1 == articles {
            free
        } else {
            (free * (i + 1) as f64 / articles as f64).floor()
        };
        let sentiment = Sentiment::from_label(rng.random_range(-1..=1));
        segments.push(Segment {
            kind: SegmentKind::Article,
            bbox: BoundingBox::new(0.0, y + top, PAGE_WIDTH, bottom - top),
            text: ARTICLES.choose(rng).expect("non-empty").to_string(),
            sentiment,
            topic: Some(TOPICS.choose(rng).expect("non-empty").to_string()),
        });
    }
    PageRecord {
        segments,
        ..base.clone()
    }
}

/// Generate a corpus; identical specs give identical corpora.
pub fn corpus(spec: &CorpusSpec) -> Vec<Edition> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(SOURCES.len() * spec.editions_per_source);
    for (source, city) in SOURCES {
        for e in 0..spec.editions_per_source {
            let date = spec.start + Days::new(e as u64 * spec.day_step);
            let base = PageRecord {
                source: source.to_string(),
                city: city.to_string(),
                date,
                page_number: 1,
                total_pages: spec.pages_per_edition,
                width: PAGE_WIDTH,
                height: PAGE_HEIGHT,
                physical_width_cm: None,
                physical_height_cm: None,
                segments: Vec::new(),
            };
            let pages = (1..=spec.pages_per_edition)
                .map(|n| {
                    page(
                        &mut rng,
                        spec,
                        &PageRecord {
                            page_number: n,
                            ..base.clone()
                        },
                    )
                })
                .collect();
            out.push(Edition {
                key: base.edition_key(),
                pages,
            });
        }
    }
    out
}

/// Write one JSONL file per source into `dir`; returns the paths written.
pub fn write_corpus(dir: &Path, editions: &[Edition]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for (source, city) in SOURCES {
        let eds: Vec<&Edition> = editions
            .iter()
            .filter(|e| e.key.source == source && e.key.city == city)
            .collect();
        if eds.is_empty() {
            continue;
        }
        let slug: String = format!("{source}-{city}")
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() {
                    c.to_ascii_lowercase()
                } else {
                    '_'
                }
            })
            .collect();
        let path = dir.join(format!("{slug}.jsonl"));
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        for p in eds.iter().flat_map(|e| &e.pages) {
            writeln!(w, "{}", page_to_line(p)).map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Sentiment,
    Count,
}

/// Planted-coefficient panel: y = a_g + b_t + β·x + ε with x correlated
/// with a_g, so pooled OLS is biased while the within estimator is not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanelSpec {
    pub seed: u64,
    pub entities: usize,
    pub sources: usize,
    pub periods: usize,
    pub beta: f64,
    pub outcome: Outcome,
    pub group_sd: f64,
    pub time_sd: f64,
    pub noise_sd: f64,
    /// Probability that a row is dropped, making the panel unbalanced.
    pub drop_rate: f64,
    /// Level added to counts so they stay positive.
    pub count_level: f64,
}

impl PanelSpec {
    pub fn new(seed: u64, outcome: Outcome, beta: f64) -> Self {
        PanelSpec {
            seed,
            entities: 8,
            sources: 5,
            periods: 24,
            beta,
            outcome,
            group_sd: 2.0,
            time_sd: 1.0,
            noise_sd: 1.0,
            drop_rate: 0.05,
            count_level: 30.0,
        }
    }

    /// One entity observed in `sources` newspapers.
    pub fn government(seed: u64, beta: f64, periods: usize) -> Self {
        PanelSpec {
            entities: 1,
            periods,
            ..PanelSpec::new(seed, Outcome::Sentiment, beta)
        }
    }
}

fn period_label(t: usize) -> String {
    format!("{:04}-{:02}", 2019 + t / 12, t % 12 + 1)
}

/// Generate a panel. The regressor is nonnegative and the integer outcome
/// respects |sentiment_total| ≤ article_count.
pub fn panel(spec: &PanelSpec) -> Vec<PanelObservation> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let g = Normal::new(0.0, spec.group_sd).expect("valid sd");
    let t = Normal::new(0.0, spec.time_sd).expect("valid sd");
    let e = Normal::new(0.0, spec.noise_sd).expect("valid sd");
    let entity = |i: usize| {
        if spec.entities == 1 {
            "government".to_string()
        } else {
            format!("Company {i:03}")
        }
    };
    let time: Vec<f64> = (0..spec.periods).map(|_| t.sample(&mut rng)).collect();
    let mut rows = Vec::new();
    for i in 0..spec.entities {
        for s in 0..spec.sources {
            let a = g.sample(&mut rng);
            let shift = (a + 4.0).max(0.0) * 0.5;
            for (p, b) in time.iter().enumerate() {
                let x = rng.random_range(0.0..8.0) + shift;
                let latent = a + b + spec.beta * x + e.sample(&mut rng);
                if rng.random_bool(spec.drop_rate) {
                    continue;
                }
                let (sentiment_total, article_count) = match spec.outcome {
                    Outcome::Sentiment => {
                        let s = latent.round() as i64;
                        (s, s.unsigned_abs() + rng.random_range(0..3))
                    }
                    Outcome::Count => (0, (spec.count_level + latent).round().max(0.0) as u64),
                };
                rows.push(PanelObservation {
                    entity: entity(i),
                    source: format!("Source {s}"),
                    period: period_label(p),
                    weighted_ad_ratio: x,
                    sentiment_total,
                    article_count,
                    popularity: None,
                });
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_edition;
    use crate::panel::build::check_panel;

    #[test]
    fn corpus_is_valid_and_deterministic() {
        let spec = CorpusSpec {
            editions_per_source: 3,
            ..CorpusSpec::default()
        };
        let a = corpus(&spec);
        assert_eq!(a, corpus(&spec));
        assert_eq!(
            a.iter().map(|e| e.pages.len()).sum::<usize>(),
            spec.page_count()
        );
        for ed in &a {
            assert!(
                validate_edition(ed).is_empty(),
                "{:?}",
                validate_edition(ed)
            );
        }
        assert_ne!(a, corpus(&CorpusSpec { seed: 1, ..spec }));
    }

    #[test]
    fn with_pages_rounds_up() {
        let s = CorpusSpec::with_pages(0, 10_000);
        assert_eq!(s.page_count(), 10_000);
        assert!(CorpusSpec::with_pages(0, 10_001).page_count() >= 10_001);
    }

    #[test]
    fn panels_satisfy_row_invariants() {
        for outcome in [Outcome::Sentiment, Outcome::Count] {
            let rows = panel(&PanelSpec::new(4, outcome, 0.2));
            check_panel(&rows).unwrap();
            assert!(rows.len() > 8 * 5 * 24 * 9 / 10);
            assert_eq!(rows, panel(&PanelSpec::new(4, outcome, 0.2)));
        }
        let gov = panel(&PanelSpec::government(1, -0.07, 75));
        assert!(gov.iter().all(|r| r.entity == "government"));
    }

    #[test]
    fn written_corpus_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let eds = corpus(&CorpusSpec {
            editions_per_source: 2,
            pages_per_edition: 4,
            ..CorpusSpec::default()
        });
        let paths = write_corpus(dir.path(), &eds).unwrap();
        assert_eq!(paths.len(), SOURCES.len());
        let (back, violations) = crate::ingest::parse_files(&paths).unwrap();
        assert!(violations.is_empty(), "{violations:?}");
        assert_eq!(back.len(), eds.len());
    }
}
