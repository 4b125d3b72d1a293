//! Keyword rules that map segment text to entities.
//!
//! Ads are tested against the government-ad keywords and every company's
//! keywords. Articles are tested against the company keywords and the
//! corruption rule, which needs one corruption keyword together with one
//! government term. All matching is substring matching on normalized text,
//! so stems such as `investig` or `demonet` work as written.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Edition, SegmentId, SegmentKind};

/// Entity label shared by government ads and government-corruption articles.
pub const GOVERNMENT: &str = "government";

/// Rule file shipped with the crate.
pub const DEFAULT_RULES_TOML: &str = include_str!("../data/rules.toml");

/// Unicode lowercase with every whitespace run collapsed to one space.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompanyRule {
    pub name: String,
    #[serde(default)]
    pub sector: Option<String>,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
struct GovernmentSection {
    ad_keywords: Vec<String>,
    corruption_keywords: Vec<String>,
    government_terms: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
struct RuleFile {
    government: GovernmentSection,
    #[serde(default)]
    companies: Vec<CompanyRule>,
}

/// Validated keyword tables. Every keyword is stored normalized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityRuleSet {
    pub government_ad_keywords: Vec<String>,
    pub corruption_keywords: Vec<String>,
    pub government_terms: Vec<String>,
    pub companies: Vec<CompanyRule>,
}

fn checked_list(name: &str, raw: &[String]) -> Result<Vec<String>> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(raw.len());
    for kw in raw {
        let n = normalize(kw);
        if n.is_empty() {
            return Err(Error::Config(format!("{name}: empty keyword")));
        }
        if !seen.insert(n.clone()) {
            return Err(Error::Config(format!("{name}: keyword `{n}` listed twice")));
        }
        out.push(n);
    }
    Ok(out)
}

impl EntityRuleSet {
    pub fn new(
        government_ad_keywords: &[String],
        corruption_keywords: &[String],
        government_terms: &[String],
        companies: &[CompanyRule],
    ) -> Result<Self> {
        let mut names = HashSet::new();
        let mut checked = Vec::with_capacity(companies.len());
        for c in companies {
            if c.name.trim().is_empty() {
                return Err(Error::Config("company with empty name".into()));
            }
            if !names.insert(c.name.clone()) {
                return Err(Error::Config(format!("company `{}` listed twice", c.name)));
            }
            if c.keywords.is_empty() {
                return Err(Error::Config(format!(
                    "company `{}` has no keywords",
                    c.name
                )));
            }
            checked.push(CompanyRule {
                name: c.name.clone(),
                sector: c.sector.clone(),
                keywords: checked_list(&c.name, &c.keywords)?,
            });
        }
        Ok(EntityRuleSet {
            government_ad_keywords: checked_list("ad_keywords", government_ad_keywords)?,
            corruption_keywords: checked_list("corruption_keywords", corruption_keywords)?,
            government_terms: checked_list("government_terms", government_terms)?,
            companies: checked,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: RuleFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("rule file: {e}")))?;
        Self::new(
            &file.government.ad_keywords,
            &file.government.corruption_keywords,
            &file.government.government_terms,
            &file.companies,
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// The shipped government and company keyword tables.
    pub fn default_rules() -> Self {
        Self::from_toml(DEFAULT_RULES_TOML).expect("shipped rule file is valid")
    }

    pub fn sector_of(&self, company: &str) -> Option<&str> {
        self.companies
            .iter()
            .find(|c| c.name == company)
            .and_then(|c| c.sector.as_deref())
    }
}

/// Keywords from `list` occurring in `text`, sorted.
fn hits<'a>(text: &str, list: &'a [String]) -> Vec<&'a str> {
    let mut out: Vec<&str> = list
        .iter()
        .filter(|k| text.contains(k.as_str()))
        .map(String::as_str)
        .collect();
    out.sort_unstable();
    out
}

/// True iff a government-ad keyword occurs in the normalized `text`.
pub fn is_government_ad(text: &str, rules: &EntityRuleSet) -> bool {
    rules
        .government_ad_keywords
        .iter()
        .any(|k| text.contains(k.as_str()))
}

/// True iff the normalized `text` contains a corruption keyword and a
/// government term.
pub fn is_corruption_article(text: &str, rules: &EntityRuleSet) -> bool {
    rules
        .corruption_keywords
        .iter()
        .any(|k| text.contains(k.as_str()))
        && rules
            .government_terms
            .iter()
            .any(|k| text.contains(k.as_str()))
}

/// Every company with at least one keyword in the normalized `text`.
pub fn match_companies(text: &str, rules: &EntityRuleSet) -> BTreeSet<String> {
    rules
        .companies
        .iter()
        .filter(|c| c.keywords.iter().any(|k| text.contains(k.as_str())))
        .map(|c| c.name.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub segment: SegmentId,
    pub kind: SegmentKind,
    pub entities: BTreeSet<String>,
    pub keywords: BTreeMap<String, Vec<String>>,
}

impl MatchResult {
    pub fn is_government(&self) -> bool {
        self.entities.contains(GOVERNMENT)
    }

    /// Company labels, i.e. every entity except [`GOVERNMENT`].
    pub fn companies(&self) -> impl Iterator<Item = &str> {
        self.entities
            .iter()
            .map(String::as_str)
            .filter(|e| *e != GOVERNMENT)
    }

    pub fn has_company(&self) -> bool {
        self.companies().next().is_some()
    }
}

/// Classify one segment's raw text.
pub fn classify_text(
    segment: SegmentId,
    kind: SegmentKind,
    text: &str,
    rules: &EntityRuleSet,
) -> MatchResult {
    let text = normalize(text);
    let mut keywords: BTreeMap<String, Vec<String>> = BTreeMap::new();

    match kind {
        SegmentKind::Ad => {
            let gov = hits(&text, &rules.government_ad_keywords);
            if !gov.is_empty() {
                keywords.insert(
                    GOVERNMENT.into(),
                    gov.into_iter().map(String::from).collect(),
                );
            }
        }
        SegmentKind::Article => {
            let corrupt = hits(&text, &rules.corruption_keywords);
            let terms = hits(&text, &rules.government_terms);
            if !corrupt.is_empty() && !terms.is_empty() {
                let mut fired: Vec<String> =
                    corrupt.into_iter().chain(terms).map(String::from).collect();
                fired.sort_unstable();
                fired.dedup();
                keywords.insert(GOVERNMENT.into(), fired);
            }
        }
    }
    for c in &rules.companies {
        let fired = hits(&text, &c.keywords);
        if !fired.is_empty() {
            keywords.insert(
                c.name.clone(),
                fired.into_iter().map(String::from).collect(),
            );
        }
    }

    MatchResult {
        segment,
        kind,
        entities: keywords.keys().cloned().collect(),
        keywords,
    }
}

/// One result per segment, in corpus order.
pub fn classify_corpus(editions: &[Edition], rules: &EntityRuleSet) -> Vec<MatchResult> {
    editions
        .par_iter()
        .flat_map_iter(|e| e.pages.iter())
        .flat_map_iter(|page| {
            page.segments
                .iter()
                .enumerate()
                .map(move |(i, s)| classify_text(page.segment_id(i), s.kind, &s.text, rules))
        })
        .collect()
}

/// Write results as JSON lines.
pub fn write_matches<W: std::io::Write>(mut w: W, matches: &[MatchResult]) -> Result<()> {
    for m in matches {
        let line = serde_json::to_string(m).expect("match results serialize");
        writeln!(w, "{line}").map_err(|e| Error::io("<matches>", e))?;
    }
    Ok(())
}

pub fn read_matches(path: &Path) -> Result<Vec<MatchResult>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| Error::Input(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EditionKey;
    use chrono::NaiveDate;

    fn rules() -> EntityRuleSet {
        EntityRuleSet::default_rules()
    }

    fn sid(i: usize) -> SegmentId {
        SegmentId {
            edition: EditionKey {
                source: "S".into(),
                city: "C".into(),
                date: NaiveDate::from_ymd_opt(2022, 1, 1).unwrap(),
            },
            page: 1,
            index: i,
        }
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize("E-Tender  NOTICE"), "e-tender notice");
        assert_eq!(normalize(""), "");
        assert_eq!(normalize("Govt.\nof India"), "govt. of india");
        assert_eq!(normalize("  Lakmé\t"), "lakmé");
    }

    #[test]
    fn government_ad_examples() {
        let r = rules();
        assert!(is_government_ad(
            "notice inviting e-tender for road works",
            &r
        ));
        assert!(!is_government_ad("mega sale this weekend", &r));
        assert!(is_government_ad("corrigendum to tender no. 42", &r));
    }

    #[test]
    fn corruption_examples() {
        let r = rules();
        assert!(is_corruption_article(
            "state minister arrested in land scam",
            &r
        ));
        assert!(!is_corruption_article("email scam targets pensioners", &r));
        assert!(is_corruption_article(
            "central agency opens probe into bribe allegations",
            &r
        ));
    }

    #[test]
    fn company_examples() {
        let r = rules();
        let one = |name: &str| BTreeSet::from([name.to_string()]);
        assert_eq!(
            match_companies("new jiomart store opens in pune", &r),
            one("Reliance")
        );
        assert_eq!(
            match_companies("jaguar land rover unveils suv", &r),
            one("Tata")
        );
        assert!(match_companies("", &r).is_empty());
    }

    #[test]
    fn shipped_tables_are_complete() {
        let r = rules();
        assert_eq!(r.government_ad_keywords.len(), 12);
        assert_eq!(r.corruption_keywords.len(), 33);
        assert_eq!(r.companies.len(), 43);
        assert!(r
            .companies
            .iter()
            .any(|c| c.keywords.contains(&"lakmé".to_string())));
        assert_eq!(r.sector_of("FIITJEE"), Some("Education"));
    }

    #[test]
    fn invalid_rule_sets_are_rejected() {
        let kw = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert!(EntityRuleSet::new(&kw(&["a", "A"]), &[], &[], &[]).is_err());
        assert!(EntityRuleSet::new(&kw(&["  "]), &[], &[], &[]).is_err());
        let empty = CompanyRule {
            name: "X".into(),
            sector: None,
            keywords: vec![],
        };
        assert!(EntityRuleSet::new(&[], &[], &[], &[empty]).is_err());
    }

    #[test]
    fn classify_reports_fired_keywords() {
        let r = rules();
        let m = classify_text(
            sid(0),
            SegmentKind::Article,
            "State minister held in SCAM",
            &r,
        );
        assert!(m.is_government());
        let fired = &m.keywords[GOVERNMENT];
        assert!(fired.contains(&"scam".to_string()));
        assert!(fired.contains(&"state".to_string()));

        // Corruption terms in ads do not make the ad governmental.
        let ad = classify_text(sid(1), SegmentKind::Ad, "bribe", &r);
        assert!(ad.entities.is_empty());
        // Ad keywords do not apply to articles.
        let art = classify_text(sid(2), SegmentKind::Article, "tender notice", &r);
        assert!(art.entities.is_empty());
    }

    #[test]
    fn matches_roundtrip_through_jsonl() {
        let r = rules();
        let m = vec![
            classify_text(sid(0), SegmentKind::Ad, "E-tender for Samsung phones", &r),
            classify_text(sid(1), SegmentKind::Article, "", &r),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        write_matches(fs::File::create(&path).unwrap(), &m).unwrap();
        assert_eq!(read_matches(&path).unwrap(), m);
    }
}
