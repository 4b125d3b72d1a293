//! Declarative end-to-end runs: ingest, classify, price, report, regress.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{SecondsFormat, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classify::{classify_corpus, write_matches, EntityRuleSet, MatchResult};
use crate::error::{Error, Result};
use crate::ingest::{corpus_stats, expand_inputs, parse_files, violations_csv, CorpusStore};
use crate::metrics::{
    cdf_csv, entity_breakdown, monthly_area_ratio, monthly_csv, odd_even_counts, placement_report,
    topic_counts, topics_csv, weekday_area_profile, weekday_csv, EntityClass, OverlapPolicy,
};
use crate::model::Edition;
use crate::panel::{
    build_panel, fit, panel_to_csv, ClusterBy, Dependent, FixedEffectSet, PanelFocus,
    PanelObservation, PanelOptions, PeriodBucket, PopularitySeries, RegressionResult,
    RegressionSpec,
};
use crate::pricing::{price_corpus, priced_csv, PageSizes, PricingOutcome, RateCard};
use crate::synth::{self, CorpusSpec};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Classify,
    Price,
    Report,
    Regress,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Ingest,
        Stage::Classify,
        Stage::Price,
        Stage::Report,
        Stage::Regress,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Classify => "classify",
            Stage::Price => "price",
            Stage::Report => "report",
            Stage::Regress => "regress",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionEntry {
    pub name: String,
    pub focus: String,
    pub dependent: String,
    pub fixed_effects: String,
    #[serde(default)]
    pub popularity: bool,
    #[serde(default = "default_cluster")]
    pub cluster: String,
}

fn default_cluster() -> String {
    "entity".into()
}

impl RegressionEntry {
    pub fn resolve(&self) -> Result<(PanelFocus, RegressionSpec)> {
        let focus = match self.focus.as_str() {
            "companies" => PanelFocus::Companies,
            "government" => PanelFocus::Government,
            f => {
                return Err(Error::Config(format!(
                    "regression `{}`: unknown focus `{f}`",
                    self.name
                )))
            }
        };
        let spec = RegressionSpec {
            dependent: self.dependent.parse::<Dependent>()?,
            popularity: self.popularity,
            fixed_effects: self.fixed_effects.parse::<FixedEffectSet>()?,
            cluster_by: self.cluster.parse::<ClusterBy>()?,
        };
        Ok((focus, spec))
    }
}

/// Both outcomes for both entity classes under the four fixed-effect sets.
pub fn default_regressions() -> Vec<RegressionEntry> {
    let mut out = Vec::new();
    for focus in ["companies", "government"] {
        for dep in ["sentiment_total", "article_count"] {
            for fe in ["none", "group", "time", "both"] {
                out.push(RegressionEntry {
                    name: format!("{focus}_{dep}_{fe}"),
                    focus: focus.into(),
                    dependent: dep.into(),
                    fixed_effects: fe.into(),
                    popularity: false,
                    cluster: default_cluster(),
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub seed: u64,
    pub pages: usize,
}

fn default_stages() -> Vec<String> {
    Stage::ALL.iter().map(|s| s.as_str().to_string()).collect()
}

fn default_bucket() -> String {
    "month".into()
}

fn yes() -> bool {
    true
}

/// One run, as read from a TOML file. Relative paths resolve against the
/// file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_stages")]
    pub stages: Vec<String>,
    #[serde(default)]
    pub inputs: Vec<String>,
    pub store: PathBuf,
    pub output: PathBuf,
    pub rules: Option<PathBuf>,
    pub rates: Option<PathBuf>,
    pub popularity: Option<PathBuf>,
    #[serde(default)]
    pub page_sizes: PageSizes,
    #[serde(default = "default_bucket")]
    pub bucket: String,
    #[serde(default)]
    pub exclude_overlaps: bool,
    #[serde(default)]
    pub zero_rows: Option<bool>,
    pub jobs: Option<usize>,
    #[serde(default = "yes")]
    pub dedup: bool,
    #[serde(default)]
    pub strict: bool,
    /// Generate a seeded synthetic corpus under `<output>/synthetic` and use
    /// it as input.
    pub synth: Option<SynthSection>,
    #[serde(default = "default_regressions")]
    pub regressions: Vec<RegressionEntry>,
}

impl RunConfig {
    pub fn new(store: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        RunConfig {
            stages: default_stages(),
            inputs: Vec::new(),
            store: store.into(),
            output: output.into(),
            rules: None,
            rates: None,
            popularity: None,
            page_sizes: PageSizes::default(),
            bucket: default_bucket(),
            exclude_overlaps: false,
            zero_rows: None,
            jobs: None,
            dedup: true,
            strict: false,
            synth: None,
            regressions: default_regressions(),
        }
    }

    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("run config: {e}")))?;
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut cfg.store);
        rebase(&mut cfg.output);
        for p in [&mut cfg.rules, &mut cfg.rates, &mut cfg.popularity]
            .into_iter()
            .flatten()
        {
            rebase(p);
        }
        for pat in &mut cfg.inputs {
            if Path::new(pat.as_str()).is_relative() {
                *pat = base.join(&*pat).to_string_lossy().into_owned();
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    /// Configured stages in execution order.
    pub fn stage_list(&self) -> Result<Vec<Stage>> {
        let mut stages = Vec::new();
        for s in &self.stages {
            let st: Stage = s.parse()?;
            if stages.contains(&st) {
                return Err(Error::Config(format!("stage `{s}` listed twice")));
            }
            stages.push(st);
        }
        if stages.is_empty() {
            return Err(Error::Config("no stages configured".into()));
        }
        stages.sort();
        Ok(stages)
    }

    pub fn validate(&self) -> Result<()> {
        self.stage_list()?;
        self.bucket.parse::<PeriodBucket>()?;
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        let mut names = std::collections::BTreeSet::new();
        for r in &self.regressions {
            r.resolve()?;
            if !names.insert(&r.name) {
                return Err(Error::Config(format!(
                    "regression name `{}` used twice",
                    r.name
                )));
            }
            if r.popularity && self.popularity.is_none() {
                return Err(Error::Config(format!(
                    "regression `{}` needs a popularity file",
                    r.name
                )));
            }
        }
        Ok(())
    }

    fn overlap(&self) -> OverlapPolicy {
        if self.exclude_overlaps {
            OverlapPolicy::ExcludeOverlaps
        } else {
            OverlapPolicy::CountInBoth
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    /// Output file name to sha256.
    pub outputs: BTreeMap<String, String>,
    /// sha256 over the sorted (name, digest) pairs.
    pub digest: String,
    pub started: String,
    pub finished: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    /// Input path to sha256.
    pub inputs: BTreeMap<String, String>,
    pub stages: Vec<StageRecord>,
    pub started: String,
    pub finished: String,
}

impl RunManifest {
    pub fn stage(&self, stage: Stage) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.stage == stage)
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_digest(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| Error::io(path, e))?))
}

/// Lazily computed stage inputs shared across stages.
struct Context<'a> {
    cfg: &'a RunConfig,
    rules: EntityRuleSet,
    card: RateCard,
    editions: Option<Vec<Edition>>,
    matches: Option<Vec<MatchResult>>,
    priced: Option<PricingOutcome>,
}

impl Context<'_> {
    fn editions(&mut self) -> Result<&[Edition]> {
        if self.editions.is_none() {
            self.editions = Some(CorpusStore::open(&self.cfg.store)?.editions()?);
        }
        Ok(self.editions.as_deref().expect("set above"))
    }

    fn matches(&mut self) -> Result<&[MatchResult]> {
        if self.matches.is_none() {
            self.editions()?;
            let m = classify_corpus(self.editions.as_deref().expect("loaded"), &self.rules);
            self.matches = Some(m);
        }
        Ok(self.matches.as_deref().expect("set above"))
    }

    fn priced(&mut self) -> Result<&PricingOutcome> {
        if self.priced.is_none() {
            self.editions()?;
            let p = price_corpus(
                self.editions.as_deref().expect("loaded"),
                &self.card,
                &self.cfg.page_sizes,
            )?;
            for (s, c) in &p.fallback_pairs {
                log::warn!("{s}/{c}: no rate card row, priced with the source mean");
            }
            self.priced = Some(p);
        }
        Ok(self.priced.as_ref().expect("set above"))
    }
}

/// Writes stage outputs, each through a temporary file and a rename.
struct Outputs<'a> {
    dir: &'a Path,
    written: BTreeMap<String, String>,
}

impl Outputs<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        self.written.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }
}

fn run_ingest(ctx: &mut Context, files: &[PathBuf], out: &mut Outputs) -> Result<()> {
    let (editions, mut violations) = parse_files(files)?;
    let mut store = CorpusStore::open(&ctx.cfg.store)?;
    let report = store.ingest(editions, ctx.cfg.dedup)?;
    violations.extend(report.violations);
    log::info!(
        "ingest: {} editions added, {} already stored, {} violations",
        report.added_editions,
        report.skipped_editions,
        violations.len()
    );
    if ctx.cfg.strict && !violations.is_empty() {
        return Err(Error::Input(format!(
            "strict mode: {} violations, first: {}",
            violations.len(),
            violations[0]
        )));
    }
    out.write("stats.csv", corpus_stats(&store).to_csv().as_bytes())?;
    out.write("violations.csv", violations_csv(&violations).as_bytes())?;
    ctx.editions = None;
    Ok(())
}

fn run_classify(ctx: &mut Context, out: &mut Outputs) -> Result<()> {
    let mut buf = Vec::new();
    write_matches(&mut buf, ctx.matches()?)?;
    out.write("matches.jsonl", &buf)
}

fn run_price(ctx: &mut Context, out: &mut Outputs) -> Result<()> {
    let p = ctx.priced()?;
    log::info!("price: {} ads, {} unpriceable", p.ads.len(), p.unpriceable);
    let text = priced_csv(&p.ads);
    out.write("priced.csv", text.as_bytes())
}

fn run_report(ctx: &mut Context, out: &mut Outputs) -> Result<()> {
    let policy = ctx.cfg.overlap();
    ctx.matches()?;
    ctx.priced()?;
    let editions = ctx.editions.as_deref().expect("loaded");
    let matches = ctx.matches.as_deref().expect("loaded");
    let ads = &ctx.priced.as_ref().expect("loaded").ads;

    out.write(
        "placement.csv",
        placement_report(ads, matches, policy).to_csv().as_bytes(),
    )?;
    out.write("cdf.csv", cdf_csv(ads, matches, policy).as_bytes())?;
    let mut parity = String::from("entity_class,odd,even\n");
    for class in EntityClass::ALL {
        let (odd, even) = odd_even_counts(ads, matches, class, policy);
        parity.push_str(&format!("{},{odd},{even}\n", class.as_str()));
    }
    out.write("parity.csv", parity.as_bytes())?;
    out.write(
        "timeseries.csv",
        monthly_csv(&monthly_area_ratio(editions, true)).as_bytes(),
    )?;
    out.write(
        "weekday.csv",
        weekday_csv(&weekday_area_profile(editions)).as_bytes(),
    )?;
    out.write(
        "breakdown.csv",
        entity_breakdown(ads, matches, &ctx.rules)
            .to_csv()
            .as_bytes(),
    )?;
    out.write("topics.csv", topics_csv(&topic_counts(editions)).as_bytes())
}

#[derive(Serialize)]
struct NamedResult<'a> {
    name: &'a str,
    focus: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<&'a RegressionResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn run_regress(ctx: &mut Context, out: &mut Outputs) -> Result<()> {
    let cfg = ctx.cfg;
    let popularity = cfg
        .popularity
        .as_deref()
        .map(PopularitySeries::load)
        .transpose()?;
    let options = PanelOptions {
        bucket: cfg.bucket.parse()?,
        fill_zero_rows: cfg
            .zero_rows
            .unwrap_or(PanelOptions::default().fill_zero_rows),
    };
    let resolved: Vec<(PanelFocus, RegressionSpec)> = cfg
        .regressions
        .iter()
        .map(RegressionEntry::resolve)
        .collect::<Result<_>>()?;
    ctx.matches()?;
    ctx.priced()?;
    let editions = ctx.editions.as_deref().expect("loaded");
    let matches = ctx.matches.as_deref().expect("loaded");
    let ads = &ctx.priced.as_ref().expect("loaded").ads;

    let mut panels: BTreeMap<String, Vec<PanelObservation>> = BTreeMap::new();
    for focus in [PanelFocus::Companies, PanelFocus::Government] {
        if !resolved.iter().any(|(f, _)| *f == focus) {
            continue;
        }
        let built = build_panel(editions, matches, ads, focus, options, popularity.as_ref());
        if built.ignored_popularity > 0 {
            log::warn!(
                "{focus}: {} popularity rows match no panel row",
                built.ignored_popularity
            );
        }
        out.write(
            &format!("panel_{focus}.csv"),
            panel_to_csv(&built.rows).as_bytes(),
        )?;
        panels.insert(focus.to_string(), built.rows);
    }

    let fitted: Vec<Result<RegressionResult>> = resolved
        .par_iter()
        .map(|(focus, spec)| fit(spec, &panels[&focus.to_string()]))
        .collect();
    // A spec the data cannot support is reported in place; the others stand.
    let named: Vec<NamedResult> = cfg
        .regressions
        .iter()
        .zip(&fitted)
        .map(|(e, r)| match r {
            Ok(result) => NamedResult {
                name: &e.name,
                focus: &e.focus,
                result: Some(result),
                error: None,
            },
            Err(err) => {
                log::warn!("regression `{}`: {err}", e.name);
                NamedResult {
                    name: &e.name,
                    focus: &e.focus,
                    result: None,
                    error: Some(err.to_string()),
                }
            }
        })
        .collect();
    let mut json = serde_json::to_vec_pretty(&named).map_err(|e| Error::Domain(e.to_string()))?;
    json.push(b'\n');
    out.write("regressions.json", &json)
}

fn load_rules(cfg: &RunConfig) -> Result<EntityRuleSet> {
    cfg.rules
        .as_deref()
        .map_or_else(|| Ok(EntityRuleSet::default_rules()), EntityRuleSet::load)
}

fn load_card(cfg: &RunConfig) -> Result<RateCard> {
    cfg.rates
        .as_deref()
        .map_or_else(|| Ok(RateCard::default_card()), RateCard::load)
}

/// Run the configured stages in order and write `manifest.json` into the
/// output directory. A failing stage stops the run; outputs of earlier
/// stages stay in place.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_stages(cfg))
}

/// Size rayon's global pool; call once, before any parallel work.
pub fn set_global_jobs(jobs: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn run_stages(cfg: &RunConfig) -> Result<RunManifest> {
    let started = now();
    let stages = cfg.stage_list()?;
    let rules = load_rules(cfg)?;
    let card = load_card(cfg)?;
    for w in card.warnings() {
        log::warn!("rate card: {w}");
    }
    fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e))?;

    let mut patterns = cfg.inputs.clone();
    if let Some(s) = cfg.synth {
        let dir = cfg.output.join("synthetic");
        synth::write_corpus(
            &dir,
            &synth::corpus(&CorpusSpec::with_pages(s.seed, s.pages)),
        )?;
        patterns.push(dir.join("*.jsonl").to_string_lossy().into_owned());
    }
    let files = if stages.contains(&Stage::Ingest) {
        if patterns.is_empty() {
            return Err(Error::Config(
                "ingest needs `inputs` or a `synth` section".into(),
            ));
        }
        expand_inputs(&patterns)?
    } else {
        Vec::new()
    };
    let mut inputs = BTreeMap::new();
    for f in &files {
        inputs.insert(f.display().to_string(), file_digest(f)?);
    }

    let config_json = serde_json::to_vec(cfg).map_err(|e| Error::Config(e.to_string()))?;
    let mut manifest = RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        config_hash: sha256_hex(&config_json),
        inputs,
        stages: Vec::new(),
        started,
        finished: String::new(),
    };
    let mut ctx = Context {
        cfg,
        rules,
        card,
        editions: None,
        matches: None,
        priced: None,
    };
    for stage in stages {
        let stage_started = now();
        let mut out = Outputs {
            dir: &cfg.output,
            written: BTreeMap::new(),
        };
        let r = match stage {
            Stage::Ingest => run_ingest(&mut ctx, &files, &mut out),
            Stage::Classify => run_classify(&mut ctx, &mut out),
            Stage::Price => run_price(&mut ctx, &mut out),
            Stage::Report => run_report(&mut ctx, &mut out),
            Stage::Regress => run_regress(&mut ctx, &mut out),
        };
        r.map_err(|e| Error::Stage {
            stage: stage.to_string(),
            source: Box::new(e),
        })?;
        let listing: String = out
            .written
            .iter()
            .map(|(k, v)| format!("{k}\t{v}\n"))
            .collect();
        log::info!("{stage}: {} outputs", out.written.len());
        manifest.stages.push(StageRecord {
            stage,
            digest: sha256_hex(listing.as_bytes()),
            outputs: out.written,
            started: stage_started,
            finished: now(),
        });
    }
    manifest.finished = now();
    let path = cfg.output.join(MANIFEST_FILE);
    let mut text =
        serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Domain(e.to_string()))?;
    text.push(b'\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
