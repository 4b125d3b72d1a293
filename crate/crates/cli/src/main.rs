use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use adpress::classify::{classify_corpus, read_matches, write_matches, EntityRuleSet};
use adpress::ingest::{expand_inputs, parse_files, violations_csv, CorpusStore};
use adpress::metrics::{
    cdf_csv, entity_breakdown, monthly_area_ratio, monthly_csv, odd_even_counts, placement_report,
    topic_counts, topics_csv, weekday_area_profile, weekday_csv, EntityClass, OverlapPolicy,
};
use adpress::panel::{
    build_panel, fit, panel_to_csv, read_panel, ClusterBy, Dependent, FixedEffectSet, PanelFocus,
    PanelOptions, PeriodBucket, PopularitySeries, RegressionSpec,
};
use adpress::pipeline::{run_pipeline, RunConfig};
use adpress::pricing::{price_corpus, priced_csv, PageSizes, RateCard};
use adpress::synth::{self, CorpusSpec, Outcome, PanelSpec};
use adpress::{Error, Result};

#[derive(Parser)]
#[command(
    name = "adpress",
    version,
    about = "Print-newspaper advertising analytics"
)]
struct Cli {
    /// Seed for synthetic generators.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate page records and add them to a corpus store.
    Ingest {
        /// Input files or glob patterns (JSON Lines, one page per line).
        #[arg(long = "input", required = true)]
        inputs: Vec<String>,
        #[arg(long)]
        store: PathBuf,
        /// Skip editions already stored without reporting them.
        #[arg(long)]
        dedup: bool,
        /// Fail on any violation instead of skipping bad records.
        #[arg(long)]
        strict: bool,
        /// Write all violations here as CSV.
        #[arg(long)]
        violations: Option<PathBuf>,
    },
    /// Match ads and articles against entity keyword rules.
    Classify {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Price every ad against a rate card.
    Price {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        rates: Option<PathBuf>,
        #[command(flatten)]
        sizes: SizeArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Descriptive tables as CSV.
    Report {
        kind: ReportKind,
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        matches: Option<PathBuf>,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        rates: Option<PathBuf>,
        #[command(flatten)]
        sizes: SizeArgs,
        /// Drop ads matching both government and a company.
        #[arg(long)]
        exclude_overlaps: bool,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build an entity × source × period panel CSV.
    Panel {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        matches: Option<PathBuf>,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        rates: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "companies")]
        focus: Focus,
        #[arg(long, default_value = "month")]
        bucket: String,
        #[arg(long)]
        popularity: Option<PathBuf>,
        /// Keep only periods with activity.
        #[arg(long)]
        no_zero_rows: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a fixed-effects regression on a panel CSV.
    Regress {
        #[arg(long)]
        panel: PathBuf,
        /// sentiment, sentiment_mean or count.
        #[arg(long, default_value = "sentiment")]
        dep: String,
        /// none, group, time or both.
        #[arg(long, default_value = "both")]
        fe: String,
        /// Popularity CSV (entity,period,popularity) joined onto the panel
        /// and added as a regressor.
        #[arg(long)]
        popularity: Option<PathBuf>,
        /// Use the panel's own popularity column as a regressor.
        #[arg(long, conflicts_with = "popularity")]
        with_popularity: bool,
        /// entity (source × entity) or label.
        #[arg(long, default_value = "entity")]
        cluster: String,
        /// Result JSON; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate seeded synthetic data.
    Synth {
        #[command(subcommand)]
        what: SynthCommand,
    },
    /// Run the configured pipeline and write a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Page records, one JSON Lines file per source.
    Corpus {
        #[arg(long, default_value_t = 10_000)]
        pages: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// A panel CSV with a planted coefficient on weighted_ad_ratio.
    Panel {
        #[arg(long, value_enum, default_value = "sentiment")]
        outcome: OutcomeArg,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 8)]
        entities: usize,
        #[arg(long, default_value_t = 5)]
        sources: usize,
        #[arg(long, default_value_t = 24)]
        periods: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SizeArgs {
    /// Physical page size in cm for pages without one, as WIDTHxHEIGHT.
    #[arg(long, value_parser = parse_size, conflicts_with = "recorded_sizes_only")]
    page_size: Option<(f64, f64)>,
    /// Price only pages that record their physical size.
    #[arg(long)]
    recorded_sizes_only: bool,
}

impl SizeArgs {
    fn sizes(&self) -> PageSizes {
        if self.recorded_sizes_only {
            PageSizes::recorded_only()
        } else {
            let mut s = PageSizes::default();
            if let Some(wh) = self.page_size {
                s.fallback = Some(wh);
            }
            s
        }
    }
}

fn parse_size(s: &str) -> std::result::Result<(f64, f64), String> {
    let (w, h) = s.split_once('x').ok_or("expected WIDTHxHEIGHT")?;
    let w: f64 = w.trim().parse().map_err(|e| format!("{e}"))?;
    let h: f64 = h.trim().parse().map_err(|e| format!("{e}"))?;
    if !(w > 0.0 && h > 0.0) {
        return Err("sizes must be positive".into());
    }
    Ok((w, h))
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportKind {
    Placement,
    Cdf,
    Parity,
    Timeseries,
    Weekday,
    Breakdown,
    Topics,
}

#[derive(Clone, Copy, ValueEnum)]
enum Focus {
    Companies,
    Government,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutcomeArg {
    Sentiment,
    Count,
}

fn write_out(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            fs::write(p, bytes).map_err(|e| Error::io(p, e))
        }
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn load_rules(path: Option<&Path>) -> Result<EntityRuleSet> {
    path.map_or_else(|| Ok(EntityRuleSet::default_rules()), EntityRuleSet::load)
}

fn load_card(path: Option<&Path>) -> Result<RateCard> {
    let card = path.map_or_else(|| Ok(RateCard::default_card()), RateCard::load)?;
    for w in card.warnings() {
        log::warn!("rate card: {w}");
    }
    Ok(card)
}

fn open_store(path: &Path) -> Result<CorpusStore> {
    if !path.join("index.json").exists() {
        return Err(Error::Input(format!(
            "{} is not a corpus store",
            path.display()
        )));
    }
    CorpusStore::open(path)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest {
            inputs,
            store,
            dedup,
            strict,
            violations,
        } => {
            let files = expand_inputs(&inputs)?;
            let (editions, mut found) = parse_files(&files)?;
            if strict && !found.is_empty() {
                if let Some(p) = &violations {
                    write_out(Some(p), violations_csv(&found).as_bytes())?;
                }
                return Err(Error::Input(format!(
                    "strict mode: {} violations, first: {}",
                    found.len(),
                    found[0]
                )));
            }
            let mut st = CorpusStore::open(&store)?;
            let report = st.ingest(editions, dedup)?;
            found.extend(report.violations);
            if strict && !found.is_empty() {
                return Err(Error::Input(format!(
                    "strict mode: {} violations, first: {}",
                    found.len(),
                    found[0]
                )));
            }
            for v in &found {
                log::warn!("{v}");
            }
            if let Some(p) = &violations {
                write_out(Some(p), violations_csv(&found).as_bytes())?;
            }
            eprintln!(
                "{} editions added, {} already stored, {} violations",
                report.added_editions,
                report.skipped_editions,
                found.len()
            );
            write_out(None, adpress::ingest::corpus_stats(&st).to_csv().as_bytes())
        }
        Command::Classify { store, rules, out } => {
            let editions = open_store(&store)?.editions()?;
            let matches = classify_corpus(&editions, &load_rules(rules.as_deref())?);
            let mut buf = Vec::new();
            write_matches(&mut buf, &matches)?;
            write_out(Some(&out), &buf)
        }
        Command::Price {
            store,
            rates,
            sizes,
            out,
        } => {
            let editions = open_store(&store)?.editions()?;
            let outcome = price_corpus(&editions, &load_card(rates.as_deref())?, &sizes.sizes())?;
            for (s, c) in &outcome.fallback_pairs {
                log::warn!("{s}/{c}: no rate card row, priced with the source mean");
            }
            if outcome.unpriceable > 0 {
                log::warn!(
                    "{} ads have no physical page size and carry no cost",
                    outcome.unpriceable
                );
            }
            write_out(Some(&out), priced_csv(&outcome.ads).as_bytes())
        }
        Command::Report {
            kind,
            store,
            matches,
            rules,
            rates,
            sizes,
            exclude_overlaps,
            out,
        } => {
            let editions = open_store(&store)?.editions()?;
            let rules = load_rules(rules.as_deref())?;
            let text = match kind {
                ReportKind::Timeseries => monthly_csv(&monthly_area_ratio(&editions, true)),
                ReportKind::Weekday => weekday_csv(&weekday_area_profile(&editions)),
                ReportKind::Topics => topics_csv(&topic_counts(&editions)),
                _ => {
                    let matches = match matches {
                        Some(p) => read_matches(&p)?,
                        None => classify_corpus(&editions, &rules),
                    };
                    let ads =
                        price_corpus(&editions, &load_card(rates.as_deref())?, &sizes.sizes())?.ads;
                    let policy = if exclude_overlaps {
                        OverlapPolicy::ExcludeOverlaps
                    } else {
                        OverlapPolicy::CountInBoth
                    };
                    match kind {
                        ReportKind::Placement => placement_report(&ads, &matches, policy).to_csv(),
                        ReportKind::Cdf => cdf_csv(&ads, &matches, policy),
                        ReportKind::Parity => {
                            let mut s = String::from("entity_class,odd,even\n");
                            for class in EntityClass::ALL {
                                let (o, e) = odd_even_counts(&ads, &matches, class, policy);
                                s.push_str(&format!("{},{o},{e}\n", class.as_str()));
                            }
                            s
                        }
                        _ => entity_breakdown(&ads, &matches, &rules).to_csv(),
                    }
                }
            };
            write_out(out.as_deref(), text.as_bytes())
        }
        Command::Panel {
            store,
            matches,
            rules,
            rates,
            focus,
            bucket,
            popularity,
            no_zero_rows,
            out,
        } => {
            let editions = open_store(&store)?.editions()?;
            let matches = match matches {
                Some(p) => read_matches(&p)?,
                None => classify_corpus(&editions, &load_rules(rules.as_deref())?),
            };
            let ads = price_corpus(
                &editions,
                &load_card(rates.as_deref())?,
                &PageSizes::default(),
            )?
            .ads;
            let popularity = popularity
                .as_deref()
                .map(PopularitySeries::load)
                .transpose()?;
            let options = PanelOptions {
                bucket: bucket.parse::<PeriodBucket>()?,
                fill_zero_rows: !no_zero_rows,
            };
            let focus = match focus {
                Focus::Companies => PanelFocus::Companies,
                Focus::Government => PanelFocus::Government,
            };
            let built = build_panel(
                &editions,
                &matches,
                &ads,
                focus,
                options,
                popularity.as_ref(),
            );
            write_out(Some(&out), panel_to_csv(&built.rows).as_bytes())
        }
        Command::Regress {
            panel,
            dep,
            fe,
            popularity,
            with_popularity,
            cluster,
            out,
        } => {
            let mut rows = read_panel(&panel)?;
            if let Some(p) = &popularity {
                let ignored = PopularitySeries::load(p)?.join(&mut rows);
                if ignored > 0 {
                    log::warn!("{ignored} popularity rows ignored");
                }
            }
            let spec = RegressionSpec {
                dependent: dep.parse::<Dependent>()?,
                popularity: popularity.is_some() || with_popularity,
                fixed_effects: fe.parse::<FixedEffectSet>()?,
                cluster_by: cluster.parse::<ClusterBy>()?,
            };
            let result = fit(&spec, &rows)?;
            let mut json =
                serde_json::to_vec_pretty(&result).map_err(|e| Error::Domain(e.to_string()))?;
            json.push(b'\n');
            write_out(out.as_deref(), &json)
        }
        Command::Synth { what } => {
            let seed = cli.seed.unwrap_or(0);
            match what {
                SynthCommand::Corpus { pages, out } => {
                    let paths = synth::write_corpus(
                        &out,
                        &synth::corpus(&CorpusSpec::with_pages(seed, pages)),
                    )?;
                    for p in paths {
                        println!("{}", p.display());
                    }
                    Ok(())
                }
                SynthCommand::Panel {
                    outcome,
                    beta,
                    entities,
                    sources,
                    periods,
                    out,
                } => {
                    let outcome = match outcome {
                        OutcomeArg::Sentiment => Outcome::Sentiment,
                        OutcomeArg::Count => Outcome::Count,
                    };
                    let spec = PanelSpec {
                        entities,
                        sources,
                        periods,
                        ..PanelSpec::new(seed, outcome, beta)
                    };
                    write_out(Some(&out), panel_to_csv(&synth::panel(&spec)).as_bytes())
                }
            }
        }
        Command::Run {
            config,
            store,
            output,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = store {
                cfg.store = s;
            }
            if let Some(o) = output {
                cfg.output = o;
            }
            if cli.jobs.is_some() {
                cfg.jobs = cli.jobs;
            }
            if let Some(seed) = cli.seed {
                match &mut cfg.synth {
                    Some(s) => s.seed = seed,
                    None => log::warn!("--seed ignored: the config has no synth section"),
                }
            }
            let manifest = run_pipeline(&cfg)?;
            let mut json =
                serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Domain(e.to_string()))?;
            json.push(b'\n');
            write_out(None, &json)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon_pool(j) {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn rayon_pool(jobs: usize) -> Result<()> {
    if jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    adpress::pipeline::set_global_jobs(jobs)
}
