//! The `agentreuse` command line.
//!
//! Exit codes: 0 success, 1 other failure, 2 config error, 3 corpus error,
//! 4 backend error. Output files are written under a `.partial` name and
//! renamed once complete.

use std::fs;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use super::config::Config;
use super::corpus::{load_corpus, write_corpus, TemplateSet};
use super::server::{serve, Gateway};
use crate::error::{Error, Result};
use crate::metrics::{
    measure_reuse_equivalence, mean_latency, nesting_violations, reuse_pairs, write_log_csv, write_summary_csv,
    EvalReport, Evaluator, GainReport,
};
use crate::plancache::{PlanCache, ReusePipeline, Strategy, StrategyKind};
use crate::planner::PerturbedPlanner;
use crate::request::Request;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CORPUS: i32 = 3;
pub const EXIT_BACKEND: i32 = 4;

pub const SWEEP: [f64; 5] = [0.75, 0.80, 0.85, 0.90, 0.95];

#[derive(Debug, Parser)]
#[command(name = "agentreuse", version, about = "Plan reuse for LLM-driven agents")]
pub struct Cli {
    /// TOML config; in-process defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replay a labelled corpus and score hit decisions.
    Evaluate(EvaluateArgs),
    /// Per-phase decide latency over repeated replays.
    BenchLatency(BenchArgs),
    /// Effective reuse rate: reused vs freshly generated plan responses.
    ReuseCheck(ReuseArgs),
    /// End-to-end latency of a stream under the analytical gain model.
    Gain(GainArgs),
    /// Generate a synthetic labelled corpus.
    GenCorpus(GenArgs),
    /// Save or load cache snapshots.
    #[command(subcommand)]
    Snapshot(SnapshotCommand),
    /// Run the HTTP gateway.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Strategy name, or "all".
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Comma-separated thresholds, e.g. 0.75,0.80,0.85,0.90,0.95.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub sweep: Option<Vec<f64>>,
    /// Replay once per threshold instead of judging one replay at every
    /// threshold.
    #[arg(long, requires = "sweep")]
    pub independent: bool,
    /// Use gold intents and slots from the corpus instead of the classifier.
    #[arg(long)]
    pub gold_slots: bool,
    /// Directory for summary.csv and per-request logs.
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long, default_value_t = 50)]
    pub repeats: usize,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReuseArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long, default_value_t = 20)]
    pub pairs: usize,
    /// Probability that a fresh plan is reworded.
    #[arg(long, default_value_t = 0.0)]
    pub perturb: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Per-trial CSV log.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GainArgs {
    #[arg(long)]
    pub n: u64,
    #[arg(long = "non-tp")]
    pub non_tp: u64,
    /// Seconds per plan generation.
    #[arg(long = "t-plan", default_value_t = 31.8)]
    pub t_plan: f64,
    /// Seconds of mechanism overhead per request.
    #[arg(long = "t-mech")]
    pub t_mech: f64,
    /// Compare against another configuration's non-TP count.
    #[arg(long = "vs-non-tp", requires = "vs_t_mech")]
    pub vs_non_tp: Option<u64>,
    #[arg(long = "vs-t-mech", requires = "vs_non_tp")]
    pub vs_t_mech: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub templates: PathBuf,
    #[arg(long, default_value_t = 600)]
    pub size: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// JSONL output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SnapshotCommand {
    /// Replay a corpus into a fresh cache and save it.
    Save {
        path: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Load a snapshot, report it, optionally replay a corpus against it.
    Load {
        path: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Per-request decision CSV for the replay.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    /// Loaded at start if present, saved on shutdown and on POST /v1/snapshot.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    /// Corpus used to fit the MEANCACHE projection.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Corpus(_) | Error::EvaluationInput(_) => EXIT_CORPUS,
        e if e.is_backend() => EXIT_BACKEND,
        _ => EXIT_FAILURE,
    }
}

/// Parses `std::env::args`, runs, and returns the exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(cli, &mut std::io::stdout()) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn init_logging(verbose: u8) {
    use tracing_subscriber::filter::LevelFilter;
    // -v wins; otherwise a plain level in RUST_LOG ("info", "debug", ...)
    let level = match verbose {
        0 => std::env::var("RUST_LOG")
            .ok()
            .and_then(|v| v.parse::<LevelFilter>().ok())
            .unwrap_or(LevelFilter::WARN),
        1 => LevelFilter::INFO,
        _ => LevelFilter::DEBUG,
    };
    let _ = tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .try_init();
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Evaluate(a) => evaluate(&config, a, out),
        Command::BenchLatency(a) => bench(&config, a, out),
        Command::ReuseCheck(a) => reuse_check(&config, a, out),
        Command::Gain(a) => gain(a, out),
        Command::GenCorpus(a) => gen_corpus(a, out),
        Command::Snapshot(c) => snapshot(&config, c, out),
        Command::Serve(a) => serve_cmd(&config, a),
    }
}

fn say(out: &mut dyn Write, line: impl AsRef<str>) -> Result<()> {
    writeln!(out, "{}", line.as_ref()).map_err(|e| Error::io("stdout", e))
}

/// Writes `path.partial`, then renames it into place.
fn write_atomic(path: &Path, f: impl FnOnce(&mut fs::File) -> Result<()>) -> Result<()> {
    let mut partial = path.as_os_str().to_owned();
    partial.push(".partial");
    let partial = PathBuf::from(partial);
    let mut file = fs::File::create(&partial).map_err(|e| Error::io(&partial, e))?;
    f(&mut file)?;
    file.sync_all().map_err(|e| Error::io(&partial, e))?;
    fs::rename(&partial, path).map_err(|e| Error::io(path, e))
}

fn strategies(config: &Config, name: Option<&str>) -> Result<Vec<StrategyKind>> {
    match name {
        Some(n) if n.eq_ignore_ascii_case("all") => Ok(StrategyKind::ALL.to_vec()),
        Some(n) => Ok(vec![n.parse()?]),
        None => Ok(vec![config.strategy()?.kind]),
    }
}

fn evaluate(config: &Config, a: EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let base = config.strategy()?;
    let gamma = a.gamma.unwrap_or(base.gamma);
    Strategy::new(base.kind, gamma).map_err(|e| Error::Config(e.to_string()))?;
    let evaluator = Evaluator::new(config.backends()?)
        .with_gold_slots(a.gold_slots)
        .with_template_mode(config.cache.template_mode);

    let gammas: Vec<f64> = match &a.sweep {
        Some(v) if v.is_empty() => SWEEP.to_vec(),
        Some(v) => v.clone(),
        None => vec![gamma],
    };
    for g in &gammas {
        if !(0.0..=1.0).contains(g) {
            return Err(Error::Config(format!("threshold {g} outside [0, 1]")));
        }
    }

    let mut reports: Vec<EvalReport> = Vec::new();
    for kind in strategies(config, a.strategy.as_deref())? {
        let batch = if a.sweep.is_none() {
            vec![evaluator.run(&corpus, Strategy::new(kind, gamma)?.with_pca_dims(base.pca_dims))?]
        } else if a.independent {
            evaluator.sweep_independent(&corpus, kind, &gammas)?
        } else {
            evaluator.sweep(&corpus, kind, &gammas, gamma)?
        };
        if batch.len() > 1 {
            let v = nesting_violations(&batch);
            if !v.is_empty() {
                tracing::warn!(strategy = %kind, violations = v.len(), "hit sets not nested across thresholds");
            }
        }
        reports.extend(batch);
    }

    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    for r in &reports {
        let path = a.out.join(format!("requests_{}_{:.2}.csv", r.strategy.as_str().to_lowercase(), r.gamma));
        write_atomic(&path, |f| write_log_csv(&r.rows, f))?;
    }
    let summary: Vec<_> = reports.iter().map(EvalReport::summary).collect();
    write_atomic(&a.out.join("summary.csv"), |f| write_summary_csv(&summary, f))?;

    say(out, format!("{} requests from {}", corpus.len(), a.corpus.display()))?;
    say(
        out,
        format!(
            "{:<12} {:>5} {:>5} {:>5} {:>5} {:>5} {:>9} {:>9} {:>9} {:>9} {:>11}",
            "strategy", "gamma", "tp", "fp", "tn", "fn", "precision", "recall", "f1", "accuracy", "comparisons"
        ),
    )?;
    for s in &summary {
        say(
            out,
            format!(
                "{:<12} {:>5.2} {:>5} {:>5} {:>5} {:>5} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>11}",
                s.strategy, s.gamma, s.tp, s.fp, s.tn, s.fn_, s.precision, s.recall, s.f1, s.accuracy, s.comparisons
            ),
        )?;
    }
    say(out, format!("results written to {}", a.out.display()))
}

#[derive(Serialize)]
struct BenchRow {
    repeat: String,
    strategy: String,
    requests: usize,
    intent_us: f64,
    search_us: f64,
    other_us: f64,
    total_us: f64,
    median_total_us: f64,
}

fn bench(config: &Config, a: BenchArgs, out: &mut dyn Write) -> Result<()> {
    if a.repeats == 0 {
        return Err(Error::Config("--repeats must be positive".into()));
    }
    let corpus = load_corpus(&a.corpus)?;
    let evaluator = Evaluator::new(config.backends()?).with_template_mode(config.cache.template_mode);
    let base = config.strategy()?;
    let us = |d: Duration| d.as_secs_f64() * 1e6;
    let mut rows = Vec::new();
    let mut all = Vec::new();
    for kind in strategies(config, a.strategy.as_deref())? {
        let strategy = Strategy { kind, ..base };
        let mut per_kind = Vec::new();
        for repeat in 0..a.repeats {
            let cache = evaluator.build_cache(&corpus, strategy)?;
            let samples: Vec<_> = evaluator.warm(&cache, &corpus)?.into_iter().map(|d| d.latency).collect();
            let m = mean_latency(&samples);
            rows.push(BenchRow {
                repeat: repeat.to_string(),
                strategy: kind.to_string(),
                requests: samples.len(),
                intent_us: us(m.intent_classification),
                search_us: us(m.similarity_search),
                other_us: us(m.other),
                total_us: us(m.total),
                median_total_us: median_us(&samples),
            });
            per_kind.extend(samples);
        }
        let m = mean_latency(&per_kind);
        rows.push(BenchRow {
            repeat: "mean".into(),
            strategy: kind.to_string(),
            requests: per_kind.len(),
            intent_us: us(m.intent_classification),
            search_us: us(m.similarity_search),
            other_us: us(m.other),
            total_us: us(m.total),
            median_total_us: median_us(&per_kind),
        });
        all.push((kind, m));
    }
    let write = |w: &mut dyn Write| -> Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        for r in &rows {
            csv.serialize(r).map_err(|e| Error::InvalidInput(e.to_string()))?;
        }
        csv.flush().map_err(|e| Error::io("csv", e))
    };
    match &a.out {
        Some(p) => {
            write_atomic(p, |f| write(f))?;
            for (kind, m) in all {
                say(
                    out,
                    format!(
                        "{kind}: mean decide {:.1} us (intent {:.1}, search {:.1}, other {:.1}) -> t_mech = {:.6} s",
                        us(m.total),
                        us(m.intent_classification),
                        us(m.similarity_search),
                        us(m.other),
                        m.total.as_secs_f64()
                    ),
                )?;
            }
            Ok(())
        }
        None => write(out),
    }
}

fn median_us(samples: &[crate::metrics::LatencyBreakdown]) -> f64 {
    let mut v: Vec<f64> = samples.iter().map(|l| l.total.as_secs_f64() * 1e6).collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn reuse_check(config: &Config, a: ReuseArgs, out: &mut dyn Write) -> Result<()> {
    if !(0.0..=1.0).contains(&a.perturb) {
        return Err(Error::Config("--perturb must be in [0, 1]".into()));
    }
    let corpus = load_corpus(&a.corpus)?;
    let pairs = reuse_pairs(&corpus, a.pairs);
    if pairs.len() < a.pairs {
        tracing::warn!(requested = a.pairs, found = pairs.len(), "corpus has fewer reusable families than requested");
    }
    let backends = config.backends()?;
    let tools = config.tools()?;
    let under_test = PerturbedPlanner::new(backends.planner.clone(), a.perturb, a.seed);
    let report = measure_reuse_equivalence(
        &pairs,
        a.repeats,
        backends.embedder,
        backends.classifier,
        &backends.planner,
        &under_test,
        &tools,
    )?;
    if let Some(p) = &a.out {
        write_atomic(p, |f| {
            let mut w = csv::Writer::from_writer(f);
            for t in &report.log {
                w.serialize(t).map_err(|e| Error::InvalidInput(e.to_string()))?;
            }
            w.flush().map_err(|e| Error::io("csv", e))
        })?;
    }
    say(
        out,
        format!(
            "{} pairs x {} repetitions: {}/{} identical, effective reuse rate {:.4}",
            pairs.len(),
            a.repeats,
            report.identical,
            report.trials,
            report.rate
        ),
    )
}

fn gain(a: GainArgs, out: &mut dyn Write) -> Result<()> {
    let r = GainReport::compute(a.n, a.non_tp, a.t_plan, a.t_mech).map_err(|e| Error::Config(e.to_string()))?;
    say(out, format!("mechanism overhead: {:.2} s", r.mechanism))?;
    say(out, format!("plan generation: {:.2} s", r.planning))?;
    say(out, format!("total latency: {:.2} s", r.total))?;
    say(out, format!("no reuse: {:.2} s", r.no_reuse))?;
    say(out, format!("reduction vs no reuse: {:.2}%", r.reduction_vs_no_reuse * 100.0))?;
    if let (Some(m), Some(t)) = (a.vs_non_tp, a.vs_t_mech) {
        let other = crate::metrics::gain_model(a.n, m, a.t_plan, t).map_err(|e| Error::Config(e.to_string()))?;
        say(out, format!("compared configuration: {other:.2} s"))?;
        say(
            out,
            format!("reduction vs compared: {:.2}%", crate::metrics::reduction(r.total, other) * 100.0),
        )?;
    }
    Ok(())
}

fn gen_corpus(a: GenArgs, out: &mut dyn Write) -> Result<()> {
    let set = TemplateSet::load(&a.templates).map_err(|e| match e {
        Error::Io { path, source } => Error::Corpus(format!("{}: {source}", path.display())),
        e => e,
    })?;
    let corpus = set.generate(a.size, a.seed)?;
    match &a.out {
        Some(p) => {
            write_atomic(p, |f| write_corpus(&corpus, f))?;
            let reusable = corpus.iter().filter(|r| r.reusable == Some(true)).count();
            tracing::info!(requests = corpus.len(), reusable, "corpus written");
            Ok(())
        }
        None => write_corpus(&corpus, out),
    }
}

fn build_cache(config: &Config, evaluator: &Evaluator, corpus: Option<&[Request]>) -> Result<PlanCache> {
    let cache = config.cache(evaluator.backends())?;
    let strategy = cache.strategy();
    match (strategy.kind, corpus) {
        (StrategyKind::MeanCache, Some(c)) => cache.with_pca(evaluator.fit_pca(c, strategy.pca_dims)?),
        _ => Ok(cache),
    }
}

fn snapshot(config: &Config, cmd: SnapshotCommand, out: &mut dyn Write) -> Result<()> {
    let evaluator = Evaluator::new(config.backends()?).with_template_mode(config.cache.template_mode);
    match cmd {
        SnapshotCommand::Save { path, corpus } => {
            let corpus = load_corpus(&corpus)?;
            let cache = build_cache(config, &evaluator, Some(&corpus))?;
            evaluator.warm(&cache, &corpus)?;
            cache.save_snapshot(&path)?;
            say(out, format!("saved {} entries to {}", cache.len(), path.display()))
        }
        SnapshotCommand::Load { path, corpus, out: log } => {
            let mut cache = build_cache(config, &evaluator, None)?;
            cache.load_snapshot(&path)?;
            let stats = cache.stats();
            say(
                out,
                format!("loaded {} entries in {} categories from {}", stats.entries, stats.categories, path.display()),
            )?;
            let Some(corpus) = corpus else { return Ok(()) };
            let corpus = load_corpus(&corpus)?;
            let decided = evaluator.warm(&cache, &corpus)?;
            let (mut hit, mut miss, mut bypass) = (0, 0, 0);
            for d in &decided {
                match d.decision.label() {
                    "hit" => hit += 1,
                    "miss" => miss += 1,
                    _ => bypass += 1,
                }
            }
            if let Some(p) = &log {
                write_atomic(p, |f| {
                    let mut w = csv::Writer::from_writer(f);
                    w.write_record(["request_id", "decision", "similarity"]).map_err(|e| Error::InvalidInput(e.to_string()))?;
                    for (r, d) in corpus.iter().zip(&decided) {
                        let sim = d.decision.similarity().map(|s| s.to_string()).unwrap_or_default();
                        w.write_record([r.id.as_str(), d.decision.label(), sim.as_str()])
                            .map_err(|e| Error::InvalidInput(e.to_string()))?;
                    }
                    w.flush().map_err(|e| Error::io("csv", e))
                })?;
            }
            say(out, format!("replayed {}: {hit} hit, {miss} miss, {bypass} bypass", corpus.len()))
        }
    }
}

fn serve_cmd(config: &Config, a: ServeArgs) -> Result<()> {
    let backends = config.backends()?;
    let evaluator = Evaluator::new(backends.clone());
    let corpus = a.corpus.as_ref().map(load_corpus).transpose()?;
    let mut cache = build_cache(config, &evaluator, corpus.as_deref())?;
    let snapshot = a
        .snapshot
        .clone()
        .or_else(|| config.server.snapshot.as_ref().map(|p| config.resolve(p)));
    if let Some(p) = snapshot.as_ref().filter(|p| p.exists()) {
        cache.load_snapshot(p)?;
        tracing::info!(path = %p.display(), entries = cache.len(), "snapshot loaded");
    }
    if cache.strategy().kind == StrategyKind::MeanCache && cache.pca().is_none() {
        return Err(Error::Config("MEANCACHE needs --corpus or a snapshot to fit its projection".into()));
    }
    let pipeline =
        ReusePipeline::new(Arc::new(cache), backends.planner.clone()).with_tools(Arc::new(config.tools()?));
    let gateway = Arc::new(Gateway::new(pipeline, snapshot));
    let addr = SocketAddr::new(a.host, a.port.unwrap_or(config.server.port));
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io("tokio runtime", e))?;
    rt.block_on(serve(gateway, addr, async {
        let _ = tokio::signal::ctrl_c().await;
    }))
}
