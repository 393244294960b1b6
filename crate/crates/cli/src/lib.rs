//! The `cra` command: import and mine review data, train and evaluate
//! usefulness models, predict, rank, and serve the HTTP API.
//!
//! Exit status is 0 on success, 1 for usage errors and 2 for runtime
//! failures.

pub mod config;
mod output;

use std::collections::HashMap;
use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::Utc;
use clap::{Args, Parser, Subcommand};

use cra_core::ingest::gerrit::{epoch, mine_incremental, MineError};
use cra_core::ingest::{parse_review_dump, DumpError, HistoryIndex};
use cra_core::labels::{read_labels, write_labels, LabelCsvError};
use cra_core::learn::{Algorithm, AlgorithmConfig, ArtifactError, TrainedModel};
use cra_core::metrics::{rank, to_csv, EntityKind, Period, RankKey, LEGACY_N};
use cra_core::model::{to_seconds, Timestamp, UsefulnessLabel};
use cra_core::pipeline::{self, comment_lookup, PipelineError, TrainOptions};
use cra_core::report::period_metrics;
use cra_core::store::{Store, StoreError, StoredPrediction};
use cra_core::textfeat::{LexiconError, Lexicons};

use config::{CliConfig, ConfigError};

#[derive(Debug, Parser)]
#[command(name = "cra", version, about = "Code review analytics")]
#[command(after_help = "Settings come from --config, $CRA_CONFIG or ./cra.toml; CRA_STORE, CRA_MODEL, CRA_SEED, \
CRA_LOG, CRA_GERRIT_URL and CRA_GERRIT_USER override them. The review server password is read from \
the variable named by miner.password_env (CRA_GERRIT_PASSWORD by default).")]
pub struct Cli {
    /// Settings file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Database file; overrides the settings file.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load a review-history dump into the store.
    Import { dump: PathBuf },
    /// Load author labels from CSV.
    ImportLabels { csv: PathBuf },
    /// Write stored labels as CSV.
    ExportLabels {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fetch changes updated since a timestamp from the review server.
    Mine {
        /// RFC 3339 or YYYY-MM-DD; defaults to the last high-water mark.
        #[arg(long)]
        since: Option<String>,
    },
    /// Fit a usefulness model and write its artifact.
    Train(TrainArgs),
    /// Cross-validate one or more algorithms.
    Evaluate(EvaluateArgs),
    /// Classify stored comments.
    Predict(PredictArgs),
    /// Rank reviewers or projects over a period.
    Rank(RankArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct LearnArgs {
    /// Labels CSV; stored labels are used when omitted.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Keep every feature that survives correlation pruning.
    #[arg(long)]
    no_rfe: bool,
    #[arg(long, default_value_t = 10)]
    rfe_folds: usize,
    #[arg(long)]
    no_smote: bool,
    #[arg(long, default_value_t = cra_core::features::DEFAULT_BINS)]
    bins: usize,
    #[arg(long, default_value_t = cra_core::textfeat::DEFAULT_MAX_TERMS)]
    max_terms: usize,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, default_value = "rf", value_parser = parse_algorithm)]
    algo: Algorithm,
    /// Artifact path; defaults to the configured model path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    learn: LearnArgs,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long, default_value = "rf", value_parser = parse_algorithm)]
    algo: Algorithm,
    #[arg(long, default_value_t = 20)]
    repeats: usize,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Comma-separated algorithms compared on the same folds, e.g. dt,rf.
    #[arg(long, value_delimiter = ',', value_parser = parse_algorithm)]
    compare: Option<Vec<Algorithm>>,
    /// Print the feature selection audit.
    #[arg(long)]
    explain: bool,
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    learn: LearnArgs,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("target").required(true).args(["all_unpredicted", "comment"])))]
struct PredictArgs {
    /// Model artifact; defaults to the configured model path.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Every stored comment without a prediction from this model.
    #[arg(long)]
    all_unpredicted: bool,
    #[arg(long)]
    comment: Option<String>,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("format").args(["csv", "json"])))]
struct RankArgs {
    #[arg(long)]
    from: String,
    #[arg(long)]
    to: String,
    #[arg(long, default_value = "ri")]
    key: RankKey,
    #[arg(long, default_value = "reviewer")]
    entity: EntityKind,
    #[arg(long)]
    csv: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    bind: std::net::IpAddr,
    /// Directory of dashboard assets served next to the API.
    #[arg(long)]
    static_dir: Option<PathBuf>,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse()
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("store: {0}")]
    Store(#[from] StoreError),
    #[error("ingest: {0}")]
    Dump(#[from] DumpError),
    #[error("miner: {0}")]
    Mine(#[from] MineError),
    #[error("labels: {0}")]
    Labels(#[from] LabelCsvError),
    #[error("pipeline: {0}")]
    Pipeline(#[from] PipelineError),
    #[error("model artifact: {0}")]
    Artifact(#[from] ArtifactError),
    #[error("lexicon: {0}")]
    Lexicon(#[from] LexiconError),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }

    fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Entry point used by the binary.
pub fn main_with_env() -> i32 {
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    run(std::env::args_os(), &mut out, &mut err, |k| std::env::var(k).ok())
}

/// Parses `argv`, runs the command and returns the exit status.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write, env: impl Fn(&str) -> Option<String>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = CliConfig::load(cli.config.as_deref(), &env)
        .map_err(CliError::from)
        .and_then(|mut config| {
            if let Some(store) = &cli.store {
                config.store = store.clone();
            }
            init_logging(&config.log_level);
            execute(cli.command, &config, out)
        });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn init_logging(level: &str) {
    let filter = tracing_subscriber::EnvFilter::try_new(level).unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    // a second initialisation (tests run many commands in one process) is harmless
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

fn now() -> Timestamp {
    to_seconds(Utc::now())
}

fn open_store(config: &CliConfig) -> CliResult<Store> {
    Ok(Store::open(&config.store)?)
}

fn lexicons(config: &CliConfig) -> CliResult<Lexicons> {
    Ok(match &config.lexicon_dir {
        Some(dir) => Lexicons::from_dir(dir)?,
        None => Lexicons::builtin().clone(),
    })
}

fn write_out(out: &mut dyn Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes()).map_err(CliError::io("writing output"))
}

fn execute(command: Command, config: &CliConfig, out: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::Import { dump } => import(config, &dump, out),
        Command::ImportLabels { csv } => import_labels(config, &csv, out),
        Command::ExportLabels { out: path } => export_labels(config, path.as_deref(), out),
        Command::Mine { since } => mine(config, since.as_deref(), out),
        Command::Train(args) => train(config, args, out),
        Command::Evaluate(args) => evaluate(config, args, out),
        Command::Predict(args) => predict(config, args, out),
        Command::Rank(args) => rank_cmd(config, args, out),
        Command::Serve(args) => serve(config, args),
    }
}

fn import(config: &CliConfig, path: &Path, out: &mut dyn Write) -> CliResult<()> {
    let bytes = std::fs::read(path).map_err(CliError::io(format!("reading {}", path.display())))?;
    let dump = parse_review_dump(&bytes)?;
    let counts = open_store(config)?.upsert_dump(&dump)?;
    write_out(
        out,
        &format!("imported {} changes: {} new, {} updated\n", dump.changes.len(), counts.inserted, counts.updated),
    )
}

fn read_label_file(path: &Path) -> CliResult<Vec<UsefulnessLabel>> {
    let file = std::fs::File::open(path).map_err(CliError::io(format!("reading {}", path.display())))?;
    Ok(read_labels(file)?)
}

fn import_labels(config: &CliConfig, path: &Path, out: &mut dyn Write) -> CliResult<()> {
    let labels = read_label_file(path)?;
    let stored = open_store(config)?.import_labels(&labels, now())?;
    write_out(out, &format!("imported {stored} labels\n"))
}

fn export_labels(config: &CliConfig, path: Option<&Path>, out: &mut dyn Write) -> CliResult<()> {
    let labels = open_store(config)?.labels()?;
    match path {
        Some(p) => {
            let file = std::fs::File::create(p).map_err(CliError::io(format!("creating {}", p.display())))?;
            write_labels(file, &labels)?;
            write_out(out, &format!("exported {} labels to {}\n", labels.len(), p.display()))
        }
        None => {
            let mut buf = Vec::new();
            write_labels(&mut buf, &labels)?;
            out.write_all(&buf).map_err(CliError::io("writing output"))
        }
    }
}

fn parse_instant(flag: &str, raw: &str) -> CliResult<Timestamp> {
    cra_server::parse_instant(raw).map_err(|e| CliError::Usage(format!("--{flag}: {e}")))
}

fn runtime() -> CliResult<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(CliError::io("starting async runtime"))
}

fn mine(config: &CliConfig, since: Option<&str>, out: &mut dyn Write) -> CliResult<()> {
    let miner = config
        .miner
        .clone()
        .ok_or_else(|| CliError::Usage("no review server configured (set [miner] base_url or CRA_GERRIT_URL)".into()))?;
    let store = open_store(config)?;
    let since = match since {
        Some(raw) => parse_instant("since", raw)?,
        None => store.high_water_mark(&miner.base_url)?.unwrap_or_else(epoch),
    };
    let outcome = runtime()?.block_on(mine_incremental(&miner, since))?;
    let counts = store.upsert_dump(&outcome.dump)?;
    store.set_high_water_mark(&miner.base_url, outcome.high_water_mark)?;
    write_out(
        out,
        &format!(
            "mined {} changes: {} new, {} updated; high-water mark {}\n",
            outcome.dump.changes.len(),
            counts.inserted,
            counts.updated,
            cra_core::model::timestamp::format(&outcome.high_water_mark)
        ),
    )
}

fn options(config: &CliConfig, algorithm: Algorithm, a: &LearnArgs) -> TrainOptions {
    let mut o = TrainOptions::new(algorithm);
    o.seed = a.seed.unwrap_or(config.seed);
    o.rfe_folds = (!a.no_rfe).then_some(a.rfe_folds);
    o.smote = !a.no_smote;
    o.bins = a.bins;
    o.max_terms = a.max_terms;
    o
}

fn training_labels(store: &Store, path: Option<&Path>) -> CliResult<Vec<UsefulnessLabel>> {
    match path {
        Some(p) => read_label_file(p),
        None => Ok(store.labels()?),
    }
}

fn train(config: &CliConfig, args: TrainArgs, out: &mut dyn Write) -> CliResult<()> {
    let target = args
        .out
        .clone()
        .or_else(|| config.model.clone())
        .ok_or_else(|| CliError::Usage("--out is required when no model path is configured".into()))?;
    let store = open_store(config)?;
    let dump = store.load_dump()?;
    let labels = training_labels(&store, args.learn.labels.as_deref())?;
    let opts = options(config, args.algo, &args.learn);
    let outcome = pipeline::fit_model(&dump, &labels, &opts, &lexicons(config)?)?;
    outcome.model.save(&target)?;
    let version = outcome.model.model_version();
    store.save_model(&version, outcome.model.algorithm.short_name(), &outcome.model.to_bytes(), now())?;
    let text = if args.json {
        serde_json::to_string_pretty(&output::TrainSummary::new(&outcome, &version, &target)).expect("serializable") + "\n"
    } else {
        output::train_text(&outcome, &version, &target)
    };
    write_out(out, &text)
}

fn evaluate(config: &CliConfig, args: EvaluateArgs, out: &mut dyn Write) -> CliResult<()> {
    let store = open_store(config)?;
    let dump = store.load_dump()?;
    let labels = training_labels(&store, args.learn.labels.as_deref())?;
    let mut algorithms = args.compare.clone().unwrap_or_else(|| vec![args.algo]);
    algorithms.dedup();
    let estimator = if algorithms.contains(&args.algo) { args.algo } else { algorithms[0] };
    let opts = options(config, estimator, &args.learn);
    let configs: Vec<AlgorithmConfig> = algorithms.iter().map(|a| AlgorithmConfig::default_for(*a)).collect();
    let outcome = pipeline::evaluate(&dump, &labels, &opts, &configs, args.repeats, args.folds, &lexicons(config)?)?;
    let text = if args.json {
        serde_json::to_string_pretty(&outcome).expect("serializable") + "\n"
    } else {
        let mut t = output::evaluation_table(&outcome);
        if args.compare.is_some() {
            t.push('\n');
            t.push_str(&output::comparison_table(&outcome));
        }
        if args.explain {
            t.push('\n');
            t.push_str(&output::selection_audit(&outcome.selection));
        }
        t
    };
    write_out(out, &text)
}

fn predict(config: &CliConfig, args: PredictArgs, out: &mut dyn Write) -> CliResult<()> {
    let path = args
        .model
        .clone()
        .or_else(|| config.model.clone())
        .ok_or_else(|| CliError::Usage("--model is required when no model path is configured".into()))?;
    let model = TrainedModel::load(&path)?;
    let version = model.model_version();
    let lex = lexicons(config)?;
    let store = open_store(config)?;
    let dump = store.load_dump()?;
    let history = HistoryIndex::new(&dump);
    let lookup = comment_lookup(&dump);
    let targets: Vec<String> = match &args.comment {
        Some(id) => vec![id.clone()],
        None => store.unpredicted(&version)?.into_iter().map(|(_, c)| c).collect(),
    };
    let at = now();
    let mut stored = Vec::with_capacity(targets.len());
    for id in &targets {
        let (change, comment) = lookup
            .get(id.as_str())
            .ok_or_else(|| CliError::Store(StoreError::UnknownComment(id.clone())))?;
        let p = pipeline::predict_comment(&model, comment, change, &history, &lex)?;
        stored.push(StoredPrediction {
            comment_id: id.clone(),
            model_version: version.clone(),
            useful: p.useful,
            probability: p.probability,
            predicted_at: at,
        });
    }
    store.save_model(&version, model.algorithm.short_name(), &model.to_bytes(), at)?;
    store.put_predictions(&stored)?;
    let text = if args.json {
        serde_json::to_string_pretty(&stored).expect("serializable") + "\n"
    } else if let (Some(id), Some(p)) = (&args.comment, stored.first()) {
        format!(
            "{id}: {} (p_useful {:.4}, model {version})\n",
            if p.useful { "useful" } else { "not useful" },
            p.probability
        )
    } else {
        let useful = stored.iter().filter(|p| p.useful).count();
        format!("predicted {} comments ({useful} useful) with model {version}\n", stored.len())
    };
    write_out(out, &text)
}

fn rank_cmd(config: &CliConfig, args: RankArgs, out: &mut dyn Write) -> CliResult<()> {
    let period = Period {
        from: parse_instant("from", &args.from)?,
        to: parse_instant("to", &args.to)?,
    };
    if period.from >= period.to {
        return Err(CliError::Usage("--from must be earlier than --to".into()));
    }
    let store = open_store(config)?;
    let list = period_metrics(&store, &period, args.entity)?;
    let ranking = rank(&list, args.key, LEGACY_N);
    let text = if args.csv {
        to_csv(&list, &ranking, args.entity)
    } else if args.json {
        let by_id: HashMap<&str, _> = list.iter().map(|m| (m.entity_id.as_str(), m)).collect();
        let rows: Vec<_> = ranking
            .entries
            .iter()
            .map(|e| serde_json::json!({ "rank": e.rank, "value": e.value, "metrics": by_id[e.entity_id.as_str()] }))
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({ "key": args.key, "entity": args.entity, "rows": rows }))
            .expect("serializable")
            + "\n"
    } else {
        output::ranking_table(&list, &ranking, args.entity)
    };
    write_out(out, &text)
}

fn serve(config: &CliConfig, args: ServeArgs) -> CliResult<()> {
    if let Some(dir) = &args.static_dir {
        if !dir.is_dir() {
            return Err(CliError::Usage(format!("--static-dir {} is not a directory", dir.display())));
        }
    }
    let store = Arc::new(open_store(config)?);
    let mut api = config.server.clone();
    let mine = config.miner.clone().map(|m| {
        api.miner_endpoint = m.base_url.clone();
        api.default_mine_interval_secs = m.poll_interval_secs;
        cra_server::gerrit_source(m)
    });
    let scheduled = mine.is_some();
    let state = Arc::new(cra_server::AppState::new(
        store,
        api,
        Arc::new(cra_server::SystemClock),
        cra_server::session_key_from_env(),
        mine,
    ));
    let app = cra_server::router(state.clone(), args.static_dir.clone());
    let addr = SocketAddr::new(args.bind, args.port);
    runtime()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(CliError::io(format!("binding {addr}")))?;
        if scheduled {
            cra_server::spawn_scheduler(state);
        }
        tracing::info!("listening on {addr}");
        eprintln!("listening on http://{}", listener.local_addr().map_err(CliError::io("binding"))?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(CliError::io("serving"))
    })
}
