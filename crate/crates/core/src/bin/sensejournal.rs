use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use sensejournal::features::DayWindow;
use sensejournal::llm::{CompletionProvider, HttpProvider, MockProvider};
use sensejournal::profile::UserId;
use sensejournal::service::{require_bearer, router, Engine, EngineConfig};
use sensejournal::sim::{
    corrupt_lines, generate, read_trace, replay, run_study, study_traces, write_trace, ProviderKind, Scenario,
    StudyConfig,
};
use sensejournal::time::SystemClock;

#[derive(Parser)]
#[command(version, about = "Context-aware journaling prompts from passive sensing data")]
struct Cli {
    /// Print the feature vector of USER on DATE as JSON and exit.
    #[arg(long, num_args = 2, value_names = ["USER", "DATE"])]
    dump_features: Option<Vec<String>>,
    /// Trace directory for --dump-features: one written by `gen`, or a
    /// `simulate` traces directory holding one subdirectory per user.
    #[arg(long, requires = "dump_features")]
    traces: Option<PathBuf>,
    /// Service data directory for --dump-features.
    #[arg(long, requires = "dump_features", conflicts_with = "traces")]
    data: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic trace and its ground-truth manifest.
    Gen {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 56)]
        days: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "u01")]
        user: String,
        #[arg(long)]
        start: Option<NaiveDate>,
        /// Corrupt this many lines and record them in the manifest.
        #[arg(long, default_value_t = 0)]
        corrupt: usize,
    },
    /// Run the whole pipeline over a synthetic study on a virtual clock.
    Simulate {
        #[arg(long, default_value_t = 5)]
        users: usize,
        #[arg(long, default_value_t = 56)]
        days: u32,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Per-user traces are read from here, or generated into it.
        #[arg(long)]
        traces: PathBuf,
        /// Where log.jsonl and prompts.jsonl go; defaults to --traces.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SimProvider::Mock)]
        provider: SimProvider,
        /// Share of adversarial outputs that break the rules.
        #[arg(long, default_value_t = 0.7)]
        bad_rate: f64,
        #[arg(long, default_value = "2024-01-08")]
        start: NaiveDate,
    },
    /// Serve the JSON API with a background scheduler.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SimProvider {
    Mock,
    Adversarial,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    #[arg(long)]
    data: PathBuf,
    /// Completion endpoint accepting `{request, params}` and returning `{text}`.
    /// Without it a deterministic mock is used.
    #[arg(long)]
    llm_url: Option<String>,
    /// Require `Authorization: Bearer <token>` on every request.
    #[arg(long, env = "SENSEJOURNAL_TOKEN")]
    token: Option<String>,
    #[arg(long)]
    term_start: Option<NaiveDate>,
    /// Scheduler poll interval in seconds.
    #[arg(long, default_value_t = 20)]
    tick: u64,
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    if let Some(args) = &cli.dump_features {
        return dump_features(&args[0], &args[1], cli.traces.as_deref(), cli.data.as_deref());
    }
    match cli.command {
        Some(Command::Gen { scenario, days, seed, out, user, start, corrupt }) => {
            let mut sc = Scenario::named(&scenario)?;
            if let Some(s) = start {
                sc = sc.starting(s);
            }
            let mut trace = generate(&sc, days, seed, &UserId::new(user)?)?;
            let mut ndjson = trace.to_ndjson();
            if corrupt > 0 {
                let (text, lines) = corrupt_lines(&ndjson, corrupt, seed);
                ndjson = text;
                trace.manifest.corrupted_lines = lines;
            }
            write_trace(&out, &ndjson, &trace.manifest)?;
            eprintln!("wrote {} events over {days} days to {}", trace.events.len(), out.display());
            Ok(())
        }
        Some(Command::Simulate { users, days, seed, traces, out, provider, bad_rate, start }) => {
            let provider = match provider {
                SimProvider::Mock => ProviderKind::Mock,
                SimProvider::Adversarial => ProviderKind::Adversarial { bad_rate },
            };
            let cfg = StudyConfig { users, days, seed, start, provider, ..StudyConfig::default() };
            let output = run_study(&cfg, study_traces(&cfg, Some(&traces))?)?;
            let out = out.unwrap_or(traces);
            output.write(&out)?;
            eprintln!(
                "{} jobs, {} prompts issued, {} entries; log and prompts in {}",
                output.log.len(),
                output.prompts.len(),
                output.entries.len(),
                out.display()
            );
            Ok(())
        }
        Some(Command::Serve(args)) => serve(args),
        None => bail!("nothing to do; see --help"),
    }
}

fn dump_features(user: &str, date: &str, traces: Option<&Path>, data: Option<&Path>) -> Result<()> {
    let user = UserId::new(user)?;
    let date: NaiveDate = date.parse().with_context(|| format!("bad date {date}"))?;
    let engine = match (traces, data) {
        (Some(dir), _) => {
            let dir = if dir.join("manifest.json").exists() { dir.to_path_buf() } else { dir.join(user.as_str()) };
            let trace = read_trace(&dir).with_context(|| format!("reading trace in {}", dir.display()))?;
            if trace.manifest.user_id != user {
                bail!("{} holds user {}, not {user}", dir.display(), trace.manifest.user_id);
            }
            replay(&trace)?
        }
        (None, Some(dir)) => Engine::open(
            dir,
            Arc::new(SystemClock),
            Arc::new(MockProvider::new(0)),
            EngineConfig::default(),
        )?,
        (None, None) => bail!("--dump-features needs --traces or --data"),
    };
    let features = engine.pipeline().daily_features(&user, date, DayWindow::FULL_DAY)?;
    let sleep = engine.pipeline().infer_sleep(&user, date)?;
    let baseline = engine.pipeline().compute_baseline(&user, date, DayWindow::FULL_DAY)?;
    let report = json!({ "features": features, "sleep_night_of_date": sleep, "baseline": baseline });
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{}", serde_json::to_string_pretty(&report)?) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn serve(args: ServeArgs) -> Result<()> {
    fs::create_dir_all(&args.data)?;
    let provider: Arc<dyn CompletionProvider> = match &args.llm_url {
        Some(url) => Arc::new(HttpProvider::new(url.clone())),
        None => Arc::new(MockProvider::new(0)),
    };
    let mut config = EngineConfig::default();
    if let Some(t) = args.term_start {
        config.term_start = t;
    }
    let engine = Arc::new(Engine::open(&args.data, Arc::new(SystemClock), provider, config)?);
    let mut app = router(engine.clone());
    if let Some(token) = args.token {
        app = require_bearer(app, token);
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let ticker = engine.clone();
        let every = Duration::from_secs(args.tick.max(1));
        tokio::spawn(async move {
            loop {
                let e = ticker.clone();
                match tokio::task::spawn_blocking(move || e.tick()).await {
                    Ok(Ok(log)) if !log.is_empty() => tracing::info!(jobs = log.len(), "scheduler fired"),
                    Ok(Err(e)) => tracing::error!(error = %e, "scheduler tick failed"),
                    Err(e) => tracing::error!(error = %e, "scheduler task panicked"),
                    _ => {}
                }
                tokio::time::sleep(every).await;
            }
        });
        let listener = tokio::net::TcpListener::bind(&args.addr).await?;
        tracing::info!(addr = %args.addr, "listening");
        axum::serve(listener, app).await?;
        Ok(())
    })
}

