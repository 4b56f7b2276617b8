use std::fs::{self, OpenOptions};
use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use advisor_core::inner_speech::{DialogueSession, SessionState};
use advisor_core::store::{ingest_dishes, KnowledgeStore};
use advisor_core::timing::BENCH_CSV_HEADER;
use advisor_service::api::{router, AppState};
use advisor_service::bench::{medians, run_bench, verify, REFERENCE_SECONDS};
use advisor_service::config::ServiceConfig;
use advisor_service::transcript::TurnRecord;
use advisor_service::{build_engine, load_store};
use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

/// Dietary advisor: conversational meal planning over a dish catalogue.
///
/// Settings come from ADVISOR_* environment variables (see the README);
/// `--snapshot` overrides ADVISOR_SNAPSHOT.
#[derive(Parser)]
#[command(name = "advisor", version)]
struct Cli {
    /// Knowledge-store snapshot (JSON). Defaults to the bundled demo store.
    #[arg(long, global = true)]
    snapshot: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Talk to the advisor on stdin/stdout.
    Chat {
        /// Print the inner-speech notes of each turn.
        #[arg(long)]
        notes: bool,
    },
    /// Add dishes from a JSON or JSONL file and write the snapshot back.
    Ingest {
        file: PathBuf,
        /// Where to write the updated snapshot (defaults to --snapshot).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the meal solver on seeded catalogues and print CSV.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "50,100,150,200,250")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-check the solver against exhaustive enumeration.
    Verify {
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 25)]
        max_n: usize,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Serve the HTTP API.
    Serve {
        /// Listen address (overrides ADVISOR_BIND).
        #[arg(long)]
        bind: Option<String>,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    let mut config = ServiceConfig::from_env()?;
    if cli.snapshot.is_some() {
        config.snapshot = cli.snapshot.clone();
    }
    match cli.command {
        Command::Chat { notes } => chat(&config, notes),
        Command::Ingest { file, out } => ingest(&config, &file, out),
        Command::Bench { sizes, k, reps, seed, out } => bench(&sizes, k, reps, seed, out),
        Command::Verify { instances, max_n, k, seed } => {
            let v = verify(instances, max_n, k, seed)?;
            println!("instances: {}  with feasible meals: {}  mismatches: {}", v.instances, v.solved, v.mismatches.len());
            for s in &v.mismatches {
                println!("mismatch at seed {s}");
            }
            Ok(if v.mismatches.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Serve { bind } => serve(config, bind),
    }
}

fn chat(config: &ServiceConfig, show_notes: bool) -> Result<ExitCode> {
    let engine = build_engine(config, load_store(config)?);
    let mut session = DialogueSession::new("cli", &config.session)?;
    let mut log = match &config.transcript_log {
        Some(p) => Some(OpenOptions::new().create(true).append(true).open(p)?),
        None => None,
    };
    let stdin = io::stdin();
    let mut out = io::stdout();
    write!(out, "you> ")?;
    out.flush()?;
    for line in stdin.lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            write!(out, "you> ")?;
            out.flush()?;
            continue;
        }
        let outcome = engine.run_turn(&mut session, &line)?;
        if show_notes {
            for n in &outcome.notes {
                writeln!(out, "  ({})", n.render())?;
            }
        }
        writeln!(out, "advisor> {}", outcome.reply.replace('\n', "\n         "))?;
        if let Some(f) = log.as_mut() {
            writeln!(f, "{}", serde_json::to_string(&TurnRecord::new(&session.id, &line, &outcome))?)?;
        }
        if session.state() == SessionState::Closed {
            break;
        }
        write!(out, "you> ")?;
        out.flush()?;
    }
    Ok(ExitCode::SUCCESS)
}

fn ingest(config: &ServiceConfig, file: &PathBuf, out: Option<PathBuf>) -> Result<ExitCode> {
    let mut store = match &config.snapshot {
        Some(p) if p.exists() => KnowledgeStore::load_snapshot(p)?,
        _ => KnowledgeStore::new(),
    };
    let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let report = ingest_dishes(&mut store, &text);
    for id in &report.inserted {
        let dish = store.dishes().find(|d| d.id == *id).expect("inserted dish");
        println!("ok      {id} {}", dish.name);
    }
    for issue in &report.issues {
        println!("reject  {}: {}", issue.location, issue.message);
    }
    println!("{} inserted, {} rejected", report.inserted.len(), report.issues.len());
    let target = out.or_else(|| config.snapshot.clone()).context("no snapshot path: pass --snapshot or --out")?;
    store.save_snapshot(&target)?;
    Ok(if report.issues.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn bench(sizes: &[usize], k: usize, reps: usize, seed: u64, out: Option<PathBuf>) -> Result<ExitCode> {
    let rows = run_bench(sizes, k, reps, seed)?;
    let mut csv = format!("{BENCH_CSV_HEADER}\n");
    for r in &rows {
        csv.push_str(&r.to_csv());
        csv.push('\n');
    }
    match out {
        Some(p) => fs::write(&p, &csv)?,
        None => print!("{csv}"),
    }
    eprintln!("N      median_s   reference_s");
    for (n, m) in medians(&rows) {
        let reference = REFERENCE_SECONDS.iter().find(|r| r.0 == n).map(|r| format!("{:.2}", r.1)).unwrap_or_else(|| "-".into());
        eprintln!("{n:<6} {m:<10.6} {reference}");
    }
    Ok(ExitCode::SUCCESS)
}

fn serve(config: ServiceConfig, bind: Option<String>) -> Result<ExitCode> {
    let engine = build_engine(&config, load_store(&config)?);
    let log = match &config.transcript_log {
        Some(p) => Some(OpenOptions::new().create(true).append(true).open(p)?),
        None => None,
    };
    let addr = bind.unwrap_or(config.bind.clone());
    let app = router(AppState::new(engine, config.session, log));
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr).await.with_context(|| format!("binding {addr}"))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(ExitCode::SUCCESS)
}
