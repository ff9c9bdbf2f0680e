//! `errql`: error-quality measures and rank-based grade models from
//! autograder snapshot logs.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use errql_core::config::RunConfig;
use errql_core::ingest::{write_events_csv, write_events_jsonl, write_grades};
use errql_core::measures::write_measures_csv;
use errql_core::pipeline;
use errql_core::rankfit::LogBase;
use errql_core::report::ReportFormat;
use errql_core::synth::{generate_cohort, generate_scale_fixture, SynthConfig, COURSE_VOLUME};

#[derive(Parser, Debug)]
#[command(name = "errql", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate the event log (and grades) and print a summary.
    IngestCheck(CommonArgs),
    /// Compute EC, EQ and RED per student and assignment into measures.csv.
    Measures(CommonArgs),
    /// Run the full pipeline: measures, design matrices, 14 fits, report.
    Analyze(CommonArgs),
    /// Re-render the report of an earlier `analyze` run.
    Report(CommonArgs),
    /// Generate a seeded synthetic cohort.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct CommonArgs {
    /// Config file (TOML); flags override its values.
    #[arg(long, env = "ERRQL_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long)]
    grades: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Idle gap in minutes that starts a new session.
    #[arg(long, value_name = "MINUTES")]
    idle_gap: Option<f64>,
    #[arg(long)]
    reset_per_session: bool,
    /// EQ weights as BOTH_FAIL,SAME_TYPE.
    #[arg(long, value_name = "A,B", value_parser = parse_weights)]
    eq_weights: Option<(f64, f64)>,
    /// Logarithm base of BIC': 10 or e.
    #[arg(long, value_name = "10|e")]
    bic_log: Option<LogBase>,
    /// Report format; repeat or comma-separate for several.
    #[arg(long, value_delimiter = ',')]
    format: Vec<ReportFormat>,
    #[arg(long)]
    seed: Option<u64>,
    /// Bootstrap τ̂ with this many resamples instead of the window estimate.
    #[arg(long, value_name = "N")]
    tau_bootstrap: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EventsOut {
    Jsonl,
    Csv,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 280)]
    students: usize,
    #[arg(long)]
    out: PathBuf,
    /// Generator parameters (TOML); --seed and --students override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = EventsOut::Jsonl)]
    events_format: EventsOut,
    /// Emit the data-volume fixture (per-assignment totals) instead.
    #[arg(long)]
    scale: bool,
}

fn parse_weights(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected A,B, got `{s}`"))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|e| format!("bad weight `{v}`: {e}"))
    };
    Ok((parse(a)?, parse(b)?))
}

fn load_config(args: &CommonArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("config: reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("config: parsing {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if args.events.is_some() {
        cfg.events = args.events.clone();
    }
    if args.grades.is_some() {
        cfg.grades = args.grades.clone();
    }
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    if let Some(gap) = args.idle_gap {
        cfg.idle_gap_minutes = gap;
    }
    if args.reset_per_session {
        cfg.reset_per_session = true;
    }
    if let Some(w) = args.eq_weights {
        cfg.eq_weights = w;
    }
    if let Some(base) = args.bic_log {
        cfg.bic_log = base;
    }
    if !args.format.is_empty() {
        cfg.formats = args.format.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.tau_bootstrap.is_some() {
        cfg.tau_bootstrap = args.tau_bootstrap;
    }
    Ok(cfg)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn run_synth(args: &SynthArgs) -> anyhow::Result<()> {
    let events_path = args.out.join(match args.events_format {
        EventsOut::Jsonl => "events.jsonl",
        EventsOut::Csv => "events.csv",
    });
    let (events, grades) = if args.scale {
        generate_scale_fixture(&COURSE_VOLUME, args.seed)
    } else {
        let mut cfg: SynthConfig = match &args.config {
            Some(path) => toml::from_str(&fs::read_to_string(path)?)
                .with_context(|| format!("parsing {}", path.display()))?,
            None => SynthConfig::default(),
        };
        cfg.seed = args.seed;
        cfg.n_students = args.students;
        let synth = generate_cohort(&cfg)?;
        write_measures_csv(create(&args.out.join("truth.csv"))?, &synth.truth.measures)?;
        (synth.events, synth.grade_book)
    };
    match args.events_format {
        EventsOut::Jsonl => write_events_jsonl(create(&events_path)?, &events)?,
        EventsOut::Csv => write_events_csv(create(&events_path)?, &events)?,
    }
    write_grades(create(&args.out.join("grades.csv"))?, &grades)?;
    println!(
        "wrote {} events for {} graded students to {}",
        events.len(),
        grades.records.len(),
        args.out.display()
    );
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::IngestCheck(args) => {
            let cfg = load_config(&args)?;
            let summary = pipeline::ingest_check(&cfg)?;
            println!("{}", to_toml(&summary));
        }
        Command::Measures(args) => {
            let cfg = load_config(&args)?;
            let (path, measures) = pipeline::run_measures(&cfg)?;
            println!(
                "wrote {} cells ({} without snapshots) to {}",
                measures.cells.len(),
                measures.coverage_gaps.len(),
                path.display()
            );
        }
        Command::Analyze(args) => {
            let cfg = load_config(&args)?;
            let summary = pipeline::run_pipeline(&cfg)?;
            for exam in summary.table.exams() {
                if let Some(best) = summary.table.best(exam) {
                    println!("exam {exam}: best by BIC' is {}", best.predicted_by);
                }
            }
            println!(
                "analyzed {} events, {} students; wrote {} files to {}",
                summary.events,
                summary.students,
                summary.written.len(),
                cfg.out.display()
            );
        }
        Command::Report(args) => {
            let cfg = load_config(&args)?;
            if !cfg.out.join("report.json").exists() {
                bail!(
                    "report: no report.json in {}; run `analyze` first",
                    cfg.out.display()
                );
            }
            for path in pipeline::rerender_report(&cfg.out, &cfg.formats)? {
                println!("{}", path.display());
            }
        }
        Command::Synth(args) => run_synth(&args)?,
    }
    Ok(())
}

fn to_toml<T: serde::Serialize>(value: &T) -> String {
    toml::to_string(value).unwrap_or_else(|e| format!("<unprintable: {e}>"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
