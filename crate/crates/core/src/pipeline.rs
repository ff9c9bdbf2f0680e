//! Stage wiring: ingest → measures → design matrices → fits → report.
//!
//! Output layout under the run directory:
//! `measures.csv`, `design/<model>.csv`, `fits/<model>.json`,
//! `report.{md,csv,json}` and `inputs.json` (input digests and options).

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::features::{build_design_matrix, enumerate_models, DesignMatrix};
use crate::ingest::{
    load_events, load_grades, sessionize, Cohort, EventFormat, SessionizeReport, SnapshotEvent,
    SourceDigest,
};
use crate::measures::{compute_measures, write_measures_csv, MeasureOptions, StudentMeasures};
use crate::rankfit::{fit_rank_regression, FitOptions, RankFit};
use crate::report::{build_results_table, render, ReportFormat, ResultsTable};
use crate::{Error, Result};

/// Loads events (and grades, when configured) and sessionizes them.
pub fn load_cohort(cfg: &RunConfig) -> Result<(Cohort, SessionizeReport)> {
    let events_path = cfg.events_path()?;
    let events = load_events(events_path, EventFormat::from_path(events_path))?;
    let (mut cohort, report) = sessionize(&events, cfg.idle_gap()?);
    cohort = cohort.with_provenance(SourceDigest::of_file(events_path)?);
    if let Some(grades_path) = &cfg.grades {
        cohort = cohort
            .with_grades(load_grades(grades_path)?)
            .with_provenance(SourceDigest::of_file(grades_path)?);
    }
    log::info!(
        "loaded {} events ({} invalid, {} duplicates dropped)",
        cohort.event_count(),
        report.invalid_dropped,
        report.duplicates_dropped.len()
    );
    Ok((cohort, report))
}

/// Everything the analysis produces, in canonical model order.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub measures: StudentMeasures,
    pub designs: Vec<DesignMatrix>,
    pub fits: Vec<RankFit>,
    pub table: ResultsTable,
}

/// Builds the 14 design matrices and fits them in parallel.
pub fn fit_models(
    cohort: &Cohort,
    measures: &StudentMeasures,
    opts: &FitOptions,
) -> Result<(Vec<DesignMatrix>, Vec<RankFit>)> {
    let specs = enumerate_models();
    let designs = specs
        .iter()
        .map(|spec| build_design_matrix(spec, measures, &cohort.grade_book))
        .collect::<Result<Vec<_>, _>>()?;
    // Collecting an indexed parallel iterator keeps model order.
    let fits = designs
        .par_iter()
        .map(|dm| {
            fit_rank_regression(dm, opts).map_err(|source| Error::Fit {
                spec: dm.spec.to_string(),
                source,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((designs, fits))
}

pub fn analyze(
    cohort: &Cohort,
    measure_opts: &MeasureOptions,
    fit_opts: &FitOptions,
) -> Result<Analysis> {
    if cohort.grade_book.records.is_empty() {
        return Err(Error::Config(
            "analysis needs a grade book with at least one student".into(),
        ));
    }
    let measures = compute_measures(cohort, measure_opts);
    let (designs, fits) = fit_models(cohort, &measures, fit_opts)?;
    let table = build_results_table(&fits)?;
    Ok(Analysis {
        measures,
        designs,
        fits,
        table,
    })
}

fn write_file(stage: &'static str, path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(Error::io(stage, dir))?;
    }
    fs::write(path, bytes).map_err(Error::io(stage, path))
}

pub fn write_measures(path: &Path, measures: &StudentMeasures) -> Result<()> {
    let mut buf = Vec::new();
    write_measures_csv(&mut buf, measures).map_err(|e| Error::io("measures", path)(e.into()))?;
    write_file("measures", path, &buf)
}

pub fn write_report(
    out: &Path,
    table: &ResultsTable,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for &format in formats {
        let path = out.join(format!("report.{}", format.extension()));
        write_file("report", &path, render(table, format).as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// Re-renders the report of an earlier run from its `report.json`.
pub fn rerender_report(out: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>> {
    let path = out.join("report.json");
    let text = fs::read_to_string(&path).map_err(Error::io("report", &path))?;
    let table: ResultsTable = serde_json::from_str(&text).map_err(|e| {
        Error::io("report", &path)(std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    })?;
    write_report(out, &table, formats)
}

#[derive(Serialize)]
struct InputsRecord<'a> {
    inputs: Vec<InputDigest<'a>>,
    idle_gap_minutes: f64,
    measure_options: &'a MeasureOptions,
    fit_options: &'a FitOptions,
    invalid_dropped: usize,
    duplicates_dropped: &'a [String],
}

#[derive(Serialize)]
struct InputDigest<'a> {
    file: String,
    sha256: &'a str,
}

pub fn write_analysis(
    out: &Path,
    analysis: &Analysis,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let measures_path = out.join("measures.csv");
    write_measures(&measures_path, &analysis.measures)?;
    written.push(measures_path);
    for (dm, fit) in analysis.designs.iter().zip(&analysis.fits) {
        let id = dm.spec.id();
        let path = out.join("design").join(format!("{id}.csv"));
        let mut buf = Vec::new();
        dm.write_csv(&mut buf)
            .map_err(|e| Error::io("features", &path)(e.into()))?;
        write_file("features", &path, &buf)?;
        written.push(path);

        let path = out.join("fits").join(format!("{id}.json"));
        let mut text = serde_json::to_string_pretty(&fit.to_json()).expect("fit serializes");
        text.push('\n');
        write_file("fit", &path, text.as_bytes())?;
        written.push(path);
    }
    written.extend(write_report(out, &analysis.table, formats)?);
    Ok(written)
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub events: usize,
    pub students: usize,
    pub written: Vec<PathBuf>,
    pub table: ResultsTable,
}

/// The `analyze` pipeline: reads inputs named in `cfg`, writes every
/// artifact under `cfg.out`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.grades_path()?;
    let measure_opts = cfg.measure_options()?;
    let fit_opts = cfg.fit_options();
    let (cohort, report) = load_cohort(cfg)?;
    let analysis = analyze(&cohort, &measure_opts, &fit_opts)?;
    let mut written = write_analysis(&cfg.out, &analysis, &cfg.formats)?;

    let record = InputsRecord {
        inputs: cohort
            .provenance
            .iter()
            .map(|d| InputDigest {
                file: Path::new(&d.path)
                    .file_name()
                    .map_or_else(|| d.path.clone(), |f| f.to_string_lossy().into_owned()),
                sha256: &d.sha256,
            })
            .collect(),
        idle_gap_minutes: cfg.idle_gap_minutes,
        measure_options: &measure_opts,
        fit_options: &fit_opts,
        invalid_dropped: report.invalid_dropped,
        duplicates_dropped: &report.duplicates_dropped,
    };
    let path = cfg.out.join("inputs.json");
    let mut text = serde_json::to_string_pretty(&record).expect("record serializes");
    text.push('\n');
    write_file("pipeline", &path, text.as_bytes())?;
    written.push(path);

    Ok(RunSummary {
        events: cohort.event_count(),
        students: cohort.grade_book.records.len(),
        written,
        table: analysis.table,
    })
}

/// The `measures` pipeline: writes `measures.csv` only.
pub fn run_measures(cfg: &RunConfig) -> Result<(PathBuf, StudentMeasures)> {
    let opts = cfg.measure_options()?;
    let (cohort, _) = load_cohort(cfg)?;
    let measures = compute_measures(&cohort, &opts);
    let path = cfg.out.join("measures.csv");
    write_measures(&path, &measures)?;
    Ok((path, measures))
}

/// Validation summary for `ingest-check`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestSummary {
    pub events_read: usize,
    pub events_kept: usize,
    pub invalid_dropped: usize,
    pub duplicates_dropped: usize,
    pub timelines: usize,
    pub sessions: usize,
    pub students_graded: usize,
    pub students_skipped: usize,
    pub unparsed_diagnostics: usize,
}

pub fn ingest_check(cfg: &RunConfig) -> Result<IngestSummary> {
    let events_path = cfg.events_path()?;
    let events = load_events(events_path, EventFormat::from_path(events_path))?;
    let (cohort, report) = sessionize(&events, cfg.idle_gap()?);
    let grade_book = match &cfg.grades {
        Some(path) => Some(load_grades(path)?),
        None => None,
    };
    Ok(IngestSummary {
        events_read: events.len(),
        events_kept: cohort.event_count(),
        invalid_dropped: report.invalid_dropped,
        duplicates_dropped: report.duplicates_dropped.len(),
        timelines: cohort.timelines.len(),
        sessions: cohort
            .timelines
            .values()
            .map(|t| t.session_starts.len() + 1)
            .sum(),
        students_graded: grade_book.as_ref().map_or(0, |g| g.records.len()),
        students_skipped: grade_book.as_ref().map_or(0, |g| g.skipped.len()),
        unparsed_diagnostics: cohort.events().map(unparsed_blocks).sum(),
    })
}

fn unparsed_blocks(ev: &SnapshotEvent) -> usize {
    let compiler = ev
        .compiler_diagnostics
        .iter()
        .filter(|b| crate::diagnostics::parse_compiler_output(b).is_err())
        .count();
    let runtime = ev
        .runtime_traces
        .iter()
        .filter(|t| crate::diagnostics::parse_runtime_trace(t).is_err())
        .count();
    compiler + runtime
}
