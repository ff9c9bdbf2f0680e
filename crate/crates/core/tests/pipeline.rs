use std::fs;

use errql_core::config::RunConfig;
use errql_core::diagnostics::ErrorKind;
use errql_core::features::{build_design_matrix, enumerate_models};
use errql_core::ingest::{
    read_events, read_grades, sessionize, write_events_csv, write_events_jsonl, write_grades,
    EventFormat, DEFAULT_IDLE_GAP,
};
use errql_core::measures::{
    compute_measures, read_measures_csv, write_measures_csv, Measure, MeasureOptions,
};
use errql_core::pipeline::run_pipeline;
use errql_core::synth::{generate_cohort, generate_scale_fixture, SynthConfig, COURSE_VOLUME};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small(seed: u64, students: usize) -> SynthConfig {
    SynthConfig {
        seed,
        n_students: students,
        ..Default::default()
    }
}

#[test]
fn file_round_trip_reproduces_ground_truth() {
    let synth = generate_cohort(&small(3, 40)).unwrap();
    for format in [EventFormat::Jsonl, EventFormat::Csv] {
        let mut buf = Vec::new();
        match format {
            EventFormat::Jsonl => write_events_jsonl(&mut buf, &synth.events).unwrap(),
            EventFormat::Csv => write_events_csv(&mut buf, &synth.events).unwrap(),
        }
        let events = read_events(buf.as_slice(), format).unwrap();
        assert_eq!(events, synth.events);

        let mut again = Vec::new();
        match format {
            EventFormat::Jsonl => write_events_jsonl(&mut again, &events).unwrap(),
            EventFormat::Csv => write_events_csv(&mut again, &events).unwrap(),
        }
        assert_eq!(again, buf, "serialization is idempotent");

        let (cohort, _) = sessionize(&events, DEFAULT_IDLE_GAP);
        let measures = compute_measures(&cohort, &MeasureOptions::default());
        assert_eq!(measures.cells, synth.truth.measures.cells);
    }

    let mut grades = Vec::new();
    write_grades(&mut grades, &synth.grade_book).unwrap();
    assert_eq!(read_grades(grades.as_slice()).unwrap(), synth.grade_book);
}

#[test]
fn measures_csv_round_trip() {
    let synth = generate_cohort(&small(4, 15)).unwrap();
    let measures = compute_measures(&synth.cohort(), &MeasureOptions::default());
    let mut buf = Vec::new();
    write_measures_csv(&mut buf, &measures).unwrap();
    let back = read_measures_csv(buf.as_slice()).unwrap();
    assert_eq!(back.cells, measures.cells);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn input_order_and_duplicates_do_not_matter(seed in 0u64..1000) {
        let synth = generate_cohort(&small(seed, 6)).unwrap();
        let (base, _) = sessionize(&synth.events, DEFAULT_IDLE_GAP);
        let mut shuffled = synth.events.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        shuffled.shuffle(&mut rng);
        let dupes: Vec<_> = shuffled.iter().take(5).cloned().collect();
        shuffled.extend(dupes);
        shuffled.shuffle(&mut rng);
        let (cohort, report) = sessionize(&shuffled, DEFAULT_IDLE_GAP);
        prop_assert_eq!(&cohort, &base);
        prop_assert!(report.duplicates_dropped.len() <= 5);
    }
}

#[test]
fn scale_fixture_matches_table_totals() {
    let (events, book) = generate_scale_fixture(&COURSE_VOLUME, 11);
    let (cohort, report) = sessionize(&events, DEFAULT_IDLE_GAP);
    assert_eq!(report.invalid_dropped, 0);
    let cohort = cohort.with_grades(book);
    let measures = compute_measures(&cohort, &MeasureOptions::default());

    for t in COURSE_VOLUME {
        let n = cohort
            .timelines
            .iter()
            .filter(|((_, a), _)| *a == t.assignment)
            .map(|(_, tl)| tl.events.len())
            .sum::<usize>();
        assert_eq!(n, t.snapshots, "HW{}", t.assignment);
        let total = |kind| -> f64 {
            measures
                .cells
                .iter()
                .filter(|((_, a), _)| *a == t.assignment)
                .map(|(_, c)| c.get(Measure::EC, kind))
                .sum()
        };
        assert_eq!(
            total(ErrorKind::Compiler),
            t.compiler_errors as f64,
            "HW{}",
            t.assignment
        );
        assert_eq!(
            total(ErrorKind::Runtime),
            t.runtime_errors as f64,
            "HW{}",
            t.assignment
        );
    }
    assert_eq!(COURSE_VOLUME[0].snapshots, 5763);
    assert_eq!(COURSE_VOLUME[0].compiler_errors, 1969);

    for spec in enumerate_models() {
        let dm = build_design_matrix(&spec, &measures, &cohort.grade_book).unwrap();
        assert_eq!(dm.n(), 280, "{spec}");
    }
}

#[test]
fn low_skill_students_have_higher_eq() {
    let synth = generate_cohort(&small(42, 240)).unwrap();
    let mut thetas: Vec<(f64, &String)> = synth.truth.theta.iter().map(|(s, t)| (*t, s)).collect();
    thetas.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = thetas.len() / 2;
    let mean_eq = |group: &[(f64, &String)]| -> f64 {
        let mut sum = 0.0;
        let mut n = 0;
        for (_, s) in group {
            for a in [3u8, 4, 5, 6, 7, 8] {
                let cell = synth.truth.measures.get(s, a).unwrap();
                sum += cell.get(Measure::EQ, ErrorKind::Compiler)
                    + cell.get(Measure::EQ, ErrorKind::Runtime);
                n += 2;
            }
        }
        sum / n as f64
    };
    assert!(mean_eq(&thetas[..half]) > mean_eq(&thetas[half..]));
}

#[test]
fn analyze_run_is_reproducible_across_directories() {
    let dir = tempfile::tempdir().unwrap();
    let synth = generate_cohort(&small(8, 50)).unwrap();
    let events = dir.path().join("events.csv");
    let grades = dir.path().join("grades.csv");
    write_events_csv(fs::File::create(&events).unwrap(), &synth.events).unwrap();
    write_grades(fs::File::create(&grades).unwrap(), &synth.grade_book).unwrap();

    let run = |out: &str| {
        let cfg = RunConfig {
            events: Some(events.clone()),
            grades: Some(grades.clone()),
            out: dir.path().join(out),
            ..Default::default()
        };
        run_pipeline(&cfg).unwrap();
        cfg.out
    };
    let (a, b) = (run("a"), run("b"));
    for rel in [
        "report.md",
        "report.csv",
        "report.json",
        "measures.csv",
        "inputs.json",
        "fits/exam2-eq-compiler-runtime.json",
    ] {
        assert_eq!(
            fs::read(a.join(rel)).unwrap(),
            fs::read(b.join(rel)).unwrap(),
            "{rel}"
        );
    }
}
