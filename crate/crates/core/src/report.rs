//! Comparison table of the fitted models with BIC′ evidence judgments.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::features::{enumerate_models, ModelSpec};
use crate::rankfit::{stars, RankFit};

/// BIC′ differences above this are strong evidence for the lower model.
pub const STRONG_EVIDENCE_DELTA: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReportError {
    #[error("no fit for model {0}")]
    MissingFit(String),
    #[error("unknown report format `{0}` (expected csv, json or markdown)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    FavorsFirst,
    FavorsSecond,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BicEvidence {
    pub delta: f64,
    pub verdict: Verdict,
}

/// Strong evidence for the lower BIC′ iff |a − b| > 6; exactly 6 is
/// inconclusive.
pub fn compare_bic(a: f64, b: f64) -> BicEvidence {
    let delta = (a - b).abs();
    let verdict = if delta > STRONG_EVIDENCE_DELTA {
        if a < b {
            Verdict::FavorsFirst
        } else {
            Verdict::FavorsSecond
        }
    } else {
        Verdict::Inconclusive
    };
    BicEvidence { delta, verdict }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigPredictor {
    pub label: String,
    pub stars: String,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub spec: ModelSpec,
    pub id: String,
    pub exam: u8,
    pub predicted_by: String,
    pub n: usize,
    pub p: usize,
    pub significant: Vec<SigPredictor>,
    pub model_f: f64,
    pub model_f_p: f64,
    pub model_f_stars: String,
    pub r2: f64,
    pub bic_prime: Option<f64>,
    pub converged: bool,
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseBic {
    pub exam: u8,
    pub first: String,
    pub second: String,
    pub evidence: BicEvidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub rows: Vec<ModelRow>,
    pub comparisons: Vec<PairwiseBic>,
}

impl ResultsTable {
    pub fn best(&self, exam: u8) -> Option<&ModelRow> {
        self.rows.iter().find(|r| r.exam == exam && r.best)
    }

    pub fn exams(&self) -> Vec<u8> {
        let mut exams: Vec<u8> = self.rows.iter().map(|r| r.exam).collect();
        exams.sort_unstable();
        exams.dedup();
        exams
    }
}

fn row_of(fit: &RankFit) -> ModelRow {
    ModelRow {
        spec: fit.spec,
        id: fit.spec.id(),
        exam: fit.spec.exam,
        predicted_by: fit.spec.predicted_by(),
        n: fit.n,
        p: fit.p(),
        significant: fit
            .coef_tests
            .iter()
            .filter(|c| !c.stars.is_empty())
            .map(|c| SigPredictor {
                label: c.label.clone(),
                stars: c.stars.clone(),
                estimate: c.est,
            })
            .collect(),
        model_f: fit.model_f.stat,
        model_f_p: fit.model_f.p,
        model_f_stars: stars(fit.model_f.p).to_string(),
        r2: fit.robust_r2,
        bic_prime: fit.bic_prime,
        converged: fit.converged,
        best: false,
    }
}

// A missing BIC′ means R² = 1, which beats any finite value.
fn bic_key(row: &ModelRow) -> f64 {
    row.bic_prime.unwrap_or(f64::NEG_INFINITY)
}

/// Assembles the table in canonical model order, whatever order the fits
/// arrive in.
pub fn build_results_table(fits: &[RankFit]) -> Result<ResultsTable, ReportError> {
    let mut rows = Vec::with_capacity(14);
    for spec in enumerate_models() {
        let fit = fits
            .iter()
            .find(|f| f.spec == spec)
            .ok_or_else(|| ReportError::MissingFit(spec.to_string()))?;
        rows.push(row_of(fit));
    }

    let mut comparisons = Vec::new();
    for exam in [1u8, 2] {
        let idx: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].exam == exam).collect();
        let best = idx.iter().copied().min_by(|&a, &b| {
            bic_key(&rows[a])
                .total_cmp(&bic_key(&rows[b]))
                .then(rows[a].p.cmp(&rows[b].p))
                .then(a.cmp(&b))
        });
        if let Some(b) = best {
            rows[b].best = true;
        }
        for (k, &i) in idx.iter().enumerate() {
            for &j in &idx[k + 1..] {
                if let (Some(a), Some(b)) = (rows[i].bic_prime, rows[j].bic_prime) {
                    comparisons.push(PairwiseBic {
                        exam,
                        first: rows[i].id.clone(),
                        second: rows[j].id.clone(),
                        evidence: compare_bic(a, b),
                    });
                }
            }
        }
    }
    Ok(ResultsTable { rows, comparisons })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [
        ReportFormat::Markdown,
        ReportFormat::Csv,
        ReportFormat::Json,
    ];

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Markdown => "md",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(ReportError::UnknownFormat(other.to_string())),
        }
    }
}

fn with_stars(value: String, stars: &str) -> String {
    if stars.is_empty() {
        value
    } else {
        format!("{value} ({stars})")
    }
}

fn sig_list(row: &ModelRow) -> String {
    if row.significant.is_empty() {
        return "none".to_string();
    }
    row.significant
        .iter()
        .map(|s| format!("{} ({})", s.label, s.stars))
        .collect::<Vec<_>>()
        .join(", ")
}

fn fmt_bic(v: Option<f64>) -> String {
    v.map_or_else(|| "-inf".to_string(), |v| format!("{v:.2}"))
}

fn verdict_text(c: &PairwiseBic) -> String {
    match c.evidence.verdict {
        Verdict::FavorsFirst => format!("strong evidence for {}", c.first),
        Verdict::FavorsSecond => format!("strong evidence for {}", c.second),
        Verdict::Inconclusive => "inconclusive".to_string(),
    }
}

pub fn render(table: &ResultsTable, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(table).expect("table serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => render_csv(table),
        ReportFormat::Markdown => render_markdown(table),
    }
}

fn render_csv(table: &ResultsTable) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "exam",
        "predicted_by",
        "model_id",
        "n",
        "p",
        "sig_predictors",
        "model_f",
        "model_f_stars",
        "r2",
        "bic_prime",
        "best",
    ])
    .expect("in-memory write");
    for row in &table.rows {
        wtr.write_record([
            row.exam.to_string(),
            row.predicted_by.clone(),
            row.id.clone(),
            row.n.to_string(),
            row.p.to_string(),
            sig_list(row),
            format!("{:.2}", row.model_f),
            row.model_f_stars.clone(),
            format!("{:.3}", row.r2),
            fmt_bic(row.bic_prime),
            row.best.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn render_markdown(table: &ResultsTable) -> String {
    let mut out = String::from("# Regression results\n");
    for exam in table.exams() {
        let rows: Vec<&ModelRow> = table.rows.iter().filter(|r| r.exam == exam).collect();
        let hw = rows[0].spec.assignments();
        let (lo, hi) = (
            rows.iter().map(|r| r.n).min().unwrap_or(0),
            rows.iter().map(|r| r.n).max().unwrap_or(0),
        );
        let n = if lo == hi {
            lo.to_string()
        } else {
            format!("{lo}-{hi}")
        };
        let _ = writeln!(
            out,
            "\n## Exam {exam} (HW {}-{}), n = {n}\n",
            hw[0],
            hw[hw.len() - 1]
        );
        out.push_str("| Predicted by | Sig. predictors | Model F | R² | BIC' |\n");
        out.push_str("|---|---|---:|---:|---:|\n");
        for row in &rows {
            let marker = if row.best { " (best)" } else { "" };
            let _ = writeln!(
                out,
                "| {}{marker} | {} | {} | {:.3} | {} |",
                row.predicted_by,
                sig_list(row),
                with_stars(format!("{:.2}", row.model_f), &row.model_f_stars),
                row.r2,
                fmt_bic(row.bic_prime),
            );
        }
        let unconverged: Vec<&str> = rows
            .iter()
            .filter(|r| !r.converged)
            .map(|r| r.id.as_str())
            .collect();
        if !unconverged.is_empty() {
            let _ = writeln!(out, "\nNot converged: {}", unconverged.join(", "));
        }
        if let Some(best) = table.best(exam) {
            let _ = writeln!(
                out,
                "\nBest by BIC': {} ({})",
                best.predicted_by,
                fmt_bic(best.bic_prime)
            );
        }
        out.push_str("\n| Model A | Model B | ΔBIC' | Evidence |\n|---|---|---:|---|\n");
        for c in table.comparisons.iter().filter(|c| c.exam == exam) {
            let _ = writeln!(
                out,
                "| {} | {} | {:.2} | {} |",
                c.first,
                c.second,
                c.evidence.delta,
                verdict_text(c)
            );
        }
    }
    out.push_str("\nSignificance: (***) < 0.001 < (**) < 0.01 < (*) < 0.05\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rankfit::{CoefTest, ModelF};

    fn fake_fit(spec: ModelSpec, r2: f64, bic: f64) -> RankFit {
        let labels = spec.labels();
        RankFit {
            spec,
            n: 280,
            beta: vec![-1.0; labels.len()],
            coef_tests: labels
                .iter()
                .enumerate()
                .map(|(i, l)| CoefTest {
                    label: l.clone(),
                    est: -1.0,
                    se: 0.1,
                    t: -10.0,
                    p: if i == 0 { 0.0005 } else { 0.2 },
                    stars: if i == 0 { "***".into() } else { String::new() },
                })
                .collect(),
            labels,
            intercept: 80.0,
            dispersion_at_fit: 1.0,
            dispersion_null: 2.0,
            tau_hat: 10.0,
            robust_r2: r2,
            model_f: ModelF {
                stat: 9.8123,
                df1: spec.p(),
                df2: 280 - spec.p() - 1,
                p: 0.0001,
            },
            bic_prime: Some(bic),
            converged: true,
            iterations: 3,
        }
    }

    fn fits() -> Vec<RankFit> {
        let bics = [
            -6.02, 2.07, -2.78, -3.15, -19.39, -10.95, -15.04, -7.83, -8.65, 5.59, -4.91, 3.69,
            -31.23, -34.02,
        ];
        enumerate_models()
            .into_iter()
            .zip(bics)
            .map(|(s, b)| fake_fit(s, 0.1, b))
            .collect()
    }

    #[test]
    fn compare_bic_cases() {
        let e = compare_bic(-19.39, -6.02);
        assert_eq!(e.verdict, Verdict::FavorsFirst);
        assert!((e.delta - 13.37).abs() < 1e-9);
        let e = compare_bic(-3.0, -8.0);
        assert_eq!(e.verdict, Verdict::Inconclusive);
        assert_eq!(e.delta, 5.0);
        assert_eq!(compare_bic(0.0, 6.0).verdict, Verdict::Inconclusive);
        assert_eq!(
            compare_bic(2.5, 2.5),
            BicEvidence {
                delta: 0.0,
                verdict: Verdict::Inconclusive
            }
        );
        let e = compare_bic(-19.39, -8.65);
        assert!((e.delta - 10.74).abs() < 1e-9);
        assert_eq!(e.verdict, Verdict::FavorsFirst);
        assert_eq!(compare_bic(-8.65, -19.39).verdict, Verdict::FavorsSecond);
    }

    #[test]
    fn fourteen_rows_and_best_markers() {
        let table = build_results_table(&fits()).unwrap();
        assert_eq!(table.rows.len(), 14);
        assert_eq!(table.best(1).unwrap().id, "exam1-hw");
        assert_eq!(table.best(2).unwrap().id, "exam2-hw");
        assert_eq!(table.rows.iter().filter(|r| r.best).count(), 2);
        assert_eq!(table.comparisons.len(), 2 * 21);
    }

    #[test]
    fn ties_prefer_fewer_predictors() {
        let mut fits = fits();
        // exam 1: EQ compiler (p = 2) and EQ compiler + runtime (p = 4) tie.
        for f in fits.iter_mut().filter(|f| f.spec.exam == 1) {
            f.bic_prime = Some(if f.spec.family == crate::features::PredictorFamily::EQ {
                -50.0
            } else {
                0.0
            });
        }
        let table = build_results_table(&fits).unwrap();
        assert_eq!(table.best(1).unwrap().id, "exam1-eq-compiler");
    }

    #[test]
    fn shuffled_input_gives_identical_table() {
        let fits = fits();
        let mut shuffled = fits.clone();
        shuffled.reverse();
        shuffled.swap(2, 9);
        assert_eq!(
            build_results_table(&fits).unwrap(),
            build_results_table(&shuffled).unwrap()
        );
    }

    #[test]
    fn missing_fit_names_the_spec() {
        let mut fits = fits();
        fits.remove(4);
        match build_results_table(&fits) {
            Err(ReportError::MissingFit(name)) => assert_eq!(name, "EQ (compiler), exam 1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn markdown_columns_and_stability() {
        let table = build_results_table(&fits()).unwrap();
        let md = render(&table, ReportFormat::Markdown);
        assert!(md.contains("| Predicted by | Sig. predictors | Model F | R² | BIC' |"));
        assert!(md.contains("| EQ (compiler) | c3 (***) | 9.81 (***) | 0.100 | -19.39 |"));
        assert_eq!(md, render(&table, ReportFormat::Markdown));
    }

    #[test]
    fn csv_quotes_lists() {
        let mut fits = fits();
        fits[1].coef_tests[1].stars = "*".into();
        let table = build_results_table(&fits).unwrap();
        let csv = render(&table, ReportFormat::Csv);
        assert_eq!(csv.lines().count(), 15);
        assert!(csv.contains(",\"c3 (***), c4 (*)\","));
        let mut rdr = csv::Reader::from_reader(csv.as_bytes());
        let records: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
        assert_eq!(records.len(), 14);
        assert_eq!(&records[1][5], "c3 (***), c4 (*)");
    }

    #[test]
    fn unknown_format() {
        assert!(matches!(
            "pdf".parse::<ReportFormat>(),
            Err(ReportError::UnknownFormat(_))
        ));
        assert_eq!(
            "md".parse::<ReportFormat>().unwrap(),
            ReportFormat::Markdown
        );
    }
}
