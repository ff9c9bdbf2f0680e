//! The model grid (which exam, which predictors) and design matrices that
//! join per-student measures with exam grades.

use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diagnostics::ErrorKind;
use crate::ingest::{GradeBook, SkippedStudent};
use crate::measures::{Measure, StudentMeasures};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PredictorFamily {
    EC,
    EQ,
    RED,
    HwGrades,
}

impl PredictorFamily {
    pub fn measure(self) -> Option<Measure> {
        match self {
            PredictorFamily::EC => Some(Measure::EC),
            PredictorFamily::EQ => Some(Measure::EQ),
            PredictorFamily::RED => Some(Measure::RED),
            PredictorFamily::HwGrades => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ErrorKinds {
    CompilerOnly,
    CompilerAndRuntime,
    /// Homework-grade benchmark models use no error stream.
    NotApplicable,
}

impl ErrorKinds {
    pub fn kinds(self) -> &'static [ErrorKind] {
        match self {
            ErrorKinds::CompilerOnly => &[ErrorKind::Compiler],
            ErrorKinds::CompilerAndRuntime => &[ErrorKind::Compiler, ErrorKind::Runtime],
            ErrorKinds::NotApplicable => &[],
        }
    }
}

/// One regression of the comparison grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub exam: u8,
    pub family: PredictorFamily,
    pub kinds: ErrorKinds,
}

impl ModelSpec {
    /// Homework assignments due before the exam.
    pub fn assignments(&self) -> &'static [u8] {
        match self.exam {
            1 => &[3, 4],
            _ => &[3, 4, 5, 6, 7, 8],
        }
    }

    /// Predictor labels in column order: `c_k` then `r_k`, or `hw_k`.
    pub fn labels(&self) -> Vec<String> {
        if self.family == PredictorFamily::HwGrades {
            return self
                .assignments()
                .iter()
                .map(|k| format!("hw{k}"))
                .collect();
        }
        self.kinds
            .kinds()
            .iter()
            .flat_map(|kind| {
                let prefix = match kind {
                    ErrorKind::Compiler => 'c',
                    ErrorKind::Runtime => 'r',
                };
                self.assignments()
                    .iter()
                    .map(move |k| format!("{prefix}{k}"))
            })
            .collect()
    }

    /// Number of slope predictors.
    pub fn p(&self) -> usize {
        self.labels().len()
    }

    /// Row label such as `EQ (compiler + runtime)`.
    pub fn predicted_by(&self) -> String {
        match (self.family, self.kinds) {
            (PredictorFamily::HwGrades, _) => "HW grades (benchmark)".to_string(),
            (family, ErrorKinds::CompilerOnly) => format!("{family:?} (compiler)"),
            (family, _) => format!("{family:?} (compiler + runtime)"),
        }
    }

    /// File-name friendly identifier, e.g. `exam1-eq-compiler`.
    pub fn id(&self) -> String {
        let family = match self.family {
            PredictorFamily::HwGrades => "hw",
            PredictorFamily::EC => "ec",
            PredictorFamily::EQ => "eq",
            PredictorFamily::RED => "red",
        };
        let kinds = match self.kinds {
            ErrorKinds::CompilerOnly => "-compiler",
            ErrorKinds::CompilerAndRuntime => "-compiler-runtime",
            ErrorKinds::NotApplicable => "",
        };
        format!("exam{}-{family}{kinds}", self.exam)
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}, exam {}", self.predicted_by(), self.exam)
    }
}

/// The 14 models: each error measure with compiler-only and
/// compiler + runtime predictors for both exams, then the homework-grade
/// benchmark for both exams.
pub fn enumerate_models() -> Vec<ModelSpec> {
    let mut specs = Vec::with_capacity(14);
    for family in [
        PredictorFamily::EC,
        PredictorFamily::EQ,
        PredictorFamily::RED,
    ] {
        for kinds in [ErrorKinds::CompilerOnly, ErrorKinds::CompilerAndRuntime] {
            for exam in [1, 2] {
                specs.push(ModelSpec {
                    exam,
                    family,
                    kinds,
                });
            }
        }
    }
    for exam in [1, 2] {
        specs.push(ModelSpec {
            exam,
            family: PredictorFamily::HwGrades,
            kinds: ErrorKinds::NotApplicable,
        });
    }
    specs
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureError {
    #[error("{spec}: assignment {assignment} has no measures")]
    MissingAssignment { spec: String, assignment: u8 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub spec: ModelSpec,
    /// Row keys, sorted.
    pub student_ids: Vec<String>,
    pub y: DVector<f64>,
    /// n × p, columns in `labels` order.
    pub x: DMatrix<f64>,
    pub labels: Vec<String>,
    pub excluded: Vec<SkippedStudent>,
}

impl DesignMatrix {
    /// Builds a matrix directly from data, e.g. for simulations.
    pub fn from_parts(
        spec: ModelSpec,
        y: DVector<f64>,
        x: DMatrix<f64>,
        labels: Vec<String>,
    ) -> Self {
        assert_eq!(y.len(), x.nrows(), "response and design row counts differ");
        assert_eq!(labels.len(), x.ncols(), "one label per column");
        let student_ids = (0..y.len()).map(|i| format!("row{i}")).collect();
        DesignMatrix {
            spec,
            student_ids,
            y,
            x,
            labels,
            excluded: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["student_id".to_string(), "y".to_string()];
        header.extend(self.labels.iter().cloned());
        wtr.write_record(&header)?;
        for (i, id) in self.student_ids.iter().enumerate() {
            let mut row = vec![id.clone(), self.y[i].to_string()];
            row.extend(self.x.row(i).iter().map(|v| v.to_string()));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Materializes the design matrix of `spec`.
///
/// Rows are the grade book's model set in student-id order. Measure cells
/// that are absent (no snapshots) count as 0; a benchmark row with a missing
/// homework grade is excluded and reported.
pub fn build_design_matrix(
    spec: &ModelSpec,
    measures: &StudentMeasures,
    grades: &GradeBook,
) -> Result<DesignMatrix, FeatureError> {
    let labels = spec.labels();
    if spec.family != PredictorFamily::HwGrades {
        if let Some(&assignment) = spec
            .assignments()
            .iter()
            .find(|a| !measures.observed_assignments.contains(a))
        {
            return Err(FeatureError::MissingAssignment {
                spec: spec.to_string(),
                assignment,
            });
        }
    }

    let mut excluded = grades.skipped.clone();
    let mut student_ids = Vec::new();
    let mut ys = Vec::new();
    let mut cells: Vec<f64> = Vec::new();

    for (student, record) in &grades.records {
        let row: Option<Vec<f64>> = match spec.family.measure() {
            Some(measure) => Some(
                spec.kinds
                    .kinds()
                    .iter()
                    .flat_map(|&kind| {
                        spec.assignments().iter().map(move |&a| {
                            measures
                                .get(student, a)
                                .map_or(0.0, |cell| cell.get(measure, kind))
                        })
                    })
                    .collect(),
            ),
            None => spec
                .assignments()
                .iter()
                .map(|&a| record.homework(a))
                .collect(),
        };
        match row {
            Some(row) => {
                student_ids.push(student.clone());
                ys.push(record.exam(spec.exam));
                cells.extend(row);
            }
            None => excluded.push(SkippedStudent {
                student_id: student.clone(),
                reason: "missing homework grade".into(),
            }),
        }
    }
    excluded.sort_by(|a, b| a.student_id.cmp(&b.student_id));

    let n = student_ids.len();
    let x = DMatrix::from_row_slice(n, labels.len(), &cells);
    Ok(DesignMatrix {
        spec: *spec,
        student_ids,
        y: DVector::from_vec(ys),
        x,
        labels,
        excluded,
    })
}
