//! Dataset ingestion and correlation-based evaluation of the grader.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grader::{grade_texts, GradeFlag, GradeResult, GraderConfig};
use crate::text::{embeddings_for_dim, EmbeddingTable, PreprocessConfig, DIM_PLACEHOLDER};

/// Column names of the canonical dataset CSV, in order.
pub const DATASET_COLUMNS: [&str; 7] = [
    "id",
    "question",
    "desired_answer",
    "student_answer",
    "score_teacher1",
    "score_teacher2",
    "score_avg",
];

const AVERAGE_TOL: f64 = 1e-9;

/// One graded student answer. `record_id` is the question id, shared by
/// every answer to the same question.
#[derive(Debug, Clone, PartialEq)]
pub struct AnswerRecord {
    pub record_id: String,
    pub question: String,
    pub desired_answer: String,
    pub student_answer: String,
    pub grade_teacher1: Option<f64>,
    pub grade_teacher2: Option<f64>,
    pub grade_avg: f64,
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<AnswerRecord>> {
    read_dataset(std::fs::File::open(path)?)
}

pub fn read_dataset<R: Read>(reader: R) -> Result<Vec<AnswerRecord>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut index = [0usize; 7];
    for (slot, name) in index.iter_mut().zip(DATASET_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))?;
    }

    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        // 1-based, counting the header as row 1
        let row_no = i + 2;
        let row = row?;
        let field = |k: usize| -> Result<&str> {
            row.get(index[k]).ok_or_else(|| Error::MalformedRow {
                row: row_no,
                reason: format!("missing field `{}`", DATASET_COLUMNS[k]),
            })
        };
        let score = |k: usize| -> Result<Option<f64>> {
            let raw = field(k)?.trim();
            if raw.is_empty() {
                return Ok(None);
            }
            let v: f64 = raw.parse().map_err(|_| Error::MalformedRow {
                row: row_no,
                reason: format!("`{}` is not a number: `{raw}`", DATASET_COLUMNS[k]),
            })?;
            if !(0.0..=5.0).contains(&v) {
                return Err(Error::MalformedRow {
                    row: row_no,
                    reason: format!("`{}` = {v} outside [0, 5]", DATASET_COLUMNS[k]),
                });
            }
            Ok(Some(v))
        };
        let t1 = score(4)?;
        let t2 = score(5)?;
        let avg = score(6)?.ok_or_else(|| Error::MalformedRow {
            row: row_no,
            reason: "empty `score_avg`".into(),
        })?;
        if let (Some(t1), Some(t2)) = (t1, t2) {
            if ((t1 + t2) / 2.0 - avg).abs() > AVERAGE_TOL {
                return Err(Error::MalformedRow {
                    row: row_no,
                    reason: format!("score_avg {avg} is not the mean of {t1} and {t2}"),
                });
            }
        }
        records.push(AnswerRecord {
            record_id: field(0)?.trim().to_owned(),
            question: field(1)?.to_owned(),
            desired_answer: field(2)?.to_owned(),
            student_answer: field(3)?.to_owned(),
            grade_teacher1: t1,
            grade_teacher2: t2,
            grade_avg: avg,
        });
    }
    Ok(records)
}

/// Sample Pearson correlation. A constant input has no defined correlation
/// and is reported as [`Error::DegenerateInput`].
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} values", x.len()),
            found: format!("{} values", y.len()),
        });
    }
    if x.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "pearson needs at least 2 points, got {}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput(
            "pearson of a constant vector is undefined".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalConfig {
    pub preprocess: PreprocessConfig,
    pub grader: GraderConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n_pairs: usize,
    pub pearson_r: f64,
    /// `None` where a question's grades (model or gold) are constant.
    pub per_question_r: BTreeMap<String, Option<f64>>,
    pub flag_counts: BTreeMap<GradeFlag, usize>,
    /// Grades in input order.
    pub grades: Vec<GradeResult>,
}

impl EvalReport {
    /// Plain-text `key=value` lines.
    pub fn to_key_values(&self, per_question: bool) -> String {
        let mut out = String::new();
        writeln!(out, "n_pairs={}", self.n_pairs).unwrap();
        writeln!(out, "pearson_r={}", self.pearson_r).unwrap();
        for flag in GradeFlag::ALL {
            let count = self.flag_counts.get(&flag).copied().unwrap_or(0);
            writeln!(out, "flag.{flag}={count}").unwrap();
        }
        if per_question {
            for (q, r) in &self.per_question_r {
                match r {
                    Some(r) => writeln!(out, "question.{q}.pearson_r={r}").unwrap(),
                    None => writeln!(out, "question.{q}.pearson_r=undefined").unwrap(),
                }
            }
        }
        out
    }
}

/// Grades every record and correlates the grades with `grade_avg`.
pub fn evaluate(
    records: &[AnswerRecord],
    table: &EmbeddingTable,
    config: &EvalConfig,
) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(Error::DegenerateInput("no records to evaluate".into()));
    }
    config.preprocess.validate()?;
    config.grader.cca.validate()?;
    let grades: Vec<GradeResult> = records
        .par_iter()
        .map(|r| {
            grade_texts(
                &r.desired_answer,
                &r.student_answer,
                table,
                &config.preprocess,
                &config.grader,
            )
        })
        .collect();
    summarize(records, grades)
}

/// Builds the report from grades already computed for `records`.
pub fn summarize(records: &[AnswerRecord], grades: Vec<GradeResult>) -> Result<EvalReport> {
    let model: Vec<f64> = grades.iter().map(|g| g.grade).collect();
    let gold: Vec<f64> = records.iter().map(|r| r.grade_avg).collect();
    let pearson_r = pearson(&model, &gold)?;

    let mut by_question: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (r, g) in records.iter().zip(&model) {
        let entry = by_question.entry(r.record_id.as_str()).or_default();
        entry.0.push(*g);
        entry.1.push(r.grade_avg);
    }
    let per_question_r = by_question
        .into_iter()
        .map(|(q, (m, g))| (q.to_owned(), pearson(&m, &g).ok()))
        .collect();

    let mut flag_counts = BTreeMap::new();
    for flag in grades.iter().flat_map(|g| g.flags.iter()) {
        *flag_counts.entry(*flag).or_insert(0) += 1;
    }
    Ok(EvalReport {
        n_pairs: records.len(),
        pearson_r,
        per_question_r,
        flag_counts,
        grades,
    })
}

/// Dimension used when the embeddings path has a `{dim}` placeholder and no
/// dimension is requested.
pub const DEFAULT_EMBEDDING_DIM: usize = 300;

/// Inputs of one `eval` run.
#[derive(Debug, Clone)]
pub struct EvalRun<'a> {
    /// Embedding file, optionally with a `{dim}` placeholder.
    pub embeddings: &'a str,
    pub dim: Option<usize>,
    /// Extra dimensions to evaluate; only Pearson r is reported for them.
    pub sweep_dims: &'a [usize],
    pub per_question: bool,
    pub config: EvalConfig,
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    /// The `key=value` report printed by the CLI.
    pub text: String,
    pub embedding_dim: usize,
    pub report: EvalReport,
    pub sweep: Vec<(usize, f64)>,
}

pub fn run_eval(records: &[AnswerRecord], run: &EvalRun<'_>) -> Result<EvalOutput> {
    let placeholder = run.embeddings.contains(DIM_PLACEHOLDER);
    let dim = run.dim.or(placeholder.then_some(DEFAULT_EMBEDDING_DIM));
    let table = embeddings_for_dim(run.embeddings, dim)?;
    let report = evaluate(records, &table, &run.config)?;

    let mut sweep = Vec::with_capacity(run.sweep_dims.len());
    for &d in run.sweep_dims {
        let r = if d == table.dimension() {
            report.pearson_r
        } else if placeholder {
            evaluate(
                records,
                &embeddings_for_dim(run.embeddings, Some(d))?,
                &run.config,
            )?
            .pearson_r
        } else {
            evaluate(records, &table.truncated(d)?, &run.config)?.pearson_r
        };
        sweep.push((d, r));
    }

    let mut text = format!("embedding_dim={}\n", table.dimension());
    text.push_str(&report.to_key_values(run.per_question));
    for (d, r) in &sweep {
        writeln!(text, "sweep.{d}.pearson_r={r}").unwrap();
    }
    Ok(EvalOutput {
        text,
        embedding_dim: table.dimension(),
        report,
        sweep,
    })
}
