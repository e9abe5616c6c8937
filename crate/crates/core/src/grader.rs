//! Similarity grading of a desired answer against a student answer.
//!
//! CCA is fitted on the pair alone, both answers are projected onto the
//! canonical directions, and the cosine similarity of each matched pair of
//! projection columns is averaged. The grade is that mean scaled to the
//! 0 to 5 range, with negative means clamped to zero.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{DMatrix, DVectorView};

use crate::cca::{fit_cca, CcaConfig, CcaModel};
use crate::error::Error;
use crate::matrix::DataMatrix;
use crate::text::{embed, preprocess, EmbeddingTable, PreprocessConfig, SentenceMatrix};

pub const MAX_GRADE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CosineMode {
    /// Cosine of the raw projections `a U_a`, `b U_b`.
    #[default]
    Uncentered,
    /// Cosine after removing the column means; equals the canonical
    /// correlation of each pair.
    Centered,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GraderConfig {
    pub cca: CcaConfig,
    pub cosine: CosineMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GradeFlag {
    EmptyAnswer,
    RankTruncated,
    OovDropped,
}

impl GradeFlag {
    pub const ALL: [GradeFlag; 3] = [
        GradeFlag::EmptyAnswer,
        GradeFlag::RankTruncated,
        GradeFlag::OovDropped,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            GradeFlag::EmptyAnswer => "empty_answer",
            GradeFlag::RankTruncated => "rank_truncated",
            GradeFlag::OovDropped => "oov_dropped",
        }
    }
}

impl fmt::Display for GradeFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnswerPair {
    pub desired: SentenceMatrix,
    pub student: SentenceMatrix,
    pub pair_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradeResult {
    pub grade: f64,
    pub mean_cosine: f64,
    pub per_component_cosine: Vec<f64>,
    pub dim_used: usize,
    pub flags: BTreeSet<GradeFlag>,
}

impl GradeResult {
    fn zero(flags: BTreeSet<GradeFlag>) -> Self {
        GradeResult {
            grade: 0.0,
            mean_cosine: 0.0,
            per_component_cosine: Vec::new(),
            dim_used: 0,
            flags,
        }
    }

    /// Flags joined with `|`, empty when none are set.
    pub fn flags_label(&self) -> String {
        self.flags
            .iter()
            .map(GradeFlag::as_str)
            .collect::<Vec<_>>()
            .join("|")
    }
}

pub fn grade_from_cosine(mean_cosine: f64) -> f64 {
    MAX_GRADE * mean_cosine.clamp(0.0, 1.0)
}

/// Cosine similarity; zero when either vector is zero.
pub fn cosine(x: DVectorView<'_, f64>, y: DVectorView<'_, f64>) -> f64 {
    let nx = x.dot(&x);
    let ny = y.dot(&y);
    if nx == 0.0 || ny == 0.0 {
        return 0.0;
    }
    (x.dot(&y) / (nx * ny).sqrt()).clamp(-1.0, 1.0)
}

/// Fits CCA on one answer pair, words as variables and embedding
/// coordinates as samples.
pub fn fit_pair(pair: &AnswerPair, config: &CcaConfig) -> Option<CcaModel> {
    let a = DataMatrix::new(pair.desired.matrix.clone()).ok()?;
    let b = DataMatrix::new(pair.student.matrix.clone()).ok()?;
    fit_cca(&a, &b, config).ok()
}

pub fn grade_pair(pair: &AnswerPair, config: &GraderConfig) -> GradeResult {
    let mut flags = BTreeSet::new();
    if pair.desired.oov_count > 0 || pair.student.oov_count > 0 {
        flags.insert(GradeFlag::OovDropped);
    }
    let (k1, k2) = (pair.desired.n_words(), pair.student.n_words());
    if k1 == 0 || k2 == 0 {
        flags.insert(GradeFlag::EmptyAnswer);
        return GradeResult::zero(flags);
    }
    let Some(model) = fit_pair(pair, &config.cca) else {
        // fewer than two embedding coordinates, or a solver failure
        flags.insert(GradeFlag::RankTruncated);
        return GradeResult::zero(flags);
    };
    let dim = model.dim();
    if dim < k1.min(k2) {
        flags.insert(GradeFlag::RankTruncated);
    }
    if dim == 0 {
        return GradeResult::zero(flags);
    }
    let centered = config.cosine == CosineMode::Centered;
    let la = model
        .transform_a(&pair.desired.matrix, centered)
        .expect("model was fitted on this matrix");
    let lb = model
        .transform_b(&pair.student.matrix, centered)
        .expect("model was fitted on this matrix");
    let per_component_cosine: Vec<f64> = (0..dim)
        .map(|i| cosine(la.column(i).as_view(), lb.column(i).as_view()))
        .collect();
    let mean_cosine = per_component_cosine.iter().sum::<f64>() / dim as f64;
    GradeResult {
        grade: grade_from_cosine(mean_cosine),
        mean_cosine,
        per_component_cosine,
        dim_used: dim,
        flags,
    }
}

/// Preprocesses and embeds one answer; no surviving words gives an empty
/// matrix that grades to zero.
pub fn sentence_matrix(
    text: &str,
    table: &EmbeddingTable,
    pre: &PreprocessConfig,
) -> SentenceMatrix {
    let tokens = preprocess(text, pre);
    match embed(&tokens, table) {
        Ok(m) => m,
        Err(Error::EmptyAfterEmbedding { oov_count }) => {
            SentenceMatrix::empty(table.dimension(), oov_count)
        }
        Err(e) => unreachable!("embed only fails on empty output: {e}"),
    }
}

pub fn grade_texts(
    desired: &str,
    student: &str,
    table: &EmbeddingTable,
    pre: &PreprocessConfig,
    config: &GraderConfig,
) -> GradeResult {
    let pair = AnswerPair {
        desired: sentence_matrix(desired, table, pre),
        student: sentence_matrix(student, table, pre),
        pair_id: String::new(),
    };
    grade_pair(&pair, config)
}

/// Words of each answer ranked by their largest absolute loading on any
/// canonical direction. Diagnostic only.
pub fn top_words(
    model: &CcaModel,
    tokens_a: &[String],
    tokens_b: &[String],
    k: usize,
) -> (Vec<String>, Vec<String>) {
    (
        rank_words(&model.u_a, tokens_a, k),
        rank_words(&model.u_b, tokens_b, k),
    )
}

fn rank_words(u: &DMatrix<f64>, tokens: &[String], k: usize) -> Vec<String> {
    let rows = u.nrows().min(tokens.len());
    let mut scored: Vec<(usize, f64)> = (0..rows)
        .map(|j| (j, u.row(j).iter().fold(0.0_f64, |m, v| m.max(v.abs()))))
        .collect();
    scored.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    scored
        .into_iter()
        .take(k)
        .map(|(j, _)| tokens[j].clone())
        .collect()
}
