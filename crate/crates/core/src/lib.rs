//! Canonical correlation analysis, its shared-latent-state reading, and a
//! short answer grader built on per-pair CCA.
//!
//! * [`cca`]: covariance blocks, the whitened-SVD solver and projections.
//! * [`pcca`]: maximum-likelihood latent-variable parameters from canonical
//!   directions, and the Gaussian negative log-likelihood.
//! * [`multiview`]: checks that canonical variates keep a view's best
//!   linear predictor of a target.
//! * [`text`]: tokenization, stopwords and embedding lookup.
//! * [`grader`]: cosine similarity of canonical projections, scaled to 0..5.
//! * [`eval`]: dataset CSV ingestion and Pearson evaluation.
//!
//! The guide in `book/` walks through each piece; its code blocks are
//! compiled and run as doctests of this crate.

pub mod cca;
pub mod checks;
pub mod error;
pub mod eval;
pub mod grader;
mod linalg;
pub mod matrix;
pub mod multiview;
pub mod pcca;
pub mod text;

pub use cca::{
    canonical_correlations, compute_covariance, fit_cca, fit_cca_covariance, project, CcaConfig,
    CcaModel, Components, CovarianceBlocks, ProjectionPair, Ridge,
};
pub use error::{Error, Result};
pub use eval::{evaluate, load_dataset, pearson, AnswerRecord, EvalConfig, EvalReport};
pub use grader::{
    grade_pair, top_words, AnswerPair, CosineMode, GradeFlag, GradeResult, GraderConfig,
};
pub use matrix::DataMatrix;
pub use multiview::{
    fit_linear_predictor, generate_two_view, lemma2_check_empirical, lemma2_check_population,
    population_covariances, LinearPredictor, TwoViewSample, TwoViewSpec,
};
pub use pcca::{
    estimate_pcca, model_covariance, negative_log_likelihood, MixingChoice, PccaParams,
};
pub use text::{
    embed, load_embeddings, preprocess, EmbeddingTable, PreprocessConfig, SentenceMatrix,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/cca.md")]
    mod cca {}
    #[doc = include_str!("../../../book/src/latent.md")]
    mod latent {}
    #[doc = include_str!("../../../book/src/multiview.md")]
    mod multiview {}
    #[doc = include_str!("../../../book/src/text.md")]
    mod text {}
    #[doc = include_str!("../../../book/src/grading.md")]
    mod grading {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
}
