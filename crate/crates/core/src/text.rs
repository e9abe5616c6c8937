//! Answer text to word-embedding matrices.
//!
//! A sentence becomes an `m x k` matrix whose `k` columns are the embedding
//! vectors of its surviving words. Rows (embedding coordinates) are the
//! samples CCA sees and words are its variables, so the number of canonical
//! pairs between two answers is bounded by their word counts.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::LazyLock;

use log::{info, warn};
use nalgebra::DMatrix;
use regex::Regex;

use crate::error::{Error, Result};

/// English stopword list shipped with the crate (179 entries, one per line).
pub const DIM_PLACEHOLDER: &str = "{dim}";

pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

static TOKEN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)|\w+(?:'\w+)*|[^\w\s]").expect("token pattern")
});

static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[+-]?(?:\d+(?:\.\d*)?|\.\d+)$").expect("number pattern"));

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
    duplicates: usize,
}

impl EmbeddingTable {
    /// Builds a table from in-memory vectors, which must share one length.
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut vectors = HashMap::new();
        let mut dimension = None;
        let mut duplicates = 0;
        for (line, (token, v)) in pairs.into_iter().enumerate() {
            let expected = *dimension.get_or_insert(v.len());
            if v.len() != expected || expected == 0 {
                return Err(Error::DimensionMismatch {
                    line: line + 1,
                    expected,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::MalformedLine {
                    line: line + 1,
                    reason: "non-finite component".into(),
                });
            }
            if vectors.insert(token.into(), v).is_some() {
                duplicates += 1;
            }
        }
        let dimension = dimension.ok_or_else(|| Error::EmptyFile("<memory>".into()))?;
        Ok(EmbeddingTable {
            dimension,
            vectors,
            duplicates,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn vocab_size(&self) -> usize {
        self.vectors.len()
    }

    /// Lines whose token had already been seen (the later vector was kept).
    pub fn duplicate_count(&self) -> usize {
        self.duplicates
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Keeps the first `dim` coordinates of every vector.
    pub fn truncated(&self, dim: usize) -> Result<EmbeddingTable> {
        if dim == 0 || dim > self.dimension {
            return Err(Error::InvalidConfig(format!(
                "cannot truncate {}-dimensional embeddings to {dim}",
                self.dimension
            )));
        }
        Ok(EmbeddingTable {
            dimension: dim,
            vectors: self
                .vectors
                .iter()
                .map(|(k, v)| (k.clone(), v[..dim].to_vec()))
                .collect(),
            duplicates: self.duplicates,
        })
    }
}

/// Reads whitespace-separated `token x_1 ... x_m` lines. Blank lines are
/// skipped. With `expected_dim = None` the first line fixes the dimension.
pub fn load_embeddings(
    path: impl AsRef<Path>,
    expected_dim: Option<usize>,
) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let reader = BufReader::with_capacity(1 << 20, File::open(path)?);
    let table = read_embeddings(reader, expected_dim).map_err(|e| match e {
        Error::EmptyFile(_) => Error::EmptyFile(path.to_path_buf()),
        other => other,
    })?;
    if table.duplicates > 0 {
        warn!(
            "{}: {} duplicate tokens, last occurrence kept",
            path.display(),
            table.duplicates
        );
    }
    Ok(table)
}

/// Resolves an embeddings path for dimension `dim`. A `{dim}` placeholder in
/// the path selects a per-dimension file; otherwise the file is loaded and its
/// vectors truncated to `dim` coordinates.
pub fn embeddings_for_dim(path: &str, dim: Option<usize>) -> Result<EmbeddingTable> {
    if path.contains(DIM_PLACEHOLDER) {
        let dim = dim.ok_or_else(|| {
            Error::InvalidConfig(
                "embeddings path has a {dim} placeholder but no dimension was given".into(),
            )
        })?;
        let resolved = path.replace(DIM_PLACEHOLDER, &dim.to_string());
        info!("loading {resolved}");
        return load_embeddings(resolved, Some(dim));
    }
    info!("loading {path}");
    let table = load_embeddings(path, None)?;
    match dim {
        Some(d) if d != table.dimension() => table.truncated(d),
        _ => Ok(table),
    }
}

pub fn read_embeddings<R: BufRead>(
    mut reader: R,
    expected_dim: Option<usize>,
) -> Result<EmbeddingTable> {
    let mut vectors = HashMap::new();
    let mut dimension = expected_dim;
    let mut duplicates = 0;
    let mut line = String::new();
    let mut line_no = 0;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        line_no += 1;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let mut v = Vec::with_capacity(dimension.unwrap_or(0));
        for field in fields {
            let x: f64 = field.parse().map_err(|_| Error::MalformedLine {
                line: line_no,
                reason: format!("`{field}` is not a number"),
            })?;
            if !x.is_finite() {
                return Err(Error::MalformedLine {
                    line: line_no,
                    reason: format!("`{field}` is not finite"),
                });
            }
            v.push(x);
        }
        if v.is_empty() {
            return Err(Error::MalformedLine {
                line: line_no,
                reason: "token has no vector".into(),
            });
        }
        let expected = *dimension.get_or_insert(v.len());
        if v.len() != expected {
            return Err(Error::DimensionMismatch {
                line: line_no,
                expected,
                found: v.len(),
            });
        }
        if vectors.insert(token.to_owned(), v).is_some() {
            duplicates += 1;
        }
    }
    match dimension {
        Some(dimension) if !vectors.is_empty() => Ok(EmbeddingTable {
            dimension,
            vectors,
            duplicates,
        }),
        _ => Err(Error::EmptyFile("<reader>".into())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub lowercase: bool,
    pub number_token: String,
    /// Compared against lowercased tokens.
    pub stopwords: HashSet<String>,
    pub strip_punctuation: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            lowercase: true,
            number_token: "<num>".to_owned(),
            stopwords: parse_stopwords(DEFAULT_STOPWORDS),
            strip_punctuation: true,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.number_token.is_empty() {
            return Err(Error::InvalidConfig(
                "number_token must be non-empty".into(),
            ));
        }
        Ok(())
    }
}

/// One lowercase token per line; blank lines and surrounding whitespace ignored.
pub fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn load_stopwords(path: impl AsRef<Path>) -> Result<HashSet<String>> {
    Ok(parse_stopwords(&std::fs::read_to_string(path)?))
}

pub fn is_number(token: &str) -> bool {
    NUMBER.is_match(token)
}

fn is_punctuation(token: &str) -> bool {
    !token.chars().any(char::is_alphanumeric)
}

/// Tokenize, lowercase, drop punctuation, replace numbers, drop stopwords.
pub fn preprocess(text: &str, config: &PreprocessConfig) -> Vec<String> {
    TOKEN
        .find_iter(text)
        .map(|m| {
            if config.lowercase {
                m.as_str().to_lowercase()
            } else {
                m.as_str().to_owned()
            }
        })
        .filter(|t| !(config.strip_punctuation && is_punctuation(t)))
        .map(|t| {
            if is_number(&t) {
                config.number_token.clone()
            } else {
                t
            }
        })
        .filter(|t| !config.stopwords.contains(&t.to_lowercase()))
        .collect()
}

/// Embedding matrix of one answer: column `j` is the vector of `tokens[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceMatrix {
    pub tokens: Vec<String>,
    pub matrix: DMatrix<f64>,
    pub oov_count: usize,
}

impl SentenceMatrix {
    /// Answer with no usable words, kept so that grading can flag it.
    pub fn empty(dimension: usize, oov_count: usize) -> Self {
        SentenceMatrix {
            tokens: Vec::new(),
            matrix: DMatrix::zeros(dimension, 0),
            oov_count,
        }
    }

    pub fn n_words(&self) -> usize {
        self.tokens.len()
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Looks every token up; out-of-vocabulary tokens are dropped and counted.
pub fn embed(tokens: &[String], table: &EmbeddingTable) -> Result<SentenceMatrix> {
    let mut kept = Vec::with_capacity(tokens.len());
    let mut columns = Vec::with_capacity(tokens.len());
    for t in tokens {
        if let Some(v) = table.get(t) {
            kept.push(t.clone());
            columns.push(v);
        }
    }
    let oov_count = tokens.len() - kept.len();
    if kept.is_empty() {
        return Err(Error::EmptyAfterEmbedding { oov_count });
    }
    let matrix = DMatrix::from_fn(table.dimension(), kept.len(), |i, j| columns[j][i]);
    Ok(SentenceMatrix {
        tokens: kept,
        matrix,
        oov_count,
    })
}
