//! Canonical correlation analysis by whitening followed by an SVD.
//!
//! Each view's covariance `C` (plus a small ridge) is factored as
//! `V diag(λ) V^T`. The whitening map `W = V diag(λ^{-1/2})` gives the view
//! identity covariance, and the SVD of the whitened cross-covariance
//! `W_a^T C_ab W_b = P diag(s) Q^T` delivers both sets of directions at once:
//! `U_a = W_a P`, `U_b = W_b Q`, with canonical correlations `s`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::{center, DataMatrix};

/// How many canonical pairs to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Components {
    /// `min(m, n)` further capped by the effective rank of each view.
    Auto,
    /// At most this many; reduced silently when the data has lower rank.
    Fixed(usize),
}

/// Diagonal regularizer added to each view's covariance before whitening.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ridge {
    /// `factor * trace(C) / dim(C)`, resolved per view.
    Relative(f64),
    Absolute(f64),
}

impl Ridge {
    pub fn resolve(&self, cov: &DMatrix<f64>) -> f64 {
        match *self {
            Ridge::Absolute(r) => r,
            Ridge::Relative(factor) => {
                let dim = cov.nrows().max(1) as f64;
                (factor * cov.trace() / dim).max(0.0)
            }
        }
    }

    fn value(&self) -> f64 {
        match *self {
            Ridge::Relative(v) | Ridge::Absolute(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcaConfig {
    pub n_components: Components,
    pub ridge: Ridge,
    /// Upper clamp applied to the canonical correlations.
    pub correlation_clamp: f64,
}

impl Default for CcaConfig {
    fn default() -> Self {
        CcaConfig {
            n_components: Components::Auto,
            ridge: Ridge::Relative(1e-8),
            correlation_clamp: 1.0 - 1e-9,
        }
    }
}

impl CcaConfig {
    /// No ridge and no clamp: the textbook solution on full-rank inputs.
    pub fn unregularized() -> Self {
        CcaConfig {
            n_components: Components::Auto,
            ridge: Ridge::Absolute(0.0),
            correlation_clamp: 1.0,
        }
    }

    pub fn with_components(mut self, k: usize) -> Self {
        self.n_components = Components::Fixed(k);
        self
    }

    pub fn with_ridge(mut self, ridge: Ridge) -> Self {
        self.ridge = ridge;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.ridge.value();
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::InvalidConfig(format!("ridge must be >= 0, got {r}")));
        }
        let c = self.correlation_clamp;
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "correlation_clamp must lie in (0, 1], got {c}"
            )));
        }
        if self.n_components == Components::Fixed(0) {
            return Err(Error::InvalidConfig("n_components must be positive".into()));
        }
        Ok(())
    }
}

/// Sample means and unbiased covariance blocks of two views.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceBlocks {
    pub c_aa: DMatrix<f64>,
    pub c_bb: DMatrix<f64>,
    pub c_ab: DMatrix<f64>,
    pub mean_a: DVector<f64>,
    pub mean_b: DVector<f64>,
}

impl CovarianceBlocks {
    /// The `(m+n) x (m+n)` covariance of the stacked vector `(a, b)`.
    pub fn joint(&self) -> DMatrix<f64> {
        let (m, n) = (self.c_aa.nrows(), self.c_bb.nrows());
        let mut c = DMatrix::zeros(m + n, m + n);
        c.view_mut((0, 0), (m, m)).copy_from(&self.c_aa);
        c.view_mut((m, m), (n, n)).copy_from(&self.c_bb);
        c.view_mut((0, m), (m, n)).copy_from(&self.c_ab);
        c.view_mut((m, 0), (n, m)).copy_from(&self.c_ab.transpose());
        c
    }

    /// Both views' means stacked.
    pub fn joint_mean(&self) -> DVector<f64> {
        let (m, n) = (self.mean_a.len(), self.mean_b.len());
        DVector::from_fn(m + n, |i, _| {
            if i < m {
                self.mean_a[i]
            } else {
                self.mean_b[i - m]
            }
        })
    }

    fn is_self_pair(&self) -> bool {
        self.c_aa == self.c_bb && self.c_ab == self.c_aa && self.mean_a == self.mean_b
    }
}

fn check_pair(a: &DataMatrix, b: &DataMatrix) -> Result<()> {
    if a.n_samples() != b.n_samples() {
        return Err(Error::SampleMismatch {
            a: a.n_samples(),
            b: b.n_samples(),
        });
    }
    if a.n_samples() < 2 {
        return Err(Error::DegenerateInput(format!(
            "covariance needs at least 2 samples, got {}",
            a.n_samples()
        )));
    }
    Ok(())
}

/// Unbiased (`n - 1`) sample covariance of the column-centered views.
pub fn compute_covariance(a: &DataMatrix, b: &DataMatrix) -> Result<CovarianceBlocks> {
    check_pair(a, b)?;
    let denom = (a.n_samples() - 1) as f64;
    let mean_a = a.column_means();
    let mean_b = b.column_means();
    let ac = center(a.as_matrix(), &mean_a);
    let bc = center(b.as_matrix(), &mean_b);
    let cross = |x: &DMatrix<f64>, y: &DMatrix<f64>| x.tr_mul(y) / denom;
    Ok(CovarianceBlocks {
        c_aa: cross(&ac, &ac),
        c_bb: cross(&bc, &bc),
        c_ab: cross(&ac, &bc),
        mean_a,
        mean_b,
    })
}

/// Fitted canonical directions.
///
/// Columns of `u_a`/`u_b` are paired: column `i` of each maps its view onto
/// the `i`-th canonical variate, and `rho[i]` is the correlation between
/// the two variates. The variates have unit variance under the (ridged)
/// covariance used for fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "CcaModelJson", try_from = "CcaModelJson")]
pub struct CcaModel {
    pub u_a: DMatrix<f64>,
    pub u_b: DMatrix<f64>,
    pub rho: DVector<f64>,
    pub mean_a: DVector<f64>,
    pub mean_b: DVector<f64>,
}

impl CcaModel {
    pub fn dim(&self) -> usize {
        self.rho.len()
    }

    /// Number of variables in the first and second view.
    pub fn view_dims(&self) -> (usize, usize) {
        (self.u_a.nrows(), self.u_b.nrows())
    }

    /// `x U_a`, optionally after subtracting the fitted mean.
    pub fn transform_a(&self, x: &DMatrix<f64>, centered: bool) -> Result<DMatrix<f64>> {
        transform(x, &self.u_a, &self.mean_a, centered, "first")
    }

    pub fn transform_b(&self, x: &DMatrix<f64>, centered: bool) -> Result<DMatrix<f64>> {
        transform(x, &self.u_b, &self.mean_b, centered, "second")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn transform(
    x: &DMatrix<f64>,
    u: &DMatrix<f64>,
    mean: &DVector<f64>,
    centered: bool,
    which: &str,
) -> Result<DMatrix<f64>> {
    if x.ncols() != u.nrows() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} columns in the {which} view", u.nrows()),
            found: format!("{} columns", x.ncols()),
        });
    }
    Ok(if centered { center(x, mean) * u } else { x * u })
}

/// Canonical variates of both views.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionPair {
    pub lambda_a: DMatrix<f64>,
    pub lambda_b: DMatrix<f64>,
}

/// Centered projections `(a - mean_a) U_a` and `(b - mean_b) U_b`.
pub fn project(model: &CcaModel, a: &DataMatrix, b: &DataMatrix) -> Result<ProjectionPair> {
    if a.n_samples() != b.n_samples() {
        return Err(Error::SampleMismatch {
            a: a.n_samples(),
            b: b.n_samples(),
        });
    }
    Ok(ProjectionPair {
        lambda_a: model.transform_a(a.as_matrix(), true)?,
        lambda_b: model.transform_b(b.as_matrix(), true)?,
    })
}

pub fn canonical_correlations(model: &CcaModel) -> &DVector<f64> {
    &model.rho
}

pub fn fit_cca(a: &DataMatrix, b: &DataMatrix, config: &CcaConfig) -> Result<CcaModel> {
    let blocks = compute_covariance(a, b)?;
    fit_cca_covariance(&blocks, config)
}

/// Fits from precomputed (sample or population) covariance blocks.
pub fn fit_cca_covariance(blocks: &CovarianceBlocks, config: &CcaConfig) -> Result<CcaModel> {
    Ok(solve(blocks, config)?.model)
}

/// Singular values of the whitened (ridged) cross-covariance before
/// truncation and clamping, in descending order.
pub fn canonical_spectrum(blocks: &CovarianceBlocks, config: &CcaConfig) -> Result<DVector<f64>> {
    Ok(solve(blocks, config)?.spectrum)
}

struct Solution {
    model: CcaModel,
    spectrum: DVector<f64>,
}

struct Whitener {
    map: DMatrix<f64>,
    raw_rank: usize,
}

fn whitener(cov: &DMatrix<f64>, ridge: f64) -> Result<Whitener> {
    let (values, vectors) = linalg::sym_eigen_desc(cov)?;
    let raw_rank = linalg::effective_rank(&values);
    let shifted = values.add_scalar(ridge);
    let kept = linalg::effective_rank(&shifted);
    let mut map = vectors.columns(0, kept).into_owned();
    for (j, mut col) in map.column_iter_mut().enumerate() {
        col /= shifted[j].sqrt();
    }
    Ok(Whitener { map, raw_rank })
}

fn solve(blocks: &CovarianceBlocks, config: &CcaConfig) -> Result<Solution> {
    config.validate()?;
    let (m, n) = (blocks.c_aa.nrows(), blocks.c_bb.nrows());
    if blocks.c_ab.shape() != (m, n) {
        return Err(Error::ShapeMismatch {
            expected: format!("{m}x{n} cross-covariance"),
            found: format!("{}x{}", blocks.c_ab.nrows(), blocks.c_ab.ncols()),
        });
    }
    let ridge_a = config.ridge.resolve(&blocks.c_aa);
    let ridge_b = config.ridge.resolve(&blocks.c_bb);
    let wa = whitener(&blocks.c_aa, ridge_a)?;

    let self_pair = blocks.is_self_pair();
    let (p, s, q, wb_map, rank_b) = if self_pair {
        // Identical views: the whitened cross-covariance is symmetric PSD, so
        // its eigenvectors serve as both singular bases and the two direction
        // sets come out bit-identical.
        let k = wa.map.tr_mul(&blocks.c_ab) * &wa.map;
        let (values, vectors) = linalg::sym_eigen_desc(&k)?;
        let s = values.map(|v| v.max(0.0));
        (vectors.clone(), s, vectors, wa.map.clone(), wa.raw_rank)
    } else {
        let wb = whitener(&blocks.c_bb, ridge_b)?;
        let k = wa.map.tr_mul(&blocks.c_ab) * &wb.map;
        let (p, s, q) = linalg::svd_desc(&k)?;
        (p, s, q, wb.map, wb.raw_rank)
    };

    let cap = m.min(n).min(wa.raw_rank).min(rank_b).min(s.len());
    let dim = match config.n_components {
        Components::Auto => cap,
        Components::Fixed(k) => k.min(cap),
    };

    let mut u_a = &wa.map * p.columns(0, dim);
    let mut u_b = &wb_map * q.columns(0, dim);

    // Report the correlation each direction pair actually attains on the
    // unregularized covariance; with zero ridge this is the singular value.
    let attained: Vec<f64> = (0..dim)
        .map(|i| {
            let (x, y) = (u_a.column(i), u_b.column(i));
            let var_a = (x.transpose() * &blocks.c_aa * x)[(0, 0)];
            let var_b = (y.transpose() * &blocks.c_bb * y)[(0, 0)];
            let cov = (x.transpose() * &blocks.c_ab * y)[(0, 0)];
            if var_a > 0.0 && var_b > 0.0 {
                cov / (var_a * var_b).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| attained[j].total_cmp(&attained[i]).then(i.cmp(&j)));
    if order.iter().enumerate().any(|(k, &i)| k != i) {
        u_a = DMatrix::from_fn(u_a.nrows(), dim, |r, c| u_a[(r, order[c])]);
        u_b = DMatrix::from_fn(u_b.nrows(), dim, |r, c| u_b[(r, order[c])]);
    }
    let rho = DVector::from_fn(dim, |i, _| {
        attained[order[i]].clamp(0.0, config.correlation_clamp)
    });

    for i in 0..dim {
        let col = u_a.column(i);
        let lead = col.iter().copied().fold(
            0.0_f64,
            |best, v| {
                if v.abs() > best.abs() {
                    v
                } else {
                    best
                }
            },
        );
        if lead < 0.0 {
            u_a.column_mut(i).neg_mut();
            u_b.column_mut(i).neg_mut();
        }
    }

    Ok(Solution {
        model: CcaModel {
            u_a,
            u_b,
            rho,
            mean_a: blocks.mean_a.clone(),
            mean_b: blocks.mean_b.clone(),
        },
        spectrum: s,
    })
}

#[derive(Serialize, Deserialize)]
struct CcaModelJson {
    u_a: Vec<Vec<f64>>,
    u_b: Vec<Vec<f64>>,
    rho: Vec<f64>,
    mean_a: Vec<f64>,
    mean_b: Vec<f64>,
    dim: usize,
}

pub(crate) fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn from_rows(rows: &[Vec<f64>], n_cols: usize, what: &str) -> Result<DMatrix<f64>> {
    if let Some(r) = rows.iter().find(|r| r.len() != n_cols) {
        return Err(Error::ShapeMismatch {
            expected: format!("{n_cols} columns in {what}"),
            found: format!("{}", r.len()),
        });
    }
    Ok(DMatrix::from_fn(rows.len(), n_cols, |i, j| rows[i][j]))
}

impl From<CcaModel> for CcaModelJson {
    fn from(m: CcaModel) -> Self {
        CcaModelJson {
            u_a: to_rows(&m.u_a),
            u_b: to_rows(&m.u_b),
            dim: m.rho.len(),
            rho: m.rho.iter().copied().collect(),
            mean_a: m.mean_a.iter().copied().collect(),
            mean_b: m.mean_b.iter().copied().collect(),
        }
    }
}

impl TryFrom<CcaModelJson> for CcaModel {
    type Error = Error;

    fn try_from(j: CcaModelJson) -> Result<Self> {
        if j.rho.len() != j.dim || j.u_a.len() != j.mean_a.len() || j.u_b.len() != j.mean_b.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("dim {} with one u row per mean entry", j.dim),
                found: format!(
                    "rho {}, u_a {} rows / mean_a {}, u_b {} rows / mean_b {}",
                    j.rho.len(),
                    j.u_a.len(),
                    j.mean_a.len(),
                    j.u_b.len(),
                    j.mean_b.len()
                ),
            });
        }
        Ok(CcaModel {
            u_a: from_rows(&j.u_a, j.dim, "u_a")?,
            u_b: from_rows(&j.u_b, j.dim, "u_b")?,
            rho: DVector::from_vec(j.rho),
            mean_a: DVector::from_vec(j.mean_a),
            mean_b: DVector::from_vec(j.mean_b),
        })
    }
}
