//! Latent-variable reading of CCA.
//!
//! Under the generative model
//!
//! ```text
//! L ~ N(0, I_dim),  a | L ~ N(W_a L + mu_a, Psi_a),  b | L ~ N(W_b L + mu_b, Psi_b)
//! ```
//!
//! the maximum-likelihood parameters are built from the first `dim`
//! canonical directions: `W_a = C_aa U_a M_a`, `Psi_a = C_aa - W_a W_a^T`
//! (likewise for `b`) and the means are the sample means. `M_a`, `M_b` are
//! any `dim x dim` matrices with `M_a M_b^T = diag(rho)` and spectral norm
//! below one.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cca::{
    compute_covariance, fit_cca_covariance, from_rows, to_rows, CcaConfig, Components,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::DataMatrix;

/// Ceiling applied to canonical correlations before taking square roots.
pub const MAX_MIXING_CORRELATION: f64 = 1.0 - 1e-9;

const MIXING_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum MixingChoice {
    /// `M_a = M_b = diag(rho)^{1/2}`.
    SymmetricSqrt,
    Custom {
        m_a: DMatrix<f64>,
        m_b: DMatrix<f64>,
    },
}

impl MixingChoice {
    /// Resolves to concrete `(M_a, M_b)` for the given correlations and
    /// checks both constraints.
    pub fn matrices(&self, rho: &DVector<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let dim = rho.len();
        let target = DMatrix::from_diagonal(&rho.map(|r| r.min(MAX_MIXING_CORRELATION)));
        let (m_a, m_b) = match self {
            MixingChoice::SymmetricSqrt => {
                let root = target.map(f64::sqrt);
                (root.clone(), root)
            }
            MixingChoice::Custom { m_a, m_b } => {
                if m_a.shape() != (dim, dim) || m_b.shape() != (dim, dim) {
                    return Err(Error::InvalidMixing(format!(
                        "mixing matrices must be {dim}x{dim}, got {:?} and {:?}",
                        m_a.shape(),
                        m_b.shape()
                    )));
                }
                (m_a.clone(), m_b.clone())
            }
        };
        let product_err = linalg::max_abs(&(&m_a * m_b.transpose() - &target));
        if product_err > MIXING_TOL {
            return Err(Error::InvalidMixing(format!(
                "M_a M_b^T differs from diag(rho) by {product_err:e}"
            )));
        }
        for (name, m) in [("M_a", &m_a), ("M_b", &m_b)] {
            let norm = linalg::spectral_norm(m)?;
            if norm >= 1.0 {
                return Err(Error::InvalidMixing(format!(
                    "spectral norm of {name} is {norm}, must be < 1"
                )));
            }
        }
        Ok((m_a, m_b))
    }
}

/// Maximum-likelihood parameters of the shared-latent Gaussian model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "PccaParamsJson", try_from = "PccaParamsJson")]
pub struct PccaParams {
    pub w_a: DMatrix<f64>,
    pub w_b: DMatrix<f64>,
    pub psi_a: DMatrix<f64>,
    pub psi_b: DMatrix<f64>,
    pub mu_a: DVector<f64>,
    pub mu_b: DVector<f64>,
}

impl PccaParams {
    pub fn dim(&self) -> usize {
        self.w_a.ncols()
    }

    pub fn view_dims(&self) -> (usize, usize) {
        (self.w_a.nrows(), self.w_b.nrows())
    }

    pub fn mean(&self) -> DVector<f64> {
        let (m, n) = self.view_dims();
        DVector::from_fn(m + n, |i, _| {
            if i < m {
                self.mu_a[i]
            } else {
                self.mu_b[i - m]
            }
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

pub fn estimate_pcca(
    a: &DataMatrix,
    b: &DataMatrix,
    dim: usize,
    mixing: &MixingChoice,
    config: &CcaConfig,
) -> Result<PccaParams> {
    if dim == 0 {
        return Err(Error::InvalidConfig(
            "latent dimension must be positive".into(),
        ));
    }
    let blocks = compute_covariance(a, b)?;
    let config = CcaConfig {
        n_components: Components::Fixed(dim),
        ..config.clone()
    };
    let model = fit_cca_covariance(&blocks, &config)?;
    if model.dim() < dim {
        return Err(Error::DimTooLarge {
            requested: dim,
            available: model.dim(),
        });
    }
    let (m_a, m_b) = mixing.matrices(&model.rho)?;

    // Same regularized covariances the directions were normalized against.
    let c_aa = &blocks.c_aa
        + DMatrix::identity(a.n_variables(), a.n_variables()) * config.ridge.resolve(&blocks.c_aa);
    let c_bb = &blocks.c_bb
        + DMatrix::identity(b.n_variables(), b.n_variables()) * config.ridge.resolve(&blocks.c_bb);

    let w_a = &c_aa * &model.u_a * m_a;
    let w_b = &c_bb * &model.u_b * m_b;
    let psi_a = symmetrize(&c_aa - &w_a * w_a.transpose());
    let psi_b = symmetrize(&c_bb - &w_b * w_b.transpose());
    Ok(PccaParams {
        w_a,
        w_b,
        psi_a,
        psi_b,
        mu_a: blocks.mean_a,
        mu_b: blocks.mean_b,
    })
}

/// Joint covariance of `(a, b)` implied by the parameters.
pub fn model_covariance(params: &PccaParams) -> DMatrix<f64> {
    let (m, n) = params.view_dims();
    let mut c = DMatrix::zeros(m + n, m + n);
    let cross = &params.w_a * params.w_b.transpose();
    c.view_mut((0, 0), (m, m))
        .copy_from(&(&params.w_a * params.w_a.transpose() + &params.psi_a));
    c.view_mut((m, m), (n, n))
        .copy_from(&(&params.w_b * params.w_b.transpose() + &params.psi_b));
    c.view_mut((0, m), (m, n)).copy_from(&cross);
    c.view_mut((m, 0), (n, m)).copy_from(&cross.transpose());
    c
}

/// Gaussian negative log-likelihood of `k` paired samples,
///
/// `k(m+n)/2 log 2π + k/2 log|C| + k/2 tr(C^{-1} C~) + k/2 (μ~ - μ)^T C^{-1} (μ~ - μ)`,
///
/// with `C~`, `μ~` the unbiased sample covariance and mean of the stacked views.
pub fn negative_log_likelihood(params: &PccaParams, a: &DataMatrix, b: &DataMatrix) -> Result<f64> {
    let (m, n) = params.view_dims();
    if a.n_variables() != m || b.n_variables() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("views with {m} and {n} variables"),
            found: format!("{} and {}", a.n_variables(), b.n_variables()),
        });
    }
    let blocks = compute_covariance(a, b)?;
    let k = a.n_samples() as f64;
    let sample_cov = blocks.joint();
    let diff = blocks.joint_mean() - params.mean();

    let cov = model_covariance(params);
    let (values, vectors) = linalg::sym_eigen_desc(&cov)?;
    let largest = values[0];
    let smallest = values[values.len() - 1];
    if largest <= 0.0 || smallest <= linalg::RANK_TOL * largest {
        return Err(Error::SingularModelCovariance {
            min_eigenvalue: smallest,
        });
    }
    let log_det: f64 = values.iter().map(|v| v.ln()).sum();
    let inv = &vectors * DMatrix::from_diagonal(&values.map(|v| 1.0 / v)) * vectors.transpose();
    let trace = (&inv * &sample_cov).trace();
    let quad = (diff.transpose() * &inv * &diff)[(0, 0)];
    let d = (m + n) as f64;
    Ok(0.5 * k * (d * (2.0 * std::f64::consts::PI).ln() + log_det + trace + quad))
}

#[derive(Serialize, Deserialize)]
struct PccaParamsJson {
    w_a: Vec<Vec<f64>>,
    w_b: Vec<Vec<f64>>,
    psi_a: Vec<Vec<f64>>,
    psi_b: Vec<Vec<f64>>,
    mu_a: Vec<f64>,
    mu_b: Vec<f64>,
    dim: usize,
}

impl From<PccaParams> for PccaParamsJson {
    fn from(p: PccaParams) -> Self {
        PccaParamsJson {
            dim: p.dim(),
            w_a: to_rows(&p.w_a),
            w_b: to_rows(&p.w_b),
            psi_a: to_rows(&p.psi_a),
            psi_b: to_rows(&p.psi_b),
            mu_a: p.mu_a.iter().copied().collect(),
            mu_b: p.mu_b.iter().copied().collect(),
        }
    }
}

impl TryFrom<PccaParamsJson> for PccaParams {
    type Error = Error;

    fn try_from(j: PccaParamsJson) -> Result<Self> {
        let (m, n) = (j.mu_a.len(), j.mu_b.len());
        if j.w_a.len() != m || j.w_b.len() != n || j.psi_a.len() != m || j.psi_b.len() != n {
            return Err(Error::ShapeMismatch {
                expected: format!("{m} rows for view a and {n} rows for view b"),
                found: format!(
                    "w_a {}, psi_a {}, w_b {}, psi_b {}",
                    j.w_a.len(),
                    j.psi_a.len(),
                    j.w_b.len(),
                    j.psi_b.len()
                ),
            });
        }
        Ok(PccaParams {
            w_a: from_rows(&j.w_a, j.dim, "w_a")?,
            w_b: from_rows(&j.w_b, j.dim, "w_b")?,
            psi_a: from_rows(&j.psi_a, m, "psi_a")?,
            psi_b: from_rows(&j.psi_b, n, "psi_b")?,
            mu_a: DVector::from_vec(j.mu_a),
            mu_b: DVector::from_vec(j.mu_b),
        })
    }
}
