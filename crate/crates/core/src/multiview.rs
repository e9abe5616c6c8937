//! Two-view regression harness.
//!
//! Data come from a shared Gaussian latent state `L` with views
//! `a1 = W1 L + mu1 + e1`, `a2 = W2 L + mu2 + e2` and a target
//! `z = t^T L + noise`. When the CCA dimension equals `dim(L)`, the best
//! linear predictor of `z` from a view and the best linear predictor from
//! its canonical variates are the same linear functional; this module
//! checks that both on exact population covariances and on samples.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cca::{fit_cca, fit_cca_covariance, CcaConfig, CovarianceBlocks};
use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::{center, DataMatrix};

/// Largest accepted condition number of the first view's covariance when
/// drawing random specs.
pub const MAX_CONDITION: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoViewSpec {
    pub w1: DMatrix<f64>,
    pub w2: DMatrix<f64>,
    pub psi1: DMatrix<f64>,
    pub psi2: DMatrix<f64>,
    pub mu1: DVector<f64>,
    pub mu2: DVector<f64>,
    pub target_weights: DVector<f64>,
    pub target_noise_var: f64,
}

impl TwoViewSpec {
    pub fn dim_latent(&self) -> usize {
        self.w1.ncols()
    }

    pub fn m(&self) -> usize {
        self.w1.nrows()
    }

    pub fn n(&self) -> usize {
        self.w2.nrows()
    }

    /// Random spec: loadings, means and target weights standard normal,
    /// diagonal noise `noise_var * I`. Draws are repeated until the first
    /// view's covariance has condition number at most [`MAX_CONDITION`] and
    /// both loadings have full column rank.
    pub fn random(
        dim_latent: usize,
        m: usize,
        n: usize,
        noise_var: f64,
        target_noise_var: f64,
        seed: u64,
    ) -> Result<TwoViewSpec> {
        if dim_latent == 0 || dim_latent > m.min(n) {
            return Err(Error::InvalidSpec(format!(
                "need 1 <= dim_latent <= min(m, n), got dim_latent={dim_latent}, m={m}, n={n}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut normal =
            |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng));
        for _ in 0..1000 {
            let w1 = normal(m, dim_latent);
            let w2 = normal(n, dim_latent);
            let mu1 = normal(m, 1).column(0).into_owned();
            let mu2 = normal(n, 1).column(0).into_owned();
            let target_weights = normal(dim_latent, 1).column(0).into_owned();
            let spec = TwoViewSpec {
                w1,
                w2,
                psi1: DMatrix::identity(m, m) * noise_var,
                psi2: DMatrix::identity(n, n) * noise_var,
                mu1,
                mu2,
                target_weights,
                target_noise_var,
            };
            if spec.validate().is_ok() && spec.view1_condition()? <= MAX_CONDITION {
                return Ok(spec);
            }
        }
        Err(Error::InvalidSpec(
            "could not draw a well-conditioned spec in 1000 attempts".into(),
        ))
    }

    fn view1_condition(&self) -> Result<f64> {
        let c11 = &self.w1 * self.w1.transpose() + &self.psi1;
        let (values, _) = linalg::sym_eigen_desc(&c11)?;
        let smallest = values[values.len() - 1];
        Ok(if smallest <= 0.0 {
            f64::INFINITY
        } else {
            values[0] / smallest
        })
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n, d) = (self.m(), self.n(), self.dim_latent());
        if d == 0 || self.w2.ncols() != d || self.target_weights.len() != d {
            return Err(Error::InvalidSpec(format!(
                "latent dimension disagrees: w1 {d}, w2 {}, target {}",
                self.w2.ncols(),
                self.target_weights.len()
            )));
        }
        if self.psi1.shape() != (m, m) || self.psi2.shape() != (n, n) {
            return Err(Error::InvalidSpec(
                "noise covariance shapes disagree with loadings".into(),
            ));
        }
        if self.mu1.len() != m || self.mu2.len() != n {
            return Err(Error::InvalidSpec(
                "mean lengths disagree with loadings".into(),
            ));
        }
        if !(self.target_noise_var.is_finite() && self.target_noise_var >= 0.0) {
            return Err(Error::InvalidSpec(
                "target noise variance must be >= 0".into(),
            ));
        }
        let all = [&self.w1, &self.w2, &self.psi1, &self.psi2];
        if all.iter().any(|x| x.iter().any(|v| !v.is_finite()))
            || self
                .mu1
                .iter()
                .chain(self.mu2.iter())
                .chain(self.target_weights.iter())
                .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidSpec("non-finite parameter".into()));
        }
        for (name, psi) in [("psi1", &self.psi1), ("psi2", &self.psi2)] {
            if linalg::max_abs(&(psi - psi.transpose())) > 1e-12 * linalg::max_abs(psi).max(1.0) {
                return Err(Error::InvalidSpec(format!("{name} is not symmetric")));
            }
            let (values, _) = linalg::sym_eigen_desc(psi)?;
            let top = values[0].max(0.0);
            if values[values.len() - 1] < -1e-10 * top.max(1e-300) {
                return Err(Error::InvalidSpec(format!(
                    "{name} is not positive semidefinite"
                )));
            }
        }
        for (name, w) in [("w1", &self.w1), ("w2", &self.w2)] {
            let (_, s, _) = linalg::svd_desc(w)?;
            if s[s.len() - 1] <= 1e-10 * s[0] {
                return Err(Error::InvalidSpec(format!("{name} lacks full column rank")));
            }
        }
        Ok(())
    }
}

/// Samples drawn from a [`TwoViewSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct TwoViewSample {
    pub a1: DataMatrix,
    pub a2: DataMatrix,
    pub z: DVector<f64>,
    pub latent: DMatrix<f64>,
}

/// Symmetric square root of a PSD matrix (negative round-off clipped).
fn psd_sqrt(psi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (values, vectors) = linalg::sym_eigen_desc(psi)?;
    let roots = values.map(|v| v.max(0.0).sqrt());
    Ok(&vectors * DMatrix::from_diagonal(&roots) * vectors.transpose())
}

pub fn generate_two_view(spec: &TwoViewSpec, n_samples: usize, seed: u64) -> Result<TwoViewSample> {
    spec.validate()?;
    if n_samples < 2 {
        return Err(Error::InvalidSpec(format!(
            "need at least 2 samples, got {n_samples}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = |r: usize, c: usize| -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng))
    };
    let d = spec.dim_latent();
    let latent = normal(n_samples, d);
    let e1 = normal(n_samples, spec.m());
    let e2 = normal(n_samples, spec.n());
    let ez = normal(n_samples, 1);

    let view = |w: &DMatrix<f64>,
                mu: &DVector<f64>,
                e: &DMatrix<f64>,
                psi: &DMatrix<f64>|
     -> Result<DMatrix<f64>> {
        let mut x = &latent * w.transpose() + e * psd_sqrt(psi)?;
        for (j, mut col) in x.column_iter_mut().enumerate() {
            col.add_scalar_mut(mu[j]);
        }
        Ok(x)
    };
    let a1 = view(&spec.w1, &spec.mu1, &e1, &spec.psi1)?;
    let a2 = view(&spec.w2, &spec.mu2, &e2, &spec.psi2)?;
    let z = &latent * &spec.target_weights + ez.column(0) * spec.target_noise_var.sqrt();
    Ok(TwoViewSample {
        a1: DataMatrix::new(a1)?,
        a2: DataMatrix::new(a2)?,
        z,
        latent,
    })
}

/// Exact second moments of a spec, including those with the target.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationCovariances {
    pub blocks: CovarianceBlocks,
    /// Cross-covariance of each view with the latent state (`W1`, `W2`).
    pub c_1l: DMatrix<f64>,
    pub c_2l: DMatrix<f64>,
    pub c_1z: DVector<f64>,
    pub c_2z: DVector<f64>,
    pub var_z: f64,
}

pub fn population_covariances(spec: &TwoViewSpec) -> PopulationCovariances {
    let t = &spec.target_weights;
    PopulationCovariances {
        blocks: CovarianceBlocks {
            c_aa: &spec.w1 * spec.w1.transpose() + &spec.psi1,
            c_bb: &spec.w2 * spec.w2.transpose() + &spec.psi2,
            c_ab: &spec.w1 * spec.w2.transpose(),
            mean_a: spec.mu1.clone(),
            mean_b: spec.mu2.clone(),
        },
        c_1l: spec.w1.clone(),
        c_2l: spec.w2.clone(),
        c_1z: &spec.w1 * t,
        c_2z: &spec.w2 * t,
        var_z: t.dot(t) + spec.target_noise_var,
    }
}

/// Affine least-squares predictor `z ≈ x·weights + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPredictor {
    pub weights: DVector<f64>,
    pub intercept: f64,
}

impl LinearPredictor {
    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        (x * &self.weights).add_scalar(self.intercept)
    }
}

fn check_target(x: &DataMatrix, z: &DVector<f64>) -> Result<()> {
    if x.n_samples() != z.len() {
        return Err(Error::SampleMismatch {
            a: x.n_samples(),
            b: z.len(),
        });
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput(
            "target contains non-finite values".into(),
        ));
    }
    Ok(())
}

/// Least squares on centered data through an SVD of the design matrix.
/// Fails with [`Error::RankDeficient`] when the centered design does not
/// have full column rank; [`fit_linear_predictor_ridge`] is the fallback.
pub fn fit_linear_predictor(x: &DataMatrix, z: &DVector<f64>) -> Result<LinearPredictor> {
    check_target(x, z)?;
    let p = x.n_variables();
    let x_mean = x.column_means();
    let z_mean = z.mean();
    let xc = center(x.as_matrix(), &x_mean);
    let zc = z.add_scalar(-z_mean);

    let (u, s, v) = linalg::svd_desc(&xc)?;
    let top = s.iter().copied().fold(0.0, f64::max);
    let tol = top * f64::EPSILON * (x.n_samples().max(p) as f64);
    let rank = s.iter().filter(|&&v| v > tol).count();
    if rank < p {
        return Err(Error::RankDeficient {
            rank,
            n_variables: p,
        });
    }
    let proj = u.tr_mul(&zc);
    let coef = DVector::from_fn(p, |i, _| proj[i] / s[i]);
    let weights = v * coef;
    let intercept = z_mean - x_mean.dot(&weights);
    Ok(LinearPredictor { weights, intercept })
}

/// Ridge-regularized least squares, `(X^T X + ridge I)^{-1} X^T z` on
/// centered data.
pub fn fit_linear_predictor_ridge(
    x: &DataMatrix,
    z: &DVector<f64>,
    ridge: f64,
) -> Result<LinearPredictor> {
    check_target(x, z)?;
    if !(ridge > 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "ridge must be positive, got {ridge}"
        )));
    }
    let p = x.n_variables();
    let x_mean = x.column_means();
    let z_mean = z.mean();
    let xc = center(x.as_matrix(), &x_mean);
    let zc = z.add_scalar(-z_mean);
    let gram = xc.tr_mul(&xc) + DMatrix::identity(p, p) * ridge;
    let rhs = DMatrix::from_column_slice(p, 1, xc.tr_mul(&zc).as_slice());
    let weights = linalg::spd_solve(&gram, &rhs)?.column(0).into_owned();
    let intercept = z_mean - x_mean.dot(&weights);
    Ok(LinearPredictor { weights, intercept })
}

fn exact_config(dim: usize) -> CcaConfig {
    CcaConfig::unregularized().with_components(dim)
}

/// Population check with the CCA dimension set to `dim(L)`.
pub fn lemma2_check_population(spec: &TwoViewSpec) -> Result<f64> {
    lemma2_population_deviation(spec, spec.dim_latent())
}

/// Max-abs gap between the full-view coefficients `C_11^{-1} C_1z` and the
/// coefficients routed through the first `cca_dim` canonical directions,
/// `U (U^T C_11 U)^{-1} U^T C_1z`, taken over both views.
pub fn lemma2_population_deviation(spec: &TwoViewSpec, cca_dim: usize) -> Result<f64> {
    spec.validate()?;
    if cca_dim == 0 {
        return Err(Error::InvalidSpec("CCA dimension must be positive".into()));
    }
    let pop = population_covariances(spec);
    let model = fit_cca_covariance(&pop.blocks, &exact_config(cca_dim))?;
    let view = |c: &DMatrix<f64>, c_z: &DVector<f64>, u: &DMatrix<f64>| -> Result<f64> {
        let c_z = DMatrix::from_column_slice(c_z.len(), 1, c_z.as_slice());
        let full = linalg::spd_solve(c, &c_z)?;
        let gram = u.tr_mul(&(c * u));
        let projected = linalg::spd_solve(&gram, &u.tr_mul(&c_z))?;
        Ok(linalg::max_abs(&(full - u * projected)))
    };
    let d1 = view(&pop.blocks.c_aa, &pop.c_1z, &model.u_a)?;
    let d2 = view(&pop.blocks.c_bb, &pop.c_2z, &model.u_b)?;
    Ok(d1.max(d2))
}

/// Held-out mean squared difference between the predictions of the
/// full-view predictor and the canonical-variate predictor.
///
/// The first 80% of the draw trains CCA (at `dim(L)` components) and both
/// predictors; the remaining 20% is scored. The larger of the two views'
/// gaps is returned.
pub fn lemma2_check_empirical(spec: &TwoViewSpec, n_samples: usize, seed: u64) -> Result<f64> {
    if n_samples < 100 {
        return Err(Error::InvalidSpec(format!(
            "empirical check needs at least 100 samples, got {n_samples}"
        )));
    }
    let sample = generate_two_view(spec, n_samples, seed)?;
    let n_train = n_samples * 4 / 5;
    let n_test = n_samples - n_train;
    let train_a1 = sample.a1.rows(0, n_train)?;
    let train_a2 = sample.a2.rows(0, n_train)?;
    let model = fit_cca(&train_a1, &train_a2, &exact_config(spec.dim_latent()))?;
    let z_train = sample.z.rows(0, n_train).into_owned();

    let gap = |train: &DataMatrix,
               test: DMatrix<f64>,
               u: &DMatrix<f64>,
               mean: &DVector<f64>|
     -> Result<f64> {
        let full = fit_linear_predictor(train, &z_train)?;
        let lambda_train = DataMatrix::new(center(train.as_matrix(), mean) * u)?;
        let proj = fit_linear_predictor(&lambda_train, &z_train)?;
        let pred_full = full.predict(&test);
        let pred_proj = proj.predict(&(center(&test, mean) * u));
        Ok((pred_full - pred_proj).map(|d| d * d).mean())
    };
    let g1 = gap(
        &train_a1,
        sample.a1.as_matrix().rows(n_train, n_test).into_owned(),
        &model.u_a,
        &model.mean_a,
    )?;
    let g2 = gap(
        &train_a2,
        sample.a2.as_matrix().rows(n_train, n_test).into_owned(),
        &model.u_b,
        &model.mean_b,
    )?;
    Ok(g1.max(g2))
}
