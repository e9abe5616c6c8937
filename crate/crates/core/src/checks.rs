//! Randomized self-checks behind the `check` CLI subcommands.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cca::{compute_covariance, CcaConfig};
use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::DataMatrix;
use crate::multiview::{lemma2_check_empirical, lemma2_population_deviation, TwoViewSpec};
use crate::pcca::{
    estimate_pcca, model_covariance, negative_log_likelihood, MixingChoice, PccaParams,
};

fn normal_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

/// Two correlated full-rank views sharing `min(m, n)` latent factors.
pub fn random_views(
    rng: &mut ChaCha8Rng,
    n_samples: usize,
    m: usize,
    n: usize,
) -> Result<(DataMatrix, DataMatrix)> {
    let shared = normal_matrix(rng, n_samples, m.min(n));
    let load_a = normal_matrix(rng, m.min(n), m);
    let load_b = normal_matrix(rng, m.min(n), n);
    let a = &shared * load_a + normal_matrix(rng, n_samples, m);
    let b = &shared * load_b + normal_matrix(rng, n_samples, n);
    Ok((DataMatrix::new(a)?, DataMatrix::new(b)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PccaCheck {
    pub instances: usize,
    pub max_reconstruction_error: f64,
    pub trials: usize,
    pub successes: usize,
}

impl PccaCheck {
    pub fn success_fraction(&self) -> f64 {
        self.successes as f64 / self.trials.max(1) as f64
    }
}

fn perturb(rng: &mut ChaCha8Rng, p: &PccaParams, scale: f64) -> PccaParams {
    let mut jitter = |m: &DMatrix<f64>| {
        let s = scale * linalg::max_abs(m).max(1e-12);
        m + normal_matrix(rng, m.nrows(), m.ncols()) * s
    };
    let w_a = jitter(&p.w_a);
    let w_b = jitter(&p.w_b);
    let psi_a = jitter(&p.psi_a);
    let psi_b = jitter(&p.psi_b);
    let mu_a = jitter(&DMatrix::from_column_slice(
        p.mu_a.len(),
        1,
        p.mu_a.as_slice(),
    ));
    let mu_b = jitter(&DMatrix::from_column_slice(
        p.mu_b.len(),
        1,
        p.mu_b.as_slice(),
    ));
    PccaParams {
        w_a,
        w_b,
        psi_a: (&psi_a + psi_a.transpose()) * 0.5,
        psi_b: (&psi_b + psi_b.transpose()) * 0.5,
        mu_a: DVector::from_column_slice(mu_a.as_slice()),
        mu_b: DVector::from_column_slice(mu_b.as_slice()),
    }
}

/// Fits full-dimension estimates on `instances` random problems, reports
/// the worst reconstruction error of the sample covariance and how often
/// the estimate's likelihood beats `trials` random perturbations.
pub fn pcca_check(seed: u64, instances: usize, trials: usize) -> Result<PccaCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = CcaConfig::unregularized();
    let mut worst: f64 = 0.0;
    let mut successes = 0;
    for _ in 0..instances {
        let m = rng.random_range(1..=4);
        let n = rng.random_range(1..=4);
        let k = rng.random_range(40..=200);
        let (a, b) = random_views(&mut rng, k, m, n)?;
        let params = estimate_pcca(&a, &b, m.min(n), &MixingChoice::SymmetricSqrt, &config)?;
        let sample = compute_covariance(&a, &b)?.joint();
        worst = worst.max(linalg::max_abs(&(model_covariance(&params) - sample)));

        let best = negative_log_likelihood(&params, &a, &b)?;
        for _ in 0..trials {
            let mut attempt = 0;
            let value = loop {
                attempt += 1;
                let candidate = perturb(&mut rng, &params, 1e-2);
                match negative_log_likelihood(&candidate, &a, &b) {
                    Ok(v) => break v,
                    Err(Error::SingularModelCovariance { .. }) if attempt < 100 => continue,
                    Err(e) => return Err(e),
                }
            };
            if best < value || (best - value).abs() <= 1e-12 {
                successes += 1;
            }
        }
    }
    Ok(PccaCheck {
        instances,
        max_reconstruction_error: worst,
        trials: instances * trials,
        successes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma2Check {
    pub population_deviation: f64,
    /// Deviation with one canonical pair fewer than the latent dimension;
    /// absent when the latent dimension is 1.
    pub truncated_deviation: Option<f64>,
    pub empirical_gap: f64,
}

pub fn lemma2_check(
    latent_dim: usize,
    m: usize,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<Lemma2Check> {
    let spec = TwoViewSpec::random(latent_dim, m, n, 1.0, 1.0, seed)?;
    let population_deviation = lemma2_population_deviation(&spec, latent_dim)?;
    let truncated_deviation = if latent_dim > 1 {
        Some(lemma2_population_deviation(&spec, latent_dim - 1)?)
    } else {
        None
    };
    let empirical_gap = lemma2_check_empirical(&spec, samples, seed)?;
    Ok(Lemma2Check {
        population_deviation,
        truncated_deviation,
        empirical_gap,
    })
}
