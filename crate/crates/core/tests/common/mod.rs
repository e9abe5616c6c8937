//! Oracles shared by the integration tests. Nothing here calls into the
//! solver paths it is used to check.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use latentcca::DataMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

/// Correlated pair of views: shared factors plus independent noise.
pub fn correlated_views(
    rng: &mut ChaCha8Rng,
    n: usize,
    m_a: usize,
    m_b: usize,
) -> (DataMatrix, DataMatrix) {
    let k = m_a.min(m_b);
    let shared = normal(rng, n, k);
    let a = &shared * normal(rng, k, m_a) + normal(rng, n, m_a) * rng.random_range(0.3..1.5);
    let b = &shared * normal(rng, k, m_b) + normal(rng, n, m_b) * rng.random_range(0.3..1.5);
    (DataMatrix::new(a).unwrap(), DataMatrix::new(b).unwrap())
}

/// Σ (x_i - x̄)(y_i - ȳ)^T / (n - 1) by explicit loops.
pub fn brute_cross_cov(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mean = |m: &DMatrix<f64>, j: usize| (0..n).map(|i| m[(i, j)]).sum::<f64>() / n as f64;
    let mut out = DMatrix::zeros(x.ncols(), y.ncols());
    for p in 0..x.ncols() {
        let mp = mean(x, p);
        for q in 0..y.ncols() {
            let mq = mean(y, q);
            let mut s = 0.0;
            for i in 0..n {
                s += (x[(i, p)] - mp) * (y[(i, q)] - mq);
            }
            out[(p, q)] = s / (n as f64 - 1.0);
        }
    }
    out
}

pub fn pearson_direct(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Unit vector from `dim - 1` angles (spherical coordinates).
fn direction(dim: usize, angles: &[f64]) -> Vec<f64> {
    match dim {
        1 => vec![1.0],
        2 => vec![angles[0].cos(), angles[0].sin()],
        3 => vec![
            angles[0].sin() * angles[1].cos(),
            angles[0].sin() * angles[1].sin(),
            angles[0].cos(),
        ],
        _ => panic!("oracle supports at most 3 variables per view"),
    }
}

fn angle_ranges(dim: usize) -> Vec<(f64, f64)> {
    use std::f64::consts::PI;
    match dim {
        1 => vec![],
        2 => vec![(0.0, PI)],
        3 => vec![(0.0, PI), (0.0, 2.0 * PI)],
        _ => unreachable!(),
    }
}

/// corr(a u, b v) from brute-force covariances.
fn corr(u: &[f64], v: &[f64], saa: &DMatrix<f64>, sbb: &DMatrix<f64>, sab: &DMatrix<f64>) -> f64 {
    let quad = |s: &DMatrix<f64>, x: &[f64], y: &[f64]| {
        let mut t = 0.0;
        for i in 0..x.len() {
            for j in 0..y.len() {
                t += x[i] * s[(i, j)] * y[j];
            }
        }
        t
    };
    let va = quad(saa, u, u);
    let vb = quad(sbb, v, v);
    if va <= 0.0 || vb <= 0.0 {
        return 0.0;
    }
    quad(sab, u, v) / (va * vb).sqrt()
}

/// Exhaustive maximization of |corr(a u, b v)| over unit directions. A grid
/// of `coarse` points per angle (at least 10^4 points in total when both
/// views have two variables) is followed by repeated local grids that
/// shrink around the incumbent until the angular step is below 1e-10.
pub fn grid_max_correlation(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let saa = brute_cross_cov(a, a);
    let sbb = brute_cross_cov(b, b);
    let sab = brute_cross_cov(a, b);
    let (ma, mb) = (a.ncols(), b.ncols());
    let mut ranges = angle_ranges(ma);
    let split = ranges.len();
    ranges.extend(angle_ranges(mb));
    let p = ranges.len();
    let eval = |x: &[f64]| {
        corr(
            &direction(ma, &x[..split]),
            &direction(mb, &x[split..]),
            &saa,
            &sbb,
            &sab,
        )
        .abs()
    };
    if p == 0 {
        return eval(&[]);
    }
    let coarse = match p {
        1 => 10_000,
        2 => 100,
        3 => 40,
        _ => 24,
    };
    let mut best_x = vec![0.0; p];
    let mut best = f64::NEG_INFINITY;
    let mut steps: Vec<f64> = ranges
        .iter()
        .map(|(lo, hi)| (hi - lo) / coarse as f64)
        .collect();
    let mut lows: Vec<f64> = ranges.iter().map(|r| r.0).collect();
    let mut counts = vec![coarse; p];
    loop {
        let total: usize = counts.iter().product();
        let mut x = vec![0.0; p];
        for flat in 0..total {
            let mut rem = flat;
            for d in 0..p {
                x[d] = lows[d] + (rem % counts[d]) as f64 * steps[d];
                rem /= counts[d];
            }
            let v = eval(&x);
            if v > best {
                best = v;
                best_x.copy_from_slice(&x);
            }
        }
        if steps.iter().all(|s| *s < 1e-10) {
            return best;
        }
        for d in 0..p {
            let half = 2.0 * steps[d];
            counts[d] = 9;
            lows[d] = best_x[d] - half;
            steps[d] = 2.0 * half / 8.0;
        }
    }
}

/// Vocabulary used by the text fixtures, including every content word of
/// the short examples the tests grade.
pub const VOCAB: &[&str] = &[
    "main",
    "function",
    "method",
    "location",
    "memory",
    "store",
    "value",
    "stored",
    "object",
    "block",
    "inside",
    "statement",
    "execute",
    "least",
    "while",
    "process",
    "met",
    "always",
    "continue",
    "simulate",
    "behaviour",
    "portions",
    "desired",
    "software",
    "product",
    "find",
    "problem",
    "errors",
    "program",
    "finalized",
    "costs",
    "dollars",
    "<num>",
    "variable",
    "loop",
    "array",
    "pointer",
    "class",
    "compiler",
    "data",
    "type",
    "size",
    "index",
    "element",
    "list",
    "node",
    "tree",
    "stack",
    "queue",
    "heap",
    "sort",
    "search",
    "binary",
    "recursion",
    "base",
    "case",
    "call",
    "return",
    "parameter",
    "argument",
    "reference",
    "address",
    "constructor",
];

/// Gaussian word vectors, deterministic in `seed`.
pub fn synthetic_pairs(dim: usize, seed: u64) -> Vec<(String, Vec<f64>)> {
    let mut r = rng(seed);
    VOCAB
        .iter()
        .map(|w| {
            (
                w.to_string(),
                (0..dim).map(|_| StandardNormal.sample(&mut r)).collect(),
            )
        })
        .collect()
}

pub fn synthetic_table(dim: usize, seed: u64) -> latentcca::EmbeddingTable {
    latentcca::EmbeddingTable::from_pairs(synthetic_pairs(dim, seed)).unwrap()
}

/// Writes the table in the whitespace text format.
pub fn write_embeddings(path: &std::path::Path, pairs: &[(String, Vec<f64>)]) {
    use std::fmt::Write as _;
    let mut s = String::new();
    for (w, v) in pairs {
        s.push_str(w);
        for x in v {
            write!(s, " {x}").unwrap();
        }
        s.push('\n');
    }
    std::fs::write(path, s).unwrap();
}
