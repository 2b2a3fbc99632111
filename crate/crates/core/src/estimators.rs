//! Random and coordinated zeroth-order gradient estimators, plus the
//! full/minibatch ZO gradients built from them.
//!
//! The random two-point estimator is (d/mu) * [f_i(x + mu u) - f_i(x)] * u
//! with u uniform on the unit sphere; it costs 2 queries. The coordinated
//! estimator central-differences every axis and costs 2d queries but is
//! exact on quadratics. Query costs are fixed by construction — no caching
//! of repeated points, so the accounting stays auditable.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{BlackBoxProblem, QueryLedger};
use crate::vecops;

/// Default smoothing parameter, 1e-3 / d. Keeps the smoothing floor terms
/// (proportional to L^2 d^2 mu^2) roughly dimension-independent.
pub fn default_mu(dim: usize) -> f64 {
    1e-3 / dim as f64
}

/// Smoothing parameter and RNG seed for an estimator stream.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub mu: f64,
    pub seed: u64,
}

impl EstimatorConfig {
    pub fn for_dim(dim: usize, seed: u64) -> Self {
        EstimatorConfig {
            mu: default_mu(dim),
            seed,
        }
    }
}

/// Uniform draw from the unit sphere in R^d (normalized standard Gaussian).
pub fn sample_sphere<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    assert!(dim >= 1, "sphere sampling needs d >= 1");
    loop {
        let v: Vec<f64> = (0..dim)
            .map(|_| rand_distr_standard_normal(rng))
            .collect();
        let norm = vecops::norm(&v);
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Uniform draw from the unit ball: sphere direction times radius U^(1/d).
pub fn sample_ball<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    let mut u = sample_sphere(dim, rng);
    let radius = rng.gen::<f64>().powf(1.0 / dim as f64);
    vecops::scale(&mut u, radius);
    u
}

// Box-Muller; avoids pulling in rand_distr for a single distribution.
fn rand_distr_standard_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u1: f64 = rng.gen();
        if u1 > 0.0 {
            let u2: f64 = rng.gen();
            return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        }
    }
}

/// Random two-point estimator of grad f_i at x along direction u.
/// Ledger +2. The direction must be unit-norm.
pub fn rand_est(
    problem: &BlackBoxProblem,
    i: usize,
    x: &[f64],
    mu: f64,
    u: &[f64],
    ledger: &QueryLedger,
) -> Vec<f64> {
    assert!(mu > 0.0, "smoothing parameter must be positive");
    debug_assert!((vecops::norm(u) - 1.0).abs() < 1e-9, "direction must be unit norm");
    let shifted = vecops::add_scaled(x, mu, u);
    let f_shift = problem.eval_component(i, &shifted, ledger);
    let f_base = problem.eval_component(i, x, ledger);
    assert!(
        f_shift.is_finite() && f_base.is_finite(),
        "oracle returned a non-finite value"
    );
    let scale = problem.dim() as f64 / mu * (f_shift - f_base);
    u.iter().map(|uj| scale * uj).collect()
}

/// Coordinated estimator: central difference along every axis. Ledger +2d.
/// Exact on quadratics for any mu.
pub fn coord_est(
    problem: &BlackBoxProblem,
    i: usize,
    x: &[f64],
    mu: f64,
    ledger: &QueryLedger,
) -> Vec<f64> {
    assert!(mu > 0.0, "smoothing parameter must be positive");
    let d = problem.dim();
    let mut out = vec![0.0; d];
    let mut probe = x.to_vec();
    for j in 0..d {
        probe[j] = x[j] + mu;
        let plus = problem.eval_component(i, &probe, ledger);
        probe[j] = x[j] - mu;
        let minus = problem.eval_component(i, &probe, ledger);
        probe[j] = x[j];
        assert!(
            plus.is_finite() && minus.is_finite(),
            "oracle returned a non-finite value"
        );
        out[j] = (plus - minus) / (2.0 * mu);
    }
    out
}

/// Full random ZO gradient: average of rand_est over all components, one
/// fresh direction per component. Ledger +2n.
pub fn full_rand_est<R: Rng>(
    problem: &BlackBoxProblem,
    x: &[f64],
    mu: f64,
    rng: &mut R,
    ledger: &QueryLedger,
) -> Vec<f64> {
    let n = problem.n();
    let d = problem.dim();
    let mut acc = vec![0.0; d];
    for i in 0..n {
        let u = sample_sphere(d, rng);
        let g = rand_est(problem, i, x, mu, &u, ledger);
        vecops::axpy(&mut acc, 1.0 / n as f64, &g);
    }
    acc
}

/// Paired minibatch estimates at two points with shared directions: for each
/// sampled index the same u is used at x and at y, so the halves cancel
/// exactly when x == y. Ledger +4b.
pub fn batch_pair_est<R: Rng>(
    problem: &BlackBoxProblem,
    batch: &[usize],
    x: &[f64],
    y: &[f64],
    mu: f64,
    rng: &mut R,
    ledger: &QueryLedger,
) -> (Vec<f64>, Vec<f64>) {
    assert!(!batch.is_empty(), "empty minibatch");
    let d = problem.dim();
    let w = 1.0 / batch.len() as f64;
    let mut gx = vec![0.0; d];
    let mut gy = vec![0.0; d];
    for &i in batch {
        let u = sample_sphere(d, rng);
        let ex = rand_est(problem, i, x, mu, &u, ledger);
        let ey = rand_est(problem, i, y, mu, &u, ledger);
        vecops::axpy(&mut gx, w, &ex);
        vecops::axpy(&mut gy, w, &ey);
    }
    (gx, gy)
}

/// Sample `batch_size` component indices uniformly with replacement.
pub fn sample_batch<R: Rng>(n: usize, batch_size: usize, rng: &mut R) -> Vec<usize> {
    assert!(batch_size >= 1, "batch size must be >= 1");
    (0..batch_size).map(|_| rng.gen_range(0..n)).collect()
}

/// Uniform random subset of size `batch_size` (distinct indices, partial
/// Fisher-Yates). Table-based solvers need distinct indices so their anchor
/// bookkeeping mirrors the table replacement exactly.
pub fn sample_batch_distinct<R: Rng>(n: usize, batch_size: usize, rng: &mut R) -> Vec<usize> {
    assert!(
        batch_size >= 1 && batch_size <= n,
        "need 1 <= batch size <= n"
    );
    let mut pool: Vec<usize> = (0..n).collect();
    for k in 0..batch_size {
        let j = rng.gen_range(k..n);
        pool.swap(k, j);
    }
    pool.truncate(batch_size);
    pool
}

/// Monte Carlo estimate of the ball-smoothed value f_mu(x) = E[f(x + mu u)]
/// with u uniform over the unit ball. Returns (mean, standard error);
/// ledger +samples*n.
pub fn mc_smoothed_value<R: Rng>(
    problem: &BlackBoxProblem,
    x: &[f64],
    mu: f64,
    samples: usize,
    rng: &mut R,
    ledger: &QueryLedger,
) -> (f64, f64) {
    assert!(samples >= 2, "need at least 2 samples for a standard error");
    assert!(mu > 0.0, "smoothing parameter must be positive");
    let d = problem.dim();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let u = sample_ball(d, rng);
        let point = vecops::add_scaled(x, mu, &u);
        let v = problem.smooth_avg(&point, ledger);
        sum += v;
        sum_sq += v * v;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = ((sum_sq - sum * sum / m) / (m - 1.0)).max(0.0);
    (mean, (var / m).sqrt())
}

/// Diagnostic wrapper around [`mc_smoothed_value`] with a fixed budget.
#[derive(Debug, Clone, Copy)]
pub struct SmoothedSurrogate {
    pub mu: f64,
    pub sample_count: usize,
}

impl SmoothedSurrogate {
    pub fn estimate<R: Rng>(
        &self,
        problem: &BlackBoxProblem,
        x: &[f64],
        rng: &mut R,
        ledger: &QueryLedger,
    ) -> (f64, f64) {
        mc_smoothed_value(problem, x, self.mu, self.sample_count, rng, ledger)
    }
}
