//! Shared fixtures for the integration suites.

use std::sync::Arc;

use zoprox::model::{BlackBoxProblem, ClosureComponents, ProblemMeta};
use zoprox::problems::{make_logistic, make_nc_logistic, synth_dataset, LogisticSpec};
use zoprox::prox::Regularizer;

pub const FIXTURE_SEED: u64 = 20_240_801;

/// n identical white-box components 0.5 * ||x - center||^2 (L = gamma = 1).
pub fn quadratic_problem(n: usize, center: Vec<f64>, reg: Regularizer) -> BlackBoxProblem {
    let d = center.len();
    let mut values: Vec<Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>> = Vec::new();
    let mut grads: Vec<Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>> = Vec::new();
    for _ in 0..n {
        let c_v = center.clone();
        values.push(Arc::new(move |x: &[f64]| {
            0.5 * x
                .iter()
                .zip(&c_v)
                .map(|(xi, ci)| (xi - ci) * (xi - ci))
                .sum::<f64>()
        }));
        let c_g = center.clone();
        grads.push(Arc::new(move |x: &[f64], out: &mut [f64]| {
            for ((o, xi), ci) in out.iter_mut().zip(x).zip(&c_g) {
                *o += xi - ci;
            }
        }));
    }
    let comps = ClosureComponents::new(d, values).with_grads(grads);
    BlackBoxProblem::new(
        Arc::new(comps),
        reg,
        ProblemMeta::strongly_convex(1.0, 1.0),
    )
}

/// The desk-scale convex logistic fixture: n = 100, d = 20, elastic net
/// with the experimental weights.
pub fn convex_logistic_fixture() -> BlackBoxProblem {
    let data = Arc::new(synth_dataset(100, 20, FIXTURE_SEED, 2.0));
    make_logistic(data, LogisticSpec::convex_default())
}

/// Strongly convex variant: the convex fixture with a (0.1/2)||x||^2
/// augmentation folded into the smooth part (gamma = 0.1).
pub fn strongly_convex_logistic_fixture() -> BlackBoxProblem {
    let p = convex_logistic_fixture();
    let d = p.dim();
    p.augmented(0.1, vec![0.0; d])
}

/// Non-convex fixture: alpha = 2.5e-4 so the weak-convexity bound (and the
/// reduction input) is sigma = 5e-4.
pub fn nonconvex_logistic_fixture() -> BlackBoxProblem {
    let data = Arc::new(synth_dataset(100, 20, FIXTURE_SEED, 2.0));
    make_nc_logistic(data, LogisticSpec::nonconvex_default(2.5e-4))
}

/// n quadratic components 0.5*||x - c_i||^2 with deterministic spread-out
/// centers; the average minimizer is the center mean and per-component
/// gradients stay nonzero there (a real variance floor for unreduced SGD).
pub fn quadratic_mixture(n: usize, d: usize, spread: f64) -> (BlackBoxProblem, Vec<f64>) {
    let mut values: Vec<Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>> = Vec::new();
    let mut grads: Vec<Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>> = Vec::new();
    let mut mean = vec![0.0; d];
    let mut centers = Vec::new();
    for i in 0..n {
        // deterministic, sign-alternating center pattern
        let c: Vec<f64> = (0..d)
            .map(|j| spread * ((i + 3 * j) as f64).sin())
            .collect();
        for (m, cj) in mean.iter_mut().zip(&c) {
            *m += cj / n as f64;
        }
        centers.push(c);
    }
    for c in &centers {
        let c_v = c.clone();
        values.push(Arc::new(move |x: &[f64]| {
            0.5 * x
                .iter()
                .zip(&c_v)
                .map(|(xi, ci)| (xi - ci) * (xi - ci))
                .sum::<f64>()
        }));
        let c_g = c.clone();
        grads.push(Arc::new(move |x: &[f64], out: &mut [f64]| {
            for ((o, xi), ci) in out.iter_mut().zip(x).zip(&c_g) {
                *o += xi - ci;
            }
        }));
    }
    let comps = ClosureComponents::new(d, values).with_grads(grads);
    let p = BlackBoxProblem::new(
        Arc::new(comps),
        Regularizer::None,
        ProblemMeta::strongly_convex(1.0, 1.0),
    );
    (p, mean)
}

pub fn median(mut values: Vec<f64>) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// Mean and standard error of a sample.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
