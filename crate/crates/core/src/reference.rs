//! White-box reference solvers. These consume the diagnostic gradient
//! channel, never the metered oracles; they exist to produce high-accuracy
//! minimizers and F* values for tests, Moreau diagnostics and stage-error
//! estimates.

use crate::error::{Error, Result};
use crate::model::BlackBoxProblem;
use crate::prox::{grad_mapping, prox_step};
use crate::vecops;

/// Proximal gradient descent with step 1/L until the gradient-mapping norm
/// drops below `tol` (or `max_iter` runs out, which is an error).
pub fn prox_gradient(
    problem: &BlackBoxProblem,
    x0: &[f64],
    tol: f64,
    max_iter: u64,
) -> Result<Vec<f64>> {
    let eta = 1.0 / problem.meta.l;
    let mut x = x0.to_vec();
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let g = problem.full_grad(&x).ok_or(Error::NoWhitebox)?;
        let next = prox_step(&x, &g, eta, &problem.regularizer);
        residual = vecops::norm(&grad_mapping(&x, &g, eta, &problem.regularizer));
        x = next;
        if residual <= tol {
            return Ok(x);
        }
    }
    Err(Error::SubproblemStalled {
        residual,
        tol,
        iters: max_iter,
    })
}

/// FISTA (accelerated proximal gradient) with the same stopping rule.
/// Used as an independent cross-check of [`prox_gradient`].
pub fn accel_prox_gradient(
    problem: &BlackBoxProblem,
    x0: &[f64],
    tol: f64,
    max_iter: u64,
) -> Result<Vec<f64>> {
    let eta = 1.0 / problem.meta.l;
    let mut x = x0.to_vec();
    let mut y = x0.to_vec();
    let mut t = 1.0f64;
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let gy = problem.full_grad(&y).ok_or(Error::NoWhitebox)?;
        let next = prox_step(&y, &gy, eta, &problem.regularizer);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        y = next
            .iter()
            .zip(&x)
            .map(|(nj, xj)| nj + momentum * (nj - xj))
            .collect();
        x = next;
        t = t_next;

        let gx = problem.full_grad(&x).ok_or(Error::NoWhitebox)?;
        residual = vecops::norm(&grad_mapping(&x, &gx, eta, &problem.regularizer));
        if residual <= tol {
            return Ok(x);
        }
    }
    Err(Error::SubproblemStalled {
        residual,
        tol,
        iters: max_iter,
    })
}

/// Central finite differences of component i, unmetered. Diagnostic cross
/// check for white-box gradients.
pub fn finite_diff_component_grad(
    problem: &BlackBoxProblem,
    i: usize,
    x: &[f64],
    h: f64,
) -> Vec<f64> {
    let d = problem.dim();
    let mut probe = x.to_vec();
    let mut out = vec![0.0; d];
    for j in 0..d {
        probe[j] = x[j] + h;
        let plus = problem.eval_component_diag(i, &probe);
        probe[j] = x[j] - h;
        let minus = problem.eval_component_diag(i, &probe);
        probe[j] = x[j];
        out[j] = (plus - minus) / (2.0 * h);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClosureComponents, ProblemMeta};
    use crate::prox::Regularizer;
    use std::sync::Arc;

    fn quadratic_with_grad(center: Vec<f64>, reg: Regularizer) -> BlackBoxProblem {
        let d = center.len();
        let c1 = center.clone();
        let comps = ClosureComponents::new(
            d,
            vec![Arc::new(move |x: &[f64]| 0.5 * vecops::dist_sq(x, &c1))],
        )
        .with_grads(vec![Arc::new(move |x: &[f64], out: &mut [f64]| {
            for ((o, xj), cj) in out.iter_mut().zip(x).zip(&center) {
                *o = xj - cj;
            }
        })]);
        BlackBoxProblem::new(Arc::new(comps), reg, ProblemMeta::strongly_convex(1.0, 1.0))
    }

    #[test]
    fn prox_gradient_finds_quadratic_minimum() {
        let p = quadratic_with_grad(vec![2.0, -1.0], Regularizer::None);
        let x = prox_gradient(&p, &[0.0, 0.0], 1e-12, 10_000).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-10);
        assert!((x[1] + 1.0).abs() < 1e-10);
    }

    #[test]
    fn two_reference_solvers_agree_on_lasso() {
        let p = quadratic_with_grad(vec![2.0, -0.5], Regularizer::L1 { lambda1: 0.3 });
        let a = prox_gradient(&p, &[0.0, 0.0], 1e-12, 100_000).unwrap();
        let b = accel_prox_gradient(&p, &[1.0, 1.0], 1e-12, 100_000).unwrap();
        assert!(vecops::norm(&vecops::sub(&a, &b)) < 1e-8);
        // soft-threshold of the center by lambda1
        assert!((a[0] - 1.7).abs() < 1e-8);
        assert!((a[1] + 0.2).abs() < 1e-8);
    }

    #[test]
    fn no_whitebox_is_an_error() {
        let p = quadratic_with_grad(vec![0.0], Regularizer::None).without_whitebox();
        assert!(matches!(
            prox_gradient(&p, &[1.0], 1e-8, 100),
            Err(Error::NoWhitebox)
        ));
    }

    #[test]
    fn finite_difference_matches_whitebox() {
        let p = quadratic_with_grad(vec![1.0, 2.0, 3.0], Regularizer::None);
        let x = [0.3, -0.4, 0.9];
        let fd = finite_diff_component_grad(&p, 0, &x, 1e-6);
        let wb = p.component_grad(0, &x).unwrap();
        for (a, b) in fd.iter().zip(&wb) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}
