//! RSPGF-style baseline: plain proximal steps along minibatch random ZO
//! estimates, no variance reduction. 2b queries per iteration.

use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::estimators::{rand_est, sample_batch, sample_sphere};
use crate::model::{BlackBoxProblem, QueryLedger};
use crate::prox::prox_step;
use crate::solvers::{guard_iterate, guard_objective, RunTrace, SolverConfig};
use crate::vecops;

/// `config.epochs` counts iterations; `inner_len` is unused.
pub fn rspgf_baseline(
    problem: &BlackBoxProblem,
    config: &SolverConfig,
    x0: &[f64],
    rng: &mut ChaCha8Rng,
    ledger: &QueryLedger,
) -> Result<RunTrace> {
    config.validate(problem.meta.l)?;
    assert_eq!(x0.len(), problem.dim(), "starting point has wrong dimension");

    let n = problem.n();
    let d = problem.dim();
    let b = config.batch;
    let iter_cost = 2 * b as u64;
    let cp_interval = config
        .checkpoint_queries
        .unwrap_or(((2 * n) as u64).max(iter_cost));

    let mut trace = RunTrace::default();
    let point = config.record_points.then(|| x0.to_vec());
    trace.record_at(ledger.total(), problem.objective_diag(x0), 0, point);
    let run_start = ledger.total();

    let mut x = x0.to_vec();
    let mut next_mark = ledger.total() + cp_interval;
    let mut iters_done: u64 = 0;

    for k in 0..config.epochs {
        if let Some(cap) = config.fqc_cap {
            if ledger.total() + iter_cost > cap {
                break;
            }
        }
        let iter_start = ledger.total();

        let batch = sample_batch(n, b, rng);
        let mut g = vec![0.0; d];
        let w = 1.0 / b as f64;
        for &i in &batch {
            let u = sample_sphere(d, rng);
            let e = rand_est(problem, i, &x, config.mu, &u, ledger);
            vecops::axpy(&mut g, w, &e);
        }
        assert_eq!(ledger.total() - iter_start, iter_cost, "iteration cost drifted");

        x = prox_step(&x, &g, config.eta, &problem.regularizer);
        iters_done += 1;
        guard_iterate(&x, ledger.total(), trace.checkpoints.last(), "rspgf")?;

        if ledger.total() >= next_mark || k + 1 == config.epochs {
            let obj = guard_objective(problem, &x, ledger.total(), trace.checkpoints.last(), "rspgf")?;
            let point = config.record_points.then(|| x.clone());
            trace.record_at(ledger.total(), obj, (k + 1) as u64, point);
            while next_mark <= ledger.total() {
                next_mark += cp_interval;
            }
        }
    }

    assert_eq!(
        ledger.total() - run_start,
        iter_cost * iters_done,
        "run query cost drifted from its closed form"
    );

    if trace.final_fqc() < ledger.total() {
        let obj = problem.objective_diag(&x);
        let point = config.record_points.then(|| x.clone());
        trace.record_at(ledger.total(), obj, iters_done, point);
    }
    trace.output = x;
    Ok(trace)
}
