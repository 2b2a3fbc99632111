//! SVRG-style variance-reduced ZO proximal solvers: the random-estimator
//! variant and the coordinated-estimator variant (the fallback solver of the
//! switch protocol). Identical control flow, different gradient estimates
//! and query costs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::estimators::{batch_pair_est, coord_est, full_rand_est, sample_batch};
use crate::model::{BlackBoxProblem, QueryLedger};
use crate::prox::prox_step;
use crate::solvers::{guard_iterate, guard_objective, RunTrace, SnapshotMode, SolverConfig};
use crate::vecops;

#[derive(Clone, Copy, PartialEq)]
enum EstKind {
    Random,
    Coordinated,
}

/// ZOR-ProxSVRG: epoch snapshot with a full random ZO gradient (2n queries),
/// then m inner steps blending shared-direction minibatch pairs (4b each).
/// Epoch cost is exactly 2n + 4bm.
pub fn zor_prox_svrg(
    problem: &BlackBoxProblem,
    config: &SolverConfig,
    x0: &[f64],
    rng: &mut ChaCha8Rng,
    ledger: &QueryLedger,
) -> Result<RunTrace> {
    run_svrg(problem, config, x0, rng, ledger, EstKind::Random)
}

/// Coordinated-estimator ZO-ProxSVRG: same control flow with central
/// differences everywhere. Full gradient costs 2dn, each inner step 4db.
pub fn zo_prox_svrg_coord(
    problem: &BlackBoxProblem,
    config: &SolverConfig,
    x0: &[f64],
    rng: &mut ChaCha8Rng,
    ledger: &QueryLedger,
) -> Result<RunTrace> {
    run_svrg(problem, config, x0, rng, ledger, EstKind::Coordinated)
}

fn coord_full_grad(
    problem: &BlackBoxProblem,
    x: &[f64],
    mu: f64,
    ledger: &QueryLedger,
) -> Vec<f64> {
    let n = problem.n();
    let mut acc = vec![0.0; problem.dim()];
    for i in 0..n {
        let g = coord_est(problem, i, x, mu, ledger);
        vecops::axpy(&mut acc, 1.0 / n as f64, &g);
    }
    acc
}

fn coord_batch_pair(
    problem: &BlackBoxProblem,
    batch: &[usize],
    x: &[f64],
    y: &[f64],
    mu: f64,
    ledger: &QueryLedger,
) -> (Vec<f64>, Vec<f64>) {
    let d = problem.dim();
    let w = 1.0 / batch.len() as f64;
    let mut gx = vec![0.0; d];
    let mut gy = vec![0.0; d];
    for &i in batch {
        vecops::axpy(&mut gx, w, &coord_est(problem, i, x, mu, ledger));
        vecops::axpy(&mut gy, w, &coord_est(problem, i, y, mu, ledger));
    }
    (gx, gy)
}

fn run_svrg(
    problem: &BlackBoxProblem,
    config: &SolverConfig,
    x0: &[f64],
    rng: &mut ChaCha8Rng,
    ledger: &QueryLedger,
    kind: EstKind,
) -> Result<RunTrace> {
    config.validate(problem.meta.l)?;
    assert_eq!(x0.len(), problem.dim(), "starting point has wrong dimension");

    let n = problem.n() as u64;
    let d = problem.dim() as u64;
    let (b, m) = (config.batch as u64, config.inner_len as u64);
    let (full_cost, epoch_cost) = match kind {
        EstKind::Random => (2 * n, 2 * n + 4 * b * m),
        EstKind::Coordinated => (2 * d * n, 2 * d * n + 4 * d * b * m),
    };

    let mut trace = RunTrace::default();
    let mut snapshot = x0.to_vec();
    let mut x = x0.to_vec();
    let point = config.record_points.then(|| x0.to_vec());
    trace.record_at(ledger.total(), problem.objective_diag(x0), 0, point);

    for epoch in 1..=config.epochs as u64 {
        // Budget gate: refuse an epoch whose mandatory full gradient would
        // already pass the cap; overshoot stays below one epoch.
        if let Some(cap) = config.fqc_cap {
            if ledger.total() + full_cost > cap {
                break;
            }
        }
        let epoch_start = ledger.total();

        let v_epoch = match kind {
            EstKind::Random => full_rand_est(problem, &snapshot, config.mu, rng, ledger),
            EstKind::Coordinated => coord_full_grad(problem, &snapshot, config.mu, ledger),
        };

        x.copy_from_slice(&snapshot);
        let pick = match config.snapshot {
            SnapshotMode::RandomIterate => Some(rng.gen_range(0..config.inner_len)),
            _ => None,
        };
        let mut chosen = x.clone(); // x_0 in case pick == Some(0)
        let mut avg = vec![0.0; x.len()];

        for k in 0..config.inner_len {
            if pick == Some(k) {
                chosen.copy_from_slice(&x);
            }
            let batch = sample_batch(problem.n(), config.batch, rng);
            let (gx, gy) = match kind {
                EstKind::Random => {
                    batch_pair_est(problem, &batch, &x, &snapshot, config.mu, rng, ledger)
                }
                EstKind::Coordinated => {
                    coord_batch_pair(problem, &batch, &x, &snapshot, config.mu, ledger)
                }
            };
            let mut v = v_epoch.clone();
            vecops::axpy(&mut v, 1.0, &gx);
            vecops::axpy(&mut v, -1.0, &gy);
            x = prox_step(&x, &v, config.eta, &problem.regularizer);
            guard_iterate(&x, ledger.total(), trace.checkpoints.last(), "zor_prox_svrg")?;
            vecops::axpy(&mut avg, 1.0 / config.inner_len as f64, &x);
        }

        assert_eq!(
            ledger.total() - epoch_start,
            epoch_cost,
            "epoch query cost drifted from its closed form"
        );

        snapshot = match config.snapshot {
            SnapshotMode::RandomIterate => chosen,
            SnapshotMode::Average => avg,
            SnapshotMode::Last => x.clone(),
        };
        let obj = guard_objective(
            problem,
            &snapshot,
            ledger.total(),
            trace.checkpoints.last(),
            "zor_prox_svrg",
        )?;
        let point = config.record_points.then(|| snapshot.clone());
        trace.record_at(ledger.total(), obj, epoch, point);
    }

    trace.output = x;
    trace.snapshot_output = Some(snapshot);
    Ok(trace)
}
