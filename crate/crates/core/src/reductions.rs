//! Stagewise black-box reduction frameworks over any inner solver that
//! contracts the optimality gap of a strongly convex stage problem, plus the
//! Moreau-envelope diagnostics used for weakly convex reporting.
//!
//! The convex framework anchors a diminishing quadratic at the *initial*
//! point: stage s solves F(x) + (gamma_s/2)||x - x_0||^2 and then shrinks
//! gamma by sqrt(K). The non-convex framework adds a constant quadratic
//! sigma*||x - x_{s-1}||^2 anchored at the previous stage output, making each
//! stage sigma-strongly convex, and reports a uniformly chosen stage output.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimators::{self, coord_est};
use crate::model::{BlackBoxProblem, ConvexityClass, QueryLedger};
use crate::prox::grad_mapping;
use crate::reference;
use crate::solvers::{
    ceil_tol, saga_theory_params, svrg_theory_params, zo_prox_svrg_coord, zor_prox_saga,
    zor_prox_svrg, Checkpoint, ParamMode, RunTrace, SnapshotMode, SolverConfig, StageRecord,
};
use crate::vecops;

/// Stage-improvement threshold for switching to the fallback solver in the
/// convex experiments.
pub const CONVEX_SWITCH_THRESHOLD: f64 = 1e-3;
/// Same, for the non-convex experiments.
pub const NONCONVEX_SWITCH_THRESHOLD: f64 = 3e-4;

const SAGA_ITER_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionKind {
    Convex,
    Nonconvex,
}

/// Convex reduction: gamma_s = gamma0 * K^(s/2) schedule, anchor fixed at
/// the initial point.
#[derive(Debug, Clone)]
pub struct ReductionConfigC {
    pub gamma0: f64,
    /// Contraction target K in (0, 1); also the discount of the schedule.
    pub contraction_target: f64,
    pub stages: usize,
    /// Hand off to the fallback once a stage improves F by less than this;
    /// None disables the switch protocol.
    pub switch_threshold: Option<f64>,
    /// Absolute ledger ceiling shared by stages and fallback.
    pub fqc_cap: Option<u64>,
}

impl ReductionConfigC {
    pub fn new(gamma0: f64, contraction_target: f64, stages: usize) -> Self {
        ReductionConfigC {
            gamma0,
            contraction_target,
            stages,
            switch_threshold: Some(CONVEX_SWITCH_THRESHOLD),
            fqc_cap: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma0 > 0.0) {
            return Err(Error::InvalidConfig("gamma0 must be > 0".into()));
        }
        if !(self.contraction_target > 0.0 && self.contraction_target < 1.0) {
            return Err(Error::InvalidConfig("contraction target must lie in (0, 1)".into()));
        }
        if self.stages < 1 {
            return Err(Error::InvalidConfig("need at least one stage".into()));
        }
        if self.switch_threshold.is_some_and(|t| t < 0.0) {
            return Err(Error::InvalidConfig("switch threshold must be >= 0".into()));
        }
        Ok(())
    }
}

/// Non-convex reduction: constant quadratic with coefficient 2*sigma (so the
/// added term is sigma*||x - anchor||^2), moving anchor, lambda = 1/(2 sigma).
#[derive(Debug, Clone)]
pub struct ReductionConfigNC {
    pub sigma: f64,
    pub stages: usize,
    /// None disables the switch protocol.
    pub switch_threshold: Option<f64>,
    pub fqc_cap: Option<u64>,
}

impl ReductionConfigNC {
    pub fn new(sigma: f64, stages: usize) -> Self {
        ReductionConfigNC {
            sigma,
            stages,
            switch_threshold: Some(NONCONVEX_SWITCH_THRESHOLD),
            fqc_cap: None,
        }
    }

    pub fn lambda(&self) -> f64 {
        1.0 / (2.0 * self.sigma)
    }

    fn validate(&self, problem: &BlackBoxProblem) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidConfig("sigma must be > 0".into()));
        }
        if self.sigma < problem.meta.sigma {
            return Err(Error::InvalidConfig(format!(
                "reduction sigma {} is below the problem's weak-convexity bound {}",
                self.sigma, problem.meta.sigma
            )));
        }
        if self.sigma > problem.meta.l {
            return Err(Error::InvalidConfig("sigma must not exceed L".into()));
        }
        if self.stages < 1 {
            return Err(Error::InvalidConfig("need at least one stage".into()));
        }
        if self.switch_threshold.is_some_and(|t| t < 0.0) {
            return Err(Error::InvalidConfig("switch threshold must be >= 0".into()));
        }
        Ok(())
    }
}

/// Output of one stage solve: the warm-start point for the next stage and
/// any within-stage checkpoints to splice into the reduction trace.
#[derive(Debug, Clone)]
pub struct StageRun {
    pub output: Vec<f64>,
    pub checkpoints: Vec<Checkpoint>,
}

/// A solver the reductions can call on each (strongly convex) stage problem.
/// Implementations read the strong-convexity modulus off `stage.meta.gamma`.
pub trait InnerSolver {
    fn solve_stage(
        &self,
        stage: &BlackBoxProblem,
        x0: &[f64],
        rng: &mut ChaCha8Rng,
        ledger: &QueryLedger,
        fqc_cap: Option<u64>,
    ) -> Result<StageRun>;

    fn label(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    ZorSvrg,
    ZorSaga,
    ZoSvrgCoord,
}

impl SolverKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverKind::ZorSvrg => "zor_svrg",
            SolverKind::ZorSaga => "zor_saga",
            SolverKind::ZoSvrgCoord => "zo_svrg_coord",
        }
    }
}

/// Per-stage solver budget derived from the contraction target and the
/// theory parameter choices.
#[derive(Debug, Clone, PartialEq)]
pub enum InnerBudget {
    Svrg {
        eta: f64,
        batch: usize,
        inner_len: usize,
        epochs: usize,
    },
    Saga {
        eta: f64,
        batch: usize,
        iterations: u64,
    },
}

/// Theory-mode stage budget. SVRG runs enough 3/4-contraction epochs to
/// reach the target; SAGA inverts its scalar decay prefactor, capped at 1e7
/// iterations. The coordinated SVRG variant reuses the SVRG budget.
pub fn inner_budget(
    kind: SolverKind,
    contraction_target: f64,
    l: f64,
    gamma: f64,
    d: usize,
    n: usize,
) -> Result<InnerBudget> {
    if !(contraction_target > 0.0 && contraction_target < 1.0) {
        return Err(Error::InvalidConfig("contraction target must lie in (0, 1)".into()));
    }
    match kind {
        SolverKind::ZorSvrg | SolverKind::ZoSvrgCoord => {
            let (eta, batch, inner_len) = svrg_theory_params(l, gamma, d, n)?;
            let per_epoch: f64 = 0.75;
            let epochs = (ceil_tol(contraction_target.ln() / per_epoch.ln()) as usize).max(1);
            Ok(InnerBudget::Svrg {
                eta,
                batch,
                inner_len,
                epochs,
            })
        }
        SolverKind::ZorSaga => {
            let (eta, batch) = saga_theory_params(l, gamma, d, n)?;
            let b = batch as f64;
            let nf = n as f64;
            let c = 96.0 * eta * eta * nf * d as f64 * l / (b * (2.0 * b - eta * nf * gamma));
            let prefactor = (2.0 / gamma + 2.0 * eta + c) / (2.0 * eta);
            let rate = 1.0 - eta * gamma / 2.0;
            let iterations = if prefactor <= contraction_target {
                1
            } else {
                let needed = ceil_tol((contraction_target / prefactor).ln() / rate.ln());
                if !needed.is_finite() || needed > SAGA_ITER_CAP as f64 {
                    return Err(Error::UnattainableContraction {
                        target: contraction_target,
                        required: needed,
                        cap: SAGA_ITER_CAP,
                    });
                }
                (needed as u64).max(1)
            };
            if iterations > SAGA_ITER_CAP / 2 {
                log::warn!("SAGA stage budget is large: {iterations} iterations");
            }
            Ok(InnerBudget::Saga {
                eta,
                batch,
                iterations,
            })
        }
    }
}

/// The ZO variance-reduced solvers packaged as reduction inner solvers.
/// In theory mode each stage gets its [`inner_budget`]; in tuned mode a
/// fixed epoch count (default 2) with desk-scale parameters replaces it.
#[derive(Debug, Clone)]
pub struct VrInner {
    pub kind: SolverKind,
    pub mode: ParamMode,
    pub contraction_target: f64,
    /// Tuned mode: epochs per stage (SVRG family) or data passes (SAGA).
    pub tuned_epochs: usize,
    /// None picks the dimension default 1e-3/d.
    pub mu: Option<f64>,
    pub snapshot: SnapshotMode,
    /// Tuned-mode overrides of the stage solver defaults.
    pub eta: Option<f64>,
    pub batch: Option<usize>,
    pub inner_len: Option<usize>,
}

impl VrInner {
    pub fn tuned(kind: SolverKind) -> Self {
        VrInner {
            kind,
            mode: ParamMode::Tuned,
            contraction_target: 0.5,
            tuned_epochs: 2,
            mu: None,
            snapshot: SnapshotMode::RandomIterate,
            eta: None,
            batch: None,
            inner_len: None,
        }
    }

    pub fn theory(kind: SolverKind, contraction_target: f64) -> Self {
        VrInner {
            kind,
            mode: ParamMode::Theory,
            contraction_target,
            tuned_epochs: 2,
            mu: None,
            snapshot: SnapshotMode::RandomIterate,
            eta: None,
            batch: None,
            inner_len: None,
        }
    }

    fn stage_config(&self, stage: &BlackBoxProblem, fqc_cap: Option<u64>) -> Result<SolverConfig> {
        let (n, d, l) = (stage.n(), stage.dim(), stage.meta.l);
        let mu = self.mu.unwrap_or_else(|| estimators::default_mu(d));
        let mut cfg = match self.mode {
            ParamMode::Theory => {
                let budget = inner_budget(
                    self.kind,
                    self.contraction_target,
                    l,
                    stage.meta.gamma,
                    d,
                    n,
                )?;
                match budget {
                    InnerBudget::Svrg {
                        eta,
                        batch,
                        inner_len,
                        epochs,
                    } => SolverConfig {
                        eta,
                        batch,
                        inner_len,
                        epochs,
                        mu,
                        snapshot: self.snapshot,
                        param_mode: ParamMode::Theory,
                        fqc_cap,
                        checkpoint_queries: None,
                        record_points: false,
                    },
                    InnerBudget::Saga {
                        eta,
                        batch,
                        iterations,
                    } => SolverConfig {
                        eta,
                        batch,
                        inner_len: 1,
                        epochs: iterations as usize,
                        mu,
                        snapshot: self.snapshot,
                        param_mode: ParamMode::Theory,
                        fqc_cap,
                        checkpoint_queries: None,
                        record_points: false,
                    },
                }
            }
            ParamMode::Tuned => {
                let mut cfg = SolverConfig::tuned(l, n, d);
                cfg.mu = mu;
                cfg.snapshot = self.snapshot;
                cfg.fqc_cap = fqc_cap;
                if let Some(eta) = self.eta {
                    cfg.eta = eta;
                }
                if let Some(batch) = self.batch {
                    cfg.batch = batch;
                }
                if let Some(m) = self.inner_len {
                    cfg.inner_len = m;
                }
                cfg.epochs = match self.kind {
                    SolverKind::ZorSaga => self.tuned_epochs * n.div_ceil(cfg.batch),
                    _ => self.tuned_epochs,
                };
                cfg
            }
        };
        cfg.record_points = true;
        Ok(cfg)
    }
}

impl InnerSolver for VrInner {
    fn solve_stage(
        &self,
        stage: &BlackBoxProblem,
        x0: &[f64],
        rng: &mut ChaCha8Rng,
        ledger: &QueryLedger,
        fqc_cap: Option<u64>,
    ) -> Result<StageRun> {
        let cfg = self.stage_config(stage, fqc_cap)?;
        let (trace, use_snapshot) = match self.kind {
            SolverKind::ZorSvrg => (zor_prox_svrg(stage, &cfg, x0, rng, ledger)?, true),
            SolverKind::ZoSvrgCoord => (zo_prox_svrg_coord(stage, &cfg, x0, rng, ledger)?, true),
            SolverKind::ZorSaga => (zor_prox_saga(stage, &cfg, x0, rng, ledger)?, false),
        };
        let output = if use_snapshot {
            trace.snapshot_output.clone().unwrap_or_else(|| trace.output.clone())
        } else {
            trace.output.clone()
        };
        Ok(StageRun {
            output,
            checkpoints: trace.checkpoints,
        })
    }

    fn label(&self) -> String {
        self.kind.as_str().to_string()
    }
}

/// Exact white-box inner solver (proximal gradient on the stage problem).
/// Spends no queries; used to exercise the reduction logic in isolation.
#[derive(Debug, Clone)]
pub struct ExactInner {
    pub tol: f64,
    pub max_iter: u64,
}

impl Default for ExactInner {
    fn default() -> Self {
        ExactInner {
            tol: 1e-10,
            max_iter: 2_000_000,
        }
    }
}

impl InnerSolver for ExactInner {
    fn solve_stage(
        &self,
        stage: &BlackBoxProblem,
        x0: &[f64],
        _rng: &mut ChaCha8Rng,
        _ledger: &QueryLedger,
        _fqc_cap: Option<u64>,
    ) -> Result<StageRun> {
        Ok(StageRun {
            output: reference::prox_gradient(stage, x0, self.tol, self.max_iter)?,
            checkpoints: Vec::new(),
        })
    }

    fn label(&self) -> String {
        "exact_prox_gradient".into()
    }
}

/// First stage index s >= 1 whose improvement F(x_{s-1}) - F(x_s) fell
/// strictly below the threshold; the switch point of the fallback protocol.
pub fn switch_after(stage_objectives: &[f64], threshold: f64) -> Option<usize> {
    stage_objectives
        .windows(2)
        .position(|w| w[0] - w[1] < threshold)
        .map(|i| i + 1)
}

/// Merge an inner run's checkpoints into the reduction trace, re-evaluating
/// each monitored point against the base objective (the inner solver logs
/// the augmented stage objective, which is not what the trace plots).
fn splice_stage_checkpoints(
    problem: &BlackBoxProblem,
    trace: &mut RunTrace,
    checkpoints: &[Checkpoint],
    stage_label: u64,
) {
    for cp in checkpoints {
        if cp.fqc <= trace.final_fqc() {
            continue;
        }
        if let Some(point) = &cp.point {
            trace.record(cp.fqc, problem.objective_diag(point), stage_label);
        }
    }
}

fn fallback_config(problem: &BlackBoxProblem, remaining: u64, cap: u64) -> SolverConfig {
    let (n, d) = (problem.n() as u64, problem.dim() as u64);
    let mut cfg = SolverConfig::tuned(problem.meta.l, problem.n(), problem.dim());
    let epoch_cost = 2 * d * n + 4 * d * cfg.batch as u64 * cfg.inner_len as u64;
    cfg.epochs = (remaining / epoch_cost.max(1) + 1) as usize;
    cfg.fqc_cap = Some(cap);
    cfg
}

/// Run the coordinated-estimator fallback on the original problem with the
/// remaining budget, appending its checkpoints to the reduction trace.
fn run_fallback(
    problem: &BlackBoxProblem,
    trace: &mut RunTrace,
    x: &[f64],
    stage_offset: u64,
    cap: u64,
    rng: &mut ChaCha8Rng,
    ledger: &QueryLedger,
) -> Result<Vec<f64>> {
    let remaining = cap.saturating_sub(ledger.total());
    if remaining == 0 {
        return Ok(x.to_vec());
    }
    let cfg = fallback_config(problem, remaining, cap);
    let fb = zo_prox_svrg_coord(problem, &cfg, x, rng, ledger)?;
    let last_fqc = trace.final_fqc();
    for cp in &fb.checkpoints {
        if cp.fqc > last_fqc {
            trace.record(cp.fqc, cp.objective, stage_offset + cp.stage);
        }
    }
    Ok(fb.snapshot_output.unwrap_or(fb.output))
}

/// Convex reduction framework. Warm-starts each stage at the previous output
/// while keeping the quadratic anchored at the original x0, shrinking its
/// coefficient by sqrt(K) per stage. Hands off to the coordinated fallback
/// when a stage's objective improvement drops below the threshold.
pub fn adapt_rdct_c(
    problem: &BlackBoxProblem,
    cfg: &ReductionConfigC,
    inner: &dyn InnerSolver,
    x0: &[f64],
    rng: &mut ChaCha8Rng,
    ledger: &QueryLedger,
) -> Result<RunTrace> {
    cfg.validate()?;
    if problem.meta.convexity == ConvexityClass::WeaklyConvex {
        return Err(Error::InvalidConfig(
            "adapt_rdct_c requires a convex problem; use adapt_rdct_nc".into(),
        ));
    }
    assert_eq!(x0.len(), problem.dim());

    let mut trace = RunTrace::default();
    let mut x = x0.to_vec();
    let mut prev_obj = problem.objective_diag(&x);
    trace.record(ledger.total(), prev_obj, 0);

    let mut gamma_s = cfg.gamma0;
    for s in 0..cfg.stages {
        if cfg.fqc_cap.is_some_and(|cap| ledger.total() >= cap) {
            break;
        }
        let stage_problem = problem.augmented(gamma_s, x0.to_vec());
        let fqc_before = ledger.total();
        let run = inner
            .solve_stage(&stage_problem, &x, rng, ledger, cfg.fqc_cap)
            .map_err(|e| e.at_stage(s))?;
        if ledger.total() == fqc_before && inner.label() != "exact_prox_gradient" {
            // Budget too tight for the stage to do anything.
            break;
        }
        x = run.output;
        splice_stage_checkpoints(problem, &mut trace, &run.checkpoints, (s + 1) as u64);
        let obj = problem.objective_diag(&x);
        if trace.final_fqc() < ledger.total() {
            trace.record(ledger.total(), obj, (s + 1) as u64);
        }
        trace.stages.push(StageRecord {
            index: s,
            coeff: gamma_s,
            anchor: x0.to_vec(),
            output: x.clone(),
            fqc: ledger.total(),
            objective: obj,
        });

        let improvement = prev_obj - obj;
        prev_obj = obj;
        gamma_s *= cfg.contraction_target.sqrt();

        if cfg.switch_threshold.is_some_and(|t| improvement < t) {
            trace.switched_after_stage = Some(s);
            if let Some(cap) = cfg.fqc_cap {
                x = run_fallback(problem, &mut trace, &x, (s + 2) as u64, cap, rng, ledger)?;
            }
            break;
        }
    }

    trace.output = x;
    Ok(trace)
}

/// Non-convex reduction framework. Each stage adds sigma*||x - x_{s-1}||^2
/// (a moving anchor), making the stage problem sigma-strongly convex; the
/// reported point x_alpha is drawn uniformly from the stage outputs.
pub fn adapt_rdct_nc(
    problem: &BlackBoxProblem,
    cfg: &ReductionConfigNC,
    inner: &dyn InnerSolver,
    x0: &[f64],
    rng: &mut ChaCha8Rng,
    ledger: &QueryLedger,
) -> Result<RunTrace> {
    cfg.validate(problem)?;
    assert_eq!(x0.len(), problem.dim());

    let mut trace = RunTrace::default();
    let mut x = x0.to_vec();
    let mut prev_obj = problem.objective_diag(&x);
    trace.record(ledger.total(), prev_obj, 0);

    let mut fallback_output: Option<Vec<f64>> = None;
    for s in 0..cfg.stages {
        if cfg.fqc_cap.is_some_and(|cap| ledger.total() >= cap) {
            break;
        }
        let anchor = x.clone();
        let stage_problem = problem.augmented(2.0 * cfg.sigma, anchor.clone());
        debug_assert!(stage_problem.meta.gamma > 0.0);
        let fqc_before = ledger.total();
        let run = inner
            .solve_stage(&stage_problem, &x, rng, ledger, cfg.fqc_cap)
            .map_err(|e| e.at_stage(s))?;
        if ledger.total() == fqc_before && inner.label() != "exact_prox_gradient" {
            break;
        }
        x = run.output;
        splice_stage_checkpoints(problem, &mut trace, &run.checkpoints, (s + 1) as u64);
        let obj = problem.objective_diag(&x);
        if trace.final_fqc() < ledger.total() {
            trace.record(ledger.total(), obj, (s + 1) as u64);
        }
        trace.stages.push(StageRecord {
            index: s,
            coeff: 2.0 * cfg.sigma,
            anchor,
            output: x.clone(),
            fqc: ledger.total(),
            objective: obj,
        });

        let improvement = prev_obj - obj;
        prev_obj = obj;
        if cfg.switch_threshold.is_some_and(|t| improvement < t) {
            trace.switched_after_stage = Some(s);
            if let Some(cap) = cfg.fqc_cap {
                let out = run_fallback(problem, &mut trace, &x, (s + 2) as u64, cap, rng, ledger)?;
                fallback_output = Some(out);
            }
            break;
        }
    }

    // x_alpha: uniform over completed stage outputs (seeded draw).
    let alpha = if trace.stages.is_empty() {
        x0.to_vec()
    } else {
        let idx = rng.gen_range(0..trace.stages.len());
        trace.alpha_stage = Some(idx);
        trace.stages[idx].output.clone()
    };
    trace.snapshot_output = Some(alpha.clone());
    trace.output = fallback_output.unwrap_or(alpha);
    Ok(trace)
}

#[derive(Debug, Clone, Copy)]
pub enum LedgerMode {
    /// Queries spent on the prox subproblem are counted.
    Metered,
    /// White-box path; spends no queries.
    Diagnostic,
}

/// ||grad F_lambda(x)|| = ||x - Prox_{lambda F}(x)|| / lambda, the
/// near-stationarity measure for weakly convex F. The prox point is found by
/// minimizing F(z) + (1/(2 lambda))||z - x||^2 to the requested accuracy of
/// the returned value.
pub fn moreau_grad_norm(
    problem: &BlackBoxProblem,
    x: &[f64],
    lambda: f64,
    accuracy: f64,
    mode: LedgerMode,
    rng: &mut ChaCha8Rng,
    ledger: &QueryLedger,
) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig("lambda must be > 0".into()));
    }
    if problem.meta.sigma > 0.0 && lambda >= 1.0 / problem.meta.sigma {
        return Err(Error::LambdaTooLarge {
            lambda,
            limit: 1.0 / problem.meta.sigma,
        });
    }
    if !(accuracy > 0.0) {
        return Err(Error::InvalidConfig("accuracy must be > 0".into()));
    }

    let stage = problem.augmented(1.0 / lambda, x.to_vec());
    let modulus = stage.meta.gamma;
    debug_assert!(modulus > 0.0);
    // ||z - z*|| <= 3 ||G(z)|| / modulus for step <= 1/L, so this tolerance
    // puts the returned value within `accuracy`.
    let tol = accuracy * lambda * modulus / 3.0;

    let z = match mode {
        LedgerMode::Diagnostic => reference::prox_gradient(&stage, x, tol, 5_000_000)?,
        LedgerMode::Metered => zo_prox_to_tolerance(&stage, x, tol, rng, ledger)?,
    };
    Ok(vecops::norm(&vecops::sub(x, &z)) / lambda)
}

/// Coordinated-SVRG rounds on a strongly convex stage problem until the
/// (metered) coordinated gradient mapping meets the tolerance.
fn zo_prox_to_tolerance(
    stage: &BlackBoxProblem,
    x0: &[f64],
    tol: f64,
    rng: &mut ChaCha8Rng,
    ledger: &QueryLedger,
) -> Result<Vec<f64>> {
    let (n, d, l) = (stage.n(), stage.dim(), stage.meta.l);
    let mut cfg = SolverConfig::tuned(l, n, d);
    cfg.epochs = 4;
    cfg.snapshot = SnapshotMode::Last;
    cfg.checkpoint_queries = Some(u64::MAX / 2);
    let mut z = x0.to_vec();
    let mut residual = f64::INFINITY;
    const ROUNDS: usize = 60;
    for _ in 0..ROUNDS {
        let trace = zo_prox_svrg_coord(stage, &cfg, &z, rng, ledger)?;
        z = trace.output;
        let mut g = vec![0.0; d];
        for i in 0..n {
            let gi = coord_est(stage, i, &z, cfg.mu, ledger);
            vecops::axpy(&mut g, 1.0 / n as f64, &gi);
        }
        residual = vecops::norm(&grad_mapping(&z, &g, 1.0 / l, &stage.regularizer));
        if residual <= tol {
            return Ok(z);
        }
    }
    Err(Error::SubproblemStalled {
        residual,
        tol,
        iters: ROUNDS as u64,
    })
}

/// Stage-error constants realized by a finished reduction run: the largest
/// squared smooth-gradient norm at the stage optima, the quantity bounding
/// the residual floor.
#[derive(Debug, Clone, Copy, Default)]
pub struct StageErrorDiagnostic {
    pub gc_sq: Option<f64>,
    pub gnc_sq: Option<f64>,
}

impl StageErrorDiagnostic {
    pub fn g_star_sq(&self) -> f64 {
        self.gc_sq.unwrap_or(0.0).max(self.gnc_sq.unwrap_or(0.0))
    }
}

/// Solve every logged stage problem to high accuracy with the white-box
/// reference solver and report max_s ||grad f^(stage)(x_s^*)||^2.
pub fn estimate_stage_errors(
    problem: &BlackBoxProblem,
    trace: &RunTrace,
    kind: ReductionKind,
) -> Result<StageErrorDiagnostic> {
    if !problem.has_whitebox() {
        return Err(Error::NoWhitebox);
    }
    let mut worst: f64 = 0.0;
    for stage in &trace.stages {
        let stage_problem = problem.augmented(stage.coeff, stage.anchor.clone());
        let opt = reference::prox_gradient(&stage_problem, &stage.output, 1e-10, 5_000_000)?;
        let g = stage_problem.full_grad(&opt).ok_or(Error::NoWhitebox)?;
        worst = worst.max(vecops::norm_sq(&g));
    }
    Ok(match kind {
        ReductionKind::Convex => StageErrorDiagnostic {
            gc_sq: Some(worst),
            gnc_sq: None,
        },
        ReductionKind::Nonconvex => StageErrorDiagnostic {
            gc_sq: None,
            gnc_sq: Some(worst),
        },
    })
}
