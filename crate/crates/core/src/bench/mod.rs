//! Configuration-driven experiment runner. Produces one CSV trace per
//! (seed, algorithm) with the exact query count on the x-axis, a manifest
//! for reproducibility, and comparison summaries across trace directories.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BlackBoxProblem, ConvexityClass, QueryLedger};
use crate::problems::{make_logistic, make_nc_logistic, parse_libsvm, synth_dataset, LogisticSpec};
use crate::prox::grad_mapping;
use crate::reductions::{
    adapt_rdct_c, adapt_rdct_nc, switch_after, ReductionConfigC, ReductionConfigNC, SolverKind,
    VrInner, CONVEX_SWITCH_THRESHOLD, NONCONVEX_SWITCH_THRESHOLD,
};
use crate::solvers::{
    rspgf_baseline, zo_prox_svrg_coord, zor_prox_saga, zor_prox_svrg, Checkpoint, RunTrace,
    SnapshotMode, SolverConfig,
};
use crate::vecops;

/// Exact column set of every trace file.
pub const CSV_HEADER: &str = "seed,algorithm,stage,fqc,objective,grad_mapping_norm,wall_ms";

/// Environment variable consulted for relative dataset paths.
pub const DATA_DIR_ENV: &str = "ZOPROX_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSource {
    Synthetic {
        n: usize,
        d: usize,
        seed: u64,
        separability: f64,
    },
    Dataset {
        path: String,
    },
}

fn default_lambda1() -> f64 {
    1e-3
}
fn default_lambda2() -> f64 {
    1e-5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub source: ProblemSource,
    #[serde(default = "default_lambda1")]
    pub lambda1: f64,
    #[serde(default = "default_lambda2")]
    pub lambda2: f64,
    /// Non-convex term weight; 0 selects the convex logistic problem.
    #[serde(default)]
    pub alpha: f64,
    /// Optional strong-convexity augmentation (gamma/2)||x||^2 folded into
    /// the smooth part, anchored at the origin.
    #[serde(default)]
    pub augment_gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlatSolver {
    ZorSvrg,
    ZorSaga,
    Rspgf,
    ZoSvrgCoord,
}

/// Algorithm selector: a flat solver or a reduction wrapping an inner kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmId {
    Flat(FlatSolver),
    AdaptC(SolverKind),
    AdaptNC(SolverKind),
}

impl std::fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AlgorithmId::Flat(FlatSolver::ZorSvrg) => write!(f, "zor_svrg"),
            AlgorithmId::Flat(FlatSolver::ZorSaga) => write!(f, "zor_saga"),
            AlgorithmId::Flat(FlatSolver::Rspgf) => write!(f, "rspgf"),
            AlgorithmId::Flat(FlatSolver::ZoSvrgCoord) => write!(f, "zo_svrg_coord"),
            AlgorithmId::AdaptC(inner) => write!(f, "adaptc+{}", inner.as_str()),
            AlgorithmId::AdaptNC(inner) => write!(f, "adaptnc+{}", inner.as_str()),
        }
    }
}

impl std::str::FromStr for AlgorithmId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        fn inner_kind(s: &str) -> Result<SolverKind> {
            match s {
                "zor_svrg" => Ok(SolverKind::ZorSvrg),
                "zor_saga" => Ok(SolverKind::ZorSaga),
                "zo_svrg_coord" => Ok(SolverKind::ZoSvrgCoord),
                other => Err(Error::InvalidConfig(format!(
                    "unknown inner solver {other:?} (expected zor_svrg, zor_saga or zo_svrg_coord)"
                ))),
            }
        }
        match s {
            "zor_svrg" => Ok(AlgorithmId::Flat(FlatSolver::ZorSvrg)),
            "zor_saga" => Ok(AlgorithmId::Flat(FlatSolver::ZorSaga)),
            "rspgf" => Ok(AlgorithmId::Flat(FlatSolver::Rspgf)),
            "zo_svrg_coord" => Ok(AlgorithmId::Flat(FlatSolver::ZoSvrgCoord)),
            other => {
                if let Some(inner) = other.strip_prefix("adaptc+") {
                    Ok(AlgorithmId::AdaptC(inner_kind(inner)?))
                } else if let Some(inner) = other.strip_prefix("adaptnc+") {
                    Ok(AlgorithmId::AdaptNC(inner_kind(inner)?))
                } else {
                    Err(Error::InvalidConfig(format!("unknown algorithm {other:?}")))
                }
            }
        }
    }
}

impl Serialize for AlgorithmId {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for AlgorithmId {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Optional per-field overrides of the tuned solver defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverOverrides {
    pub eta: Option<f64>,
    pub batch: Option<usize>,
    pub inner_len: Option<usize>,
    pub epochs: Option<usize>,
    pub mu: Option<f64>,
    pub snapshot: Option<SnapshotMode>,
}

impl SolverOverrides {
    fn apply(&self, mut cfg: SolverConfig) -> SolverConfig {
        if let Some(v) = self.eta {
            cfg.eta = v;
        }
        if let Some(v) = self.batch {
            cfg.batch = v;
        }
        if let Some(v) = self.inner_len {
            cfg.inner_len = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.mu {
            cfg.mu = v;
        }
        if let Some(v) = self.snapshot {
            cfg.snapshot = v;
        }
        cfg
    }
}

fn default_gamma0() -> f64 {
    5e-4
}
fn default_contraction() -> f64 {
    0.5
}
fn default_stages() -> usize {
    10_000
}
fn default_tuned_epochs() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionOverrides {
    #[serde(default = "default_gamma0")]
    pub gamma0: f64,
    #[serde(default = "default_contraction")]
    pub contraction: f64,
    #[serde(default = "default_stages")]
    pub stages: usize,
    /// None picks 1e-3 (convex) / 3e-4 (non-convex).
    #[serde(default)]
    pub switch_threshold: Option<f64>,
    /// None picks the problem's weak-convexity constant.
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default = "default_tuned_epochs")]
    pub tuned_epochs: usize,
}

impl Default for ReductionOverrides {
    fn default() -> Self {
        ReductionOverrides {
            gamma0: default_gamma0(),
            contraction: default_contraction(),
            stages: default_stages(),
            switch_threshold: None,
            sigma: None,
            tuned_epochs: default_tuned_epochs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub algorithm: AlgorithmId,
    #[serde(default)]
    pub solver: SolverOverrides,
    #[serde(default)]
    pub reduction: ReductionOverrides,
    pub fqc_budget: u64,
    pub seeds: Vec<u64>,
    /// Queries between checkpoints for the iteration-granular solvers.
    #[serde(default)]
    pub checkpoint_every: Option<u64>,
    /// Every coordinate of the starting point (default 0).
    #[serde(default)]
    pub x0_fill: f64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Collects every violated field into one structured message.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.fqc_budget == 0 {
            bad.push("fqc_budget: must be > 0".to_string());
        }
        if self.seeds.is_empty() {
            bad.push("seeds: need at least one".to_string());
        }
        if self.problem.lambda1 < 0.0 || self.problem.lambda2 < 0.0 {
            bad.push("problem.lambda1/lambda2: must be >= 0".to_string());
        }
        if self.problem.alpha < 0.0 {
            bad.push("problem.alpha: must be >= 0".to_string());
        }
        if self.problem.augment_gamma < 0.0 {
            bad.push("problem.augment_gamma: must be >= 0".to_string());
        }
        if let ProblemSource::Synthetic { n, d, .. } = self.problem.source {
            if n == 0 || d == 0 {
                bad.push("problem.source: need n >= 1 and d >= 1".to_string());
            }
        }
        if matches!(self.algorithm, AlgorithmId::AdaptC(_) | AlgorithmId::AdaptNC(_)) {
            if !(self.reduction.gamma0 > 0.0) {
                bad.push("reduction.gamma0: must be > 0".to_string());
            }
            if !(self.reduction.contraction > 0.0 && self.reduction.contraction < 1.0) {
                bad.push("reduction.contraction: must lie in (0, 1)".to_string());
            }
        }
        if matches!(self.algorithm, AlgorithmId::AdaptNC(_))
            && self.problem.alpha == 0.0
            && self.reduction.sigma.is_none()
        {
            bad.push("reduction.sigma: required for adaptnc on a convex problem".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad.join("; ")))
        }
    }
}

/// Resolve a dataset path against ZOPROX_DATA_DIR when relative.
pub fn resolve_data_path(path: &str) -> PathBuf {
    let p = PathBuf::from(path);
    if p.is_absolute() || p.exists() {
        return p;
    }
    match std::env::var(DATA_DIR_ENV) {
        Ok(dir) => PathBuf::from(dir).join(p),
        Err(_) => p,
    }
}

/// Instantiate the problem a config describes.
pub fn build_problem(cfg: &ProblemConfig) -> Result<BlackBoxProblem> {
    let dataset = match &cfg.source {
        ProblemSource::Synthetic {
            n,
            d,
            seed,
            separability,
        } => synth_dataset(*n, *d, *seed, *separability),
        ProblemSource::Dataset { path } => {
            let file = fs::File::open(resolve_data_path(path))?;
            parse_libsvm(BufReader::new(file))?
        }
    };
    let spec = LogisticSpec {
        lambda1: cfg.lambda1,
        lambda2: cfg.lambda2,
        alpha: cfg.alpha,
    };
    let data = Arc::new(dataset);
    let mut problem = if cfg.alpha > 0.0 {
        make_nc_logistic(data, spec)
    } else {
        make_logistic(data, spec)
    };
    if cfg.augment_gamma > 0.0 {
        let d = problem.dim();
        problem = problem.augmented(cfg.augment_gamma, vec![0.0; d]);
    }
    Ok(problem)
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    seed: u64,
    algorithm: String,
    stage: u64,
    fqc: u64,
    objective: f64,
    grad_mapping_norm: Option<f64>,
    wall_ms: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: String,
    config: ExperimentConfig,
    seeds: Vec<u64>,
}

/// The largest single-epoch cost any solver involved in this algorithm can
/// incur; runs may overshoot the budget by at most this much.
fn overshoot_allowance(algorithm: AlgorithmId, problem: &BlackBoxProblem) -> u64 {
    let (n, d) = (problem.n() as u64, problem.dim() as u64);
    let tuned = SolverConfig::tuned(problem.meta.l, problem.n(), problem.dim());
    let (b, m) = (tuned.batch as u64, tuned.inner_len as u64);
    let rand_epoch = 2 * n + 4 * b * m;
    let coord_epoch = 2 * d * n + 4 * d * b * m;
    match algorithm {
        AlgorithmId::Flat(FlatSolver::ZoSvrgCoord) => coord_epoch,
        AlgorithmId::Flat(_) => rand_epoch,
        // reductions may fall back to the coordinated solver
        AlgorithmId::AdaptC(_) | AlgorithmId::AdaptNC(_) => coord_epoch.max(rand_epoch),
    }
}

fn flat_solver_config(
    cfg: &ExperimentConfig,
    problem: &BlackBoxProblem,
    solver: FlatSolver,
) -> SolverConfig {
    let (n, d, l) = (problem.n(), problem.dim(), problem.meta.l);
    let mut sc = SolverConfig::tuned(l, n, d);
    // Enough epochs/iterations that the budget cap is the binding stop.
    let per_epoch: u64 = match solver {
        FlatSolver::ZorSvrg => 2 * n as u64 + 4 * (sc.batch * sc.inner_len) as u64,
        FlatSolver::ZoSvrgCoord => {
            (2 * n as u64 + 4 * (sc.batch * sc.inner_len) as u64) * d as u64
        }
        FlatSolver::ZorSaga => 4 * sc.batch as u64,
        FlatSolver::Rspgf => 2 * sc.batch as u64,
    };
    sc.epochs = (cfg.fqc_budget / per_epoch.max(1) + 1) as usize;
    sc.fqc_cap = Some(cfg.fqc_budget);
    sc.checkpoint_queries = cfg.checkpoint_every;
    cfg.solver.apply(sc)
}

fn run_algorithm(
    cfg: &ExperimentConfig,
    problem: &BlackBoxProblem,
    rng: &mut ChaCha8Rng,
    ledger: &QueryLedger,
    x0: &[f64],
) -> Result<RunTrace> {
    match cfg.algorithm {
        AlgorithmId::Flat(solver) => {
            let sc = flat_solver_config(cfg, problem, solver);
            match solver {
                FlatSolver::ZorSvrg => zor_prox_svrg(problem, &sc, x0, rng, ledger),
                FlatSolver::ZorSaga => zor_prox_saga(problem, &sc, x0, rng, ledger),
                FlatSolver::Rspgf => rspgf_baseline(problem, &sc, x0, rng, ledger),
                FlatSolver::ZoSvrgCoord => zo_prox_svrg_coord(problem, &sc, x0, rng, ledger),
            }
        }
        AlgorithmId::AdaptC(kind) => {
            let mut inner = VrInner::tuned(kind);
            inner.tuned_epochs = cfg.reduction.tuned_epochs;
            inner.contraction_target = cfg.reduction.contraction;
            if let Some(mu) = cfg.solver.mu {
                inner.mu = Some(mu);
            }
            let rc = ReductionConfigC {
                gamma0: cfg.reduction.gamma0,
                contraction_target: cfg.reduction.contraction,
                stages: cfg.reduction.stages,
                switch_threshold: Some(
                    cfg.reduction
                        .switch_threshold
                        .unwrap_or(CONVEX_SWITCH_THRESHOLD),
                ),
                fqc_cap: Some(cfg.fqc_budget),
            };
            adapt_rdct_c(problem, &rc, &inner, x0, rng, ledger)
        }
        AlgorithmId::AdaptNC(kind) => {
            let mut inner = VrInner::tuned(kind);
            inner.tuned_epochs = cfg.reduction.tuned_epochs;
            inner.contraction_target = cfg.reduction.contraction;
            if let Some(mu) = cfg.solver.mu {
                inner.mu = Some(mu);
            }
            let sigma = cfg.reduction.sigma.unwrap_or(problem.meta.sigma);
            let rc = ReductionConfigNC {
                sigma,
                stages: cfg.reduction.stages,
                switch_threshold: Some(
                    cfg.reduction
                        .switch_threshold
                        .unwrap_or(NONCONVEX_SWITCH_THRESHOLD),
                ),
                fqc_cap: Some(cfg.fqc_budget),
            };
            adapt_rdct_nc(problem, &rc, &inner, x0, rng, ledger)
        }
    }
}

/// Points along the trace at which the iterate itself is known, for the
/// optional gradient-mapping column.
fn known_points(trace: &RunTrace, x0: &[f64]) -> BTreeMap<u64, Vec<f64>> {
    let mut map = BTreeMap::new();
    if let Some(first) = trace.checkpoints.first() {
        map.insert(first.fqc, x0.to_vec());
    }
    for s in &trace.stages {
        map.insert(s.fqc, s.output.clone());
    }
    if let Some(last) = trace.checkpoints.last() {
        map.entry(last.fqc).or_insert_with(|| trace.output.clone());
    }
    map
}

fn write_trace_csv(
    path: &Path,
    seed: u64,
    algorithm: &str,
    checkpoints: &[Checkpoint],
    gm_points: &BTreeMap<u64, Vec<f64>>,
    problem: &BlackBoxProblem,
    wall_ms: u64,
) -> Result<()> {
    let gm_enabled =
        problem.has_whitebox() && problem.meta.convexity == ConvexityClass::WeaklyConvex;
    let eta = 1.0 / problem.meta.l;
    let mut writer = csv::Writer::from_path(path)?;
    for cp in checkpoints {
        let gm = if gm_enabled {
            gm_points.get(&cp.fqc).map(|x| {
                let g = problem.full_grad(x).expect("whitebox checked");
                vecops::norm(&grad_mapping(x, &g, eta, &problem.regularizer))
            })
        } else {
            None
        };
        writer.serialize(TraceRow {
            seed,
            algorithm: algorithm.to_string(),
            stage: cp.stage,
            fqc: cp.fqc,
            objective: cp.objective,
            grad_mapping_norm: gm,
            wall_ms,
        })?;
    }
    writer.flush()?;
    Ok(())
}

/// Run every seed of the experiment (in parallel), writing one CSV per seed
/// plus a manifest. Returns the trace file paths. A solver abort still
/// produces a truncated trace ending in an error row, and the first abort is
/// reported after all seeds finish.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let problem = build_problem(&cfg.problem)?;
    fs::create_dir_all(&cfg.output_dir)?;

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        seeds: cfg.seeds.clone(),
    };
    fs::write(
        cfg.output_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;

    let algorithm = cfg.algorithm.to_string();
    let allowance = overshoot_allowance(cfg.algorithm, &problem);
    let x0 = vec![cfg.x0_fill; problem.dim()];

    let results: Vec<(PathBuf, Option<Error>)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let started = Instant::now();
            let ledger = QueryLedger::new();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let path = cfg
                .output_dir
                .join(format!("{algorithm}_seed{seed}.csv"));
            match run_algorithm(cfg, &problem, &mut rng, &ledger, &x0) {
                Ok(trace) => {
                    assert!(
                        trace.final_fqc() <= cfg.fqc_budget + allowance,
                        "budget overshoot beyond one epoch: {} > {} + {}",
                        trace.final_fqc(),
                        cfg.fqc_budget,
                        allowance
                    );
                    trace.assert_fqc_strictly_increasing();
                    let wall_ms = started.elapsed().as_millis() as u64;
                    let gm_points = known_points(&trace, &x0);
                    let res = write_trace_csv(
                        &path,
                        seed,
                        &algorithm,
                        &trace.checkpoints,
                        &gm_points,
                        &problem,
                        wall_ms,
                    );
                    (path, res.err())
                }
                Err(err) => {
                    // Truncated trace: initial checkpoint plus an error row
                    // carrying the last finite state.
                    let wall_ms = started.elapsed().as_millis() as u64;
                    let (last_fqc, last_obj, at_fqc) = match &err {
                        Error::Diverged {
                            fqc,
                            last_fqc,
                            last_objective,
                            ..
                        } => (*last_fqc, *last_objective, *fqc),
                        Error::Stage { source, .. } => match source.as_ref() {
                            Error::Diverged {
                                fqc,
                                last_fqc,
                                last_objective,
                                ..
                            } => (*last_fqc, *last_objective, *fqc),
                            _ => (0, f64::NAN, 0),
                        },
                        _ => (0, f64::NAN, 0),
                    };
                    let rows = vec![
                        Checkpoint {
                            fqc: last_fqc,
                            objective: last_obj,
                            stage: 0,
                            extra: Default::default(),
                            point: None,
                        },
                        Checkpoint {
                            fqc: at_fqc,
                            objective: f64::NAN,
                            stage: u64::MAX,
                            extra: Default::default(),
                            point: None,
                        },
                    ];
                    let _ = write_trace_csv(
                        &path,
                        seed,
                        &algorithm,
                        &rows,
                        &BTreeMap::new(),
                        &problem,
                        wall_ms,
                    );
                    (path, Some(err))
                }
            }
        })
        .collect();

    let mut paths = Vec::new();
    let mut first_err = None;
    for (path, err) in results {
        paths.push(path);
        if let (None, Some(e)) = (&first_err, err) {
            first_err = Some(e);
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(paths),
    }
}

/// A (fqc, objective) staircase for one seed.
#[derive(Debug, Clone)]
struct SeedCurve {
    points: Vec<(u64, f64)>,
}

impl SeedCurve {
    /// Objective at the largest checkpoint with fqc <= budget.
    fn value_at(&self, budget: u64) -> Option<f64> {
        self.points
            .iter()
            .take_while(|(f, _)| *f <= budget)
            .last()
            .map(|(_, o)| *o)
    }

    fn first_positive_fqc(&self) -> u64 {
        self.points
            .iter()
            .map(|(f, _)| *f)
            .find(|f| *f > 0)
            .unwrap_or(1)
    }

    /// Integral of the staircase over ln(fqc) on [from, budget]. The curves
    /// being compared may checkpoint at different granularities, so the
    /// caller picks a common `from` to keep the shared domain fair.
    fn auc_log_fqc(&self, budget: u64, from: u64) -> Option<f64> {
        let lo = from.max(1) as f64;
        let b = budget as f64;
        if b <= lo {
            return None;
        }
        let mut val = self.value_at(from)?;
        let mut prev = lo;
        let mut auc = 0.0;
        for &(f, o) in &self.points {
            let fx = f.max(1) as f64;
            if fx <= lo {
                continue;
            }
            if fx >= b {
                break;
            }
            auc += val * (fx.ln() - prev.ln());
            prev = fx;
            val = o;
        }
        auc += val * (b.ln() - prev.ln());
        Some(auc)
    }
}

#[derive(Debug, Clone)]
struct TraceDir {
    algorithm: String,
    problem: serde_json::Value,
    curves: Vec<SeedCurve>,
}

fn load_trace_dir(dir: &Path) -> Result<TraceDir> {
    let manifest_text = fs::read_to_string(dir.join("manifest.json")).map_err(|e| {
        Error::TraceMismatch(format!("{}: missing manifest.json ({e})", dir.display()))
    })?;
    let manifest: serde_json::Value = serde_json::from_str(&manifest_text)?;
    let problem = manifest["config"]["problem"].clone();

    let mut by_seed: BTreeMap<u64, Vec<(u64, f64)>> = BTreeMap::new();
    let mut algorithm: Option<String> = None;
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("csv") {
            continue;
        }
        let mut reader = csv::Reader::from_path(&path)?;
        for row in reader.deserialize::<TraceRow>() {
            let row = row?;
            match &algorithm {
                None => algorithm = Some(row.algorithm.clone()),
                Some(a) if *a != row.algorithm => {
                    return Err(Error::TraceMismatch(format!(
                        "{}: mixed algorithms {a} and {}",
                        dir.display(),
                        row.algorithm
                    )));
                }
                _ => {}
            }
            if row.objective.is_finite() {
                by_seed.entry(row.seed).or_default().push((row.fqc, row.objective));
            }
        }
    }
    if by_seed.is_empty() {
        return Err(Error::TraceMismatch(format!(
            "{}: no trace rows found",
            dir.display()
        )));
    }
    let curves = by_seed
        .into_values()
        .map(|mut points| {
            points.sort_by_key(|(f, _)| *f);
            SeedCurve { points }
        })
        .collect();
    Ok(TraceDir {
        algorithm: algorithm.unwrap_or_default(),
        problem,
        curves,
    })
}

fn median(values: &mut Vec<f64>) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    A,
    B,
    Tie,
}

#[derive(Debug, Clone, Serialize)]
pub struct BudgetSummary {
    pub budget: u64,
    pub median_a: f64,
    pub median_b: f64,
    pub winner: Winner,
    pub auc_a: f64,
    pub auc_b: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonSummary {
    pub label_a: String,
    pub label_b: String,
    pub rows: Vec<BudgetSummary>,
}

impl std::fmt::Display for ComparisonSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{:>12}  {:>14} {:>14}  {:>6}  {:>14} {:>14}",
            "budget",
            format!("median[{}]", self.label_a),
            format!("median[{}]", self.label_b),
            "winner",
            format!("auc[{}]", self.label_a),
            format!("auc[{}]", self.label_b),
        )?;
        for row in &self.rows {
            writeln!(
                f,
                "{:>12}  {:>14.6e} {:>14.6e}  {:>6}  {:>14.6e} {:>14.6e}",
                row.budget,
                row.median_a,
                row.median_b,
                match row.winner {
                    Winner::A => "A",
                    Winner::B => "B",
                    Winner::Tie => "tie",
                },
                row.auc_a,
                row.auc_b,
            )?;
        }
        Ok(())
    }
}

/// Compare two trace directories over a budget grid: median objective at
/// each budget, win indicator, and staircase AUC over log-FQC. Refuses to
/// compare traces produced from different problems.
pub fn compare_traces(dir_a: &Path, dir_b: &Path, budgets: &[u64]) -> Result<ComparisonSummary> {
    let a = load_trace_dir(dir_a)?;
    let b = load_trace_dir(dir_b)?;
    if a.problem != b.problem {
        return Err(Error::TraceMismatch(
            "trace directories describe different problems".into(),
        ));
    }
    // Common AUC start: the coarsest first checkpoint across both sides.
    let auc_from = a
        .curves
        .iter()
        .chain(&b.curves)
        .map(|c| c.first_positive_fqc())
        .max()
        .unwrap_or(1);
    let mut rows = Vec::new();
    for &budget in budgets {
        let med = |dir: &TraceDir, f: &dyn Fn(&SeedCurve) -> Option<f64>| -> f64 {
            let mut vals: Vec<f64> = dir.curves.iter().filter_map(f).collect();
            if vals.is_empty() {
                f64::NAN
            } else {
                median(&mut vals)
            }
        };
        let median_a = med(&a, &|c| c.value_at(budget));
        let median_b = med(&b, &|c| c.value_at(budget));
        let auc_a = med(&a, &|c| c.auc_log_fqc(budget, auc_from));
        let auc_b = med(&b, &|c| c.auc_log_fqc(budget, auc_from));
        let winner = if median_a < median_b {
            Winner::A
        } else if median_b < median_a {
            Winner::B
        } else {
            Winner::Tie
        };
        rows.push(BudgetSummary {
            budget,
            median_a,
            median_b,
            winner,
            auc_a,
            auc_b,
        });
    }
    Ok(ComparisonSummary {
        label_a: a.algorithm,
        label_b: b.algorithm,
        rows,
    })
}

/// Trace-level switch decision: the first stage whose improvement dropped
/// below the threshold, given the per-stage objective checkpoints. Needs at
/// least two checkpoints.
pub fn switch_orchestrator(checkpoints: &[Checkpoint], threshold: f64) -> Option<usize> {
    assert!(checkpoints.len() >= 2, "need at least two stage checkpoints");
    let objectives: Vec<f64> = checkpoints.iter().map(|c| c.objective).collect();
    switch_after(&objectives, threshold)
}
