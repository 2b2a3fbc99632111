//! Variance-reduced ZO proximal solvers and the baselines they are
//! benchmarked against. All solvers share the same trace format, the same
//! divergence guard and the same query-cost discipline: every epoch's ledger
//! delta is asserted against its closed-form cost.

mod rspgf;
mod saga;
mod svrg;

pub use rspgf::rspgf_baseline;
pub use saga::zor_prox_saga;
pub use svrg::{zo_prox_svrg_coord, zor_prox_svrg};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators;
use crate::model::BlackBoxProblem;
use crate::vecops;

/// How the per-epoch snapshot is chosen in the SVRG family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotMode {
    /// A uniformly random iterate among x_0 .. x_{m-1} of the epoch.
    RandomIterate,
    /// The average of x_1 .. x_m.
    Average,
    /// The final iterate x_m.
    Last,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamMode {
    Theory,
    Tuned,
}

/// Solver hyperparameters. `epochs` counts outer epochs for the SVRG family
/// and iterations for SAGA/RSPGF.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub eta: f64,
    pub batch: usize,
    /// Inner-loop length m (SVRG family only).
    pub inner_len: usize,
    pub epochs: usize,
    pub mu: f64,
    pub snapshot: SnapshotMode,
    pub param_mode: ParamMode,
    /// Absolute ledger ceiling; the solver stops starting new work once the
    /// ledger would pass it. None = unbounded.
    #[serde(default)]
    pub fqc_cap: Option<u64>,
    /// Queries between trace checkpoints for the iteration-style solvers.
    /// None picks a full-gradient-equivalent interval.
    #[serde(default)]
    pub checkpoint_queries: Option<u64>,
    /// Attach the monitored iterate to each checkpoint.
    #[serde(default)]
    pub record_points: bool,
}

impl SolverConfig {
    /// Desk-scale defaults: eta = 0.1/L, b = min(n, 10), m = ceil(n/b).
    /// Theory-mode steps are impractically small outside invariant tests.
    pub fn tuned(l: f64, n: usize, d: usize) -> Self {
        let batch = n.min(10);
        SolverConfig {
            eta: 0.1 / l,
            batch,
            inner_len: n.div_ceil(batch),
            epochs: 1,
            mu: estimators::default_mu(d),
            snapshot: SnapshotMode::RandomIterate,
            param_mode: ParamMode::Tuned,
            fqc_cap: None,
            checkpoint_queries: None,
            record_points: false,
        }
    }

    /// SVRG parameters that realize the 3/4 per-epoch contraction.
    pub fn svrg_theory(l: f64, gamma: f64, d: usize, n: usize) -> Result<Self> {
        let (eta, batch, inner_len) = svrg_theory_params(l, gamma, d, n)?;
        Ok(SolverConfig {
            eta,
            batch,
            inner_len,
            epochs: 1,
            mu: estimators::default_mu(d),
            snapshot: SnapshotMode::RandomIterate,
            param_mode: ParamMode::Theory,
            fqc_cap: None,
            checkpoint_queries: None,
            record_points: false,
        })
    }

    pub fn saga_theory(l: f64, gamma: f64, d: usize, n: usize) -> Result<Self> {
        let (eta, batch) = saga_theory_params(l, gamma, d, n)?;
        Ok(SolverConfig {
            eta,
            batch,
            inner_len: 1,
            epochs: 1,
            mu: estimators::default_mu(d),
            snapshot: SnapshotMode::RandomIterate,
            param_mode: ParamMode::Theory,
            fqc_cap: None,
            checkpoint_queries: None,
            record_points: false,
        })
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn with_cap(mut self, cap: Option<u64>) -> Self {
        self.fqc_cap = cap;
        self
    }

    pub fn validate(&self, l: f64) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::InvalidConfig(format!("eta must be > 0, got {}", self.eta)));
        }
        if self.batch < 1 {
            return Err(Error::InvalidConfig("batch size must be >= 1".into()));
        }
        if self.inner_len < 1 {
            return Err(Error::InvalidConfig("inner loop length m must be >= 1".into()));
        }
        if self.epochs < 1 {
            return Err(Error::InvalidConfig("epoch/iteration count must be >= 1".into()));
        }
        if !(self.mu > 0.0) {
            return Err(Error::InvalidConfig(format!("mu must be > 0, got {}", self.mu)));
        }
        if self.param_mode == ParamMode::Theory && self.eta > 1.0 / l {
            return Err(Error::InvalidConfig(format!(
                "theory mode requires eta <= 1/L ({} > {})",
                self.eta,
                1.0 / l
            )));
        }
        Ok(())
    }
}

/// One trace point: ledger count, diagnostic objective, epoch/stage index.
/// Solvers attach the monitored iterate when `record_points` is on, so a
/// wrapping reduction can re-evaluate checkpoints against the base problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub fqc: u64,
    pub objective: f64,
    pub stage: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
    #[serde(skip)]
    pub point: Option<Vec<f64>>,
}

/// Metadata of one reduction stage: the quadratic added ((coeff/2)||x-a||^2),
/// where it was anchored, and what came out.
#[derive(Debug, Clone)]
pub struct StageRecord {
    pub index: usize,
    pub coeff: f64,
    pub anchor: Vec<f64>,
    pub output: Vec<f64>,
    pub fqc: u64,
    pub objective: f64,
}

/// Full record of a solver or reduction run.
#[derive(Debug, Clone, Default)]
pub struct RunTrace {
    pub checkpoints: Vec<Checkpoint>,
    /// Final iterate.
    pub output: Vec<f64>,
    /// SVRG-family snapshot output (the object the epoch bound controls);
    /// reductions consume this when present.
    pub snapshot_output: Option<Vec<f64>>,
    /// Reduction stage log (empty for flat solver runs).
    pub stages: Vec<StageRecord>,
    /// Stage index after which the run handed off to the fallback solver.
    pub switched_after_stage: Option<usize>,
    /// Stage whose output was drawn as x_alpha (non-convex reduction only).
    pub alpha_stage: Option<usize>,
}

impl RunTrace {
    pub(crate) fn record(&mut self, fqc: u64, objective: f64, stage: u64) {
        self.record_at(fqc, objective, stage, None);
    }

    pub(crate) fn record_at(
        &mut self,
        fqc: u64,
        objective: f64,
        stage: u64,
        point: Option<Vec<f64>>,
    ) {
        if let Some(last) = self.checkpoints.last() {
            debug_assert!(fqc >= last.fqc, "checkpoint fqc went backwards");
        }
        self.checkpoints.push(Checkpoint {
            fqc,
            objective,
            stage,
            extra: BTreeMap::new(),
            point,
        });
    }

    pub fn final_fqc(&self) -> u64 {
        self.checkpoints.last().map(|c| c.fqc).unwrap_or(0)
    }

    pub fn final_objective(&self) -> f64 {
        self.checkpoints.last().map(|c| c.objective).unwrap_or(f64::NAN)
    }

    /// Checkpoint counters must strictly increase for any run that spends
    /// queries (every ZO solver does).
    pub fn assert_fqc_strictly_increasing(&self) {
        for pair in self.checkpoints.windows(2) {
            assert!(
                pair[1].fqc > pair[0].fqc,
                "checkpoint fqc not strictly increasing: {} -> {}",
                pair[0].fqc,
                pair[1].fqc
            );
        }
    }
}

/// Ceiling with a relative tolerance, so values that are integral up to
/// floating-point noise do not get bumped to the next integer.
pub(crate) fn ceil_tol(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Corollary-style SVRG parameters: eta = 3/(170 d L), b = 25,
/// m = ceil(190 d L / gamma). Requires strong convexity.
pub fn svrg_theory_params(l: f64, gamma: f64, d: usize, _n: usize) -> Result<(f64, usize, usize)> {
    if !(l > 0.0) || d < 1 {
        return Err(Error::InvalidConfig("need L > 0 and d >= 1".into()));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidConfig(
            "SVRG theory parameters require strong convexity (gamma > 0)".into(),
        ));
    }
    let dl = d as f64 * l;
    let eta = 3.0 / (170.0 * dl);
    let m = (ceil_tol(190.0 * dl / gamma) as usize).max(1);
    Ok((eta, 25, m))
}

/// Theorem-style SAGA parameters: b = 6, eta = min(1/(95 d L), 2/(3 n gamma)).
pub fn saga_theory_params(l: f64, gamma: f64, d: usize, n: usize) -> Result<(f64, usize)> {
    if !(l > 0.0) || d < 1 || n < 1 {
        return Err(Error::InvalidConfig("need L > 0, d >= 1, n >= 1".into()));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidConfig(
            "SAGA theory parameters require strong convexity (gamma > 0)".into(),
        ));
    }
    let eta = (1.0 / (95.0 * d as f64 * l)).min(2.0 / (3.0 * n as f64 * gamma));
    Ok((eta, 6))
}

/// The contraction/floor constants a solver configuration realizes:
/// gap' - delta_mu <= contraction * (gap - delta_mu) + residual.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ZoodEstimate {
    /// Contraction factor K in (0, 1).
    pub contraction: f64,
    /// Smoothing floor delta_mu.
    pub mu_floor: f64,
    /// Residual error E (needs ||grad f(x*)||^2, an analysis constant).
    pub residual: f64,
}

impl ZoodEstimate {
    /// Constants of one SVRG epoch: contraction beta2/beta1 with
    /// beta1 = 2 eta (1 - 24 d L eta / b),
    /// beta2 = 2/(m gamma) + 48 d L eta^2/(b m) + 16 d L eta^2 (3/b + 2).
    #[allow(clippy::too_many_arguments)]
    pub fn for_svrg(
        eta: f64,
        b: usize,
        m: usize,
        l: f64,
        gamma: f64,
        d: usize,
        mu: f64,
        grad_opt_sq: f64,
    ) -> Result<Self> {
        let (b_f, m_f, d_f) = (b as f64, m as f64, d as f64);
        let beta1 = 2.0 * eta * (1.0 - 24.0 * d_f * l * eta / b_f);
        let beta2 = 2.0 / (m_f * gamma)
            + 48.0 * d_f * l * eta * eta / (b_f * m_f)
            + 16.0 * d_f * l * eta * eta * (3.0 / b_f + 2.0);
        let contraction = beta2 / beta1;
        if !(beta1 > beta2 && beta2 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "SVRG parameters do not contract: beta1 = {beta1:.3e}, beta2 = {beta2:.3e}"
            )));
        }
        let mu_floor =
            2.0 * eta * l * mu * mu / (beta1 - beta2) * (1.0 + (3.0 / b_f + 1.0) * eta * l * d_f * d_f);
        let residual = 16.0 * eta * eta * d_f * grad_opt_sq / beta1;
        Ok(ZoodEstimate {
            contraction,
            mu_floor,
            residual,
        })
    }

    /// Constants of a K-iteration SAGA run:
    /// contraction (1/(2 eta)) (1 - eta gamma / 2)^K (2/gamma + 2 eta + c)
    /// with c = 96 eta^2 n d L / (b (2b - eta n gamma)).
    #[allow(clippy::too_many_arguments)]
    pub fn for_saga(
        eta: f64,
        b: usize,
        iterations: u64,
        l: f64,
        gamma: f64,
        d: usize,
        n: usize,
        mu: f64,
        grad_opt_sq: f64,
    ) -> Result<Self> {
        let (b_f, d_f, n_f) = (b as f64, d as f64, n as f64);
        let c = 96.0 * eta * eta * n_f * d_f * l / (b_f * (2.0 * b_f - eta * n_f * gamma));
        let rate = 1.0 - eta * gamma / 2.0;
        let contraction = (2.0 / gamma + 2.0 * eta + c) / (2.0 * eta) * rate.powi(iterations as i32);
        if !(contraction > 0.0 && contraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "SAGA run of {iterations} iterations realizes contraction {contraction:.3e}, not in (0,1)"
            )));
        }
        let mu_floor = 2.0 * (b_f + 3.0) * l * l * d_f * d_f * mu * mu / (b_f * gamma);
        let residual = 16.0 * d_f * grad_opt_sq / gamma;
        Ok(ZoodEstimate {
            contraction,
            mu_floor,
            residual,
        })
    }
}

pub(crate) const DIVERGENCE_NORM: f64 = 1e8;

/// Shared divergence guard: iterate must stay finite and inside the norm
/// ball; errors carry the last finite checkpoint for post-mortem.
pub(crate) fn guard_iterate(
    x: &[f64],
    fqc: u64,
    last: Option<&Checkpoint>,
    context: &str,
) -> Result<()> {
    let bad_norm = vecops::norm(x) > DIVERGENCE_NORM;
    if bad_norm || !vecops::all_finite(x) {
        let reason = if bad_norm {
            format!("{context}: iterate norm exceeded {DIVERGENCE_NORM:e}")
        } else {
            format!("{context}: iterate is non-finite")
        };
        return Err(Error::Diverged {
            fqc,
            reason,
            last_fqc: last.map(|c| c.fqc).unwrap_or(0),
            last_objective: last.map(|c| c.objective).unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

pub(crate) fn guard_objective(
    problem: &BlackBoxProblem,
    x: &[f64],
    fqc: u64,
    last: Option<&Checkpoint>,
    context: &str,
) -> Result<f64> {
    let obj = problem.objective_diag(x);
    if !obj.is_finite() {
        return Err(Error::Diverged {
            fqc,
            reason: format!("{context}: objective is non-finite"),
            last_fqc: last.map(|c| c.fqc).unwrap_or(0),
            last_objective: last.map(|c| c.objective).unwrap_or(f64::NAN),
        });
    }
    Ok(obj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svrg_theory_values() {
        let (eta, b, m) = svrg_theory_params(1.0, 0.01, 5, 100).unwrap();
        assert_eq!(eta, 3.0 / 850.0);
        assert_eq!(b, 25);
        assert_eq!(m, 95_000);

        let (eta, _, m) = svrg_theory_params(1.0, 1.0, 1, 10).unwrap();
        assert_eq!(eta, 3.0 / 170.0);
        assert_eq!(m, 190);
    }

    #[test]
    fn svrg_theory_m_clamps_to_one() {
        // gamma far above 190 d L still yields a valid inner length.
        let (_, _, m) = svrg_theory_params(1e-3, 1.0, 1, 1).unwrap();
        assert!(m >= 1);
    }

    #[test]
    fn svrg_theory_requires_strong_convexity() {
        assert!(svrg_theory_params(1.0, 0.0, 5, 10).is_err());
    }

    #[test]
    fn saga_theory_values() {
        let (eta, b) = saga_theory_params(1.0, 1.0, 1, 10).unwrap();
        assert_eq!(eta, 1.0 / 95.0); // min(1/95, 1/15)
        assert_eq!(b, 6);

        // huge n switches the min to the 2/(3 n gamma) branch
        let (eta, b) = saga_theory_params(1.0, 1.0, 1, 10_000_000).unwrap();
        assert_eq!(eta, 2.0 / 30_000_000.0);
        assert_eq!(b, 6);

        assert!(saga_theory_params(1.0, 0.0, 1, 10).is_err());
    }

    #[test]
    fn theory_svrg_contraction_is_three_quarters_bound() {
        // Corollary parameters must realize a contraction <= 3/4.
        let (l, gamma, d, n) = (2.0, 0.05, 7, 50);
        let (eta, b, m) = svrg_theory_params(l, gamma, d, n).unwrap();
        let z = ZoodEstimate::for_svrg(eta, b, m, l, gamma, d, 1e-4, 0.0).unwrap();
        assert!(z.contraction <= 0.75 + 1e-12, "got {}", z.contraction);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolverConfig::tuned(1.0, 100, 20);
        cfg.epochs = 3;
        assert!(cfg.validate(1.0).is_ok());

        let mut bad = cfg.clone();
        bad.inner_len = 0;
        assert!(matches!(bad.validate(1.0), Err(Error::InvalidConfig(_))));

        let mut bad = cfg.clone();
        bad.eta = 0.0;
        assert!(bad.validate(1.0).is_err());

        // tuned eta = 0.1/L passes the theory gate only because of its mode
        let mut theory = cfg;
        theory.param_mode = ParamMode::Theory;
        theory.eta = 2.0; // > 1/L
        assert!(theory.validate(1.0).is_err());
    }

    #[test]
    fn ceil_tol_handles_float_noise() {
        assert_eq!(ceil_tol(94_999.99999999999), 95_000.0);
        assert_eq!(ceil_tol(95_000.00000000001), 95_000.0);
        assert_eq!(ceil_tol(95_000.5), 95_001.0);
        assert_eq!(ceil_tol(2.0), 2.0);
    }
}
