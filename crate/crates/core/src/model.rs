//! Problem representation, metered oracle access, and the quadratic
//! augmentation used by both reduction frameworks.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::prox::Regularizer;
use crate::vecops;

/// Monotone counter of component-function evaluations. Every metered oracle
/// call charges exactly one unit; nothing else in the library touches it.
/// Atomic so concurrent diagnostic evaluation cannot lose counts.
#[derive(Debug, Default)]
pub struct QueryLedger {
    total: AtomicU64,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total(&self) -> u64 {
        self.total.load(Ordering::Relaxed)
    }

    pub(crate) fn charge(&self, k: u64) {
        self.total.fetch_add(k, Ordering::Relaxed);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexityClass {
    StronglyConvex,
    Convex,
    WeaklyConvex,
}

/// Analytic constants of the smooth part. The library never estimates these;
/// built-in problems set them and user problems must supply them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    /// Smoothness constant of every component.
    pub l: f64,
    /// Strong-convexity constant of the smooth average (0 when absent).
    pub gamma: f64,
    /// Weak-convexity constant (0 when absent).
    pub sigma: f64,
    pub convexity: ConvexityClass,
}

impl ProblemMeta {
    pub fn convex(l: f64) -> Self {
        assert!(l > 0.0, "smoothness constant must be positive");
        ProblemMeta {
            l,
            gamma: 0.0,
            sigma: 0.0,
            convexity: ConvexityClass::Convex,
        }
    }

    pub fn strongly_convex(l: f64, gamma: f64) -> Self {
        assert!(l > 0.0, "smoothness constant must be positive");
        assert!(gamma > 0.0 && gamma <= l, "need 0 < gamma <= L");
        ProblemMeta {
            l,
            gamma,
            sigma: 0.0,
            convexity: ConvexityClass::StronglyConvex,
        }
    }

    pub fn weakly_convex(l: f64, sigma: f64) -> Self {
        assert!(l > 0.0, "smoothness constant must be positive");
        assert!(sigma > 0.0 && sigma <= l, "need 0 < sigma <= L");
        ProblemMeta {
            l,
            gamma: 0.0,
            sigma,
            convexity: ConvexityClass::WeaklyConvex,
        }
    }

    /// Meta after adding (c/2)||x - a||^2 to every component: smoothness grows
    /// by c and the curvature lower bound gamma - sigma shifts up by c.
    fn augmented(&self, c: f64) -> Self {
        let lower = self.gamma - self.sigma + c;
        let (gamma, sigma) = if lower >= 0.0 {
            (lower, 0.0)
        } else {
            (0.0, -lower)
        };
        let convexity = if gamma > 0.0 {
            ConvexityClass::StronglyConvex
        } else if sigma > 0.0 {
            ConvexityClass::WeaklyConvex
        } else {
            ConvexityClass::Convex
        };
        ProblemMeta {
            l: self.l + c,
            gamma,
            sigma,
            convexity,
        }
    }
}

/// Framework-added quadratic (c/2)||x - a||^2. Computed analytically on top
/// of each oracle return value; costs zero queries because the term is
/// introduced by the reduction, not the black box.
#[derive(Debug, Clone)]
pub struct QuadraticAugmentation {
    pub coeff: f64,
    pub anchor: Vec<f64>,
}

impl QuadraticAugmentation {
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.coeff * vecops::dist_sq(x, &self.anchor)
    }

    fn add_grad(&self, x: &[f64], out: &mut [f64]) {
        for ((o, xj), aj) in out.iter_mut().zip(x).zip(&self.anchor) {
            *o += self.coeff * (xj - aj);
        }
    }
}

/// The component value oracles (and optional white-box gradients) behind a
/// problem. Implementations must be cheap to call and thread-safe; the
/// ledger bookkeeping lives outside this trait.
pub trait Components: Send + Sync {
    fn len(&self) -> usize;
    fn dim(&self) -> usize;
    fn value(&self, i: usize, x: &[f64]) -> f64;

    /// Analytic gradient of component i, accumulated into `out` (which is
    /// zeroed by the caller). Only called when `has_gradient` is true.
    fn gradient(&self, _i: usize, _x: &[f64], _out: &mut [f64]) {
        panic!("white-box gradient not implemented for this oracle");
    }

    fn has_gradient(&self) -> bool {
        false
    }
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Closure-backed oracle set, the construction path for synthetic fixtures.
pub struct ClosureComponents {
    dim: usize,
    values: Vec<Arc<ValueFn>>,
    grads: Option<Vec<Arc<GradFn>>>,
}

impl ClosureComponents {
    pub fn new(dim: usize, values: Vec<Arc<ValueFn>>) -> Self {
        assert!(dim >= 1 && !values.is_empty(), "need n >= 1 and d >= 1");
        ClosureComponents {
            dim,
            values,
            grads: None,
        }
    }

    pub fn with_grads(mut self, grads: Vec<Arc<GradFn>>) -> Self {
        assert_eq!(grads.len(), self.values.len());
        self.grads = Some(grads);
        self
    }
}

impl Components for ClosureComponents {
    fn len(&self) -> usize {
        self.values.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, i: usize, x: &[f64]) -> f64 {
        (self.values[i])(x)
    }

    fn gradient(&self, i: usize, x: &[f64], out: &mut [f64]) {
        (self.grads.as_ref().expect("no white-box gradients")[i])(x, out)
    }

    fn has_gradient(&self) -> bool {
        self.grads.is_some()
    }
}

/// Finite-sum objective F(x) = (1/n) sum_i f_i(x) + r(x) with metered
/// component access. Cloning is cheap (the oracle set is shared) and clones
/// see any augmentations stacked on top of the base oracles.
#[derive(Clone)]
pub struct BlackBoxProblem {
    components: Arc<dyn Components>,
    pub regularizer: Regularizer,
    pub meta: ProblemMeta,
    augmentations: Vec<QuadraticAugmentation>,
    whitebox_enabled: bool,
}

impl BlackBoxProblem {
    pub fn new(components: Arc<dyn Components>, regularizer: Regularizer, meta: ProblemMeta) -> Self {
        assert!(components.len() >= 1, "need n >= 1");
        assert!(components.dim() >= 1, "need d >= 1");
        BlackBoxProblem {
            components,
            regularizer,
            meta,
            augmentations: Vec::new(),
            whitebox_enabled: true,
        }
    }

    /// Build from per-component closures; the usual fixture path.
    pub fn from_fns(
        dim: usize,
        values: Vec<Arc<ValueFn>>,
        regularizer: Regularizer,
        meta: ProblemMeta,
    ) -> Self {
        Self::new(Arc::new(ClosureComponents::new(dim, values)), regularizer, meta)
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components.dim()
    }

    /// Benchmark mode: hide the white-box gradient channel so FQC
    /// comparisons cannot lean on it.
    pub fn without_whitebox(mut self) -> Self {
        self.whitebox_enabled = false;
        self
    }

    pub fn has_whitebox(&self) -> bool {
        self.whitebox_enabled && self.components.has_gradient()
    }

    pub fn augmentations(&self) -> &[QuadraticAugmentation] {
        &self.augmentations
    }

    /// View of this problem with (c/2)||x - a||^2 added to every component.
    /// The quadratic is analytic (zero queries); meta gains c in both L and
    /// the curvature lower bound.
    pub fn augmented(&self, coeff: f64, anchor: Vec<f64>) -> Self {
        assert!(coeff >= 0.0, "augmentation coefficient must be >= 0");
        assert_eq!(anchor.len(), self.dim());
        let mut out = self.clone();
        out.meta = self.meta.augmented(coeff);
        out.augmentations.push(QuadraticAugmentation { coeff, anchor });
        out
    }

    fn raw_component(&self, i: usize, x: &[f64]) -> f64 {
        assert!(i < self.n(), "component index {i} out of range (n = {})", self.n());
        assert!(vecops::all_finite(x), "non-finite query point");
        let mut v = self.components.value(i, x);
        for aug in &self.augmentations {
            v += aug.value(x);
        }
        v
    }

    /// Metered component evaluation: f_i(x) plus augmentation, ledger +1.
    pub fn eval_component(&self, i: usize, x: &[f64], ledger: &QueryLedger) -> f64 {
        ledger.charge(1);
        self.raw_component(i, x)
    }

    /// Unmetered component evaluation for diagnostics and trace checkpoints.
    pub fn eval_component_diag(&self, i: usize, x: &[f64]) -> f64 {
        self.raw_component(i, x)
    }

    /// Smooth part f(x) = (1/n) sum_i f_i(x); ledger +n.
    pub fn smooth_avg(&self, x: &[f64], ledger: &QueryLedger) -> f64 {
        let n = self.n();
        let mut acc = 0.0;
        for i in 0..n {
            acc += self.eval_component(i, x, ledger);
        }
        acc / n as f64
    }

    pub fn smooth_avg_diag(&self, x: &[f64]) -> f64 {
        let n = self.n();
        (0..n).map(|i| self.raw_component(i, x)).sum::<f64>() / n as f64
    }

    /// Full objective F(x) = f(x) + r(x). The regularizer is analytic and
    /// never metered; the smooth part costs n queries.
    pub fn objective(&self, x: &[f64], ledger: &QueryLedger) -> f64 {
        self.smooth_avg(x, ledger) + self.regularizer.value(x)
    }

    /// Unmetered objective for checkpoints; measurement must not distort
    /// the query curves.
    pub fn objective_diag(&self, x: &[f64]) -> f64 {
        self.smooth_avg_diag(x) + self.regularizer.value(x)
    }

    /// White-box gradient of component i (with augmentation terms), or None
    /// when the channel is absent or disabled. Never metered.
    pub fn component_grad(&self, i: usize, x: &[f64]) -> Option<Vec<f64>> {
        if !self.has_whitebox() {
            return None;
        }
        let mut out = vec![0.0; self.dim()];
        self.components.gradient(i, x, &mut out);
        for aug in &self.augmentations {
            aug.add_grad(x, &mut out);
        }
        Some(out)
    }

    /// White-box gradient of the smooth average, diagnostics only.
    pub fn full_grad(&self, x: &[f64]) -> Option<Vec<f64>> {
        if !self.has_whitebox() {
            return None;
        }
        let n = self.n();
        let d = self.dim();
        let mut acc = vec![0.0; d];
        let mut buf = vec![0.0; d];
        for i in 0..n {
            buf.iter_mut().for_each(|b| *b = 0.0);
            self.components.gradient(i, x, &mut buf);
            vecops::axpy(&mut acc, 1.0 / n as f64, &buf);
        }
        for aug in &self.augmentations {
            aug.add_grad(x, &mut acc);
        }
        Some(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_norm_sq_problem(d: usize) -> BlackBoxProblem {
        BlackBoxProblem::from_fns(
            d,
            vec![Arc::new(|x: &[f64]| 0.5 * vecops::norm_sq(x))],
            Regularizer::None,
            ProblemMeta::strongly_convex(1.0, 1.0),
        )
    }

    #[test]
    fn eval_component_meters_one_query() {
        let p = half_norm_sq_problem(2);
        let ledger = QueryLedger::new();
        let v = p.eval_component(0, &[1.0, 2.0], &ledger);
        assert_eq!(v, 2.5);
        assert_eq!(ledger.total(), 1);
    }

    #[test]
    fn augmentation_value_is_exact() {
        let zero = BlackBoxProblem::from_fns(
            2,
            vec![Arc::new(|_: &[f64]| 0.0)],
            Regularizer::None,
            ProblemMeta::convex(1.0),
        );
        let ledger = QueryLedger::new();
        let aug = zero.augmented(2.0, vec![0.0, 0.0]);
        assert_eq!(aug.eval_component(0, &[1.0, 0.0], &ledger), 1.0);
        let anchored = zero.augmented(2.0, vec![1.0, 0.0]);
        assert_eq!(anchored.eval_component(0, &[0.0, 0.0], &ledger), 1.0);
        assert_eq!(ledger.total(), 2);
    }

    #[test]
    fn augment_zero_coeff_is_identity() {
        let p = half_norm_sq_problem(3);
        let aug = p.augmented(0.0, vec![5.0, 5.0, 5.0]);
        let x = [0.3, -1.0, 2.0];
        assert_eq!(p.eval_component_diag(0, &x), aug.eval_component_diag(0, &x));
        assert_eq!(aug.meta.gamma, p.meta.gamma);
    }

    #[test]
    fn augment_meta_bookkeeping() {
        let convex = BlackBoxProblem::from_fns(
            1,
            vec![Arc::new(|_: &[f64]| 0.0)],
            Regularizer::None,
            ProblemMeta::convex(1.0),
        );
        let aug = convex.augmented(0.3, vec![0.0]);
        assert_eq!(aug.meta.gamma, 0.3);
        assert_eq!(aug.meta.l, 1.3);
        assert_eq!(aug.meta.convexity, ConvexityClass::StronglyConvex);

        // sigma-weakly convex base plus 2*sigma leaves sigma of strong convexity
        let weak = BlackBoxProblem::from_fns(
            1,
            vec![Arc::new(|_: &[f64]| 0.0)],
            Regularizer::None,
            ProblemMeta::weakly_convex(1.0, 0.25),
        );
        let aug = weak.augmented(0.5, vec![0.0]);
        assert!((aug.meta.gamma - 0.25).abs() < 1e-15);
        assert_eq!(aug.meta.sigma, 0.0);
    }

    #[test]
    fn smooth_avg_and_objective() {
        let p = BlackBoxProblem::from_fns(
            1,
            vec![Arc::new(|x: &[f64]| x[0]), Arc::new(|x: &[f64]| 3.0 * x[0])],
            Regularizer::None,
            ProblemMeta::convex(1.0),
        );
        let ledger = QueryLedger::new();
        assert_eq!(p.smooth_avg(&[1.0], &ledger), 2.0);
        assert_eq!(ledger.total(), 2);

        let l1 = BlackBoxProblem::from_fns(
            2,
            vec![Arc::new(|_: &[f64]| 0.0)],
            Regularizer::L1 { lambda1: 1.0 },
            ProblemMeta::convex(1.0),
        );
        assert_eq!(l1.objective(&[1.0, -2.0], &ledger), 3.0);
        assert_eq!(ledger.total(), 3); // r is not metered
    }

    #[test]
    fn single_component_average_is_identity() {
        let p = half_norm_sq_problem(2);
        let ledger = QueryLedger::new();
        let x = [0.7, -0.3];
        assert_eq!(
            p.smooth_avg(&x, &ledger),
            p.eval_component(0, &x, &ledger)
        );
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn component_index_checked() {
        let p = half_norm_sq_problem(2);
        p.eval_component(1, &[0.0, 0.0], &QueryLedger::new());
    }

    #[test]
    #[should_panic(expected = "non-finite")]
    fn non_finite_point_rejected() {
        let p = half_norm_sq_problem(2);
        p.eval_component(0, &[f64::NAN, 0.0], &QueryLedger::new());
    }

    #[test]
    fn whitebox_channel_can_be_disabled() {
        let comps = ClosureComponents::new(1, vec![Arc::new(|x: &[f64]| x[0] * x[0])])
            .with_grads(vec![Arc::new(|x: &[f64], out: &mut [f64]| {
                out[0] = 2.0 * x[0];
            })]);
        let p = BlackBoxProblem::new(
            Arc::new(comps),
            Regularizer::None,
            ProblemMeta::convex(2.0),
        );
        assert_eq!(p.component_grad(0, &[3.0]), Some(vec![6.0]));
        let hidden = p.without_whitebox();
        assert!(hidden.component_grad(0, &[3.0]).is_none());
    }
}
