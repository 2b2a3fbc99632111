//! Closed-form proximal operators for the supported regularizers and the
//! proximal update step shared by every solver.

use serde::{Deserialize, Serialize};

use crate::vecops;

/// The non-smooth term `r(x)`. The elastic-net form is
/// `lambda1 * ||x||_1 + lambda2 * ||x||_2^2` — note the squared-norm term
/// carries no 1/2, so its prox divides by `1 + 2*tau*lambda2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Regularizer {
    None,
    L1 { lambda1: f64 },
    SquaredL2 { lambda2: f64 },
    ElasticNet { lambda1: f64, lambda2: f64 },
}

impl Regularizer {
    pub fn elastic_net(lambda1: f64, lambda2: f64) -> Self {
        assert!(lambda1 >= 0.0 && lambda2 >= 0.0, "negative penalty weight");
        Regularizer::ElasticNet { lambda1, lambda2 }
    }

    /// (lambda1, lambda2) with zeros filled in for the specializations.
    pub fn weights(&self) -> (f64, f64) {
        match *self {
            Regularizer::None => (0.0, 0.0),
            Regularizer::L1 { lambda1 } => (lambda1, 0.0),
            Regularizer::SquaredL2 { lambda2 } => (0.0, lambda2),
            Regularizer::ElasticNet { lambda1, lambda2 } => (lambda1, lambda2),
        }
    }

    /// r(x). Analytic, never metered.
    pub fn value(&self, x: &[f64]) -> f64 {
        let (l1, l2) = self.weights();
        if l1 == 0.0 && l2 == 0.0 {
            return 0.0;
        }
        let abs: f64 = x.iter().map(|v| v.abs()).sum();
        l1 * abs + l2 * vecops::norm_sq(x)
    }

    /// prox_{tau * r}(v): argmin_z r(z) + ||z - v||^2 / (2 tau), componentwise
    /// soft-threshold then shrink. Exact for all four variants.
    pub fn prox(&self, tau: f64, v: &[f64]) -> Vec<f64> {
        assert!(tau >= 0.0, "prox needs tau >= 0, got {tau}");
        let (l1, l2) = self.weights();
        let thresh = tau * l1;
        let shrink = 1.0 + 2.0 * tau * l2;
        v.iter()
            .map(|&vj| {
                let soft = vj.signum() * (vj.abs() - thresh).max(0.0);
                soft / shrink
            })
            .collect()
    }
}

/// One proximal gradient step: prox_{eta r}(x - eta * g).
pub fn prox_step(x: &[f64], g: &[f64], eta: f64, reg: &Regularizer) -> Vec<f64> {
    assert!(eta > 0.0, "prox_step needs eta > 0, got {eta}");
    let moved = vecops::add_scaled(x, -eta, g);
    reg.prox(eta, &moved)
}

/// Gradient mapping (x - prox_step(x, g, eta, r)) / eta, the proximal
/// stationarity proxy. Reduces to g itself when r is absent.
pub fn grad_mapping(x: &[f64], g: &[f64], eta: f64, reg: &Regularizer) -> Vec<f64> {
    let stepped = prox_step(x, g, eta, reg);
    x.iter()
        .zip(&stepped)
        .map(|(xj, sj)| (xj - sj) / eta)
        .collect()
}
