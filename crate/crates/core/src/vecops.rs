//! Dense vector helpers shared by the estimators and solvers.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// out += alpha * v
pub fn axpy(out: &mut [f64], alpha: f64, v: &[f64]) {
    debug_assert_eq!(out.len(), v.len());
    for (o, x) in out.iter_mut().zip(v) {
        *o += alpha * x;
    }
}

/// a + alpha * v as a fresh vector.
pub fn add_scaled(a: &[f64], alpha: f64, v: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), v.len());
    a.iter().zip(v).map(|(x, y)| x + alpha * y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(out: &mut [f64], alpha: f64) {
    for o in out.iter_mut() {
        *o *= alpha;
    }
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}
