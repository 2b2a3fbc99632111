//! Dataset ingestion (LIBSVM sparse text), synthetic data generation, and
//! the convex/non-convex logistic problem constructors with white-box
//! gradients for diagnostics.

use std::io::BufRead;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::sample_sphere;
use crate::model::{BlackBoxProblem, Components, ProblemMeta};
use crate::prox::Regularizer;

/// Sparse rows with {0,1} labels. Feature indices are 0-based internally
/// and strictly ascending within a row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rows: Vec<Vec<(u32, f64)>>,
    pub labels: Vec<u8>,
    pub dim: usize,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn max_row_norm_sq(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.iter().map(|(_, v)| v * v).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Raise the declared dimension (e.g. to match a published value).
    pub fn pad_dim(&mut self, dim: usize) {
        assert!(dim >= self.dim, "cannot shrink below the max feature index");
        self.dim = dim;
    }

    /// Canonical LIBSVM text: "label idx:val ..." with 1-based ascending
    /// indices and {1,0} labels. `parse(serialize(ds)) == ds`.
    pub fn to_libsvm_string(&self) -> String {
        let mut out = String::new();
        for (row, label) in self.rows.iter().zip(&self.labels) {
            out.push_str(if *label == 1 { "1" } else { "0" });
            for (idx, val) in row {
                out.push_str(&format!(" {}:{}", idx + 1, val));
            }
            out.push('\n');
        }
        out
    }
}

fn sparse_dot(row: &[(u32, f64)], x: &[f64]) -> f64 {
    row.iter().map(|&(j, v)| v * x[j as usize]).sum()
}

/// Parse LIBSVM sparse text: `label idx:val idx:val ...` per line, 1-based
/// strictly ascending indices, labels in {+1,-1} or {1,0} (mapped to {1,0}).
/// Blank lines and `#` comments are skipped. Errors carry the line number.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut dim = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a first token");
        let label_val: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("bad label token {label_tok:?}"),
        })?;
        let label = if label_val == 1.0 {
            1
        } else if label_val == 0.0 || label_val == -1.0 {
            0
        } else {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("label {label_tok:?} not in {{+1,-1,1,0}}"),
            });
        };

        let mut row: Vec<(u32, f64)> = Vec::new();
        let mut prev_idx: u32 = 0;
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("expected idx:val, got {tok:?}"),
            })?;
            let idx: u32 = idx_s.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad feature index in token {tok:?}"),
            })?;
            if idx < 1 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("feature index must be >= 1 in token {tok:?}"),
                });
            }
            if idx <= prev_idx {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("indices not strictly ascending at token {tok:?}"),
                });
            }
            let val: f64 = val_s.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad feature value in token {tok:?}"),
            })?;
            prev_idx = idx;
            dim = dim.max(idx as usize);
            row.push((idx - 1, val));
        }
        rows.push(row);
        labels.push(label);
    }

    Ok(Dataset {
        rows,
        labels,
        dim: dim.max(1),
    })
}

/// Regularizer weights and the non-convex term coefficient.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LogisticSpec {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Weight of the non-convex term alpha * sum_j w_j^2/(1 + w_j^2);
    /// 0 for the convex variant.
    pub alpha: f64,
}

impl LogisticSpec {
    /// The experimental weights: lambda1 = 1e-3, lambda2 = 1e-5, convex.
    pub fn convex_default() -> Self {
        LogisticSpec {
            lambda1: 1e-3,
            lambda2: 1e-5,
            alpha: 0.0,
        }
    }

    /// Non-convex variant with the given alpha (weak convexity bound 2*alpha).
    pub fn nonconvex_default(alpha: f64) -> Self {
        LogisticSpec {
            lambda1: 1e-3,
            lambda2: 1e-5,
            alpha,
        }
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

struct LogisticComponents {
    data: Arc<Dataset>,
    alpha: f64,
}

impl LogisticComponents {
    fn nonconvex_term(&self, x: &[f64]) -> f64 {
        if self.alpha == 0.0 {
            return 0.0;
        }
        self.alpha * x.iter().map(|w| w * w / (1.0 + w * w)).sum::<f64>()
    }
}

impl Components for LogisticComponents {
    fn len(&self) -> usize {
        self.data.n()
    }

    fn dim(&self) -> usize {
        self.data.dim
    }

    fn value(&self, i: usize, x: &[f64]) -> f64 {
        let z = sparse_dot(&self.data.rows[i], x);
        let y = self.data.labels[i] as f64;
        softplus(z) - y * z + self.nonconvex_term(x)
    }

    fn gradient(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let z = sparse_dot(&self.data.rows[i], x);
        let s = sigmoid(z) - self.data.labels[i] as f64;
        for &(j, v) in &self.data.rows[i] {
            out[j as usize] += s * v;
        }
        if self.alpha != 0.0 {
            for (o, w) in out.iter_mut().zip(x) {
                let denom = 1.0 + w * w;
                *o += self.alpha * 2.0 * w / (denom * denom);
            }
        }
    }

    fn has_gradient(&self) -> bool {
        true
    }
}

/// Cross-entropy logistic regression in logit form,
/// f_i(w) = log(1 + exp(w.x_i)) - y_i w.x_i, with an elastic-net
/// regularizer. L = max_i ||x_i||^2 / 4 per component.
pub fn make_logistic(dataset: Arc<Dataset>, spec: LogisticSpec) -> BlackBoxProblem {
    assert!(dataset.n() >= 1, "empty dataset");
    assert_eq!(spec.alpha, 0.0, "use make_nc_logistic for alpha > 0");
    let l = (dataset.max_row_norm_sq() / 4.0).max(1e-12);
    let comps = LogisticComponents {
        data: dataset,
        alpha: 0.0,
    };
    BlackBoxProblem::new(
        Arc::new(comps),
        Regularizer::elastic_net(spec.lambda1, spec.lambda2),
        ProblemMeta::convex(l),
    )
}

/// Logistic regression plus the non-convex term
/// alpha * sum_j w_j^2/(1 + w_j^2) added identically to every component
/// (preserving the finite-sum average). The term's curvature lies in
/// [-alpha/2, 2 alpha], so sigma = 2 alpha is a safe weak-convexity bound
/// and L grows by the same amount.
pub fn make_nc_logistic(dataset: Arc<Dataset>, spec: LogisticSpec) -> BlackBoxProblem {
    assert!(dataset.n() >= 1, "empty dataset");
    assert!(spec.alpha > 0.0, "nonconvex variant needs alpha > 0");
    let sigma = 2.0 * spec.alpha;
    let l = (dataset.max_row_norm_sq() / 4.0).max(1e-12) + sigma;
    let comps = LogisticComponents {
        data: dataset,
        alpha: spec.alpha,
    };
    BlackBoxProblem::new(
        Arc::new(comps),
        Regularizer::elastic_net(spec.lambda1, spec.lambda2),
        ProblemMeta::weakly_convex(l, sigma),
    )
}

/// Synthetic binary classification rows: standard-normal features scaled to
/// ||x_i|| <= 1, labels drawn from a planted unit weight vector through a
/// logistic link with slope `separability`. Deterministic per seed.
pub fn synth_dataset(n: usize, d: usize, seed: u64, separability: f64) -> Dataset {
    assert!(n >= 1 && d >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planted = sample_sphere(d, &mut rng);

    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row: Vec<f64> = (0..d).map(|_| standard_normal(&mut rng)).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
        let score = separability * row.iter().zip(&planted).map(|(a, b)| a * b).sum::<f64>();
        let toss: f64 = rng.gen();
        let label = if toss < sigmoid(score) { 1 } else { 0 };
        rows.push(
            row.iter()
                .enumerate()
                .map(|(j, &v)| (j as u32, v))
                .collect(),
        );
        labels.push(label);
    }
    Dataset {
        rows,
        labels,
        dim: d,
    }
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u1: f64 = rng.gen();
        if u1 > 0.0 {
            let u2: f64 = rng.gen();
            return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::QueryLedger;
    use crate::reference::finite_diff_component_grad;

    #[test]
    fn parse_basic_line() {
        let ds = parse_libsvm("+1 3:0.5 7:1".as_bytes()).unwrap();
        assert_eq!(ds.labels, vec![1]);
        assert_eq!(ds.rows[0], vec![(2, 0.5), (6, 1.0)]);
        assert_eq!(ds.dim, 7);
    }

    #[test]
    fn parse_degenerate_row() {
        let ds = parse_libsvm("-1".as_bytes()).unwrap();
        assert_eq!(ds.labels, vec![0]);
        assert!(ds.rows[0].is_empty());
    }

    #[test]
    fn parse_reports_line_and_token() {
        let err = parse_libsvm("1 2:a".as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, msg } => {
                assert_eq!(line, 1);
                assert!(msg.contains("2:a"), "msg was {msg}");
            }
            other => panic!("expected parse error, got {other}"),
        }
        // line numbers skip past good lines
        let err = parse_libsvm("1 1:1\n\n0 2:1 1:3".as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn parse_rejects_bad_indices_and_labels() {
        assert!(parse_libsvm("1 0:5".as_bytes()).is_err()); // index < 1
        assert!(parse_libsvm("1 2:1 2:2".as_bytes()).is_err()); // duplicate
        assert!(parse_libsvm("1 3:1 2:2".as_bytes()).is_err()); // descending
        assert!(parse_libsvm("2 1:1".as_bytes()).is_err()); // label domain
        assert!(parse_libsvm("x 1:1".as_bytes()).is_err()); // non-numeric
    }

    #[test]
    fn parse_skips_comments_and_blanks() {
        let text = "# header\n+1 1:2 # trailing\n\n-1 2:3\n";
        let ds = parse_libsvm(text.as_bytes()).unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.labels, vec![1, 0]);
    }

    #[test]
    fn serialize_parse_round_trip() {
        let ds = synth_dataset(5, 3, 42, 1.0);
        let text = ds.to_libsvm_string();
        let back = parse_libsvm(text.as_bytes()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn logistic_values() {
        // w = 0 -> log 2 per component
        let ds = Arc::new(synth_dataset(4, 3, 7, 1.0));
        let p = make_logistic(ds, LogisticSpec::convex_default());
        let ledger = QueryLedger::new();
        for i in 0..4 {
            let v = p.eval_component(i, &[0.0; 3], &ledger);
            assert!((v - (2.0f64).ln()).abs() < 1e-15);
        }

        // single row x = (1, 0), y = 1, w = (10, 0)
        let ds = Arc::new(Dataset {
            rows: vec![vec![(0, 1.0)]],
            labels: vec![1],
            dim: 2,
        });
        let p = make_logistic(
            ds,
            LogisticSpec {
                lambda1: 0.0,
                lambda2: 0.0,
                alpha: 0.0,
            },
        );
        let v = p.eval_component_diag(0, &[10.0, 0.0]);
        assert!((v - (1.0 + (10.0f64).exp()).ln() + 10.0).abs() < 1e-12);
        assert!((v - 4.5398e-5).abs() < 1e-8);
    }

    #[test]
    fn logistic_whitebox_matches_finite_differences() {
        let ds = Arc::new(synth_dataset(10, 5, 3, 2.0));
        let p = make_logistic(ds, LogisticSpec::convex_default());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let w: Vec<f64> = (0..5).map(|_| standard_normal(&mut rng)).collect();
            for i in 0..10 {
                let wb = p.component_grad(i, &w).unwrap();
                let fd = finite_diff_component_grad(&p, i, &w, 1e-6);
                for (a, b) in wb.iter().zip(&fd) {
                    let denom = a.abs().max(1e-6);
                    assert!((a - b).abs() / denom <= 1e-5, "wb {a} vs fd {b}");
                }
            }
        }
    }

    #[test]
    fn nonconvex_term_values_and_gradient() {
        let ds = Arc::new(Dataset {
            rows: vec![vec![]],
            labels: vec![0],
            dim: 1,
        });
        let p = make_nc_logistic(
            ds,
            LogisticSpec {
                lambda1: 0.0,
                lambda2: 0.0,
                alpha: 1.0,
            },
        );
        // w = 0: term and gradient vanish (empty row: loss = log 2)
        assert!((p.eval_component_diag(0, &[0.0]) - (2.0f64).ln()).abs() < 1e-15);
        assert_eq!(p.component_grad(0, &[0.0]).unwrap(), vec![0.0]);
        // w = 1: term 0.5, gradient 2*1/(1+1)^2 = 0.5
        assert!((p.eval_component_diag(0, &[1.0]) - (2.0f64).ln() - 0.5).abs() < 1e-15);
        assert!((p.component_grad(0, &[1.0]).unwrap()[0] - 0.5).abs() < 1e-15);
        assert_eq!(p.meta.sigma, 2.0);
    }

    #[test]
    fn nc_whitebox_matches_finite_differences() {
        let ds = Arc::new(synth_dataset(6, 4, 11, 1.5));
        let p = make_nc_logistic(ds, LogisticSpec::nonconvex_default(0.1));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let w: Vec<f64> = (0..4).map(|_| standard_normal(&mut rng)).collect();
            for i in 0..6 {
                let wb = p.component_grad(i, &w).unwrap();
                let fd = finite_diff_component_grad(&p, i, &w, 1e-6);
                for (a, b) in wb.iter().zip(&fd) {
                    let denom = a.abs().max(1e-6);
                    assert!((a - b).abs() / denom <= 1e-5);
                }
            }
        }
    }

    #[test]
    fn synth_is_deterministic_and_bounded() {
        let a = synth_dataset(50, 8, 123, 2.0);
        let b = synth_dataset(50, 8, 123, 2.0);
        assert_eq!(a, b);
        assert!(a.max_row_norm_sq() <= 1.0 + 1e-12);
        let c = synth_dataset(50, 8, 124, 2.0);
        assert_ne!(a, c);
    }

    #[test]
    fn extreme_separability_matches_sign_threshold() {
        let ds = synth_dataset(100, 6, 5, 1e12);
        // Rebuild the planted vector from the same stream.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let planted = sample_sphere(6, &mut rng);
        for (row, label) in ds.rows.iter().zip(&ds.labels) {
            let score: f64 = row.iter().map(|&(j, v)| v * planted[j as usize]).sum();
            assert_eq!(*label == 1, score > 0.0);
        }
    }
}
