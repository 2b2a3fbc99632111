//! Property-based invariants: prox geometry, parser round-trips,
//! augmentation linearity, ledger exactness.

mod common;

use proptest::prelude::*;
use std::sync::Arc;

use zoprox::model::{BlackBoxProblem, ProblemMeta, QueryLedger};
use zoprox::problems::{parse_libsvm, Dataset};
use zoprox::prox::Regularizer;

fn reg_strategy() -> impl Strategy<Value = Regularizer> {
    prop_oneof![
        Just(Regularizer::None),
        (0.0..2.0f64).prop_map(|lambda1| Regularizer::L1 { lambda1 }),
        (0.0..2.0f64).prop_map(|lambda2| Regularizer::SquaredL2 { lambda2 }),
        (0.0..2.0f64, 0.0..2.0f64)
            .prop_map(|(lambda1, lambda2)| Regularizer::ElasticNet { lambda1, lambda2 }),
    ]
}

proptest! {
    #[test]
    fn prox_is_nonexpansive(
        reg in reg_strategy(),
        a in prop::collection::vec(-10.0..10.0f64, 1..8),
        b_offsets in prop::collection::vec(-10.0..10.0f64, 1..8),
        tau in 0.0..5.0f64,
    ) {
        let n = a.len().min(b_offsets.len());
        let a = &a[..n];
        let b: Vec<f64> = a.iter().zip(&b_offsets[..n]).map(|(x, o)| x + o).collect();
        let pa = reg.prox(tau, a);
        let pb = reg.prox(tau, &b);
        let d_in: f64 = common::norm(&a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>());
        let d_out: f64 = common::norm(&pa.iter().zip(&pb).map(|(x, y)| x - y).collect::<Vec<_>>());
        prop_assert!(d_out <= d_in * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn prox_satisfies_subgradient_optimality(
        reg in reg_strategy(),
        v in prop::collection::vec(-10.0..10.0f64, 1..8),
        tau in 1e-6..5.0f64,
    ) {
        // 0 in tau * dr(z) + (z - v), componentwise.
        let (l1, l2) = reg.weights();
        let z = reg.prox(tau, &v);
        for (zj, vj) in z.iter().zip(&v) {
            let residual = vj - zj - 2.0 * tau * l2 * zj; // must lie in tau*l1*sign interval
            if *zj == 0.0 {
                prop_assert!(residual.abs() <= tau * l1 + 1e-10);
            } else {
                prop_assert!((residual - tau * l1 * zj.signum()).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn elastic_net_specializations(
        v in prop::collection::vec(-10.0..10.0f64, 1..8),
        tau in 0.0..5.0f64,
        lambda in 0.0..2.0f64,
    ) {
        let en_l1 = Regularizer::ElasticNet { lambda1: lambda, lambda2: 0.0 };
        let l1 = Regularizer::L1 { lambda1: lambda };
        prop_assert_eq!(en_l1.prox(tau, &v), l1.prox(tau, &v));

        let en_l2 = Regularizer::ElasticNet { lambda1: 0.0, lambda2: lambda };
        let l2 = Regularizer::SquaredL2 { lambda2: lambda };
        prop_assert_eq!(en_l2.prox(tau, &v), l2.prox(tau, &v));
    }

    #[test]
    fn augmentation_is_exactly_linear(
        c in 0.0..5.0f64,
        anchor in prop::collection::vec(-3.0..3.0f64, 2..6),
        offsets in prop::collection::vec(-3.0..3.0f64, 2..6),
    ) {
        let d = anchor.len().min(offsets.len());
        let anchor = anchor[..d].to_vec();
        let x: Vec<f64> = anchor.iter().zip(&offsets[..d]).map(|(a, o)| a + o).collect();
        let base = BlackBoxProblem::from_fns(
            d,
            vec![Arc::new(|x: &[f64]| x.iter().map(|v| v.sin()).sum())],
            Regularizer::None,
            ProblemMeta::convex(1.0),
        );
        let aug = base.augmented(c, anchor.clone());
        let quad = 0.5
            * c
            * x.iter()
                .zip(&anchor)
                .map(|(xj, aj)| (xj - aj) * (xj - aj))
                .sum::<f64>();
        let lhs = aug.eval_component_diag(0, &x);
        let rhs = base.eval_component_diag(0, &x) + quad;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        // strong-convexity bookkeeping for a convex base
        prop_assert!((aug.meta.gamma - c).abs() < 1e-15);
    }

    #[test]
    fn ledger_counts_every_evaluation(evals in prop::collection::vec(0usize..4, 1..64)) {
        let p = BlackBoxProblem::from_fns(
            2,
            (0..4)
                .map(|i| {
                    let w = i as f64;
                    Arc::new(move |x: &[f64]| w + x[0]) as Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>
                })
                .collect(),
            Regularizer::None,
            ProblemMeta::convex(1.0),
        );
        let ledger = QueryLedger::new();
        for (k, &i) in evals.iter().enumerate() {
            p.eval_component(i, &[0.5, -0.5], &ledger);
            prop_assert_eq!(ledger.total(), (k + 1) as u64);
        }
    }

    #[test]
    fn libsvm_canonical_round_trip(
        rows in prop::collection::vec(
            (
                0u8..2,
                prop::collection::btree_map(1u32..200, -100.0..100.0f64, 0..12),
            ),
            1..40
        )
    ) {
        let dataset = Dataset {
            labels: rows.iter().map(|(l, _)| *l).collect(),
            rows: rows
                .iter()
                .map(|(_, m)| m.iter().map(|(k, v)| (k - 1, *v)).collect())
                .collect(),
            dim: 200,
        };
        let text = dataset.to_libsvm_string();
        let parsed = parse_libsvm(text.as_bytes()).unwrap();
        prop_assert_eq!(&parsed.labels, &dataset.labels);
        prop_assert_eq!(&parsed.rows, &dataset.rows);
        // serialize is a fixed point on canonical text
        prop_assert_eq!(parsed.to_libsvm_string(), text);
    }
}

#[test]
fn sphere_samples_have_unit_norm() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    for d in [1usize, 2, 7, 40] {
        for _ in 0..200 {
            let u = zoprox::estimators::sample_sphere(d, &mut rng);
            assert!((common::norm(&u) - 1.0).abs() < 1e-12);
        }
    }
}
