use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use nestrec::cpr::generate_cpr;
use nestrec::linalg::{frob_inner, numerical_rank, row_norms, svd, top_eigenpair};
use nestrec::minimax::{col_member, fano_bound, kl_gaussian, lower_rate, row_member, BitString};
use nestrec::{random_target, NestedOperator, ProblemDims};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-3.0f64..3.0, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn dims() -> impl Strategy<Value = ProblemDims> {
    (4usize..30, 1usize..6, 1usize..8, 1usize..4, any::<u8>()).prop_filter_map("valid dims", |(p1, p2, m, r, k)| {
        let k = 1 + k as usize % p1;
        let r = r.min(k).min(p2);
        ProblemDims::new(p1, p2, m, 4 * r * m.max(p2), k, r).ok()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn nested_adjoint_identity(d in dims(), seed in any::<u64>(), s2 in any::<u64>()) {
        let op = NestedOperator::gaussian(&d, seed).unwrap();
        let x = random_target(&d, s2).unwrap().matrix;
        let y = DVector::from_fn(d.n, |i, _| ((i as f64) * 0.37).sin());
        let lhs = op.apply(&x).unwrap().dot(&y);
        let rhs = frob_inner(&x, &op.adjoint(&y).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn lifted_quadratics(p in 2usize..20, m in 1usize..10, n in 1usize..30, seed in any::<u64>()) {
        let k = 1 + (seed as usize) % p;
        let inst = generate_cpr(p, k, m, n, 0.0, seed).unwrap();
        let x = inst.x_true.clone().unwrap();
        let lifted = inst.lifted_operator().unwrap().apply(&(&x * x.transpose())).unwrap();
        prop_assert!((lifted - &inst.y).norm() <= 1e-10 * (1.0 + inst.y.norm()));
        let b = &inst.psi.data * &x;
        let compressed = inst.compressed_operator().unwrap().apply(&(&b * b.transpose())).unwrap();
        prop_assert!((compressed - &inst.y).norm() <= 1e-10 * (1.0 + inst.y.norm()));
    }

    #[test]
    fn top_eigenpair_is_an_eigenpair(a in matrix(6, 6)) {
        let s = (&a + a.transpose()) * 0.5;
        let (lambda, v) = top_eigenpair(&s).unwrap();
        prop_assert!((&s * &v - &v * lambda).norm() <= 1e-9 * (1.0 + lambda.abs()));
        prop_assert!((v.norm() - 1.0).abs() < 1e-12);
        let largest = svd(&s).unwrap().s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lambda <= largest + 1e-9);
    }

    #[test]
    fn fano_is_monotone(lm in 0.05f64..50.0, a in 1e-6f64..0.12, dl in 0.0f64..5.0, da in 0.0f64..0.004) {
        let base = fano_bound(lm, a).unwrap();
        prop_assert!(fano_bound(lm + dl, a).unwrap() >= base - 1e-15);
        prop_assert!(fano_bound(lm, (a + da).min(0.1249)).unwrap() <= base + 1e-15);
        prop_assert!(base < 1.0);
    }

    #[test]
    fn kl_is_quadratic(d in dims(), seed in any::<u64>(), c in -4.0f64..4.0, sigma in 0.01f64..3.0) {
        let op = NestedOperator::gaussian(&d, seed).unwrap();
        let x = random_target(&d, seed ^ 1).unwrap().matrix;
        let base = kl_gaussian(&op, &x, sigma).unwrap();
        let scaled = kl_gaussian(&op, &(&x * c), sigma).unwrap();
        prop_assert!((scaled - c * c * base).abs() <= 1e-9 * (1.0 + scaled));
        prop_assert!(base >= 0.0);
    }

    #[test]
    fn lower_rate_scaling(d in dims(), sigma in 0.0f64..2.0, gamma in 0.1f64..10.0) {
        let a = lower_rate(&d, sigma, gamma).unwrap();
        let b = lower_rate(&d, 2.0 * sigma, 4.0 * gamma).unwrap();
        prop_assert!((a.threshold - b.threshold).abs() <= 1e-15 + 1e-12 * a.threshold);
        prop_assert!((a.epsilon - 4.0 * a.threshold).abs() <= 1e-15 + 1e-12 * a.epsilon);
    }

    #[test]
    fn hypothesis_members_are_structured(k in 1usize..6, r in 1usize..4, p2 in 1usize..8, extra in 0usize..10, bits in any::<u64>(), eps in 0.01f64..5.0) {
        let r = r.min(k).min(p2);
        let p1 = 2 * k + extra;
        let d = ProblemDims::new(p1, p2, 1, 1, k, r).unwrap();
        let support = BitString::from_indices(p1, &(0..k).map(|i| (i * 7 + bits as usize) % p1).collect::<std::collections::BTreeSet<_>>().into_iter().collect::<Vec<_>>());
        prop_assume!(support.weight() == k);
        let sign_of = |len: usize| BitString::from_indices(len, &(0..len).filter(|i| bits >> (i % 64) & 1 == 1).collect::<Vec<_>>());
        let row = row_member(&d, eps, &support, &sign_of(r * p2)).unwrap();
        let col = col_member(&d, eps, &support, &sign_of(k * r)).unwrap();
        for x in [&row, &col] {
            prop_assert!((x.norm() - eps).abs() <= 1e-12 * eps);
            prop_assert!(numerical_rank(x).unwrap() <= r);
            prop_assert!(row_norms(x).iter().filter(|v| **v > 0.0).count() <= k);
        }
    }
}
