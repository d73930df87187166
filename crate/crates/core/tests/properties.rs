//! Structural invariants checked on random inputs.

mod common;

use common::{design, pairs_from_times};
use proptest::prelude::*;
use trajscan::data::{compute_delta, ExpressionMatrix};
use trajscan::multiplicity::{bh_adjust, by_adjust};
use trajscan::survival::{fit_clogit, fit_clogit_penalized, lambda_max, ncc_loglik, Penalty};
use trajscan::trajectory::{
    fit_hinge, fit_interaction, fit_isotonic_adjusted, fit_phi_basis, pava, test_hinge, test_interaction,
    test_isotonic, Direction, FitOptions,
};

fn direction() -> impl Strategy<Value = Direction> {
    prop_oneof![Just(Direction::NonDecreasing), Just(Direction::NonIncreasing)]
}

fn is_monotone(v: &[f64], d: Direction) -> bool {
    v.windows(2).all(|w| match d {
        Direction::NonDecreasing => w[0] <= w[1],
        Direction::NonIncreasing => w[0] >= w[1],
    })
}

/// Times, responses and one exposure for `n` pairs.
fn instance(n: std::ops::Range<usize>) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    n.prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..7.0, n),
            prop::collection::vec(-3.0f64..3.0, n),
            prop::collection::vec(-2.0f64..2.0, n),
        )
    })
}

/// Carcinogen labels alternating along the time order, so exposed cases
/// reach every knot interval.
fn alternating_labels(t: &[f64]) -> Vec<bool> {
    let mut order: Vec<usize> = (0..t.len()).collect();
    order.sort_by(|&a, &b| t[a].total_cmp(&t[b]));
    let mut labels = vec![false; t.len()];
    for (rank, &i) in order.iter().enumerate() {
        labels[i] = rank % 2 == 0;
    }
    labels
}

fn small_options(seed: u64) -> FitOptions {
    FitOptions {
        n_permutations: 19,
        seed,
        ..FitOptions::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pava_is_monotone_idempotent_and_mean_preserving(
        (y, w) in (1usize..40).prop_flat_map(|n| (
            prop::collection::vec(-10.0f64..10.0, n),
            prop::collection::vec(0.1f64..5.0, n),
        )),
        d in direction(),
    ) {
        let out = pava(&y, &w, d).unwrap();
        prop_assert_eq!(out.len(), y.len());
        prop_assert!(is_monotone(&out, d));
        let again = pava(&out, &w, d).unwrap();
        for (a, b) in again.iter().zip(&out) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let mut start = 0;
        while start < out.len() {
            let mut end = start;
            while end + 1 < out.len() && out[end + 1] == out[start] {
                end += 1;
            }
            let sw: f64 = w[start..=end].iter().sum();
            let m = (start..=end).map(|i| w[i] * y[i]).sum::<f64>() / sw;
            prop_assert!((m - out[start]).abs() < 1e-9);
            start = end + 1;
        }
    }

    #[test]
    fn trajectory_models_nest_their_null_models((t, y, e) in instance(20..60), seed in any::<u64>()) {
        let n = t.len();
        let pairs = pairs_from_times(&t);
        let d = design(n, vec![e], Some(alternating_labels(&t)));
        let opts = small_options(seed);
        let h = fit_hinge(&y, &d, &pairs, &opts).unwrap();
        prop_assert!(h.rss <= h.rss_linear);
        let iso = fit_isotonic_adjusted(&y, &d, &pairs, &opts).unwrap();
        prop_assert!(iso.rss <= iso.rss_linear);
        prop_assert!(is_monotone(&iso.phi, iso.direction));
        prop_assert_eq!(*iso.phi.last().unwrap(), 0.0);
        prop_assert!(iso.rss_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].max(1.0)));
        let int = fit_interaction(&y, &d, &pairs, &opts).unwrap();
        prop_assert!(int.rss <= int.rss_phi);
        let phi = fit_phi_basis(&y, &d, &pairs, &opts).unwrap();
        prop_assert!((phi.rss - int.rss_phi).abs() <= 1e-9 * phi.rss.max(1.0));
    }

    #[test]
    fn permutation_p_values_are_bounded((t, y, e) in instance(20..50), seed in any::<u64>()) {
        let n = t.len();
        let pairs = pairs_from_times(&t);
        let d = design(n, vec![e], Some(alternating_labels(&t)));
        let opts = small_options(seed);
        let lo = 1.0 / 20.0;
        for p in [
            test_hinge(&y, &d, &pairs, &opts).unwrap().p_value,
            test_isotonic(&y, &d, &pairs, &opts).unwrap().p_value,
            test_interaction(&y, &d, &pairs, &opts).unwrap().p_value,
        ] {
            prop_assert!((lo..=1.0).contains(&p));
        }
    }

    #[test]
    fn pair_shared_constants_change_nothing(
        (t, case, control) in (20usize..40).prop_flat_map(|n| (
            prop::collection::vec(0.0f64..7.0, n),
            prop::collection::vec(-(1i64 << 24)..(1i64 << 24), n),
            prop::collection::vec(-(1i64 << 24)..(1i64 << 24), n),
        )),
        shift in prop::collection::vec(-(1i64 << 26)..(1i64 << 26), 40),
    ) {
        // Dyadic values make the differences exact.
        let n = t.len();
        let scale = 2f64.powi(-20);
        let ids: Vec<String> = (0..n).map(|i| format!("p{i:04}")).collect();
        let mat = |v: Vec<f64>| ExpressionMatrix::new(vec!["g".into()], ids.clone(), v).unwrap();
        let c: Vec<f64> = case.iter().map(|&v| v as f64 * scale).collect();
        let k: Vec<f64> = control.iter().map(|&v| v as f64 * scale).collect();
        let c2: Vec<f64> = c.iter().zip(&shift).map(|(a, s)| a + *s as f64 * scale).collect();
        let k2: Vec<f64> = k.iter().zip(&shift).map(|(a, s)| a + *s as f64 * scale).collect();
        let d1 = compute_delta(&mat(c), &mat(k)).unwrap();
        let d2 = compute_delta(&mat(c2), &mat(k2)).unwrap();
        prop_assert_eq!(d1.values(), d2.values());
        let pairs = pairs_from_times(&t);
        let des = design(n, vec![], None);
        let opts = small_options(3);
        prop_assert_eq!(
            test_hinge(d1.row(0), &des, &pairs, &opts).unwrap(),
            test_hinge(d2.row(0), &des, &pairs, &opts).unwrap()
        );
        prop_assert_eq!(fit_clogit(d1.row(0), None).unwrap(), fit_clogit(d2.row(0), None).unwrap());
    }

    #[test]
    fn partial_likelihood_is_concave_and_bounded(
        x in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 2..30),
        beta in prop::collection::vec(-2.0f64..2.0, 2),
    ) {
        let l = ncc_loglik(&beta, &x);
        prop_assert!(l.value <= 0.0);
        let (a, b, c) = (l.hessian[0][0], l.hessian[0][1], l.hessian[1][1]);
        let mid = 0.5 * (a + c);
        let rad = (0.25 * (a - c).powi(2) + b * b).sqrt();
        prop_assert!(mid + rad <= 1e-10);
        let y: Vec<f64> = x.iter().map(|r| r[0]).collect();
        let fit = fit_clogit(&y, None).unwrap();
        prop_assert!(fit.loglik <= 0.0);
        prop_assert!(fit.loglik >= fit.loglik_null - 1e-12);
        prop_assert!((0.0..=1.0).contains(&fit.p_value));
    }

    #[test]
    fn fdr_adjustments_are_consistent(
        p in prop::collection::vec(0.0f64..=1.0, 1..200),
        q in 0.001f64..0.5,
    ) {
        let bh = bh_adjust(&p, q).unwrap();
        let by = by_adjust(&p, q).unwrap();
        let mut order: Vec<usize> = (0..p.len()).collect();
        order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
        for w in order.windows(2) {
            prop_assert!(bh.q_values[w[0]] <= bh.q_values[w[1]]);
        }
        for i in 0..p.len() {
            prop_assert!((0.0..=1.0).contains(&bh.q_values[i]));
            prop_assert!(!by.rejected[i] || bh.rejected[i]);
            for j in 0..p.len() {
                if bh.rejected[i] && p[j] <= p[i] {
                    prop_assert!(bh.rejected[j]);
                }
            }
        }
        let looser = bh_adjust(&p, (2.0 * q).min(1.0)).unwrap();
        prop_assert!(looser.n_rejected() >= bh.n_rejected());
    }

    #[test]
    fn lasso_is_zero_from_lambda_max(
        rows in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 25), 3),
    ) {
        let m = ExpressionMatrix::from_rows(
            (0..3).map(|g| format!("g{g}")).collect(),
            (0..25).map(|i| format!("p{i}")).collect(),
            rows,
        ).unwrap();
        let lmax = lambda_max(&m, Penalty::Lasso);
        let path = fit_clogit_penalized(&m, Penalty::Lasso, Some(&[4.0 * lmax, 2.0 * lmax, lmax])).unwrap();
        for b in &path.betas {
            prop_assert!(b.iter().all(|&v| v == 0.0));
        }
    }
}

#[test]
fn lasso_support_shrinks_as_lambda_grows() {
    let mut r = common::rng(77);
    for _ in 0..10 {
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|g| (0..60).map(|_| 0.1 * g as f64 + common::normal(&mut r)).collect())
            .collect();
        let m = ExpressionMatrix::from_rows(
            (0..6).map(|g| format!("g{g}")).collect(),
            (0..60).map(|i| format!("p{i}")).collect(),
            rows,
        )
        .unwrap();
        let path = fit_clogit_penalized(&m, Penalty::Lasso, None).unwrap();
        let sizes = path.support_sizes();
        // Grid is decreasing, so support should be non-decreasing along it.
        for w in sizes.windows(2) {
            assert!(w[0] <= w[1], "{sizes:?}");
        }
    }
}
