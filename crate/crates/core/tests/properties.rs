//! Property tests for the utility layer: gradients against finite
//! differences, concavity/monotonicity, and the normalization contract.

use proptest::prelude::*;
use walras::economy::{Consumer, Economy, UtilitySpec};
use walras::oracle::finite_diff_gradient;

fn sp_strategy() -> impl Strategy<Value = UtilitySpec> {
    (0.2f64..0.8, 0.5f64..3.0, 1.0f64..10.0).prop_map(|(rho, theta, n)| UtilitySpec::ShiftedPower {
        rho,
        theta,
        normalizer: n,
    })
}

fn point_strategy() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.01f64..5.0, 2..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gradient_matches_finite_differences(u in sp_strategy(), x in point_strategy()) {
        let analytic = u.supergradient(&x).unwrap();
        let fd = finite_diff_gradient(&u, &x, 1e-6).unwrap();
        for (a, f) in analytic.iter().zip(&fd) {
            let rel = (a - f).abs() / a.abs().max(1e-12);
            prop_assert!(rel <= 1e-6, "analytic {a}, fd {f}, rel {rel}");
        }
    }

    #[test]
    fn monotone_in_every_good(u in sp_strategy(), x in point_strategy(), bump in 0.01f64..1.0) {
        let base = u.eval(&x).unwrap();
        for a in 0..x.len() {
            let mut y = x.clone();
            y[a] += bump;
            prop_assert!(u.eval(&y).unwrap() > base);
        }
    }

    #[test]
    fn midpoint_concave(u in sp_strategy(), x in point_strategy(), y in point_strategy()) {
        prop_assume!(x.len() == y.len());
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        let lhs = u.eval(&mid).unwrap();
        let rhs = 0.5 * (u.eval(&x).unwrap() + u.eval(&y).unwrap());
        prop_assert!(lhs >= rhs - 1e-12, "{lhs} < {rhs}");
    }

    #[test]
    fn alpha_at_half_matches_closed_form(theta in 0.5f64..3.0, n in 1.0f64..10.0, r in 0.5f64..100.0) {
        let u = UtilitySpec::ShiftedPower { rho: 0.5, theta, normalizer: n };
        let p = u.strong_concavity(r).unwrap();
        let closed = 1.0 / (4.0 * n * (r + theta).powf(1.5));
        prop_assert!((p.alpha - closed).abs() <= 1e-15 * closed.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn plc_value_is_min_piece(
        rows in proptest::collection::vec(proptest::collection::vec(0.0f64..3.0, 2), 1..5),
        ts in proptest::collection::vec(0.0f64..2.0, 5),
        x in proptest::collection::vec(0.0f64..4.0, 2),
    ) {
        let intercepts: Vec<f64> = ts[..rows.len()].to_vec();
        let u = UtilitySpec::Plc { coeffs: rows.clone(), intercepts: intercepts.clone() };
        let val = u.eval(&x).unwrap();
        let k = u.plc_min_piece(&x).unwrap();
        let piece: f64 = rows[k].iter().zip(&x).map(|(c, v)| c * v).sum::<f64>() + intercepts[k];
        prop_assert!((val - piece).abs() < 1e-12);
        for (row, t) in rows.iter().zip(&intercepts) {
            let other: f64 = row.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>() + t;
            prop_assert!(val <= other + 1e-12);
        }
    }

    #[test]
    fn normalization_hits_target_level(
        theta in 0.5f64..3.0,
        rho in 0.2f64..0.8,
        eta_bar in 0.05f64..0.5,
        w in proptest::collection::vec(0.1f64..4.0, 2),
    ) {
        let economy = Economy {
            num_goods: 2,
            consumers: vec![Consumer {
                endowment: w,
                utility: UtilitySpec::ShiftedPower { rho, theta, normalizer: 1.0 },
            }],
        };
        let normalized = economy.normalize(eta_bar).unwrap();
        let total = normalized.total_endowment();
        let level = normalized.consumers[0].utility.eval(&total).unwrap();
        prop_assert!((level - (1.0 - eta_bar)).abs() < 1e-12);
    }
}
