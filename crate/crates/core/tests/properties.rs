use hdgmv::asymptotics::{
    limit_loss_difference, limit_oos_loss, limit_oos_variance, AsymptoticInputs, DifferencePair,
};
use hdgmv::estimators::{
    equally_weighted_target, estimate_from_covariance, shrinkage_weights, ShrinkageIntensity, ShrinkageKind,
};
use hdgmv::model::{
    gmv_variance, gmv_weights, portfolio_variance, sample_covariance, CovKind, CovarianceEstimate, PortfolioWeights,
    ReturnsWindow, Strategy as Method,
};
use hdgmv::risk::{oos_relative_loss, EmpiricalEvaluator};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn spd(p: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, p * p).prop_map(move |v| {
        let a = DMatrix::from_vec(p, p, v);
        let mut s = &a * a.transpose() + DMatrix::identity(p, p) * 0.5;
        let t = s.transpose();
        s = (s + t) * 0.5;
        s
    })
}

fn population(m: DMatrix<f64>) -> CovarianceEstimate {
    CovarianceEstimate::population(m).unwrap()
}

fn sample(m: DMatrix<f64>, n: usize) -> CovarianceEstimate {
    CovarianceEstimate::new(m, Some(n), CovKind::InSample).unwrap()
}

fn grid_c() -> Vec<f64> {
    (1..=99).map(|k| k as f64 / 100.0).collect()
}

const GRID_LB: [f64; 5] = [0.0, 0.1, 1.0, 10.0, 50.0];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gmv_weights_are_budget_feasible(s in (2usize..9).prop_flat_map(spd)) {
        let w = gmv_weights(&population(s)).unwrap();
        prop_assert!((w.weights().sum() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn gmv_variance_is_its_own_portfolio_variance(s in (2usize..9).prop_flat_map(spd)) {
        let cov = population(s);
        let w = gmv_weights(&cov).unwrap();
        let v = gmv_variance(&cov).unwrap();
        prop_assert!((portfolio_variance(&w, &cov).unwrap() - v).abs() <= 1e-10 * v);
    }

    #[test]
    fn relative_loss_is_nonnegative(
        (s, raw) in (2usize..9).prop_flat_map(|p| (spd(p), prop::collection::vec(-2.0f64..2.0, p)))
    ) {
        let p = raw.len();
        let mut w = DVector::from_vec(raw);
        // shift onto the budget hyperplane
        let shift = (1.0 - w.sum()) / p as f64;
        w.add_scalar_mut(shift);
        let w = PortfolioWeights::new(w, Method::Target).unwrap();
        prop_assert!(oos_relative_loss(&w, &population(s)).unwrap() >= -1e-10);
    }

    #[test]
    fn gmv_weights_scale_invariant(s in (2usize..9).prop_flat_map(spd), k in 0.01f64..100.0) {
        let w1 = gmv_weights(&population(s.clone())).unwrap();
        let w2 = gmv_weights(&population(s * k)).unwrap();
        prop_assert!((w1.weights() - w2.weights()).amax() <= 1e-9);
    }

    #[test]
    fn shrinkage_is_affine_in_the_intensity(
        s in (5usize..9).prop_flat_map(spd), a in -1.0f64..2.0, b in -1.0f64..2.0
    ) {
        let p = s.nrows();
        let cov = sample(s, 4 * p);
        let target = equally_weighted_target(p).unwrap();
        let ws = gmv_weights(&cov).unwrap();
        let at = |v: f64| shrinkage_weights(ShrinkageIntensity { value: v, kind: ShrinkageKind::Fm }, &ws, &target).unwrap();
        let mid = at(0.5 * (a + b));
        let avg = (at(a).weights() + at(b).weights()) * 0.5;
        prop_assert!((mid.weights() - avg).amax() <= 1e-10);
        prop_assert!((mid.weights().sum() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn estimated_weights_sum_to_one(s in (5usize..9).prop_flat_map(spd)) {
        let p = s.nrows();
        let est = estimate_from_covariance(&sample(s, 3 * p), &equally_weighted_target(p).unwrap()).unwrap();
        for strategy in Method::ALL {
            prop_assert!((est.get(strategy).weights().sum() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn sample_covariance_matches_definition(
        (p, t, v) in (1usize..=8, 2usize..=8).prop_flat_map(|(p, t)| (Just(p), Just(t), prop::collection::vec(-5.0f64..5.0, p * t)))
    ) {
        let x = DMatrix::from_vec(p, t, v);
        let s = sample_covariance(&ReturnsWindow::new(x.clone()).unwrap()).unwrap();
        for i in 0..p {
            for j in 0..p {
                let mi: f64 = (0..t).map(|k| x[(i, k)]).sum::<f64>() / t as f64;
                let mj: f64 = (0..t).map(|k| x[(j, k)]).sum::<f64>() / t as f64;
                let brute: f64 = (0..t).map(|k| (x[(i, k)] - mi) * (x[(j, k)] - mj)).sum::<f64>() / (t - 1) as f64;
                prop_assert!((s.matrix()[(i, j)] - brute).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn empirical_loss_scale_invariant(s in (2usize..7).prop_flat_map(spd), k in 0.01f64..100.0) {
        let p = s.nrows();
        let b = equally_weighted_target(p).unwrap();
        let m = 3 * p + 2;
        let a = CovarianceEstimate::new(s.clone(), Some(m), CovKind::OutOfSample).unwrap();
        let c = CovarianceEstimate::new(s * k, Some(m), CovKind::OutOfSample).unwrap();
        let la = EmpiricalEvaluator::new(&a, p, m).unwrap().relative_loss(&b).unwrap();
        let lc = EmpiricalEvaluator::new(&c, p, m).unwrap().relative_loss(&b).unwrap();
        prop_assert!((la - lc).abs() <= 1e-9 * la.abs().max(1.0));
    }

    #[test]
    fn variance_limit_is_gmv_times_one_plus_loss(c in 0.01f64..0.99, v_gmv in 0.01f64..10.0, excess in 0.0f64..20.0) {
        let v_b = v_gmv * (1.0 + excess);
        let inputs = AsymptoticInputs::from_variances(c, v_gmv, v_b).unwrap();
        for s in Method::ALL {
            let v = limit_oos_variance(s, &inputs).unwrap();
            let l = limit_oos_loss(s, &inputs).unwrap();
            prop_assert!((v - v_gmv * (1.0 + l)).abs() <= 1e-12 * v.max(1.0));
        }
    }
}

#[test]
fn loss_difference_identities_on_grid() {
    for c in grid_c() {
        for l_b in GRID_LB {
            let d = |p| limit_loss_difference(p, c, l_b).unwrap();
            let (sf, sb, fb) = (
                d(DifferencePair::SMinusFm),
                d(DifferencePair::SMinusBps),
                d(DifferencePair::FmMinusBps),
            );
            assert!((sb - (sf + fb)).abs() <= 1e-12 * sb.max(1.0), "c={c} l_b={l_b}");
            assert!(sf >= 0.0 && sb >= 0.0 && fb >= 0.0);
            let inputs = AsymptoticInputs::from_loss(c, l_b).unwrap();
            let loss = |s| limit_oos_loss(s, &inputs).unwrap();
            for (pair, value) in [
                (DifferencePair::SMinusFm, sf),
                (DifferencePair::SMinusBps, sb),
                (DifferencePair::FmMinusBps, fb),
            ] {
                let (a, b) = pair.strategies();
                assert!(
                    ((loss(a) - loss(b)) - value).abs() <= 1e-12 * value.max(1.0),
                    "{pair:?} c={c} l_b={l_b}"
                );
            }
        }
    }
}

#[test]
fn loss_difference_equality_cases() {
    for l_b in GRID_LB {
        for pair in DifferencePair::ALL {
            assert!(limit_loss_difference(pair, 1e-13, l_b).unwrap() <= 1e-12);
            assert_eq!(limit_loss_difference(pair, 0.5, f64::INFINITY).unwrap(), 0.0);
        }
    }
    for c in grid_c() {
        assert_eq!(
            limit_loss_difference(DifferencePair::FmMinusBps, c, 0.0).unwrap(),
            0.0
        );
    }
}
