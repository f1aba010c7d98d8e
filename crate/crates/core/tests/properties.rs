use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tagnarx::data::{synthesize, Dataset};
use tagnarx::model::{estimate_ls, predict_one_step, regressor_matrix, residuals, simulate, NarxModel, SignalSeries};
use tagnarx::narx::{g_narx, parse_yield, restrict, AdjunctionTable, NarxExpression, FIR_SUBSET};

fn expression(seed: u64, max_adjunctions: usize, aux: Option<&[&str]>) -> NarxExpression {
    let g = match aux {
        Some(a) => restrict(&g_narx(), a).unwrap(),
        None => g_narx(),
    };
    let t = AdjunctionTable::new(&g);
    t.expression(&t.random(max_adjunctions, &mut ChaCha8Rng::seed_from_u64(seed))).unwrap()
}

fn dataset(u: Vec<f64>, y: Vec<f64>) -> Dataset<f64> {
    Dataset::new("d", u, y).unwrap()
}

fn signal(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

fn ssr(m: &NarxModel<f64>, d: &Dataset<f64>) -> f64 {
    residuals(d, &predict_one_step(m, d).unwrap()).iter().map(|r| r * r).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn least_squares_is_a_minimum(seed in any::<u64>(), u in signal(80..81), y in signal(80..81), step in 1e-4f64..1e-2) {
        let e = expression(seed, 8, None);
        let d = dataset(u, y);
        let m = estimate_ls(&e, std::slice::from_ref(&d)).unwrap();
        prop_assume!(!m.is_degenerate());
        let best = ssr(&m, &d);
        for j in 0..m.parameters().len() {
            for sign in [-1.0, 1.0] {
                let mut p = m.parameters().to_vec();
                p[j] += sign * step;
                let moved = NarxModel::new(e.clone(), p).unwrap();
                prop_assert!(ssr(&moved, &d) >= best - 1e-9 * (1.0 + best));
            }
        }
    }

    #[test]
    fn residuals_are_orthogonal_to_regressors(seed in any::<u64>(), u in signal(60..120), y0 in signal(120..121)) {
        let e = expression(seed, 8, None);
        let y = y0[..u.len()].to_vec();
        let d = dataset(u, y);
        prop_assume!(d.len() > e.max_lag() + e.term_count());
        let m = estimate_ls(&e, std::slice::from_ref(&d)).unwrap();
        let phi = regressor_matrix(&e, &d.u, &d.y).unwrap();
        let r = residuals(&d, &predict_one_step(&m, &d).unwrap());
        for c in 0..phi.cols() {
            let dot: f64 = phi.col(c).iter().zip(&r).map(|(a, b)| a * b).sum();
            let scale: f64 = phi.col(c).iter().map(|a| a * a).sum::<f64>().sqrt() * r.iter().map(|a| a * a).sum::<f64>().sqrt();
            prop_assert!(dot.abs() <= 1e-8 * (1.0 + scale), "column {c}: {dot}");
        }
    }

    #[test]
    fn fir_simulation_equals_prediction(seed in any::<u64>(), u in signal(40..41), y in signal(40..41), c in prop::collection::vec(-2.0f64..2.0, 12)) {
        let e = expression(seed, 10, Some(&FIR_SUBSET));
        let m = NarxModel::new(e.clone(), c[..e.term_count()].to_vec()).unwrap();
        prop_assume!(e.max_lag() < 40);
        let d = dataset(u, y);
        let s = simulate(&m, &d).unwrap();
        prop_assert!(!s.diverged);
        prop_assert_eq!(s.series, predict_one_step(&m, &d).unwrap());
    }

    #[test]
    fn regressors_follow_the_time_origin(seed in any::<u64>(), u in signal(50..51), y in signal(50..51), shift in 1usize..20) {
        let e = expression(seed, 8, None);
        prop_assume!(e.max_lag() + shift < 50);
        let full = regressor_matrix(&e, &SignalSeries::new(u.clone()).unwrap(), &SignalSeries::new(y.clone()).unwrap()).unwrap();
        let cut = regressor_matrix(
            &e,
            &SignalSeries::new(u[shift..].to_vec()).unwrap(),
            &SignalSeries::new(y[shift..].to_vec()).unwrap(),
        )
        .unwrap();
        prop_assert_eq!(cut.rows() + shift, full.rows());
        for r in 0..cut.rows() {
            prop_assert_eq!(cut.row(r), full.row(r + shift));
        }
    }

    #[test]
    fn noiseless_synthesis_is_reproduced(seed in any::<u64>(), u in prop::collection::vec(-0.5f64..0.5, 100), scale in 0.05f64..0.3) {
        let e = expression(seed, 8, None);
        prop_assume!(e.max_lag() < 100);
        let n = e.term_count().max(1) as f64;
        let params = (0..e.term_count()).map(|i| if i % 2 == 0 { scale / n } else { -scale / n }).collect();
        let g = NarxModel::new(e, params).unwrap();
        let d = synthesize(&g, &SignalSeries::new(u).unwrap(), 0.0, 0).unwrap();
        let s = simulate(&g, &d).unwrap();
        prop_assert!(!s.diverged);
        for r in residuals(&d, &s.series) {
            prop_assert!(r.abs() <= 1e-12);
        }
    }

    #[test]
    fn overlapping_records_match_one_record(seed in any::<u64>(), u in signal(90..91), y in signal(90..91), cut in 30usize..60) {
        let e = expression(seed, 6, None);
        let lag = e.max_lag();
        prop_assume!(lag < 20);
        let d = dataset(u, y);
        let whole = estimate_ls(&e, std::slice::from_ref(&d)).unwrap();
        prop_assume!(!whole.is_degenerate());
        let parts = [d.slice(0, cut + lag).unwrap(), d.slice(cut, d.len()).unwrap()];
        let stacked = estimate_ls(&e, &parts).unwrap();
        let swapped = estimate_ls(&e, &[parts[1].clone(), parts[0].clone()]).unwrap();
        for ((a, b), c) in whole.parameters().iter().zip(stacked.parameters()).zip(swapped.parameters()) {
            prop_assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()), "{a} vs {b}");
            prop_assert!((a - c).abs() <= 1e-8 * (1.0 + a.abs()), "{a} vs {c}");
        }
    }

    #[test]
    fn expressions_round_trip(seed in any::<u64>()) {
        let e = expression(seed, 12, None);
        prop_assert_eq!(&e.to_string().parse::<NarxExpression>().unwrap(), &e);
        prop_assert_eq!(&parse_yield(&e.to_yield()).unwrap(), &e);
    }
}
