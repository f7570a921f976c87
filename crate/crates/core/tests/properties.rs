use proptest::prelude::*;
use rangevol::estimators::{subsampled_estimator, RangeEstimates, ReturnEstimator, SampledGrid};
use rangevol::ingestion::{clean, previous_tick_resample, ResampleConfig, Session, TickSeries};
use rangevol::LambdaTable;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300)
}

fn path(n: usize, m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0_f64, n * m).prop_map(|steps| {
        let mut p = vec![0.0];
        for s in steps {
            p.push(p.last().unwrap() + 0.01 * s);
        }
        p
    })
}

fn all(grid: &SampledGrid, lambda: &LambdaTable) -> Vec<f64> {
    let r = RangeEstimates::compute(grid, lambda).unwrap();
    let mut v = vec![r.rrv_b, r.rbv, r.rtv, r.rrv, r.jv, r.rtq];
    for e in [
        ReturnEstimator::Rv,
        ReturnEstimator::Bv,
        ReturnEstimator::Tv,
    ] {
        v.push(subsampled_estimator(grid, e).unwrap());
    }
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn estimators_are_quadratic_in_scale(p in path(8, 5), c in 0.01..100.0_f64) {
        let lambda = LambdaTable::shipped();
        let base = all(&SampledGrid::new(p.clone(), 8, 5).unwrap(), &lambda);
        let scaled = all(&SampledGrid::new(p.iter().map(|x| c * x).collect(), 8, 5).unwrap(), &lambda);
        for (k, (a, b)) in base.iter().zip(&scaled).enumerate() {
            let power = if k == 5 { 4 } else { 2 };
            prop_assert!(close(a * c.powi(power), *b), "index {k}: {a} vs {b}");
        }
    }

    #[test]
    fn estimators_ignore_level_sign_and_direction(p in path(6, 4), a in -5.0..5.0_f64) {
        let lambda = LambdaTable::shipped();
        let base = all(&SampledGrid::new(p.clone(), 6, 4).unwrap(), &lambda);
        let shifted: Vec<f64> = p.iter().map(|x| x + a).collect();
        let negated: Vec<f64> = p.iter().map(|x| -x).collect();
        let reversed: Vec<f64> = p.iter().rev().copied().collect();
        for other in [shifted, negated, reversed] {
            let est = all(&SampledGrid::new(other, 6, 4).unwrap(), &lambda);
            for (k, (x, y)) in base.iter().zip(&est).enumerate() {
                prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1e-12), "index {k}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn hybrid_and_jump_variation_are_consistent(p in path(10, 3)) {
        let r = RangeEstimates::compute(&SampledGrid::new(p, 10, 3).unwrap(), &LambdaTable::shipped()).unwrap();
        prop_assert!(r.rrv >= 0.0 && r.jv >= 0.0 && r.rbv >= 0.0 && r.rtv >= 0.0 && r.rtq >= 0.0);
        prop_assert_eq!(r.jv, (r.rrv - r.rtv).max(0.0));
    }

    #[test]
    fn cleaned_ticks_are_ordered_positive_and_in_session(
        ticks in prop::collection::vec((-100i64..23_500, -1.0..200.0_f64), 1..300)
    ) {
        let mut text = String::from("timestamp,price\n");
        for (t, p) in &ticks {
            text.push_str(&format!("{t},{p}\n"));
        }
        let raw = TickSeries::parse_csv(&text, Session::default()).unwrap();
        if let Ok(c) = clean(&raw) {
            prop_assert!(c.records.windows(2).all(|w| w[0].0 < w[1].0));
            prop_assert!(c.records.iter().all(|&(t, p)| (0..=23_400).contains(&t) && p > 0.0));
            prop_assert!(c.records.iter().all(|r| raw.records.contains(r)));
        }
    }

    #[test]
    fn resampled_grid_has_n_m_returns(
        times in prop::collection::btree_set(1i64..23_400, 0..200),
        n in 4usize..20,
    ) {
        let mut records = vec![(0, 100.0)];
        records.extend(times.iter().map(|&t| (t, 100.0 + (t % 7) as f64)));
        let ticks = TickSeries { records, session: Session::default() };
        let cfg = ResampleConfig { interval_seconds: 60, session_seconds: 23_400, n, m: 390 / n };
        if cfg.validate().is_ok() {
            let grid = previous_tick_resample(&ticks, &cfg).unwrap();
            prop_assert_eq!(grid.log_prices().len(), n * (390 / n) + 1);
            prop_assert_eq!(grid.log_prices()[0], 100.0_f64.ln());
        }
    }
}
