use proptest::prelude::*;
use toxflow::calib::{estimate_sigma, estimate_theta_daily, FlowRecord, FlowSeries};
use toxflow::config::{parse_config, to_config_string};
use toxflow::sim::{histogram, AgentKind};
use toxflow::{solve_riccati, CoefFn, InitialState, ModelSpec, Scenario, SignalSpec, TimeGrid};

fn coef(horizon: f64) -> impl Strategy<Value = CoefFn> {
    prop_oneof![
        (-2.0..2.0f64).prop_map(CoefFn::Constant),
        (-2.0..2.0f64, -1.0..1.0f64).prop_map(|(value0, slope)| CoefFn::Linear { value0, slope }),
        prop::collection::vec(-2.0..2.0f64, 2..6).prop_map(move |vs| {
            let n = vs.len() - 1;
            CoefFn::Table(vs.into_iter().enumerate().map(|(i, v)| (horizon * i as f64 / n as f64, v)).collect())
        }),
    ]
}

fn spec() -> impl Strategy<Value = ModelSpec> {
    (0.01..5.0f64).prop_flat_map(|horizon| {
        (
            (coef(horizon), coef(horizon), coef(horizon), coef(horizon)),
            (1e-3..1.0f64, 0.0..0.1f64, 1e-3..1.0f64, 0.1..50.0f64, 1e-3..1.0f64, 0.1..500.0f64),
            prop::option::of((0.0..5.0f64, 0.0..1.0f64, -1.0..1.0f64)),
            prop::array::uniform5(-1.0..1.0f64),
        )
            .prop_map(move |((a, b, c, d), (sigma, sigma_m, epsilon, beta, lambda, alpha), sig, init)| ModelSpec {
                a,
                b,
                c,
                d,
                sigma,
                sigma_m,
                epsilon,
                beta,
                lambda,
                alpha,
                horizon,
                signal: sig.map(|(kappa, ell, nu)| SignalSpec { kappa, ell, nu }),
                initial: InitialState { x: init[0], z: init[1], theta0: init[2], y: init[3], p: 1.0 + init[4] },
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trips_bitwise(s in spec()) {
        let text = to_config_string(&s);
        prop_assert_eq!(parse_config(&text).unwrap(), s);
    }

    #[test]
    fn constants_do_not_depend_on_time(v in -10.0..10.0f64, t in 0.0..1.0f64, u in 0.0..1.0f64) {
        let f = CoefFn::Constant(v);
        prop_assert_eq!(f.eval(t, 1.0).unwrap(), f.eval(u, 1.0).unwrap());
        prop_assert_eq!(f.derivative(t), 0.0);
    }

    #[test]
    fn tables_interpolate_between_samples(v0 in -2.0..2.0f64, v1 in -2.0..2.0f64, t in 0.0..1.0f64) {
        let f = CoefFn::Table(vec![(0.0, v0), (1.0, v1)]);
        prop_assert!((f.value(t) - (v0 + (v1 - v0) * t)).abs() < 1e-12);
        prop_assert!((f.derivative(t) - (v1 - v0)).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_times_are_rejected(t in 1.001..10.0f64) {
        prop_assert!(CoefFn::Constant(1.0).eval(t, 1.0).is_err());
        prop_assert!(CoefFn::Constant(1.0).eval(-t, 1.0).is_err());
    }

    #[test]
    fn riccati_stays_psd(a in -2.0..2.0f64, c in -0.05..0.05f64, d in 0.0..0.1f64, sigma in 0.01..1.0f64) {
        let mut s = ModelSpec::preset(Scenario::Reversion);
        s.a = CoefFn::Constant(a);
        s.c = CoefFn::Constant(c);
        s.d = CoefFn::Constant(d);
        s.sigma = sigma;
        let ric = solve_riccati(&s, &TimeGrid::new(1.0, 200).unwrap()).unwrap();
        prop_assert!(ric.min_eigenvalue() >= -1e-10);
        prop_assert!(ric.sigma.iter().all(|m| m == &m.transpose()));
        prop_assert_eq!(ric.sigma[0][(0, 0)], 0.0);
    }

    #[test]
    fn sigma_is_scale_equivariant(dz in prop::collection::vec(-1.0..1.0f64, 3..50), k in 0.01..100.0f64) {
        let series = |scale: f64| {
            let recs = dz.iter().enumerate()
                .map(|(i, v)| FlowRecord { timestamp: i as f64 * 0.01, dt: 0.01, dz: v * scale, q: None })
                .collect();
            FlowSeries::new(recs).unwrap()
        };
        let (base, scaled) = (estimate_sigma(&series(1.0)).unwrap(), estimate_sigma(&series(k)).unwrap());
        prop_assert!((scaled - k * base).abs() <= 1e-12 * (1.0 + k * base));
    }

    #[test]
    fn theta_is_exact_without_noise(theta in -1.0..1.0f64, bins in 2usize..200, days in 1usize..5) {
        let dt = 1.0 / bins as f64;
        let recs = (0..days * bins)
            .map(|i| FlowRecord { timestamp: (i / bins) as f64 + (i % bins) as f64 * dt, dt, dz: theta * dt, q: None })
            .collect();
        let est = estimate_theta_daily(&FlowSeries::new(recs).unwrap()).unwrap();
        prop_assert_eq!(est.len(), days);
        for d in est {
            prop_assert!((d.theta_hat - theta).abs() < 1e-12);
        }
    }

    #[test]
    fn histogram_counts_every_sample(xs in prop::collection::vec(-1e3..1e3f64, 1..300), bins in 1usize..60) {
        let h = histogram(&xs, bins);
        prop_assert_eq!(h.len(), bins);
        prop_assert_eq!(h.iter().map(|b| b.count).sum::<u64>(), xs.len() as u64);
        prop_assert!(h.windows(2).all(|w| w[0].bin_right == w[1].bin_left));
    }

    #[test]
    fn agent_names_round_trip(b in -1.0..1.0f64) {
        for kind in [AgentKind::PartialInfo, AgentKind::FullInfo, AgentKind::NoTrade, AgentKind::Naive { b_believed: b }] {
            prop_assert_eq!(kind.to_string().parse::<AgentKind>().unwrap(), kind);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn feedback_is_linear(x in -1.0..1.0f64, th in -1.0..1.0f64, y in -0.1..0.1f64, p in 0.5..2.0f64, k in 0usize..=100, l in -3.0..3.0f64) {
        let s = ModelSpec::preset(Scenario::Reversion);
        let table = toxflow::CoefficientTable::build(&s, &TimeGrid::new(1.0, 100).unwrap(), toxflow::LedgerForm::Consistent).unwrap();
        let q = table.feedback(k, x, th, y, p, 0.0);
        let ql = table.feedback(k, l * x, l * th, l * y, l * p, 0.0);
        prop_assert!((ql - l * q).abs() <= 1e-9 * (1.0 + q.abs() * l.abs()));
        prop_assert_eq!(table.feedback(k, 0.0, 0.0, 0.0, 0.0, 0.0), 0.0);
    }
}
