use lobflow::book::{Quotes, Side, TickGrid};
use lobflow::calib::load_events;
use lobflow::config::Config;
use lobflow::events::{Clock, EventKind, EventSink, EventWriter, OrderEvent};
use lobflow::flow::{cancel_prob, limit_price_ticks, transaction_prob, CancellationInputs, Rounding};
use lobflow::stats::{hill_estimator, EmpiricalDistribution};
use proptest::prelude::*;

fn positive_sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-3f64..1e3, 1000..3000)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hill_is_scale_and_order_invariant(xs in positive_sample(), c in 1e-3f64..1e3) {
        let a = hill_estimator(&xs, 0.05).unwrap().alpha;
        let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
        prop_assert!((hill_estimator(&scaled, 0.05).unwrap().alpha / a - 1.0).abs() < 1e-9);
        let mut rev = xs.clone();
        rev.reverse();
        let negated: Vec<f64> = rev.iter().map(|x| -x).collect();
        prop_assert!((hill_estimator(&negated, 0.05).unwrap().alpha / a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ccdf_is_a_survival_function(xs in prop::collection::vec(-1e3f64..1e3, 1..500), probe in prop::collection::vec(-2e3f64..2e3, 2..20)) {
        let d = EmpiricalDistribution::new(xs.clone());
        let mut probe = probe;
        probe.sort_by(f64::total_cmp);
        let values: Vec<f64> = probe.iter().map(|&x| d.ccdf(x)).collect();
        prop_assert!(values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(d.ccdf(min), 1.0);
        let count = xs.iter().filter(|&&v| v >= probe[0]).count();
        prop_assert_eq!(d.ccdf(probe[0]), count as f64 / xs.len() as f64);
    }

    #[test]
    fn cancellation_probability_is_monotone(y in 0.0f64..20.0, dy in 0.0f64..5.0, m in 0.0f64..1.0, n in 1usize..5000,
                                            a in 0.1f64..3.0, b in 0.0f64..1.0) {
        let p = |y, m, n| cancel_prob(CancellationInputs { y, n_imb: m, n_tot: n }, a, b).unwrap();
        let base = p(y, m, n);
        prop_assert!((0.0..=1.0).contains(&base));
        prop_assert!(p(y + dy, m, n) >= base);
        prop_assert!(p(y, (m + 0.1).min(1.0), n) >= base);
        prop_assert!(p(y, m, n + 1) <= base);
    }

    #[test]
    fn transaction_probability_falls_with_spread(s in 1e-5f64..0.05, ds in 1e-6f64..0.05, alpha in 0.5f64..3.0) {
        let p = transaction_prob(s, 2.4e-3, alpha);
        prop_assert!(p > 0.0 && p < 0.5);
        prop_assert!(transaction_prob(s + ds, 2.4e-3, alpha) <= p);
    }

    #[test]
    fn rounded_limits_never_cross(bid in 100i64..10_000, gap in 1i64..20, x in -0.02f64..0.02, buy in any::<bool>(),
                                  rounding in prop_oneof![Just(Rounding::Passive), Just(Rounding::Nearest), Just(Rounding::Floor)]) {
        let grid = TickGrid::new(1.0).unwrap();
        let ask = bid + gap;
        let (lb, la) = (grid.log_price(bid), grid.log_price(ask));
        let q = Quotes { bid: lb, ask: la, mid: 0.5 * (lb + la), spread: la - lb };
        let side = if buy { Side::Buy } else { Side::Sell };
        if let Some(t) = limit_price_ticks(side, x, &q, bid, ask, &grid, rounding) {
            prop_assert!(t >= 1);
            match side {
                Side::Buy => prop_assert!(t < ask),
                Side::Sell => prop_assert!(t > bid),
            }
            if rounding == Rounding::Passive {
                // never more aggressive than the continuous price
                let lp = grid.log_price(t);
                match side {
                    Side::Buy => prop_assert!(lp <= lb + x + 1e-12),
                    Side::Sell => prop_assert!(lp >= la - x - 1e-12),
                }
            }
        }
    }

    #[test]
    fn events_survive_a_csv_round_trip(rows in prop::collection::vec((0u8..3, any::<bool>(), 1u32..100_000, 1u32..50), 1..200)) {
        let events: Vec<OrderEvent> = rows.iter().enumerate().map(|(i, &(k, buy, price, size))| OrderEvent {
            time: (i / 3) as f64,
            kind: [EventKind::Limit, EventKind::Market, EventKind::Cancel][k as usize],
            order_id: i as u64,
            side: if buy { Side::Buy } else { Side::Sell },
            price: price as f64 * 0.25,
            size: size as f64,
        }).collect();
        let mut w = EventWriter::new(Vec::new(), Clock::EventTime).unwrap();
        for e in &events {
            w.record(e).unwrap();
        }
        let log = load_events(w.into_inner().as_slice()).unwrap();
        prop_assert_eq!(log.clock, Clock::EventTime);
        prop_assert_eq!(log.events, events);
    }

    #[test]
    fn config_renders_to_an_equivalent_config(h in 0.3f64..0.95, ax in 0.6f64..3.0, a in 0.1f64..3.0, seed in any::<u64>(),
                                              steps in 20_000u64..5_000_000, tick in prop_oneof![Just(0.25), Just(0.5), Just(1.0)]) {
        let mut c = Config::default();
        for kv in [format!("H_s={h}"), format!("alpha_x={ax}"), format!("A={a}"), format!("seed={seed}"),
                   format!("sim.n_steps={steps}"), format!("T={tick}")] {
            c.apply_override(&kv).unwrap();
        }
        let text = c.render();
        let back = Config::parse(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.render(), text);
    }
}
