use frost_hollow::env::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arb_action() -> impl Strategy<Value = HumanAction> {
    prop_oneof![
        Just(HumanAction::hold()),
        (0.0..0.2f64, any::<bool>()).prop_map(|(x, cache)| HumanAction { move_to: Some(Point::new(x, 0.0)), cache }),
        (0.0..1.5f64, -1.5..1.5f64, any::<bool>())
            .prop_map(|(x, y, cache)| HumanAction { move_to: Some(Point::new(x, y)), cache }),
    ]
}

fn run(actions: &[HumanAction], sched: &PulseSchedule, cfg: &SimConfig) -> Vec<WorldState> {
    let mut ws = WorldState::default();
    let mut out = Vec::with_capacity(actions.len());
    for a in actions {
        ws = ws.step(a, sched, cfg).unwrap().0;
        out.push(ws);
    }
    out
}

/// Each action is held for a random number of steps so runs reach a full
/// gauge and span pulses.
fn arb_run() -> impl Strategy<Value = Vec<HumanAction>> {
    prop::collection::vec((arb_action(), 1usize..800), 1..40)
        .prop_map(|chunks| chunks.into_iter().flat_map(|(a, n)| std::iter::repeat_n(a, n)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gauge_stays_in_bounds_and_points_never_drop(actions in arb_run(), seed in any::<u64>()) {
        let cfg = SimConfig::default();
        let sched = PulseSchedule::generate(IsiCondition::Random, &cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        let mut prev_points = 0;
        for ws in run(&actions, &sched, &cfg) {
            prop_assert!((0.0..=cfg.gauge_cap).contains(&ws.gauge), "gauge {}", ws.gauge);
            prop_assert!(ws.points >= prev_points);
            prev_points = ws.points;
        }
    }

    #[test]
    fn identical_inputs_give_identical_trajectories(actions in arb_run(), seed in any::<u64>()) {
        let cfg = SimConfig::default();
        let a = PulseSchedule::generate(IsiCondition::Drifting, &cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        let b = PulseSchedule::generate(IsiCondition::Drifting, &cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(&a, &b);
        let (ra, rb) = (run(&actions, &a, &cfg), run(&actions, &b, &cfg));
        for (x, y) in ra.iter().zip(&rb) {
            prop_assert_eq!(x.gauge.to_bits(), y.gauge.to_bits());
            prop_assert_eq!(x, y);
        }
    }
}

fn inactive_durations(s: &PulseSchedule) -> Vec<f64> {
    s.segments().iter().map(|seg| seg.inactive).collect()
}

#[test]
fn schedule_bounds_hold_for_every_condition_over_many_seeds() {
    let cfg = SimConfig::default();
    for cond in IsiCondition::ALL {
        for seed in 0..1500u64 {
            let s = PulseSchedule::generate(cond, &cfg, &mut ChaCha8Rng::seed_from_u64(seed));
            assert!(s.span() >= cfg.trial_len);
            let d = inactive_durations(&s);
            assert!(d.iter().all(|&x| (12.0..=22.0).contains(&x)), "{cond} seed {seed}: {d:?}");
            match cond {
                IsiCondition::Fixed => assert!(d.iter().all(|&x| x == d[0])),
                IsiCondition::Drifting => {
                    assert!(d.windows(2).all(|w| (w[1] - w[0]).abs() <= 2.0 + 1e-12), "{d:?}")
                }
                IsiCondition::Random => {}
            }
        }
    }
}

#[test]
fn pulses_last_four_seconds_and_edges_alternate() {
    let cfg = SimConfig::default();
    let s = PulseSchedule::generate(IsiCondition::Random, &cfg, &mut ChaCha8Rng::seed_from_u64(9));
    for (i, &on) in s.onsets().iter().enumerate() {
        let fall = s.falling_edges()[i + 1];
        assert!((fall - on - 4.0).abs() < 1e-9);
        assert!(on > s.falling_edges()[i]);
        assert!(s.is_active(on) && !s.is_active(fall));
    }
}

#[test]
fn standing_in_center_fills_in_expected_steps() {
    let cfg = SimConfig::default();
    let sched = PulseSchedule::from_inactive(&[1000.0], 4.0);
    let mut ws = WorldState::default();
    let mut steps = 0u64;
    while !ws.gauge_full(&cfg) {
        ws = ws.step(&HumanAction::hold(), &sched, &cfg).unwrap().0;
        steps += 1;
    }
    let expected = (cfg.gauge_cap / cfg.fill_rate / cfg.dt).ceil() as i64;
    assert!((steps as i64 - expected).abs() <= 1, "{steps} vs {expected}");
    let secs = steps as f64 * cfg.dt;
    assert!((secs - 26.67).abs() <= cfg.dt + 0.005, "{secs}");
}
