use frost_hollow::env::*;
use frost_hollow::harness::metrics::pulse_metrics;
use frost_hollow::harness::{run_trial, AgentKind, ExperimentConfig};
use frost_hollow::human::{HumanKind, HumanModelConfig, HumanModelState, Observation};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cfg_with(kind: HumanKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.human.kind = kind;
    cfg
}

/// First rising edge of the signal in `[from, to)`.
fn first_rise(log: &frost_hollow::harness::TrialLog, from: f64, to: f64) -> Option<f64> {
    let mut prev = false;
    for r in &log.steps {
        if r.t >= to {
            break;
        }
        if r.t >= from && r.signal && !prev {
            return Some(r.t);
        }
        prev = r.signal;
    }
    None
}

/// The metric measures from the last rise before onset; a signal that dips
/// below threshold and recovers can put that rise after an exit the first
/// rise triggered. Exits never precede the first rise of the window.
#[test]
fn cue_follower_never_leaves_before_the_signal() {
    let cfg = cfg_with(HumanKind::CueFollower);
    for agent in [AgentKind::Bc, AgentKind::Tct] {
        for cond in IsiCondition::ALL {
            for seed in 0..8 {
                let log = run_trial(&cfg, cond, agent, seed).unwrap();
                for m in pulse_metrics(&log, &cfg.sim) {
                    let (Some(gap), Some(exit)) = (m.signal_to_exit, m.exit_t) else { continue };
                    let window_start = if m.index == 0 { 0.0 } else { log.pulses[m.index - 1].falling_t };
                    let first = first_rise(&log, window_start, m.onset_t).expect("an exit implies a cue");
                    assert!(exit >= first, "{agent} {cond} seed {seed} pulse {}", m.index);
                    if gap < 0.0 {
                        assert!(first < m.signal_rise_t.unwrap());
                    }
                }
            }
        }
    }
}

#[test]
fn cue_follower_exit_lags_signal_by_reaction_plus_travel() {
    let cfg = cfg_with(HumanKind::CueFollower);
    let h = cfg.human;
    let travel = cfg.sim.center_radius / cfg.sim.hazard_radius * h.exit_duration;
    let expected = h.reaction_delay + travel;
    let mut checked = 0;
    for agent in [AgentKind::Bc, AgentKind::Tct] {
        for cond in IsiCondition::ALL {
            for seed in 0..8 {
                let log = run_trial(&cfg, cond, agent, seed).unwrap();
                for m in pulse_metrics(&log, &cfg.sim) {
                    let (Some(rise), Some(gap)) = (m.signal_rise_t, m.signal_to_exit) else { continue };
                    // Only exits that started from the center at the cue.
                    let k = (rise / cfg.sim.dt).round() as usize;
                    if log.steps[k].pos.norm() > 0.0 {
                        continue;
                    }
                    assert!((gap - expected).abs() <= 2.0 * cfg.sim.dt, "gap {gap} expected {expected}");
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 100, "{checked}");
}

#[test]
fn cue_follower_with_instant_reaction_is_never_hit_after_useful_signals() {
    let mut cfg = cfg_with(HumanKind::CueFollower);
    cfg.human.reaction_delay = 0.0;
    cfg.human.exit_duration = 0.89;
    let mut useful = 0;
    for agent in [AgentKind::Bc, AgentKind::Tct] {
        for cond in IsiCondition::ALL {
            for seed in 0..8 {
                let log = run_trial(&cfg, cond, agent, seed).unwrap();
                for m in pulse_metrics(&log, &cfg.sim) {
                    if m.useful {
                        useful += 1;
                        assert_eq!(m.hit_steps, 0, "{agent} {cond} seed {seed} pulse {}", m.index);
                    }
                }
            }
        }
    }
    assert!(useful > 100);
}

#[test]
fn internal_timer_actions_do_not_depend_on_the_agent() {
    let cfg = cfg_with(HumanKind::InternalTimer);
    for cond in IsiCondition::ALL {
        let seed = 3;
        let traces: Vec<Vec<HumanAction>> = [AgentKind::None, AgentKind::Bc, AgentKind::Tct]
            .into_iter()
            .map(|agent| run_trial(&cfg, cond, agent, seed).unwrap().input_trace())
            .collect();
        assert_eq!(traces[0], traces[1]);
        assert_eq!(traces[0], traces[2]);
    }
}

#[test]
fn internal_timer_ignores_a_permuted_signal_stream() {
    let h = HumanModelConfig { kind: HumanKind::InternalTimer, ..HumanModelConfig::default() };
    let sim = SimConfig::default();
    let sched = PulseSchedule::generate(IsiCondition::Random, &sim, &mut ChaCha8Rng::seed_from_u64(11));
    let n = 15_000usize;
    let signal: Vec<bool> = (0..n).map(|k| (k / 300) % 3 == 0).collect();
    let mut permuted = signal.clone();
    permuted.shuffle(&mut ChaCha8Rng::seed_from_u64(12));

    let drive = |sig: &[bool]| {
        let mut state = HumanModelState::new(&h);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        (0..n)
            .map(|k| {
                let t = sim.time_at(k as u64);
                let obs = Observation { t, gauge: 0.0, gauge_full: false, hazard_active: sched.is_active(t), agent_signal: sig[k] };
                state.step(&h, &sim, &obs, &mut rng)
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(drive(&signal), drive(&permuted));
}
