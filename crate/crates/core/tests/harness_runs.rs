use dec_core::consensus::arbitration_schedule;
use dec_core::harness::{audit_hold, Enabled};
use dec_core::metrics::{metric_energy, metric_rise_time};
use dec_core::{run_scenario, EnergyMode, Mode, ModuleId, ScenarioConfig, SimError};

fn config(mode: Mode, duration: f64) -> ScenarioConfig {
    ScenarioConfig {
        mode,
        duration,
        ..ScenarioConfig::default()
    }
}

#[test]
fn upright_start_stays_upright() {
    for mode in [Mode::Original, Mode::Distributed] {
        let mut cfg = config(mode, 2.0);
        cfg.q0 = [0.0; 3];
        let run = run_scenario(&cfg).unwrap();
        for s in &run.samples {
            assert!(
                s.q.iter().all(|q| q.abs() < 1e-9),
                "{mode} t={}: {:?}",
                s.t,
                s.q
            );
        }
        assert_eq!(run.metrics.energy_j, 0.0);
    }
}

#[test]
fn runs_are_bit_identical() {
    let cfg = config(Mode::Distributed, 3.0);
    let a = run_scenario(&cfg).unwrap();
    let b = run_scenario(&cfg).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.metrics_text(), b.metrics_text());
    assert_eq!(a.message_log(), b.message_log());
}

#[test]
fn one_module_enabled_per_slot() {
    let cfg = config(Mode::Distributed, 3.0);
    let run = run_scenario(&cfg).unwrap();
    for s in &run.samples {
        let on = s.enabled_flags.iter().filter(|&&f| f).count();
        if s.t < cfg.t_e - 1e-12 {
            assert_eq!(on, 3, "slot 0 at t={}", s.t);
            assert_eq!(s.enabled, Enabled::All);
        } else {
            assert_eq!(on, 1, "t={}", s.t);
            assert!(matches!(s.enabled, Enabled::Only(_)));
        }
    }
    // every logged sample inside a slot shows the same enabled module
    let mut by_slot = std::collections::BTreeMap::new();
    for s in &run.samples {
        let k = arbitration_schedule(s.t + 0.5 * cfg.dt, cfg.t_e);
        assert_eq!(
            *by_slot.entry(k).or_insert(s.enabled),
            s.enabled,
            "slot {k}"
        );
    }
}

#[test]
fn original_mode_keeps_everyone_enabled() {
    let run = run_scenario(&config(Mode::Original, 2.0)).unwrap();
    assert!(run.rounds.is_empty());
    assert!(run.samples.iter().all(|s| s.enabled == Enabled::All));
    assert!(run.messages.iter().all(|m| m.payload.tag() == "down"));
}

#[test]
fn rounds_run_at_slot_boundaries() {
    let cfg = config(Mode::Distributed, 2.0);
    let run = run_scenario(&cfg).unwrap();
    let ticks: Vec<u64> = run.rounds.iter().map(|(tick, _)| *tick).collect();
    let per_slot = (cfg.t_e / cfg.dt).round() as u64;
    let expected: Vec<u64> = (1..ticks.len() as u64 + 1).map(|k| k * per_slot).collect();
    assert_eq!(ticks, expected);
    assert_eq!(ticks.len() as f64, (cfg.duration / cfg.t_e).round() - 1.0);

    let mut early = cfg.clone();
    early.initial_round = true;
    let run = run_scenario(&early).unwrap();
    assert_eq!(run.rounds[0].0, 0);
}

#[test]
fn halving_the_slot_doubles_the_rounds() {
    let mut cfg = config(Mode::Distributed, 2.0);
    cfg.t_e = 0.1;
    let slow = run_scenario(&cfg).unwrap().rounds.len();
    cfg.t_e = 0.05;
    let fast = run_scenario(&cfg).unwrap().rounds.len();
    assert!(fast >= 2 * slow, "{fast} vs {slow}");
}

#[test]
fn disabled_modules_hold_their_latched_reference() {
    let run = run_scenario(&config(Mode::Distributed, 4.0)).unwrap();
    assert!(!run.hold_events.is_empty());
    audit_hold(&run).unwrap();
}

#[test]
fn messages_only_travel_between_neighbors() {
    let run = run_scenario(&config(Mode::Distributed, 2.0)).unwrap();
    for m in &run.messages {
        let gap = m.src.index().abs_diff(m.dst.index());
        assert_eq!(gap, 1, "{}", m.log_line());
    }
}

#[test]
fn logged_angles_are_kinematically_consistent() {
    let run = run_scenario(&config(Mode::Distributed, 2.0)).unwrap();
    for s in &run.samples {
        let a = &s.angles;
        assert_eq!(a.SS, s.q[0]);
        assert_eq!(a.THS, s.q[0] + s.q[1]);
        assert_eq!(a.TS, s.q[0] + s.q[1] + s.q[2]);
        assert!((a.THS - a.SS - s.q[1]).abs() <= 1e-15);
        assert!((a.TS - a.THS - s.q[2]).abs() <= 1e-15);
        assert_eq!(s.knee, s.q[1]);
    }
}

#[test]
fn log_rate_decimates_samples() {
    let mut cfg = config(Mode::Original, 1.0);
    cfg.log_rate = 100.0;
    assert_eq!(run_scenario(&cfg).unwrap().samples.len(), 100);
    cfg.log_rate = 1000.0;
    assert_eq!(run_scenario(&cfg).unwrap().samples.len(), 1000);
}

#[test]
fn metrics_are_sane() {
    let run = run_scenario(&config(Mode::Distributed, 10.0)).unwrap();
    for (_, v) in run.metrics.variables() {
        assert!(v.overshoot_deg >= 0.0);
        assert!(v.rise_time_s >= 0.0);
        assert!(v.settling_time_s >= 0.0 && v.settling_time_s <= run.config.duration);
    }
    assert!(run.metrics.energy_j > 0.0);
}

#[test]
fn signed_energy_never_exceeds_absolute() {
    let mut cfg = config(Mode::Original, 3.0);
    let abs = run_scenario(&cfg).unwrap().metrics.energy_j;
    cfg.energy = EnergyMode::Signed;
    let signed = run_scenario(&cfg).unwrap().metrics.energy_j;
    assert!(signed.abs() <= abs);
}

#[test]
fn divergence_is_reported() {
    let mut cfg = config(Mode::Original, 2.0);
    for j in &mut cfg.body.joints {
        j.kp = 1.0;
        j.kd = 0.1;
    }
    match run_scenario(&cfg) {
        Err(SimError::Diverged { joint, .. }) => assert!(ModuleId::ALL.contains(&joint)),
        other => panic!("expected divergence, got {:?}", other.map(|r| r.metrics)),
    }
}

#[test]
fn exponential_rise_time_is_tau_ln9() {
    let tau_c = 0.3;
    let times: Vec<f64> = (0..=2000).map(|i| i as f64 * 1e-3).collect();
    let values: Vec<f64> = times.iter().map(|t| 0.2 * (-t / tau_c).exp()).collect();
    let r = metric_rise_time(&times, &values, 0.0, 2.0);
    assert!(r.reached);
    assert!(
        (r.seconds - tau_c * 9f64.ln()).abs() < 1e-6,
        "{}",
        r.seconds
    );
}

#[test]
fn constant_power_energy() {
    let tau = vec![[1.0, 0.0, 0.0]; 2001];
    let qdot = vec![[1.0, 0.0, 0.0]; 2001];
    assert!((metric_energy(&tau, &qdot, 1e-3, EnergyMode::Absolute) - 2.0).abs() < 1e-12);
    let neg: Vec<[f64; 3]> = tau.iter().map(|t| t.map(|x| -x)).collect();
    assert_eq!(
        metric_energy(&neg, &qdot, 1e-3, EnergyMode::Absolute),
        metric_energy(&tau, &qdot, 1e-3, EnergyMode::Absolute)
    );
}
