//! Scenario orchestration: the tick loop, trajectory logging and the
//! summary metrics.
//!
//! Per control tick:
//! 1. top-down down-channel pass over the bus and local reconstruction of
//!    each module's controlled variables;
//! 2. in distributed mode, at a slot boundary, a consensus round and the
//!    resulting enable/disable transitions;
//! 3. one control tick per module;
//! 4. one RK4 step of the plant with the delayed torques.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::config::{Mode, ScenarioConfig};
use crate::consensus::{arbitration_schedule, run_round, ConsensusRound, TieBreakRule};
use crate::dec_controller::DecModuleState;
use crate::dynamics::{self, JointTorques, PlantState, Vec3};
use crate::error::Result;
use crate::metrics::{
    max_chord_deviation, metric_energy, metric_overshoot, metric_rise_time, metric_settling_time,
};
use crate::model::ModuleId;
use crate::netsim::{body_chain, Bus, Envelope, Payload};
use crate::sensing::{self, ControlledVariables, DownChannelMsg, SegmentAngles};

/// Which modules are enabled during a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Enabled {
    All,
    Only(ModuleId),
}

impl fmt::Display for Enabled {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Enabled::All => f.write_str("all"),
            Enabled::Only(id) => write!(f, "{id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub tick: u64,
    pub t: f64,
    pub q: [f64; 3],
    pub qdot: [f64; 3],
    pub angles: SegmentAngles,
    #[serde(rename = "KNEE")]
    pub knee: f64,
    #[serde(rename = "BS")]
    pub bs: f64,
    /// Whole-body CoM relative to the ankle, m.
    pub com: [f64; 2],
    /// Torque applied over the following step, N·m.
    pub tau: [f64; 3],
    pub enabled: Enabled,
    pub enabled_flags: [bool; 3],
    pub weights: [f64; 3],
    /// Held references of the three modules (stale while enabled).
    pub held: [f64; 3],
    /// Controlled variables (BS, KNEE, TS) as reconstructed by the modules.
    pub alpha: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariableMetrics {
    pub overshoot_deg: f64,
    pub rise_time_s: f64,
    pub rise_reached: bool,
    pub settling_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct MetricsReport {
    pub TS: VariableMetrics,
    pub KNEE: VariableMetrics,
    pub BS: VariableMetrics,
    pub energy_j: f64,
}

impl MetricsReport {
    pub fn variables(&self) -> [(&'static str, &VariableMetrics); 3] {
        [("TS", &self.TS), ("KNEE", &self.KNEE), ("BS", &self.BS)]
    }

    /// Plain `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, m) in self.variables() {
            let _ = writeln!(out, "{name}.overshoot_deg = {}", m.overshoot_deg);
            let _ = writeln!(out, "{name}.rise_time_s = {}", m.rise_time_s);
            let _ = writeln!(out, "{name}.rise_reached = {}", m.rise_reached);
            let _ = writeln!(out, "{name}.settling_time_s = {}", m.settling_time_s);
        }
        let _ = writeln!(out, "energy_j = {}", self.energy_j);
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// Side-by-side metrics of the two modes, one row per variable and index.
pub fn comparison_table(original: &MetricsReport, distributed: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<8} {:<18} {:>14} {:>14}",
        "variable", "index", "original", "distributed"
    );
    for ((name, o), (_, d)) in original
        .variables()
        .into_iter()
        .zip(distributed.variables())
    {
        let rows = [
            ("overshoot [deg]", o.overshoot_deg, d.overshoot_deg),
            ("rise time [s]", o.rise_time_s, d.rise_time_s),
            ("settling time [s]", o.settling_time_s, d.settling_time_s),
        ];
        for (i, (index, a, b)) in rows.into_iter().enumerate() {
            let label = if i == 0 { name } else { "" };
            let _ = writeln!(out, "{label:<8} {index:<18} {a:>14.4} {b:>14.4}");
        }
    }
    let _ = writeln!(
        out,
        "{:<8} {:<18} {:>14.2} {:>14.2}",
        "energy", "[J]", original.energy_j, distributed.energy_j
    );
    out
}

/// A disable transition: the module latched `alpha` as its held reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoldEvent {
    pub tick: u64,
    pub module: ModuleId,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub config: ScenarioConfig,
    pub samples: Vec<TrajectorySample>,
    pub metrics: MetricsReport,
    pub rounds: Vec<(u64, ConsensusRound<ModuleId>)>,
    pub hold_events: Vec<HoldEvent>,
    pub messages: Vec<Envelope<ModuleId>>,
}

struct Modules {
    ctrl: Vec<DecModuleState>,
}

/// Sensing pass routed over the bus: hip -> knee -> ankle.
fn sense(
    plant: &PlantState,
    cfg: &ScenarioConfig,
    bus: &mut Bus<ModuleId>,
    tick: u64,
) -> Result<([DownChannelMsg; 3], [ControlledVariables; 3])> {
    let mut own: BTreeMap<ModuleId, DownChannelMsg> = BTreeMap::new();
    let mut received: Option<DownChannelMsg> = None;
    for id in ModuleId::ALL.into_iter().rev() {
        let msg = sensing::build_down_channel(plant, &cfg.body, id, received.as_ref())?;
        own.insert(id, msg);
        received = None;
        if let Some(below) = ModuleId::from_index(id.index().wrapping_sub(1)) {
            bus.send(Envelope {
                src: id,
                dst: below,
                payload: Payload::DownChannel(msg),
                tick,
            })?;
            for env in bus.deliver(tick) {
                if let (Payload::DownChannel(m), true) = (env.payload, env.dst == below) {
                    received = Some(m);
                }
            }
        }
    }
    let msgs = [
        own[&ModuleId::Ankle],
        own[&ModuleId::Knee],
        own[&ModuleId::Hip],
    ];
    let cvs = ModuleId::ALL.map(|id| {
        sensing::controlled_variables(id, &sensing::local_readings(plant, id), &msgs[id.index()])
    });
    Ok((msgs, cvs))
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioRun> {
    config.validate()?;
    let cfg = config;
    let dt = cfg.dt;
    let mut modules = Modules {
        ctrl: ModuleId::ALL
            .iter()
            .map(|&id| {
                DecModuleState::new(
                    id,
                    cfg.body.joint(id).clone(),
                    cfg.references[id.index()],
                    dt,
                )
            })
            .collect::<Result<_>>()?,
    };
    let mut bus = Bus::new(body_chain());
    let tie_break = TieBreakRule::default();
    let mut plant = PlantState::at_rest(Vec3::from(cfg.q0));

    let n_ticks = cfg.total_ticks();
    let log_every = cfg.log_every();
    let mut samples = Vec::with_capacity(n_ticks / log_every + 1);
    let mut rounds = Vec::new();
    let mut hold_events = Vec::new();
    let mut tau_series = Vec::with_capacity(n_ticks);
    let mut qdot_series = Vec::with_capacity(n_ticks);
    // Slot whose enabling decision is in force; `None` until the first round.
    let mut slot: Option<u64> = if cfg.initial_round { None } else { Some(0) };

    for n in 0..n_ticks {
        let tick = n as u64;
        let t = n as f64 * dt;
        let (msgs, cvs) = sense(&plant, cfg, &mut bus, tick)?;

        // The interval (t, t + dt] lies in exactly one slot; use its midpoint.
        let k = arbitration_schedule(t + 0.5 * dt, cfg.t_e);
        if cfg.mode == Mode::Distributed && slot.is_none_or(|s| k > s) {
            slot = Some(k);
            let weights: BTreeMap<ModuleId, f64> = modules
                .ctrl
                .iter()
                .map(|m| (m.module(), m.module_weight(&cvs[m.module().index()])))
                .collect();
            let round = run_round(k, &weights, &mut bus, tick, &tie_break)?;
            for m in &mut modules.ctrl {
                let id = m.module();
                let alpha_now = cvs[id.index()].alpha;
                let on = round.y[&id];
                if m.is_enabled() && !on {
                    hold_events.push(HoldEvent {
                        tick,
                        module: id,
                        alpha: alpha_now,
                    });
                }
                m.set_enabled(on, alpha_now);
            }
            rounds.push((tick, round));
        }

        let mut tau = [0.0; 3];
        for m in &mut modules.ctrl {
            let i = m.module().index();
            tau[i] = m.control_tick(&cvs[i], dt)?.tau;
        }

        if n % log_every == 0 {
            samples.push(make_sample(tick, t, &plant, &msgs, &cvs, &tau, &modules));
        }
        tau_series.push(tau);
        qdot_series.push([plant.qdot[0], plant.qdot[1], plant.qdot[2]]);

        plant = dynamics::step(
            &cfg.body,
            &plant,
            &JointTorques {
                tau: Vec3::from(tau),
            },
            dt,
        )?;
    }

    let metrics = compute_metrics(cfg, &samples, &tau_series, &qdot_series);
    Ok(ScenarioRun {
        config: cfg.clone(),
        samples,
        metrics,
        rounds,
        hold_events,
        messages: bus.log().to_vec(),
    })
}

fn make_sample(
    tick: u64,
    t: f64,
    plant: &PlantState,
    msgs: &[DownChannelMsg; 3],
    cvs: &[ControlledVariables; 3],
    tau: &[f64; 3],
    modules: &Modules,
) -> TrajectorySample {
    let flags = [0, 1, 2].map(|i| modules.ctrl[i].is_enabled());
    let enabled = match flags.iter().filter(|&&f| f).count() {
        1 => Enabled::Only(
            ModuleId::from_index(flags.iter().position(|&f| f).expect("one")).expect("index"),
        ),
        _ => Enabled::All,
    };
    let weights = [0, 1, 2].map(|i| modules.ctrl[i].module_weight(&cvs[i]));
    TrajectorySample {
        tick,
        t,
        q: [plant.q[0], plant.q[1], plant.q[2]],
        qdot: [plant.qdot[0], plant.qdot[1], plant.qdot[2]],
        angles: SegmentAngles::from_plant(plant),
        knee: cvs[ModuleId::Knee.index()].alpha,
        bs: cvs[ModuleId::Ankle.index()].alpha,
        com: sensing::body_com(msgs),
        tau: *tau,
        enabled,
        enabled_flags: flags,
        weights,
        held: [0, 1, 2].map(|i| modules.ctrl[i].alpha_ref_held()),
        alpha: [0, 1, 2].map(|i| cvs[i].alpha),
    }
}

fn compute_metrics(
    cfg: &ScenarioConfig,
    samples: &[TrajectorySample],
    tau: &[[f64; 3]],
    qdot: &[[f64; 3]],
) -> MetricsReport {
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let band = cfg.settling_band_deg.to_radians();
    let summarize = |values: Vec<f64>, reference: f64| {
        let rise = metric_rise_time(&times, &values, reference, cfg.duration);
        VariableMetrics {
            overshoot_deg: metric_overshoot(&values, reference),
            rise_time_s: rise.seconds,
            rise_reached: rise.reached,
            settling_time_s: metric_settling_time(&times, &values, reference, band),
        }
    };
    MetricsReport {
        TS: summarize(
            samples.iter().map(|s| s.angles.TS).collect(),
            cfg.references[ModuleId::Hip.index()],
        ),
        KNEE: summarize(
            samples.iter().map(|s| s.knee).collect(),
            cfg.references[ModuleId::Knee.index()],
        ),
        BS: summarize(
            samples.iter().map(|s| s.bs).collect(),
            cfg.references[ModuleId::Ankle.index()],
        ),
        energy_j: metric_energy(tau, qdot, cfg.dt, cfg.energy),
    }
}

pub const CSV_COLUMNS: [&str; 21] = [
    "t", "q1", "q2", "q3", "qdot1", "qdot2", "qdot3", "SS", "THS", "TS", "KNEE", "BS", "com_x",
    "com_y", "tau1", "tau2", "tau3", "enabled", "w1", "w2", "w3",
];

impl ScenarioRun {
    /// Trajectory CSV, preceded by the effective configuration as `#` lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for line in self.config.to_config_string().lines() {
            let _ = writeln!(out, "# {line}");
        }
        let _ = writeln!(out, "{}", CSV_COLUMNS.join(","));
        for s in &self.samples {
            let a = &s.angles;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                s.t,
                s.q[0],
                s.q[1],
                s.q[2],
                s.qdot[0],
                s.qdot[1],
                s.qdot[2],
                a.SS,
                a.THS,
                a.TS,
                s.knee,
                s.bs,
                s.com[0],
                s.com[1],
                s.tau[0],
                s.tau[1],
                s.tau[2],
                s.enabled,
                s.weights[0],
                s.weights[1],
                s.weights[2],
            );
        }
        out
    }

    /// Metrics as `key = value` lines, preceded by the effective configuration.
    pub fn metrics_text(&self) -> String {
        let mut out = String::new();
        for line in self.config.to_config_string().lines() {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str(&self.metrics.to_text());
        out
    }

    pub fn message_log(&self) -> String {
        self.messages.iter().map(|e| e.log_line() + "\n").collect()
    }

    /// Logged CoM path split by arbitration slot. Each piece starts at the
    /// last point of the one before.
    pub fn com_path_slots(&self) -> Vec<Vec<[f64; 2]>> {
        let mut slots: Vec<Vec<[f64; 2]>> = Vec::new();
        let mut current = None;
        for s in &self.samples {
            let k = arbitration_schedule(s.t, self.config.t_e);
            if current != Some(k) {
                // each slot starts where the previous one ended
                let start = slots.last().and_then(|p| p.last().copied());
                slots.push(start.into_iter().collect());
                current = Some(k);
            }
            slots.last_mut().expect("slot pushed above").push(s.com);
        }
        slots
    }

    /// Largest distance of the logged CoM path from the chord joining its
    /// first and last points.
    pub fn com_path_deviation(&self) -> f64 {
        let path: Vec<[f64; 2]> = self.samples.iter().map(|s| s.com).collect();
        max_chord_deviation(&path)
    }

    /// Largest per-slot chord deviation of the CoM path.
    pub fn com_slot_deviation(&self) -> f64 {
        self.com_path_slots()
            .iter()
            .map(|p| max_chord_deviation(p))
            .fold(0.0, f64::max)
    }
}

/// Check the hold logic on a run: every disabled module's held reference is
/// constant between rounds and equals the alpha it latched when it was
/// disabled. Returns a description of the first violation.
pub fn audit_hold(run: &ScenarioRun) -> std::result::Result<(), String> {
    for s in &run.samples {
        for id in ModuleId::ALL {
            let i = id.index();
            if s.enabled_flags[i] {
                continue;
            }
            let latest = run
                .hold_events
                .iter()
                .rev()
                .find(|e| e.module == id && e.tick <= s.tick)
                .ok_or_else(|| format!("{id} disabled at t={} without a disable event", s.t))?;
            if s.held[i] != latest.alpha {
                return Err(format!(
                    "{id} at t={}: held {} differs from latched {}",
                    s.t, s.held[i], latest.alpha
                ));
            }
            if latest.tick == s.tick && s.alpha[i] != latest.alpha {
                return Err(format!(
                    "{id} latched {} but measured {} at t={}",
                    latest.alpha, s.alpha[i], s.t
                ));
            }
        }
    }
    Ok(())
}
