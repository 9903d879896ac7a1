//! Scenario configuration and its flat `section.key = value` text format.
//!
//! Files start from the built-in defaults; every line overrides one key.
//! Blank lines and lines starting with `#` are ignored, unknown keys are
//! rejected. All quantities are SI except `metrics.settling_band_deg`.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::model::{default_body_model, BodyModel, ModuleId, SEGMENT_NAMES};

pub use crate::metrics::EnergyMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Every module tracks its task reference all the time.
    Original,
    /// One module at a time, elected by max-consensus every `T_e`.
    Distributed,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Original => "original",
            Mode::Distributed => "distributed",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "original" => Ok(Mode::Original),
            "distributed" => Ok(Mode::Distributed),
            _ => Err(format!("expected `original` or `distributed`, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub mode: Mode,
    /// s
    pub duration: f64,
    /// Integration and control period, s.
    pub dt: f64,
    /// Hz
    pub log_rate: f64,
    /// Arbitration slot length, s.
    pub t_e: f64,
    /// Also run a consensus round at `t = 0` instead of starting with every
    /// module enabled for the first slot.
    pub initial_round: bool,
    /// Initial joint angles (ankle, knee, hip), rad.
    pub q0: [f64; 3],
    /// Task references (BS, KNEE, TS), rad.
    pub references: [f64; 3],
    pub settling_band_deg: f64,
    pub energy: EnergyMode,
    pub body: BodyModel,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Distributed,
            duration: 10.0,
            dt: 1e-3,
            log_rate: 100.0,
            t_e: 0.05,
            initial_round: false,
            q0: [0.1, -0.2, 0.15],
            references: [0.0; 3],
            settling_band_deg: 0.5,
            energy: EnergyMode::Absolute,
            body: default_body_model(),
        }
    }
}

const JOINT_KEYS: [&str; 8] = [
    "kp",
    "kd",
    "ki",
    "passive_stiffness",
    "passive_damping",
    "g_servo",
    "g_g",
    "lumped_delay",
];
const SEGMENT_KEYS: [&str; 4] = ["mass", "length", "com_offset", "inertia"];

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value.parse::<f64>().map_err(|e| SimError::InvalidValue {
        key: key.into(),
        msg: format!("`{value}`: {e}"),
    })
}

fn parse_triple(key: &str, value: &str) -> Result<[f64; 3]> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(SimError::InvalidValue {
            key: key.into(),
            msg: format!("expected three comma-separated numbers, got `{value}`"),
        });
    }
    Ok([
        parse_f64(key, parts[0])?,
        parse_f64(key, parts[1])?,
        parse_f64(key, parts[2])?,
    ])
}

impl ScenarioConfig {
    /// Parse a configuration file on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| SimError::ConfigSyntax {
                line: n + 1,
                msg: format!("expected `section.key = value`, got `{line}`"),
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Apply a `section.key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| SimError::ConfigSyntax {
                line: 0,
                msg: format!("override `{assignment}` is not `section.key=value`"),
            })?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (section, field) = key
            .split_once('.')
            .ok_or_else(|| SimError::UnknownKey(key.into()))?;
        let num = || parse_f64(key, value);
        match (section, field) {
            ("scenario", "mode") => {
                self.mode = value.parse().map_err(|msg| SimError::InvalidValue {
                    key: key.into(),
                    msg,
                })?
            }
            ("scenario", "duration") => self.duration = num()?,
            ("scenario", "dt") => self.dt = num()?,
            ("scenario", "log_rate") => self.log_rate = num()?,
            ("scenario", "te") => self.t_e = num()?,
            ("scenario", "initial_round") => {
                self.initial_round = value.parse().map_err(|_| SimError::InvalidValue {
                    key: key.into(),
                    msg: format!("expected `true` or `false`, got `{value}`"),
                })?
            }
            ("scenario", "q0") => self.q0 = parse_triple(key, value)?,
            ("references", module) => {
                let id: ModuleId = module
                    .parse()
                    .map_err(|_| SimError::UnknownKey(key.into()))?;
                self.references[id.index()] = num()?;
            }
            ("metrics", "settling_band_deg") => self.settling_band_deg = num()?,
            ("metrics", "energy") => {
                self.energy = match value {
                    "absolute" => EnergyMode::Absolute,
                    "signed" => EnergyMode::Signed,
                    _ => {
                        return Err(SimError::InvalidValue {
                            key: key.into(),
                            msg: format!("expected `absolute` or `signed`, got `{value}`"),
                        })
                    }
                }
            }
            ("body", "gravity") => self.body.gravity = num()?,
            (seg, field) if SEGMENT_NAMES.contains(&seg) => {
                let i = SEGMENT_NAMES
                    .iter()
                    .position(|s| *s == seg)
                    .expect("checked");
                let s = &mut self.body.segments[i];
                match field {
                    "mass" => s.mass = num()?,
                    "length" => s.length = num()?,
                    "com_offset" => s.com_offset = num()?,
                    "inertia" => s.inertia = num()?,
                    _ => return Err(SimError::UnknownKey(key.into())),
                }
            }
            (joint, field) if joint.parse::<ModuleId>().is_ok() => {
                let id: ModuleId = joint.parse().expect("checked");
                let j = &mut self.body.joints[id.index()];
                let slot = match field {
                    "kp" => &mut j.kp,
                    "kd" => &mut j.kd,
                    "ki" => &mut j.ki,
                    "passive_stiffness" => &mut j.passive_stiffness,
                    "passive_damping" => &mut j.passive_damping,
                    "g_servo" => &mut j.g_servo,
                    "g_g" => &mut j.g_g,
                    "lumped_delay" => &mut j.lumped_delay,
                    _ => return Err(SimError::UnknownKey(key.into())),
                };
                *slot = num()?;
            }
            _ => return Err(SimError::UnknownKey(key.into())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| {
            Err(SimError::InvalidValue {
                key: key.into(),
                msg: msg.into(),
            })
        };
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad("scenario.duration", "must be > 0");
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("scenario.dt", "must be > 0");
        }
        if !(self.log_rate.is_finite()
            && self.log_rate > 0.0
            && self.log_rate * self.dt <= 1.0 + 1e-12)
        {
            return bad("scenario.log_rate", "must be > 0 and at most 1/dt");
        }
        if !(self.t_e.is_finite() && self.t_e > self.dt) {
            return bad("scenario.te", "must be greater than dt");
        }
        if self
            .q0
            .iter()
            .any(|q| !q.is_finite() || q.abs() >= std::f64::consts::FRAC_PI_2)
        {
            return bad(
                "scenario.q0",
                "joint angles must be finite and within (-pi/2, pi/2)",
            );
        }
        if self.references.iter().any(|r| !r.is_finite()) {
            return bad("references", "must be finite");
        }
        if !(self.settling_band_deg.is_finite() && self.settling_band_deg >= 0.0) {
            return bad("metrics.settling_band_deg", "must be >= 0");
        }
        self.body.validate()
    }

    /// Control ticks between log samples.
    pub fn log_every(&self) -> usize {
        ((1.0 / (self.log_rate * self.dt)).round() as usize).max(1)
    }

    /// Number of control ticks in the run.
    pub fn total_ticks(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// Every key with its effective value, one `section.key = value` per line.
    /// Parsing the output reproduces `self` exactly.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("scenario.mode", self.mode.to_string());
        put("scenario.duration", self.duration.to_string());
        put("scenario.dt", self.dt.to_string());
        put("scenario.log_rate", self.log_rate.to_string());
        put("scenario.te", self.t_e.to_string());
        put("scenario.initial_round", self.initial_round.to_string());
        put(
            "scenario.q0",
            format!("{},{},{}", self.q0[0], self.q0[1], self.q0[2]),
        );
        for id in ModuleId::ALL {
            put(
                &format!("references.{id}"),
                self.references[id.index()].to_string(),
            );
        }
        put(
            "metrics.settling_band_deg",
            self.settling_band_deg.to_string(),
        );
        put(
            "metrics.energy",
            match self.energy {
                EnergyMode::Absolute => "absolute".into(),
                EnergyMode::Signed => "signed".into(),
            },
        );
        put("body.gravity", self.body.gravity.to_string());
        for (name, s) in SEGMENT_NAMES.iter().zip(&self.body.segments) {
            let vals = [s.mass, s.length, s.com_offset, s.inertia];
            for (k, v) in SEGMENT_KEYS.iter().zip(vals) {
                put(&format!("{name}.{k}"), v.to_string());
            }
        }
        for (id, j) in ModuleId::ALL.iter().zip(&self.body.joints) {
            let vals = [
                j.kp,
                j.kd,
                j.ki,
                j.passive_stiffness,
                j.passive_damping,
                j.g_servo,
                j.g_g,
                j.lumped_delay,
            ];
            for (k, v) in JOINT_KEYS.iter().zip(vals) {
                put(&format!("{id}.{k}"), v.to_string());
            }
        }
        out
    }
}
