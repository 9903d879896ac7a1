//! A single DEC control module.
//!
//! The gravity channel (CoM sway about the joint) and the servo error share
//! one `Kp + Kd d/dt` stage whose proportional gain is the supported `mgh`,
//! so both signals are angle equivalents. The commanded torque then goes
//! through a pure transport delay. When the module is disabled its servo
//! tracks the value the controlled variable had at the moment of
//! deactivation instead of the task reference.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::model::{JointParams, ModuleId};
use crate::sensing::ControlledVariables;

/// Breakdown of the torque computed this tick, before the delay.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TorqueComponents {
    /// `-Kp * G_servo * eps`
    pub servo: f64,
    /// `-Kp * G_g * alpha_com`
    pub gravity: f64,
    /// `-Kd * du/dt` on the combined signal.
    pub derivative: f64,
    /// `-Ki * integral(G_servo * eps)`
    pub integral: f64,
    pub pre_delay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorqueCommand {
    /// Torque leaving the delay line, N·m.
    pub tau: f64,
    pub debug: TorqueComponents,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecModuleState {
    module: ModuleId,
    gains: JointParams,
    dt: f64,
    enabled: bool,
    alpha_ref: f64,
    alpha_ref_held: f64,
    integ: f64,
    delay_line: VecDeque<f64>,
    prev_u: Option<f64>,
}

fn delay_ticks(delay: f64, dt: f64) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(SimError::InvalidValue {
            key: "dt".into(),
            msg: format!("controller period must be > 0, got {dt}"),
        });
    }
    let n = (delay / dt).round();
    if (n * dt - delay).abs() > 1e-9 * dt.max(delay) {
        return Err(SimError::InvalidValue {
            key: "lumped_delay".into(),
            msg: format!("{delay} s is not a multiple of the controller period {dt} s"),
        });
    }
    Ok(n as usize)
}

impl DecModuleState {
    /// A fresh, enabled module with an all-zero delay line.
    pub fn new(module: ModuleId, gains: JointParams, alpha_ref: f64, dt: f64) -> Result<Self> {
        let n = delay_ticks(gains.lumped_delay, dt)?;
        Ok(Self {
            module,
            gains,
            dt,
            enabled: true,
            alpha_ref,
            alpha_ref_held: alpha_ref,
            integ: 0.0,
            delay_line: std::iter::repeat_n(0.0, n).collect(),
            prev_u: None,
        })
    }

    pub fn module(&self) -> ModuleId {
        self.module
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn alpha_ref(&self) -> f64 {
        self.alpha_ref
    }

    pub fn alpha_ref_held(&self) -> f64 {
        self.alpha_ref_held
    }

    pub fn integral(&self) -> f64 {
        self.integ
    }

    pub fn delay_len(&self) -> usize {
        self.delay_line.len()
    }

    pub fn set_alpha_ref(&mut self, alpha_ref: f64) {
        self.alpha_ref = alpha_ref;
    }

    /// Servo error: against the task reference when enabled, against the
    /// held reference otherwise.
    pub fn compute_error(&self, alpha: f64) -> f64 {
        if self.enabled {
            alpha - self.alpha_ref
        } else {
            alpha - self.alpha_ref_held
        }
    }

    /// Apply an enabling decision. Disabling latches `alpha_now` as the held
    /// reference; any transition clears the integrator. The switch is
    /// bumpless in the derivative channel.
    pub fn set_enabled(&mut self, enabled: bool, alpha_now: f64) {
        let before = if self.enabled {
            self.alpha_ref
        } else {
            self.alpha_ref_held
        };
        match (self.enabled, enabled) {
            (true, false) => {
                self.alpha_ref_held = alpha_now;
                self.integ = 0.0;
            }
            (false, true) => self.integ = 0.0,
            _ => {}
        }
        self.enabled = enabled;
        let after = if self.enabled {
            self.alpha_ref
        } else {
            self.alpha_ref_held
        };
        // re-express the derivative history against the new reference so the
        // reference step does not show up in du/dt
        if let Some(p) = self.prev_u.as_mut() {
            *p += self.gains.g_servo * (before - after);
        }
    }

    /// Need of this module to be enabled: absolute error against the task
    /// reference, whatever the current enabling state.
    pub fn module_weight(&self, meas: &ControlledVariables) -> f64 {
        (meas.alpha - self.alpha_ref).abs()
    }

    pub fn control_tick(&mut self, meas: &ControlledVariables, dt: f64) -> Result<TorqueCommand> {
        if (dt - self.dt).abs() > 1e-12 * self.dt {
            return Err(SimError::PeriodMismatch {
                expected: self.dt,
                got: dt,
            });
        }
        let g = &self.gains;
        let eps = self.compute_error(meas.alpha);
        let u = g.g_g * meas.alpha_com + g.g_servo * eps;
        let du = self.prev_u.map_or(0.0, |prev| (u - prev) / dt);
        self.prev_u = Some(u);
        self.integ += g.g_servo * eps * dt;

        let servo = -g.kp * g.g_servo * eps;
        let gravity = -g.kp * g.g_g * meas.alpha_com;
        let derivative = -g.kd * du;
        let integral = -g.ki * self.integ;
        let pre_delay = servo + gravity + derivative + integral;

        self.delay_line.push_back(pre_delay);
        let tau = self
            .delay_line
            .pop_front()
            .expect("delay line holds at least the new sample");
        Ok(TorqueCommand {
            tau,
            debug: TorqueComponents {
                servo,
                gravity,
                derivative,
                integral,
                pre_delay,
            },
        })
    }
}
