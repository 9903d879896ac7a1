//! Anthropometric and control parameters of the three-link body.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// One control module per actuated joint, ordered bottom-up.
///
/// The derived ordering (ankle < knee < hip) is also the default tie-break
/// order of the arbitration layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModuleId {
    Ankle,
    Knee,
    Hip,
}

impl ModuleId {
    pub const ALL: [ModuleId; 3] = [ModuleId::Ankle, ModuleId::Knee, ModuleId::Hip];

    /// Position in joint-space vectors (ankle = 0).
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ModuleId::Ankle => "ankle",
            ModuleId::Knee => "knee",
            ModuleId::Hip => "hip",
        }
    }

    /// The module directly above in the kinematic chain.
    pub fn above(self) -> Option<Self> {
        Self::from_index(self.index() + 1)
    }

    /// Name of the segment this joint actuates.
    pub fn segment_name(self) -> &'static str {
        SEGMENT_NAMES[self.index()]
    }
}

impl fmt::Display for ModuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModuleId {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ankle" => Ok(ModuleId::Ankle),
            "knee" => Ok(ModuleId::Knee),
            "hip" => Ok(ModuleId::Hip),
            other => Err(SimError::InvalidValue {
                key: "module".into(),
                msg: format!("unknown module `{other}`"),
            }),
        }
    }
}

pub const SEGMENT_NAMES: [&str; 3] = ["shank", "thigh", "trunk"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentParams {
    /// kg
    pub mass: f64,
    /// m
    pub length: f64,
    /// Distance from the lower joint to the segment CoM, m.
    pub com_offset: f64,
    /// Rotational inertia about the segment CoM, kg·m².
    pub inertia: f64,
}

impl SegmentParams {
    /// Slender uniform rod: `m L^2 / 12` about its centre.
    pub fn rod(mass: f64, length: f64, com_offset: f64) -> Self {
        Self {
            mass,
            length,
            com_offset,
            inertia: mass * length * length / 12.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointParams {
    /// N·m/rad
    pub kp: f64,
    /// N·m·s/rad
    pub kd: f64,
    /// N·m/(rad·s); applied to the servo error only.
    pub ki: f64,
    pub passive_stiffness: f64,
    pub passive_damping: f64,
    pub g_servo: f64,
    /// Gain on the gravity (CoM sway) channel.
    pub g_g: f64,
    /// Transport delay on the torque command, s.
    pub lumped_delay: f64,
}

/// Point-mass triple inverted pendulum: shank, thigh and trunk actuated at
/// ankle, knee and hip respectively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyModel {
    pub segments: [SegmentParams; 3],
    pub joints: [JointParams; 3],
    /// m/s²
    pub gravity: f64,
}

impl Default for BodyModel {
    fn default() -> Self {
        default_body_model()
    }
}

fn joint(kp: f64, kd: f64) -> JointParams {
    JointParams {
        kp,
        kd,
        ki: 0.0,
        passive_stiffness: 0.0,
        passive_damping: 0.0,
        g_servo: 1.0,
        g_g: 1.0,
        lumped_delay: 0.010,
    }
}

/// The reference body: 10/10/30 kg segments of 0.5 m with mid-length CoMs,
/// the tabulated servo gains and a 10 ms lumped delay on every joint.
///
/// Segments carry the rotational inertia of a uniform rod. With point masses
/// alone the thigh is so light that the 10 ms delay destabilizes the
/// knee/hip loop at the tabulated gains.
pub fn default_body_model() -> BodyModel {
    let seg = |mass| SegmentParams::rod(mass, 0.5, 0.25);
    BodyModel {
        segments: [seg(10.0), seg(10.0), seg(30.0)],
        joints: [
            joint(465.98, 116.49),
            joint(220.72, 16.55),
            joint(73.57, 18.394),
        ],
        gravity: 9.81,
    }
}

impl BodyModel {
    pub fn segment(&self, id: ModuleId) -> &SegmentParams {
        &self.segments[id.index()]
    }

    pub fn joint(&self, id: ModuleId) -> &JointParams {
        &self.joints[id.index()]
    }

    pub fn total_mass(&self) -> f64 {
        self.segments.iter().map(|s| s.mass).sum()
    }

    /// Mass supported by `joint`: its own segment and everything above.
    pub fn supported_mass(&self, joint: ModuleId) -> f64 {
        self.segments[joint.index()..].iter().map(|s| s.mass).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimError::InvalidModel(msg));
        if !(self.gravity.is_finite() && self.gravity >= 0.0) {
            return bad(format!(
                "gravity must be finite and >= 0, got {}",
                self.gravity
            ));
        }
        for (name, s) in SEGMENT_NAMES.iter().zip(&self.segments) {
            if !(s.mass.is_finite() && s.mass > 0.0) {
                return bad(format!("{name}.mass must be > 0"));
            }
            if !(s.length.is_finite() && s.length > 0.0) {
                return bad(format!("{name}.length must be > 0"));
            }
            if !(s.com_offset >= 0.0 && s.com_offset <= s.length) {
                return bad(format!("{name}.com_offset must lie in [0, length]"));
            }
            if !(s.inertia.is_finite() && s.inertia >= 0.0) {
                return bad(format!("{name}.inertia must be finite and >= 0"));
            }
        }
        for (id, j) in ModuleId::ALL.iter().zip(&self.joints) {
            let fields = [
                ("kp", j.kp),
                ("kd", j.kd),
                ("ki", j.ki),
                ("passive_stiffness", j.passive_stiffness),
                ("passive_damping", j.passive_damping),
                ("g_servo", j.g_servo),
                ("g_g", j.g_g),
                ("lumped_delay", j.lumped_delay),
            ];
            for (field, v) in fields {
                if !v.is_finite() || v < 0.0 {
                    return bad(format!("{id}.{field} must be finite and >= 0"));
                }
            }
            if j.kp <= 0.0 {
                return bad(format!("{id}.kp must be > 0"));
            }
        }
        Ok(())
    }
}

/// Height above `joint` of the CoM of everything it supports, upright pose.
pub fn upright_com_height(model: &BodyModel, joint: ModuleId) -> f64 {
    let mut base = 0.0;
    let mut moment = 0.0;
    for seg in &model.segments[joint.index()..] {
        moment += seg.mass * (base + seg.com_offset);
        base += seg.length;
    }
    moment / model.supported_mass(joint)
}

/// Same body with all rotational inertias removed.
pub fn point_mass_body_model() -> BodyModel {
    let mut m = default_body_model();
    for s in &mut m.segments {
        s.inertia = 0.0;
    }
    m
}

/// Gravitational stiffness `m·g·h` of the mass supported by `joint`.
pub fn mgh(model: &BodyModel, joint: ModuleId) -> f64 {
    model.supported_mass(joint) * model.gravity * upright_com_height(model, joint)
}
