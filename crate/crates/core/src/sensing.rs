//! Local sensors of each module and the down-channel messages through which
//! the modules rebuild their controlled variables.
//!
//! The only inertial sensor sits in the trunk. Every module also reads its
//! own joint encoder. Starting at the hip, each module merges its own
//! segment with the aggregate it receives from above and passes the result
//! down, so the ankle ends up with the whole-body CoM without ever reading
//! another joint's encoder.

use serde::{Deserialize, Serialize};

use crate::dynamics::PlantState;
use crate::error::{Result, SimError};
use crate::model::{BodyModel, ModuleId, SegmentParams};

/// Orientation in space of the shank, thigh and trunk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct SegmentAngles {
    pub SS: f64,
    pub THS: f64,
    pub TS: f64,
}

impl SegmentAngles {
    pub fn from_plant(plant: &PlantState) -> Self {
        let q = &plant.q;
        Self {
            SS: q[0],
            THS: q[0] + q[1],
            TS: q[0] + q[1] + q[2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DownChannelMsg {
    pub sender: ModuleId,
    /// Mass of everything the sender supports, kg.
    pub aggregate_mass: f64,
    /// CoM of that mass relative to the sender's joint, world frame (x forward, y up), m.
    pub com_position: [f64; 2],
    /// Orientation in space of the link the sender actuates.
    pub link_orientation: f64,
    /// Orientation in space of the link below the sender's joint, i.e. the
    /// link actuated by the receiver.
    pub support_orientation: f64,
}

impl DownChannelMsg {
    pub fn is_finite(&self) -> bool {
        self.aggregate_mass.is_finite()
            && self.com_position.iter().all(|v| v.is_finite())
            && self.link_orientation.is_finite()
            && self.support_orientation.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlledVariables {
    /// BS for the ankle, KNEE for the knee, TS for the hip.
    pub alpha: f64,
    /// Sway of the supported CoM about the module's own joint.
    pub alpha_com: f64,
}

/// What a single module can sense on its own.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalReadings {
    pub encoder: f64,
    /// Only the hip module carries the trunk IMU.
    pub imu_trunk: Option<f64>,
}

/// Encoders are noiseless.
pub fn read_encoder(plant: &PlantState, joint: ModuleId) -> f64 {
    plant.q[joint.index()]
}

/// Trunk orientation in space (TS).
pub fn read_imu_trunk(plant: &PlantState) -> f64 {
    plant.q.iter().sum()
}

pub fn local_readings(plant: &PlantState, module: ModuleId) -> LocalReadings {
    LocalReadings {
        encoder: read_encoder(plant, module),
        imu_trunk: (module == ModuleId::Hip).then(|| read_imu_trunk(plant)),
    }
}

fn unit(angle: f64) -> [f64; 2] {
    [angle.sin(), angle.cos()]
}

/// Merge the module's own segment with the aggregate received from above.
pub fn aggregate_down_channel(
    module: ModuleId,
    local: &LocalReadings,
    segment: &SegmentParams,
    received: Option<&DownChannelMsg>,
) -> Result<DownChannelMsg> {
    let link_orientation = match (module.above(), received, local.imu_trunk) {
        (None, _, Some(ts)) => ts,
        (None, _, None) => return Err(SimError::MissingDownChannel(module)),
        (Some(_), Some(msg), _) => msg.support_orientation,
        (Some(_), None, _) => return Err(SimError::MissingDownChannel(module)),
    };
    let dir = unit(link_orientation);
    let own = [segment.com_offset * dir[0], segment.com_offset * dir[1]];
    let (mass, com) = match received.filter(|_| module.above().is_some()) {
        Some(up) => {
            let total = segment.mass + up.aggregate_mass;
            let top = [segment.length * dir[0], segment.length * dir[1]];
            let com = [
                (segment.mass * own[0] + up.aggregate_mass * (top[0] + up.com_position[0])) / total,
                (segment.mass * own[1] + up.aggregate_mass * (top[1] + up.com_position[1])) / total,
            ];
            (total, com)
        }
        None => (segment.mass, own),
    };
    Ok(DownChannelMsg {
        sender: module,
        aggregate_mass: mass,
        com_position: com,
        link_orientation,
        support_orientation: link_orientation - local.encoder,
    })
}

/// Build the message `module` sends down, using only its own sensors and
/// segment plus `received`.
pub fn build_down_channel(
    plant: &PlantState,
    model: &BodyModel,
    module: ModuleId,
    received: Option<&DownChannelMsg>,
) -> Result<DownChannelMsg> {
    aggregate_down_channel(
        module,
        &local_readings(plant, module),
        model.segment(module),
        received,
    )
}

/// Full top-down pass, indexed by module.
pub fn down_channel_pass(plant: &PlantState, model: &BodyModel) -> Result<[DownChannelMsg; 3]> {
    let hip = build_down_channel(plant, model, ModuleId::Hip, None)?;
    let knee = build_down_channel(plant, model, ModuleId::Knee, Some(&hip))?;
    let ankle = build_down_channel(plant, model, ModuleId::Ankle, Some(&knee))?;
    Ok([ankle, knee, hip])
}

/// Controlled variable and CoM sway for `module`, from its encoder and the
/// aggregate it built itself.
pub fn controlled_variables(
    module: ModuleId,
    local: &LocalReadings,
    own: &DownChannelMsg,
) -> ControlledVariables {
    let alpha_com = own.com_position[0].atan2(own.com_position[1]);
    let alpha = match module {
        ModuleId::Ankle => alpha_com,
        ModuleId::Knee => local.encoder,
        ModuleId::Hip => own.link_orientation,
    };
    ControlledVariables { alpha, alpha_com }
}

/// Whole-body CoM relative to the ankle, as reconstructed by the ankle module.
pub fn body_com(msgs: &[DownChannelMsg; 3]) -> [f64; 2] {
    msgs[ModuleId::Ankle.index()].com_position
}
