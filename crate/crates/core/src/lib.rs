//! Sagittal-plane posture simulator for a triple inverted pendulum driven by
//! modular DEC (disturbance estimation and compensation) controllers.
//!
//! Each joint (ankle, knee, hip) owns one control module. In the original
//! formulation every module tracks its own task reference at all times. In
//! the distributed formulation the modules run a max-consensus protocol every
//! `T_e` seconds and only the module with the largest task error stays
//! enabled; the others hold the value their controlled variable had when
//! they were switched off.

pub mod config;
pub mod consensus;
pub mod dec_controller;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod netsim;
pub mod sensing;

pub use config::{EnergyMode, Mode, ScenarioConfig};
pub use consensus::{ConsensusRound, TieBreakRule};
pub use dec_controller::{DecModuleState, TorqueCommand};
pub use dynamics::{JointTorques, PlantState};
pub use error::{Result, SimError};
pub use harness::{run_scenario, MetricsReport, ScenarioRun, TrajectorySample};
pub use model::{BodyModel, JointParams, ModuleId, SegmentParams};
pub use netsim::{Bus, Envelope, Payload, Topology};
pub use sensing::{ControlledVariables, DownChannelMsg, SegmentAngles};
