//! Equations of motion of the planar triple pendulum on a fixed support, and
//! a fixed-step RK4 integrator. Each segment is a point mass at its CoM plus
//! an optional rotational inertia about that point.
//!
//! Joint angles are relative (ankle, knee, hip); `0` is upright and positive
//! angles lean the distal segment forward. Segment angles in space are the
//! cumulative sums of the joint angles. The equations are written in space
//! angles and pulled back to joint coordinates through the constant
//! lower-triangular map `phi = T q`.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Result, SimError};
use crate::model::{BodyModel, ModuleId};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    /// Joint angles, rad.
    pub q: Vec3,
    /// Joint rates, rad/s.
    pub qdot: Vec3,
    /// Simulation time, s.
    pub t: f64,
}

impl PlantState {
    pub fn at_rest(q: Vec3) -> Self {
        Self {
            q,
            qdot: Vec3::zeros(),
            t: 0.0,
        }
    }

    pub fn upright() -> Self {
        Self::at_rest(Vec3::zeros())
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qdot.iter()).all(|v| v.is_finite()) && self.t.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointTorques {
    pub tau: Vec3,
}

/// Segment angles in space (shank, thigh, trunk) from joint angles.
pub fn space_angles(q: &Vec3) -> Vec3 {
    Vec3::new(q[0], q[0] + q[1], q[0] + q[1] + q[2])
}

/// Constant coefficients of the chain.
///
/// `coupling[(i, j)] = sum_k m_k a_ki a_kj` (plus the segment's own
/// rotational inertia on the diagonal) and `gravity_arm[i] = sum_k m_k a_ki`,
/// where `a_ki` is the lever of mass `k` about the lower joint of segment `i`
/// (full length below the mass, CoM offset on its own segment, zero above).
struct ChainCoefficients {
    coupling: Mat3,
    gravity_arm: Vec3,
}

impl ChainCoefficients {
    fn new(model: &BodyModel) -> Self {
        let mut coupling = Mat3::zeros();
        let mut gravity_arm = Vec3::zeros();
        for (k, seg) in model.segments.iter().enumerate() {
            let lever = |i: usize| match i.cmp(&k) {
                std::cmp::Ordering::Less => model.segments[i].length,
                std::cmp::Ordering::Equal => seg.com_offset,
                std::cmp::Ordering::Greater => 0.0,
            };
            coupling[(k, k)] += seg.inertia;
            for i in 0..3 {
                gravity_arm[i] += seg.mass * lever(i);
                for j in 0..3 {
                    coupling[(i, j)] += seg.mass * lever(i) * lever(j);
                }
            }
        }
        Self {
            coupling,
            gravity_arm,
        }
    }
}

/// `T^T v`: generalized forces in space angles to joint coordinates.
fn pull_back(v: &Vec3) -> Vec3 {
    Vec3::new(v[0] + v[1] + v[2], v[1] + v[2], v[2])
}

/// `T^T A T` for symmetric `A`, mirrored so the result is exactly symmetric.
fn pull_back_matrix(a: &Mat3) -> Mat3 {
    let mut out = Mat3::zeros();
    for r in 0..3 {
        for c in r..3 {
            let mut s = 0.0;
            for i in r..3 {
                for j in c..3 {
                    s += a[(i, j)];
                }
            }
            out[(r, c)] = s;
            out[(c, r)] = s;
        }
    }
    out
}

pub fn mass_matrix(model: &BodyModel, q: &Vec3) -> Mat3 {
    let c = ChainCoefficients::new(model);
    mass_matrix_with(&c, q)
}

fn mass_matrix_with(c: &ChainCoefficients, q: &Vec3) -> Mat3 {
    let phi = space_angles(q);
    let m_space = Mat3::from_fn(|i, j| c.coupling[(i, j)] * (phi[i] - phi[j]).cos());
    pull_back_matrix(&m_space)
}

/// Torque gravity exerts on each joint. Positive lean gives positive torque
/// (upright is unstable).
pub fn gravity_torque(model: &BodyModel, q: &Vec3) -> Vec3 {
    let c = ChainCoefficients::new(model);
    gravity_torque_with(&c, model.gravity, q)
}

fn gravity_torque_with(c: &ChainCoefficients, g: f64, q: &Vec3) -> Vec3 {
    let phi = space_angles(q);
    let space = Vec3::from_fn(|i, _| g * c.gravity_arm[i] * phi[i].sin());
    pull_back(&space)
}

/// Coriolis and centrifugal terms; appears on the left-hand side of
/// `M(q) qdd + bias = gravity + passive + tau`.
pub fn bias_torque(model: &BodyModel, q: &Vec3, qdot: &Vec3) -> Vec3 {
    let c = ChainCoefficients::new(model);
    bias_torque_with(&c, q, qdot)
}

fn bias_torque_with(c: &ChainCoefficients, q: &Vec3, qdot: &Vec3) -> Vec3 {
    let phi = space_angles(q);
    let phidot = space_angles(qdot);
    let space = Vec3::from_fn(|i, _| {
        (0..3)
            .map(|j| c.coupling[(i, j)] * (phi[i] - phi[j]).sin() * phidot[j] * phidot[j])
            .sum()
    });
    pull_back(&space)
}

pub fn passive_torque(model: &BodyModel, q: &Vec3, qdot: &Vec3) -> Vec3 {
    Vec3::from_fn(|i, _| {
        let j = &model.joints[i];
        -j.passive_stiffness * q[i] - j.passive_damping * qdot[i]
    })
}

/// Gravitational potential energy, zero at upright.
pub fn potential_energy(model: &BodyModel, q: &Vec3) -> f64 {
    let c = ChainCoefficients::new(model);
    let phi = space_angles(q);
    (0..3)
        .map(|i| model.gravity * c.gravity_arm[i] * (phi[i].cos() - 1.0))
        .sum()
}

pub fn total_energy(model: &BodyModel, state: &PlantState) -> f64 {
    let m = mass_matrix(model, &state.q);
    0.5 * state.qdot.dot(&(m * state.qdot)) + potential_energy(model, &state.q)
}

/// Joint accelerations for the given state and applied torque.
pub fn forward_dynamics(model: &BodyModel, q: &Vec3, qdot: &Vec3, tau: &Vec3) -> Vec3 {
    let c = ChainCoefficients::new(model);
    accel_with(&c, model, q, qdot, tau)
}

fn accel_with(c: &ChainCoefficients, model: &BodyModel, q: &Vec3, qdot: &Vec3, tau: &Vec3) -> Vec3 {
    let m = mass_matrix_with(c, q);
    let rhs = tau + passive_torque(model, q, qdot) + gravity_torque_with(c, model.gravity, q)
        - bias_torque_with(c, q, qdot);
    m.cholesky()
        .expect("mass matrix of a chain with positive masses is positive definite")
        .solve(&rhs)
}

/// One classical RK4 step with the torque held constant over the step.
pub fn step(
    model: &BodyModel,
    state: &PlantState,
    tau: &JointTorques,
    dt: f64,
) -> Result<PlantState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(SimError::InvalidValue {
            key: "dt".into(),
            msg: format!("time step must be > 0, got {dt}"),
        });
    }
    let c = ChainCoefficients::new(model);
    let f = |q: &Vec3, v: &Vec3| accel_with(&c, model, q, v, &tau.tau);

    let (q0, v0) = (state.q, state.qdot);
    let h = dt;
    let k1q = v0;
    let k1v = f(&q0, &v0);
    let k2q = v0 + k1v * (h / 2.0);
    let k2v = f(&(q0 + k1q * (h / 2.0)), &k2q);
    let k3q = v0 + k2v * (h / 2.0);
    let k3v = f(&(q0 + k2q * (h / 2.0)), &k3q);
    let k4q = v0 + k3v * h;
    let k4v = f(&(q0 + k3q * h), &k4q);

    let q = q0 + (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (h / 6.0);
    let qdot = v0 + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
    let next = PlantState {
        q,
        qdot,
        t: state.t + dt,
    };
    check_bounds(&next)?;
    Ok(next)
}

fn check_bounds(state: &PlantState) -> Result<()> {
    for id in ModuleId::ALL {
        let angle = state.q[id.index()];
        if !angle.is_finite() || angle.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(SimError::Diverged {
                t: state.t,
                joint: id,
                angle,
            });
        }
    }
    if !state.qdot.iter().all(|v| v.is_finite()) {
        return Err(SimError::Diverged {
            t: state.t,
            joint: ModuleId::Ankle,
            angle: f64::NAN,
        });
    }
    Ok(())
}
