#![allow(dead_code)]

use dec_core::dynamics::{Mat3, Vec3};
use dec_core::BodyModel;

// Independent forward kinematics: CoM position of each segment and its
// velocity, built joint by joint from the ankle up.
pub fn segment_kinematics(
    model: &BodyModel,
    q: &Vec3,
    qdot: &Vec3,
) -> Vec<([f64; 2], [f64; 2], f64)> {
    let mut base = [0.0, 0.0];
    let mut base_v = [0.0, 0.0];
    let mut phi = 0.0;
    let mut phidot = 0.0;
    let mut out = Vec::new();
    for (i, seg) in model.segments.iter().enumerate() {
        phi += q[i];
        phidot += qdot[i];
        let (s, c) = phi.sin_cos();
        let p = [base[0] + seg.com_offset * s, base[1] + seg.com_offset * c];
        let v = [
            base_v[0] + seg.com_offset * c * phidot,
            base_v[1] - seg.com_offset * s * phidot,
        ];
        out.push((p, v, phidot));
        base = [base[0] + seg.length * s, base[1] + seg.length * c];
        base_v = [
            base_v[0] + seg.length * c * phidot,
            base_v[1] - seg.length * s * phidot,
        ];
    }
    out
}

pub fn kinetic(model: &BodyModel, q: &Vec3, qdot: &Vec3) -> f64 {
    segment_kinematics(model, q, qdot)
        .iter()
        .zip(&model.segments)
        .map(|((_, v, w), seg)| {
            0.5 * seg.mass * (v[0] * v[0] + v[1] * v[1]) + 0.5 * seg.inertia * w * w
        })
        .sum()
}

// Zero at upright.
pub fn potential(model: &BodyModel, q: &Vec3) -> f64 {
    let up: f64 = segment_kinematics(model, &Vec3::zeros(), &Vec3::zeros())
        .iter()
        .zip(&model.segments)
        .map(|((p, _, _), seg)| seg.mass * p[1])
        .sum();
    let now: f64 = segment_kinematics(model, q, &Vec3::zeros())
        .iter()
        .zip(&model.segments)
        .map(|((p, _, _), seg)| seg.mass * p[1])
        .sum();
    model.gravity * (now - up)
}

// Mass matrix by polarisation of the kinetic energy.
pub fn mass_oracle(model: &BodyModel, q: &Vec3) -> Mat3 {
    let e = |i: usize| {
        let mut v = Vec3::zeros();
        v[i] = 1.0;
        v
    };
    Mat3::from_fn(|i, j| {
        if i == j {
            2.0 * kinetic(model, q, &e(i))
        } else {
            kinetic(model, q, &(e(i) + e(j))) - kinetic(model, q, &e(i)) - kinetic(model, q, &e(j))
        }
    })
}

// Coriolis/centrifugal term from the Lagrangian: Mdot qdot - dT/dq.
pub fn bias_oracle(model: &BodyModel, q: &Vec3, qdot: &Vec3) -> Vec3 {
    let h = 1e-6;
    let mut mdot = Mat3::zeros();
    let mut dtdq = Vec3::zeros();
    for k in 0..3 {
        let mut qp = *q;
        let mut qm = *q;
        qp[k] += h;
        qm[k] -= h;
        mdot += (mass_oracle(model, &qp) - mass_oracle(model, &qm)) * (qdot[k] / (2.0 * h));
        dtdq[k] = (kinetic(model, &qp, qdot) - kinetic(model, &qm, qdot)) / (2.0 * h);
    }
    mdot * qdot - dtdq
}

// Joint positions (ankle, knee, hip) from the ankle up.
pub fn joint_positions(model: &BodyModel, q: &Vec3) -> [[f64; 2]; 3] {
    let mut out = [[0.0; 2]; 3];
    let mut phi = 0.0;
    for i in 1..3 {
        phi += q[i - 1];
        let l = model.segments[i - 1].length;
        out[i] = [out[i - 1][0] + l * phi.sin(), out[i - 1][1] + l * phi.cos()];
    }
    out
}

// Mass and CoM (relative to joint `j`) of every segment from `j` up.
pub fn supported_com(model: &BodyModel, q: &Vec3, j: usize) -> (f64, [f64; 2]) {
    let kin = segment_kinematics(model, q, &Vec3::zeros());
    let base = joint_positions(model, q)[j];
    let mut m = 0.0;
    let mut c = [0.0; 2];
    for (seg, k) in model.segments.iter().zip(&kin).skip(j) {
        m += seg.mass;
        c[0] += seg.mass * (k.0[0] - base[0]);
        c[1] += seg.mass * (k.0[1] - base[1]);
    }
    (m, [c[0] / m, c[1] / m])
}
