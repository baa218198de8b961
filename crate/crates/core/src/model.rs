//! Articulated rigid-body models: a floating base with a tree of revolute
//! joints, ground contact points and the dynamics quantities consumed by the
//! contact solver.
//!
//! Conventions:
//! * `q = [p (3), quaternion w x y z (4), joint angles]`
//! * `upsilon = [base linear velocity (world), base angular velocity (world), joint rates]`
//! * Ground is the plane `z = 0`; contact Jacobian rows are world x, y (tangent)
//!   and z (normal).

use nalgebra::{DMatrix, DVector, Matrix3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so3::{exp_quat, skew};

pub const DEFAULT_ACTIVATION_THRESHOLD: f64 = 1e-4;
pub const BASE_DOF: usize = 6;
pub const STANDARD_GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Joint {
    Floating,
    /// Rotation about `axis`, expressed in the parent frame.
    Revolute {
        axis: Vector3<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct Body {
    pub name: String,
    pub mass: f64,
    /// Rotational inertia about the centre of mass, body frame.
    pub inertia: Matrix3<f64>,
    /// Centre of mass in the body frame.
    pub com: Vector3<f64>,
    pub parent: Option<usize>,
    pub joint: Joint,
    /// Joint location in the parent frame (ignored for the base).
    pub joint_origin: Vector3<f64>,
}

#[derive(Debug, Clone)]
pub struct ContactPoint {
    pub body: usize,
    /// Body-frame location.
    pub position: Vector3<f64>,
}

#[derive(Debug, Clone)]
pub struct RobotModel {
    pub bodies: Vec<Body>,
    /// Indices into the joint list (joint `j` belongs to body `j + 1`).
    pub actuated_joints: Vec<usize>,
    pub contact_points: Vec<ContactPoint>,
    pub gravity: Vector3<f64>,
    chains: Vec<Vec<usize>>,
}

impl RobotModel {
    pub fn new(
        bodies: Vec<Body>,
        actuated_joints: Vec<usize>,
        contact_points: Vec<ContactPoint>,
        gravity: Vector3<f64>,
    ) -> Result<Self> {
        if bodies.is_empty() {
            return Err(Error::InvalidModel("model has no bodies".into()));
        }
        for (i, body) in bodies.iter().enumerate() {
            if !(body.mass.is_finite() && body.mass > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "body '{}' has non-positive mass {}",
                    body.name, body.mass
                )));
            }
            let asym = (body.inertia - body.inertia.transpose()).abs().max();
            if asym > 1e-12 * body.inertia.abs().max().max(1.0) {
                return Err(Error::InvalidModel(format!(
                    "inertia of body '{}' is not symmetric",
                    body.name
                )));
            }
            if body.inertia.cholesky().is_none() {
                return Err(Error::InvalidModel(format!(
                    "inertia of body '{}' is not positive definite",
                    body.name
                )));
            }
            match (i, body.parent, body.joint) {
                (0, None, Joint::Floating) => {}
                (0, _, _) => {
                    return Err(Error::InvalidModel(
                        "body 0 must be a floating base without parent".into(),
                    ))
                }
                (_, Some(p), Joint::Revolute { axis }) if p < i => {
                    if axis.norm() < 1e-12 {
                        return Err(Error::InvalidModel(format!(
                            "joint of body '{}' has a zero axis",
                            body.name
                        )));
                    }
                }
                _ => {
                    return Err(Error::InvalidModel(format!(
                        "body '{}' must be a revolute child of an earlier body",
                        body.name
                    )))
                }
            }
        }
        let bodies: Vec<Body> = bodies
            .into_iter()
            .map(|mut b| {
                if let Joint::Revolute { axis } = b.joint {
                    b.joint = Joint::Revolute {
                        axis: axis.normalize(),
                    };
                }
                b
            })
            .collect();
        let n_joints = bodies.len() - 1;
        let mut seen = vec![false; n_joints];
        for &j in &actuated_joints {
            if j >= n_joints || seen[j] {
                return Err(Error::InvalidModel(format!("bad actuated joint index {j}")));
            }
            seen[j] = true;
        }
        if contact_points.is_empty() {
            return Err(Error::InvalidModel(
                "model needs at least one contact point".into(),
            ));
        }
        if let Some(cp) = contact_points.iter().find(|c| c.body >= bodies.len()) {
            return Err(Error::InvalidModel(format!(
                "contact point refers to missing body {}",
                cp.body
            )));
        }
        let chains = (0..bodies.len())
            .map(|b| {
                let mut chain = Vec::new();
                let mut cur = b;
                while cur != 0 {
                    chain.push(cur);
                    cur = bodies[cur].parent.unwrap_or(0);
                }
                chain.reverse();
                chain
            })
            .collect();
        Ok(Self {
            bodies,
            actuated_joints,
            contact_points,
            gravity,
            chains,
        })
    }

    pub fn n_joints(&self) -> usize {
        self.bodies.len() - 1
    }

    pub fn nq(&self) -> usize {
        7 + self.n_joints()
    }

    pub fn nv(&self) -> usize {
        BASE_DOF + self.n_joints()
    }

    pub fn n_actuated(&self) -> usize {
        self.actuated_joints.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.bodies.iter().map(|b| b.mass).sum()
    }

    /// Generalized input map `B` (nv x n_a).
    pub fn input_map(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.nv(), self.n_actuated());
        for (col, &j) in self.actuated_joints.iter().enumerate() {
            b[(BASE_DOF + j, col)] = 1.0;
        }
        b
    }

    /// Non-base bodies between the base and `body`, root first.
    pub fn chain(&self, body: usize) -> &[usize] {
        &self.chains[body]
    }

    pub fn kinematics(&self, state: &GeneralizedState) -> Kinematics {
        let n = self.bodies.len();
        let mut k = Kinematics {
            rotations: Vec::with_capacity(n),
            origins: Vec::with_capacity(n),
            axes: Vec::with_capacity(n),
            omegas: Vec::with_capacity(n),
            origin_velocities: Vec::with_capacity(n),
            alpha_bias: Vec::with_capacity(n),
            origin_accel_bias: Vec::with_capacity(n),
        };
        k.rotations
            .push(state.orientation().to_rotation_matrix().into_inner());
        k.origins.push(state.position());
        k.axes.push(Vector3::zeros());
        k.omegas.push(state.angular_velocity());
        k.origin_velocities.push(state.linear_velocity());
        k.alpha_bias.push(Vector3::zeros());
        k.origin_accel_bias.push(Vector3::zeros());
        for b in 1..n {
            let body = &self.bodies[b];
            let p = body.parent.unwrap_or(0);
            let axis_local = match body.joint {
                Joint::Revolute { axis } => axis,
                Joint::Floating => unreachable!("validated in RobotModel::new"),
            };
            let qj = state.q[7 + b - 1];
            let qdj = state.upsilon[BASE_DOF + b - 1];
            let rp = k.rotations[p];
            let rot = rp
                * nalgebra::Rotation3::from_axis_angle(
                    &nalgebra::Unit::new_unchecked(axis_local),
                    qj,
                )
                .into_inner();
            let axis = rp * axis_local;
            let origin = k.origins[p] + rp * body.joint_origin;
            let r = origin - k.origins[p];
            let wp = k.omegas[p];
            let omega = wp + axis * qdj;
            let alpha = k.alpha_bias[p] + wp.cross(&axis) * qdj;
            let vel = k.origin_velocities[p] + wp.cross(&r);
            let acc = k.origin_accel_bias[p] + k.alpha_bias[p].cross(&r) + wp.cross(&wp.cross(&r));
            k.rotations.push(rot);
            k.origins.push(origin);
            k.axes.push(axis);
            k.omegas.push(omega);
            k.origin_velocities.push(vel);
            k.alpha_bias.push(alpha);
            k.origin_accel_bias.push(acc);
        }
        k
    }

    /// World-frame linear Jacobian of the world point `x` rigidly attached to `body`.
    pub fn point_jacobian(&self, kin: &Kinematics, body: usize, x: &Vector3<f64>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(3, self.nv());
        jac.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&Matrix3::identity());
        jac.fixed_view_mut::<3, 3>(0, 3)
            .copy_from(&(-skew(&(x - kin.origins[0]))));
        for &j in self.chain(body) {
            let col = kin.axes[j].cross(&(x - kin.origins[j]));
            jac.fixed_view_mut::<3, 1>(0, BASE_DOF + j - 1)
                .copy_from(&col);
        }
        jac
    }

    pub fn angular_jacobian(&self, kin: &Kinematics, body: usize) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(3, self.nv());
        jac.fixed_view_mut::<3, 3>(0, 3)
            .copy_from(&Matrix3::identity());
        for &j in self.chain(body) {
            jac.fixed_view_mut::<3, 1>(0, BASE_DOF + j - 1)
                .copy_from(&kin.axes[j]);
        }
        jac
    }

    pub fn contact_position(&self, kin: &Kinematics, index: usize) -> Vector3<f64> {
        let cp = &self.contact_points[index];
        kin.origins[cp.body] + kin.rotations[cp.body] * cp.position
    }

    /// Contact point velocity from the forward velocity recursion.
    pub fn contact_velocity(&self, kin: &Kinematics, index: usize) -> Vector3<f64> {
        let cp = &self.contact_points[index];
        let r = kin.rotations[cp.body] * cp.position;
        kin.origin_velocities[cp.body] + kin.omegas[cp.body].cross(&r)
    }

    pub fn com_position(&self, kin: &Kinematics, body: usize) -> Vector3<f64> {
        kin.origins[body] + kin.rotations[body] * self.bodies[body].com
    }

    /// Kinetic energy summed body by body (independent of the mass matrix).
    pub fn kinetic_energy(&self, state: &GeneralizedState) -> f64 {
        let kin = self.kinematics(state);
        self.bodies
            .iter()
            .enumerate()
            .map(|(b, body)| {
                let rc = kin.rotations[b] * body.com;
                let v = kin.origin_velocities[b] + kin.omegas[b].cross(&rc);
                let iw = kin.rotations[b] * body.inertia * kin.rotations[b].transpose();
                let w = kin.omegas[b];
                0.5 * body.mass * v.norm_squared() + 0.5 * w.dot(&(iw * w))
            })
            .sum()
    }

    pub fn potential_energy(&self, state: &GeneralizedState) -> f64 {
        let kin = self.kinematics(state);
        (0..self.bodies.len())
            .map(|b| -self.bodies[b].mass * self.gravity.dot(&self.com_position(&kin, b)))
            .sum()
    }

    /// Mass matrix, bias force, input map and the contacts whose gap is below
    /// `activation_threshold`.
    pub fn evaluate(&self, state: &GeneralizedState, activation_threshold: f64) -> ModelEval {
        let nv = self.nv();
        let kin = self.kinematics(state);
        let mut mass = DMatrix::zeros(nv, nv);
        let mut bias = DVector::zeros(nv);
        for (b, body) in self.bodies.iter().enumerate() {
            let c = self.com_position(&kin, b);
            let jv = self.point_jacobian(&kin, b, &c);
            let jw = self.angular_jacobian(&kin, b);
            let rb = kin.rotations[b];
            let iw = rb * body.inertia * rb.transpose();
            let iw_d = DMatrix::from_column_slice(3, 3, iw.as_slice());
            mass += body.mass * jv.transpose() * &jv + jw.transpose() * &iw_d * &jw;

            let rc = c - kin.origins[b];
            let w = kin.omegas[b];
            let acc =
                kin.origin_accel_bias[b] + kin.alpha_bias[b].cross(&rc) + w.cross(&w.cross(&rc));
            let lin = body.mass * (acc - self.gravity);
            let ang = iw * kin.alpha_bias[b] + w.cross(&(iw * w));
            bias += jv.transpose() * DVector::from_column_slice(lin.as_slice())
                + jw.transpose() * DVector::from_column_slice(ang.as_slice());
        }
        // symmetrize against round-off
        let mass = 0.5 * (&mass + mass.transpose());
        let contacts = (0..self.contact_points.len())
            .filter_map(|i| {
                let x = self.contact_position(&kin, i);
                let gap = x.z;
                (gap < activation_threshold).then(|| ActiveContact {
                    index: i,
                    jacobian: self.point_jacobian(&kin, self.contact_points[i].body, &x),
                    gap,
                    position: x,
                })
            })
            .collect();
        ModelEval {
            mass_matrix: mass,
            bias,
            input_map: self.input_map(),
            contacts,
        }
    }

    pub fn validate_state(&self, state: &GeneralizedState) -> Result<()> {
        if state.q.len() != self.nq() || state.upsilon.len() != self.nv() {
            return Err(Error::InvalidState(format!(
                "expected nq={} nv={}, got {} and {}",
                self.nq(),
                self.nv(),
                state.q.len(),
                state.upsilon.len()
            )));
        }
        Ok(())
    }
}

/// World-frame kinematic quantities for every body at one state.
#[derive(Debug, Clone)]
pub struct Kinematics {
    pub rotations: Vec<Matrix3<f64>>,
    pub origins: Vec<Vector3<f64>>,
    /// Joint axis in world frame (zero for the base).
    pub axes: Vec<Vector3<f64>>,
    pub omegas: Vec<Vector3<f64>>,
    pub origin_velocities: Vec<Vector3<f64>>,
    /// Angular acceleration at zero generalized acceleration.
    pub alpha_bias: Vec<Vector3<f64>>,
    /// Origin acceleration at zero generalized acceleration.
    pub origin_accel_bias: Vec<Vector3<f64>>,
}

#[derive(Debug, Clone)]
pub struct ActiveContact {
    /// Index into `RobotModel::contact_points`.
    pub index: usize,
    /// 3 x nv, rows tangent-x, tangent-y, normal.
    pub jacobian: DMatrix<f64>,
    pub gap: f64,
    pub position: Vector3<f64>,
}

#[derive(Debug, Clone)]
pub struct ModelEval {
    pub mass_matrix: DMatrix<f64>,
    /// Coriolis, centrifugal and gravity terms (force units).
    pub bias: DVector<f64>,
    pub input_map: DMatrix<f64>,
    pub contacts: Vec<ActiveContact>,
}

impl ModelEval {
    pub fn nv(&self) -> usize {
        self.bias.len()
    }

    /// Jacobians of all active contacts stacked (3 n_c x nv).
    pub fn stacked_jacobian(&self) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(3 * self.contacts.len(), self.nv());
        for (k, c) in self.contacts.iter().enumerate() {
            j.rows_mut(3 * k, 3).copy_from(&c.jacobian);
        }
        j
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedState {
    pub q: DVector<f64>,
    pub upsilon: DVector<f64>,
    pub time: f64,
}

impl GeneralizedState {
    pub fn new(q: DVector<f64>, upsilon: DVector<f64>, time: f64) -> Result<Self> {
        if q.len() < 7 || q.len() != upsilon.len() + 1 {
            return Err(Error::InvalidState(format!(
                "dimension mismatch: nq={} nv={}",
                q.len(),
                upsilon.len()
            )));
        }
        let qn = q.rows(3, 4).norm();
        if (qn - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidState(format!(
                "orientation quaternion norm {qn} is not unit"
            )));
        }
        Ok(Self { q, upsilon, time })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        position: Vector3<f64>,
        orientation: UnitQuaternion<f64>,
        joints: &[f64],
        linear_velocity: Vector3<f64>,
        angular_velocity: Vector3<f64>,
        joint_velocities: &[f64],
        time: f64,
    ) -> Self {
        assert_eq!(joints.len(), joint_velocities.len());
        let n = joints.len();
        let mut q = DVector::zeros(7 + n);
        q.fixed_rows_mut::<3>(0).copy_from(&position);
        let quat = orientation.quaternion();
        q[3] = quat.w;
        q[4] = quat.i;
        q[5] = quat.j;
        q[6] = quat.k;
        q.rows_mut(7, n).copy_from_slice(joints);
        let mut v = DVector::zeros(6 + n);
        v.fixed_rows_mut::<3>(0).copy_from(&linear_velocity);
        v.fixed_rows_mut::<3>(3).copy_from(&angular_velocity);
        v.rows_mut(6, n).copy_from_slice(joint_velocities);
        Self {
            q,
            upsilon: v,
            time,
        }
    }

    pub fn n_joints(&self) -> usize {
        self.q.len() - 7
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.q[0], self.q[1], self.q[2])
    }

    pub fn orientation(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_quaternion(Quaternion::new(self.q[3], self.q[4], self.q[5], self.q[6]))
    }

    pub fn joint_positions(&self) -> DVector<f64> {
        self.q.rows(7, self.n_joints()).into_owned()
    }

    pub fn linear_velocity(&self) -> Vector3<f64> {
        Vector3::new(self.upsilon[0], self.upsilon[1], self.upsilon[2])
    }

    pub fn angular_velocity(&self) -> Vector3<f64> {
        Vector3::new(self.upsilon[3], self.upsilon[4], self.upsilon[5])
    }

    pub fn joint_velocities(&self) -> DVector<f64> {
        self.upsilon.rows(6, self.n_joints()).into_owned()
    }
}

/// Semi-implicit Euler position update with the new velocity. The base
/// orientation is advanced with the exponential map of the world-frame
/// angular velocity and renormalized.
pub fn integrate(
    state: &GeneralizedState,
    upsilon_next: &DVector<f64>,
    dt: f64,
) -> GeneralizedState {
    debug_assert!(dt > 0.0);
    let mut q = state.q.clone();
    for i in 0..3 {
        q[i] += upsilon_next[i] * dt;
    }
    let omega = Vector3::new(upsilon_next[3], upsilon_next[4], upsilon_next[5]);
    let rot = exp_quat(&(omega * dt)) * state.orientation();
    let rot = UnitQuaternion::new_normalize(rot.into_inner());
    let quat = rot.quaternion();
    q[3] = quat.w;
    q[4] = quat.i;
    q[5] = quat.j;
    q[6] = quat.k;
    let n = state.n_joints();
    for j in 0..n {
        q[7 + j] += upsilon_next[6 + j] * dt;
    }
    GeneralizedState {
        q,
        upsilon: upsilon_next.clone(),
        time: state.time + dt,
    }
}

/// Apply a tangent-space displacement `delta` (nv) to the configuration.
pub fn retract(state: &GeneralizedState, delta: &DVector<f64>) -> GeneralizedState {
    let mut s = integrate(state, delta, 1.0);
    s.upsilon = state.upsilon.clone();
    s.time = state.time;
    s
}

pub fn solid_box_inertia(mass: f64, half_extents: Vector3<f64>) -> Matrix3<f64> {
    let (a, b, c) = (
        2.0 * half_extents.x,
        2.0 * half_extents.y,
        2.0 * half_extents.z,
    );
    Matrix3::from_diagonal(&Vector3::new(
        mass * (b * b + c * c) / 12.0,
        mass * (a * a + c * c) / 12.0,
        mass * (a * a + b * b) / 12.0,
    ))
}

/// Free rigid box with contact points at its four bottom corners.
pub fn build_box_model(
    mass: f64,
    half_extents: Vector3<f64>,
    inertia: Matrix3<f64>,
) -> Result<RobotModel> {
    if !(mass > 0.0) {
        return Err(Error::InvalidModel(format!(
            "box mass must be positive, got {mass}"
        )));
    }
    if half_extents.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidModel(format!(
            "box half extents must be positive, got {half_extents:?}"
        )));
    }
    let base = Body {
        name: "box".into(),
        mass,
        inertia,
        com: Vector3::zeros(),
        parent: None,
        joint: Joint::Floating,
        joint_origin: Vector3::zeros(),
    };
    let (hx, hy, hz) = (half_extents.x, half_extents.y, half_extents.z);
    let contacts = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
        .iter()
        .map(|&(sx, sy)| ContactPoint {
            body: 0,
            position: Vector3::new(sx * hx, sy * hy, -hz),
        })
        .collect();
    RobotModel::new(
        vec![base],
        vec![],
        contacts,
        Vector3::new(0.0, 0.0, -STANDARD_GRAVITY),
    )
}

/// Box resting flat on the ground.
pub fn box_resting_state(half_extents: Vector3<f64>) -> GeneralizedState {
    GeneralizedState::from_parts(
        Vector3::new(0.0, 0.0, half_extents.z),
        UnitQuaternion::identity(),
        &[],
        Vector3::zeros(),
        Vector3::zeros(),
        &[],
        0.0,
    )
}

/// Two-link planar leg under a floating base: hip and knee rotate about the
/// base y axis, single point foot at the shank tip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonopedParams {
    pub base_half_extents: Vector3<f64>,
    pub thigh_mass: f64,
    pub thigh_length: f64,
    pub shank_mass: f64,
    pub shank_length: f64,
    /// Hip location below the base centre of mass.
    pub hip_offset: f64,
    /// Nominal stance joint angles (hip, knee).
    pub nominal_hip: f64,
    pub nominal_knee: f64,
}

impl Default for MonopedParams {
    fn default() -> Self {
        Self {
            base_half_extents: Vector3::new(0.15, 0.1, 0.05),
            thigh_mass: 1.0,
            thigh_length: 0.25,
            shank_mass: 0.4,
            shank_length: 0.25,
            hip_offset: 0.05,
            nominal_hip: -0.5,
            nominal_knee: 1.0,
        }
    }
}

fn rod_inertia(mass: f64, length: f64) -> Matrix3<f64> {
    // thin rod along z with a small radius so the matrix stays definite
    let r = 0.02;
    let transverse = mass * (3.0 * r * r + length * length) / 12.0;
    Matrix3::from_diagonal(&Vector3::new(transverse, transverse, 0.5 * mass * r * r))
}

pub fn build_monoped_model(base_mass: f64, params: &MonopedParams) -> Result<RobotModel> {
    let positive = [
        ("base mass", base_mass),
        ("thigh mass", params.thigh_mass),
        ("thigh length", params.thigh_length),
        ("shank mass", params.shank_mass),
        ("shank length", params.shank_length),
    ];
    if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::InvalidModel(format!(
            "{name} must be positive, got {v}"
        )));
    }
    if params.base_half_extents.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidModel(
            "base half extents must be positive".into(),
        ));
    }
    let y = Vector3::y();
    let bodies = vec![
        Body {
            name: "base".into(),
            mass: base_mass,
            inertia: solid_box_inertia(base_mass, params.base_half_extents),
            com: Vector3::zeros(),
            parent: None,
            joint: Joint::Floating,
            joint_origin: Vector3::zeros(),
        },
        Body {
            name: "thigh".into(),
            mass: params.thigh_mass,
            inertia: rod_inertia(params.thigh_mass, params.thigh_length),
            com: Vector3::new(0.0, 0.0, -0.5 * params.thigh_length),
            parent: Some(0),
            joint: Joint::Revolute { axis: y },
            joint_origin: Vector3::new(0.0, 0.0, -params.hip_offset),
        },
        Body {
            name: "shank".into(),
            mass: params.shank_mass,
            inertia: rod_inertia(params.shank_mass, params.shank_length),
            com: Vector3::new(0.0, 0.0, -0.5 * params.shank_length),
            parent: Some(1),
            joint: Joint::Revolute { axis: y },
            joint_origin: Vector3::new(0.0, 0.0, -params.thigh_length),
        },
    ];
    let foot = ContactPoint {
        body: 2,
        position: Vector3::new(0.0, 0.0, -params.shank_length),
    };
    RobotModel::new(
        bodies,
        vec![0, 1],
        vec![foot],
        Vector3::new(0.0, 0.0, -STANDARD_GRAVITY),
    )
}

/// Upright base with the nominal joint angles and the foot exactly on the ground.
pub fn monoped_nominal_state(params: &MonopedParams) -> GeneralizedState {
    let (h, k) = (params.nominal_hip, params.nominal_knee);
    let foot_drop = params.thigh_length * h.cos() + params.shank_length * (h + k).cos();
    GeneralizedState::from_parts(
        Vector3::new(0.0, 0.0, params.hip_offset + foot_drop),
        UnitQuaternion::identity(),
        &[h, k],
        Vector3::zeros(),
        Vector3::zeros(),
        &[0.0, 0.0],
        0.0,
    )
}
