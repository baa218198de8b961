//! Hard contact solver: per-contact Gauss-Seidel over the Delassus system with
//! an exact single-contact case analysis (open, clamping, sliding).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    integrate, GeneralizedState, ModelEval, RobotModel, DEFAULT_ACTIVATION_THRESHOLD,
};

/// Bisection iterations on the sliding direction angle.
pub const SLIDING_BISECTION_ITERS: usize = 40;
/// Angular samples used to bracket the sliding direction.
const SLIDING_SCAN: usize = 72;
/// Relative margin separating strict cone interior (clamping) from the boundary.
pub const CLAMP_MARGIN: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContactLabel {
    Open,
    Clamping,
    Sliding,
}

/// Joint torques plus any known external generalized force (pushes, support
/// wrenches).
#[derive(Debug, Clone, PartialEq)]
pub struct Actuation {
    pub tau: DVector<f64>,
    pub external: DVector<f64>,
}

impl Actuation {
    pub fn zeros(model: &RobotModel) -> Self {
        Self {
            tau: DVector::zeros(model.n_actuated()),
            external: DVector::zeros(model.nv()),
        }
    }

    /// Joint torques with a world-frame force and torque applied at the base origin.
    pub fn with_base_wrench(
        model: &RobotModel,
        tau: DVector<f64>,
        force: Vector3<f64>,
        torque: Vector3<f64>,
    ) -> Self {
        let mut external = DVector::zeros(model.nv());
        external.fixed_rows_mut::<3>(0).copy_from(&force);
        external.fixed_rows_mut::<3>(3).copy_from(&torque);
        Self { tau, external }
    }

    /// Generalized force `B tau + f_ext`.
    pub fn generalized(&self, input_map: &DMatrix<f64>) -> DVector<f64> {
        input_map * &self.tau + &self.external
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Convergence threshold on the largest per-contact impulse change (N s).
    pub tol: f64,
    pub max_sweeps: usize,
    /// Contacts whose gap is below this (m) enter the contact problem.
    pub activation_threshold: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_sweeps: 200,
            activation_threshold: DEFAULT_ACTIVATION_THRESHOLD,
        }
    }
}

/// Velocity-level contact problem `v = sigma + D lambda` for the active contacts.
#[derive(Debug, Clone)]
pub struct ContactProblem {
    /// `J M^-1 J^T`, 3 n_c square.
    pub delassus: DMatrix<f64>,
    /// Contact velocity at zero impulse. Normal rows include `gap / dt` so the
    /// velocity constraint closes any remaining gap within the step.
    pub free_velocity: DVector<f64>,
    pub mu: f64,
    /// `(J_k M^-1 J_k^T)^-1` per contact.
    pub apparent_inertia: Vec<Matrix3<f64>>,
    /// Model contact point indices, in solve order.
    pub contact_indices: Vec<usize>,
    /// Generalized velocity at zero impulse.
    pub upsilon_free: DVector<f64>,
    /// `M^-1 J^T` (nv x 3 n_c).
    pub minv_jt: DMatrix<f64>,
}

impl ContactProblem {
    pub fn n_contacts(&self) -> usize {
        self.contact_indices.len()
    }

    pub fn block(&self, i: usize, j: usize) -> Matrix3<f64> {
        self.delassus.fixed_view::<3, 3>(3 * i, 3 * j).into_owned()
    }

    /// Free velocity of contact `k` including the other contacts' impulses.
    pub fn local_offset(&self, k: usize, lambda: &DVector<f64>) -> Vector3<f64> {
        let mut s: Vector3<f64> = self.free_velocity.fixed_rows::<3>(3 * k).into_owned();
        for j in 0..self.n_contacts() {
            if j != k {
                s += self.block(k, j) * lambda.fixed_rows::<3>(3 * j);
            }
        }
        s
    }

    /// Same problem with a different friction coefficient.
    pub fn with_mu(&self, mu: f64) -> Self {
        Self { mu, ..self.clone() }
    }
}

#[derive(Debug, Clone)]
pub struct ContactSolution {
    /// Stacked impulses (tangent-x, tangent-y, normal per contact), N s.
    pub lambda: DVector<f64>,
    /// Stacked post-step contact velocities (normal rows include the gap term).
    pub velocity: DVector<f64>,
    pub labels: Vec<ContactLabel>,
    /// Direction angle of the tangential velocity at sliding contacts.
    pub theta: Vec<Option<f64>>,
    pub contact_indices: Vec<usize>,
    pub sweeps: usize,
    pub max_change: f64,
}

impl ContactSolution {
    pub fn empty() -> Self {
        Self {
            lambda: DVector::zeros(0),
            velocity: DVector::zeros(0),
            labels: vec![],
            theta: vec![],
            contact_indices: vec![],
            sweeps: 0,
            max_change: 0.0,
        }
    }

    pub fn n_contacts(&self) -> usize {
        self.labels.len()
    }

    pub fn lambda_k(&self, k: usize) -> Vector3<f64> {
        self.lambda.fixed_rows::<3>(3 * k).into_owned()
    }

    pub fn velocity_k(&self, k: usize) -> Vector3<f64> {
        self.velocity.fixed_rows::<3>(3 * k).into_owned()
    }

    pub fn any_sliding(&self) -> bool {
        self.labels.contains(&ContactLabel::Sliding)
    }
}

/// Builds the contact problem at `lambda = 0`.
pub fn assemble_problem(
    eval: &ModelEval,
    state: &GeneralizedState,
    actuation: &Actuation,
    dt: f64,
    mu: f64,
) -> Result<ContactProblem> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    if !(mu >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mu must be nonnegative, got {mu}"
        )));
    }
    let chol = eval.mass_matrix.clone().cholesky().ok_or(Error::Singular {
        context: "mass matrix",
        condition: f64::INFINITY,
    })?;
    let momentum = (actuation.generalized(&eval.input_map) - &eval.bias) * dt
        + &eval.mass_matrix * &state.upsilon;
    let upsilon_free = chol.solve(&momentum);
    let j = eval.stacked_jacobian();
    let minv_jt = chol.solve(&j.transpose());
    let delassus = &j * &minv_jt;
    let delassus = 0.5 * (&delassus + delassus.transpose());
    let mut free_velocity = &j * &upsilon_free;
    for (k, c) in eval.contacts.iter().enumerate() {
        free_velocity[3 * k + 2] += c.gap / dt;
    }
    let n = eval.contacts.len();
    let mut apparent_inertia = Vec::with_capacity(n);
    for k in 0..n {
        let block: Matrix3<f64> = delassus.fixed_view::<3, 3>(3 * k, 3 * k).into_owned();
        let inv = block.try_inverse().ok_or(Error::Singular {
            context: "contact Delassus block",
            condition: f64::INFINITY,
        })?;
        apparent_inertia.push(inv);
    }
    Ok(ContactProblem {
        delassus,
        free_velocity,
        mu,
        apparent_inertia,
        contact_indices: eval.contacts.iter().map(|c| c.index).collect(),
        upsilon_free,
        minv_jt,
    })
}

/// Outcome of the exact single-contact solve.
#[derive(Debug, Clone, Copy)]
pub struct SingleContact {
    pub lambda: Vector3<f64>,
    pub label: ContactLabel,
}

/// Minimizer of `v^T D^-1 v` with `v = sigma + D lambda` over impulses with
/// `lambda_n >= 0`, `v_n >= 0`, complementarity and the friction cone.
pub fn solve_single_contact(d: &Matrix3<f64>, sigma: &Vector3<f64>, mu: f64) -> SingleContact {
    if sigma.z >= 0.0 {
        return SingleContact {
            lambda: Vector3::zeros(),
            label: ContactLabel::Open,
        };
    }
    if let Some(dinv) = d.try_inverse() {
        let lam = -(dinv * sigma);
        let tn = lam.xy().norm();
        if lam.z > 0.0 && tn < mu * lam.z * (1.0 - CLAMP_MARGIN) {
            return SingleContact {
                lambda: lam,
                label: ContactLabel::Clamping,
            };
        }
    }
    SingleContact {
        lambda: sliding_impulse(d, sigma, mu),
        label: ContactLabel::Sliding,
    }
}

struct Boundary<'a> {
    d: &'a Matrix3<f64>,
    sigma: &'a Vector3<f64>,
    mu: f64,
}

impl Boundary<'_> {
    fn dir(&self, phi: f64) -> Vector3<f64> {
        Vector3::new(self.mu * phi.cos(), self.mu * phi.sin(), 1.0)
    }

    /// Impulse on the cone boundary with tangential direction `phi` and zero
    /// normal velocity, or `None` if that ray never reaches `v_n = 0`.
    fn impulse(&self, phi: f64) -> Option<Vector3<f64>> {
        let e = self.dir(phi);
        let dn_e = self.d.row(2).dot(&e.transpose());
        if dn_e <= 0.0 {
            return None;
        }
        Some(e * (-self.sigma.z / dn_e))
    }

    fn objective(&self, phi: f64) -> f64 {
        match self.impulse(phi) {
            Some(l) => l.dot(&(self.d * l)) + 2.0 * l.dot(self.sigma),
            None => f64::INFINITY,
        }
    }

    fn derivative(&self, phi: f64) -> f64 {
        let e = self.dir(phi);
        let de = Vector3::new(-self.mu * phi.sin(), self.mu * phi.cos(), 0.0);
        let dn_e = self.d.row(2).dot(&e.transpose());
        let dn_de = self.d.row(2).dot(&de.transpose());
        let ln = -self.sigma.z / dn_e;
        let dln = self.sigma.z * dn_de / (dn_e * dn_e);
        let lam = e * ln;
        let v = self.sigma + self.d * lam;
        2.0 * v.dot(&(e * dln + de * ln))
    }
}

fn sliding_impulse(d: &Matrix3<f64>, sigma: &Vector3<f64>, mu: f64) -> Vector3<f64> {
    if mu == 0.0 {
        return Vector3::new(0.0, 0.0, -sigma.z / d[(2, 2)]);
    }
    let b = Boundary { d, sigma, mu };
    let step = 2.0 * PI / SLIDING_SCAN as f64;
    let (best, _) = (0..SLIDING_SCAN)
        .map(|i| {
            let phi = i as f64 * step;
            (phi, b.objective(phi))
        })
        .fold(
            (0.0, f64::INFINITY),
            |acc, x| if x.1 < acc.1 { x } else { acc },
        );
    let (mut lo, mut hi) = (best - step, best + step);
    let phi = if b.derivative(lo) < 0.0 && b.derivative(hi) > 0.0 {
        for _ in 0..SLIDING_BISECTION_ITERS {
            let mid = 0.5 * (lo + hi);
            if b.derivative(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    } else {
        golden_section(|p| b.objective(p), lo, hi, 2 * SLIDING_BISECTION_ITERS)
    };
    b.impulse(phi)
        .unwrap_or_else(|| Vector3::new(0.0, 0.0, -sigma.z / d[(2, 2)]))
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Projected Gauss-Seidel over contacts in ascending order until the largest
/// per-contact impulse change drops below `tol`.
pub fn solve_contacts(
    problem: &ContactProblem,
    tol: f64,
    max_sweeps: usize,
) -> Result<ContactSolution> {
    let n = problem.n_contacts();
    if n == 0 {
        return Ok(ContactSolution::empty());
    }
    let mu = problem.mu;
    let mut lambda = DVector::zeros(3 * n);
    let mut labels = vec![ContactLabel::Open; n];
    let mut changes = vec![0.0; n];
    let blocks: Vec<Matrix3<f64>> = (0..n).map(|k| problem.block(k, k)).collect();
    let mut sweeps = 0;
    let mut max_change = f64::INFINITY;
    while sweeps < max_sweeps {
        sweeps += 1;
        for k in 0..n {
            let sigma = problem.local_offset(k, &lambda);
            let single = solve_single_contact(&blocks[k], &sigma, mu);
            let old: Vector3<f64> = lambda.fixed_rows::<3>(3 * k).into_owned();
            changes[k] = (single.lambda - old).amax();
            lambda.fixed_rows_mut::<3>(3 * k).copy_from(&single.lambda);
            labels[k] = single.label;
        }
        max_change = changes.iter().cloned().fold(0.0, f64::max);
        if max_change < tol {
            break;
        }
    }
    if max_change >= tol {
        return Err(Error::NonConvergence {
            iterations: sweeps,
            max_change,
            residuals: changes,
        });
    }
    let velocity = &problem.free_velocity + &problem.delassus * &lambda;
    let theta = (0..n)
        .map(|k| {
            (labels[k] == ContactLabel::Sliding).then(|| {
                let vt = velocity.fixed_rows::<2>(3 * k);
                if vt.norm() > 0.0 {
                    vt[1].atan2(vt[0])
                } else {
                    // no tangential motion: point the slip direction against the impulse
                    let lt = lambda.fixed_rows::<2>(3 * k);
                    (-lt[1]).atan2(-lt[0])
                }
            })
        })
        .collect();
    Ok(ContactSolution {
        lambda,
        velocity,
        labels,
        theta,
        contact_indices: problem.contact_indices.clone(),
        sweeps,
        max_change,
    })
}

/// Objective `v^T M_k v` of the single-contact problem (M_k = apparent inertia).
pub fn single_contact_objective(
    d: &Matrix3<f64>,
    sigma: &Vector3<f64>,
    lambda: &Vector3<f64>,
) -> f64 {
    let v = sigma + d * lambda;
    match d.try_inverse() {
        Some(m) => v.dot(&(m * v)),
        None => f64::NAN,
    }
}

/// Largest complementarity residuals over all contacts:
/// `|min(lambda_n, v_n)|` and `|‖v_t‖ (mu^2 lambda_n^2 - ‖lambda_t‖^2)|`.
pub fn complementarity_residuals(
    problem: &ContactProblem,
    solution: &ContactSolution,
) -> (f64, f64) {
    let mut normal: f64 = 0.0;
    let mut tangential: f64 = 0.0;
    for k in 0..solution.n_contacts() {
        let l = solution.lambda_k(k);
        let v = solution.velocity_k(k);
        normal = normal.max(l.z.min(v.z).abs());
        let gap = problem.mu * problem.mu * l.z * l.z - l.xy().norm_squared();
        tangential = tangential.max((v.xy().norm() * gap).abs());
    }
    (normal, tangential)
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub state: GeneralizedState,
    pub solution: ContactSolution,
    pub eval: ModelEval,
    pub problem: ContactProblem,
}

/// One time step: evaluate, assemble, solve, velocity update, integrate.
pub fn step_dynamics(
    model: &RobotModel,
    state: &GeneralizedState,
    actuation: &Actuation,
    mu: f64,
    dt: f64,
    settings: &SolverSettings,
) -> Result<StepResult> {
    model.validate_state(state)?;
    let eval = model.evaluate(state, settings.activation_threshold);
    let problem = assemble_problem(&eval, state, actuation, dt, mu)?;
    let solution = solve_contacts(&problem, settings.tol, settings.max_sweeps)?;
    let upsilon_next = if solution.n_contacts() == 0 {
        problem.upsilon_free.clone()
    } else {
        &problem.upsilon_free + &problem.minv_jt * &solution.lambda
    };
    Ok(StepResult {
        state: integrate(state, &upsilon_next, dt),
        solution,
        eval,
        problem,
    })
}
