use nalgebra::{DMatrix, DVector, Matrix2x3, Vector2, Vector3};

use super::{solve_checked, GradientDiagnostics, GradientMethod, ImpulseGradient};
use crate::error::{Error, Result};
use crate::solver::{ContactLabel, ContactProblem, ContactSolution};

/// Relative floor of the cone-gap denominator, as a fraction of `(mu lambda_n)^2`.
pub const DEFAULT_EPS_DEN: f64 = 1e-6;

/// Smoothing terms for every non-open contact (in solution order; open
/// contacts carry `None`).
#[derive(Debug, Clone)]
pub struct SmoothedGradientTerms {
    pub rho_t: f64,
    pub eps_den: f64,
    /// Unit tangential direction per contact, `None` when undefined.
    pub theta: Vec<Option<Vector2<f64>>>,
    pub rho_hat: Vec<f64>,
    /// 3x3 block per contact; only the two tangential rows are nonzero.
    pub gamma_blocks: Vec<nalgebra::Matrix3<f64>>,
    /// Stacked 3-vectors, zero in the normal component.
    pub gamma_vec: DVector<f64>,
    pub clamped: usize,
}

impl SmoothedGradientTerms {
    /// Block-diagonal `Gamma` over all contacts.
    pub fn gamma_matrix(&self) -> DMatrix<f64> {
        let n = self.gamma_blocks.len();
        let mut g = DMatrix::zeros(3 * n, 3 * n);
        for (k, b) in self.gamma_blocks.iter().enumerate() {
            g.fixed_view_mut::<3, 3>(3 * k, 3 * k).copy_from(b);
        }
        g
    }
}

/// Direction of the tangential velocity; at clamping contacts the direction
/// opposite the tangential impulse.
fn tangential_direction(
    label: ContactLabel,
    lambda: &Vector3<f64>,
    v: &Vector3<f64>,
) -> Option<Vector2<f64>> {
    let vt = v.xy();
    let lt = lambda.xy();
    match label {
        ContactLabel::Open => None,
        ContactLabel::Sliding if vt.norm() > 0.0 => Some(vt / vt.norm()),
        _ if lt.norm() > 0.0 => Some(-lt / lt.norm()),
        _ => None,
    }
}

pub fn smoothed_terms(
    problem: &ContactProblem,
    solution: &ContactSolution,
    rho_t: f64,
    eps_den: f64,
) -> SmoothedGradientTerms {
    let mu = problem.mu;
    let n = solution.n_contacts();
    let mut terms = SmoothedGradientTerms {
        rho_t,
        eps_den,
        theta: Vec::with_capacity(n),
        rho_hat: Vec::with_capacity(n),
        gamma_blocks: Vec::with_capacity(n),
        gamma_vec: DVector::zeros(3 * n),
        clamped: 0,
    };
    for k in 0..n {
        let lambda = solution.lambda_k(k);
        let v = solution.velocity_k(k);
        let theta = tangential_direction(solution.labels[k], &lambda, &v);
        let mut block = nalgebra::Matrix3::zeros();
        let mut rho_hat = 0.0;
        if let Some(th) = theta {
            let ln = lambda.z;
            let mut den = mu * mu * ln * ln - lambda.xy().norm_squared();
            let floor = eps_den * (mu * ln).powi(2);
            if den < floor {
                den = floor;
                terms.clamped += 1;
            }
            if den > 0.0 {
                rho_hat = rho_t / (den * den);
                let row =
                    nalgebra::RowVector3::new(-2.0 * lambda.x, -2.0 * lambda.y, 2.0 * mu * mu * ln);
                let top: Matrix2x3<f64> = th * row * rho_hat;
                block.fixed_view_mut::<2, 3>(0, 0).copy_from(&top);
                let g = th * (rho_hat * 2.0 * mu * ln * ln);
                terms.gamma_vec[3 * k] = g.x;
                terms.gamma_vec[3 * k + 1] = g.y;
            }
        }
        terms.theta.push(theta);
        terms.rho_hat.push(rho_hat);
        terms.gamma_blocks.push(block);
    }
    terms
}

/// Smoothed `d lambda / d mu`: solves `(A + Gamma) dl = -(dA lambda + db + gamma)`
/// over all non-open contacts with the full Delassus matrix (which does not
/// depend on mu, so `dA = 0` and `db = 0`).
///
/// Each contact's tangential rows are rotated into the (Theta, Theta-perp)
/// basis and the Theta row is rescaled by `1 / max(1, rho_hat)`. This is an
/// invertible row operation, so the solution is unchanged, but it keeps the
/// system well conditioned when the denominator sits at its floor.
pub fn smoothed_impulse_gradient(
    problem: &ContactProblem,
    solution: &ContactSolution,
    rho_t: f64,
    eps_den: f64,
) -> Result<ImpulseGradient> {
    if !(rho_t > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rho_t must be positive, got {rho_t}"
        )));
    }
    let n_c = solution.n_contacts();
    let mut grad = ImpulseGradient::zeros(n_c, GradientMethod::Smoothed);
    let active: Vec<usize> = (0..n_c)
        .filter(|&k| solution.labels[k] != ContactLabel::Open)
        .collect();
    if active.is_empty() {
        return Ok(grad);
    }
    let terms = smoothed_terms(problem, solution, rho_t, eps_den);
    if active.iter().all(|&k| terms.theta[k].is_none()) {
        grad.diagnostics.clamped_denominators = terms.clamped;
        return Ok(grad);
    }
    let m = active.len();
    let mut sys = DMatrix::zeros(3 * m, 3 * m);
    let mut rhs = DVector::zeros(3 * m);
    for (ri, &k) in active.iter().enumerate() {
        for (ci, &j) in active.iter().enumerate() {
            let mut block = problem.block(k, j);
            if k == j {
                block += terms.gamma_blocks[k];
            }
            sys.fixed_view_mut::<3, 3>(3 * ri, 3 * ci).copy_from(&block);
        }
        for c in 0..3 {
            rhs[3 * ri + c] = -terms.gamma_vec[3 * k + c];
        }
    }
    for (ri, &k) in active.iter().enumerate() {
        if let Some(th) = terms.theta[k] {
            let scale = 1.0 / terms.rho_hat[k].max(1.0);
            let r0 = 3 * ri;
            let along = (sys.row(r0) * th.x + sys.row(r0 + 1) * th.y) * scale;
            let across = sys.row(r0) * (-th.y) + sys.row(r0 + 1) * th.x;
            sys.row_mut(r0).copy_from(&along);
            sys.row_mut(r0 + 1).copy_from(&across);
            let (a, b) = (rhs[r0], rhs[r0 + 1]);
            rhs[r0] = (a * th.x + b * th.y) * scale;
            rhs[r0 + 1] = -a * th.y + b * th.x;
        }
    }
    let (dl, cond) = solve_checked(&sys, &rhs, "smoothed gradient system")?;
    for (ri, &k) in active.iter().enumerate() {
        for c in 0..3 {
            grad.dlambda_dmu[3 * k + c] = dl[3 * ri + c];
        }
    }
    grad.diagnostics = GradientDiagnostics {
        condition_number: cond,
        clamped_denominators: terms.clamped,
    };
    Ok(grad)
}
