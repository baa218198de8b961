use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::solver::{ContactLabel, ContactProblem, ContactSolution};

#[derive(Debug, Clone, Copy)]
pub struct OracleSettings {
    /// Residual tolerance, raised to the rounding level of the cone-gap rows
    /// when `rho` is tiny.
    pub tol: f64,
    pub max_iterations: usize,
    /// Tangential impulses of the hard solution are scaled by `1 - shrink`
    /// before the first Newton step so the cone-gap denominator is positive.
    pub shrink: f64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iterations: 100,
            shrink: 1e-3,
        }
    }
}

/// Solution of the relaxed contact problem in which every non-open contact
/// satisfies `v_n = 0`, `‖v_t‖ (mu^2 lambda_n^2 - ‖lambda_t‖^2) = rho` and
/// `lambda_t ∥ v_t`.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub lambda: DVector<f64>,
    pub velocity: DVector<f64>,
    pub active: Vec<usize>,
    pub iterations: usize,
    pub residual: f64,
}

impl OracleSolution {
    /// View as a contact solution with every active contact labelled sliding,
    /// so smoothing directions follow the tangential velocity.
    pub fn as_contact_solution(&self, hard: &ContactSolution) -> ContactSolution {
        let n = hard.n_contacts();
        let mut labels = vec![ContactLabel::Open; n];
        let mut theta = vec![None; n];
        for &k in &self.active {
            labels[k] = ContactLabel::Sliding;
            let vt = self.velocity.fixed_rows::<2>(3 * k);
            theta[k] = Some(vt[1].atan2(vt[0]));
        }
        ContactSolution {
            lambda: self.lambda.clone(),
            velocity: self.velocity.clone(),
            labels,
            theta,
            contact_indices: hard.contact_indices.clone(),
            sweeps: self.iterations,
            max_change: self.residual,
        }
    }
}

struct Relaxed<'a> {
    problem: &'a ContactProblem,
    active: &'a [usize],
    rho: f64,
}

impl Relaxed<'_> {
    fn scatter(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut lambda = DVector::zeros(3 * self.problem.n_contacts());
        for (i, &k) in self.active.iter().enumerate() {
            lambda
                .fixed_rows_mut::<3>(3 * k)
                .copy_from(&x.fixed_rows::<3>(3 * i));
        }
        lambda
    }

    fn feasible(&self, x: &DVector<f64>) -> bool {
        let mu = self.problem.mu;
        (0..self.active.len()).all(|i| {
            let l = x.fixed_rows::<3>(3 * i);
            l[2] > 0.0 && mu * mu * l[2] * l[2] - l[0] * l[0] - l[1] * l[1] > 0.0
        })
    }

    fn velocity(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.problem.free_velocity + &self.problem.delassus * self.scatter(x)
    }

    fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        let mu = self.problem.mu;
        let v = self.velocity(x);
        let mut r = DVector::zeros(x.len());
        for (i, &k) in self.active.iter().enumerate() {
            let l = x.fixed_rows::<3>(3 * i);
            let vk = v.fixed_rows::<3>(3 * k);
            let den = mu * mu * l[2] * l[2] - l[0] * l[0] - l[1] * l[1];
            let vt = (vk[0] * vk[0] + vk[1] * vk[1]).sqrt();
            r[3 * i] = vk[2];
            r[3 * i + 1] = vt * den / self.rho - 1.0;
            r[3 * i + 2] = l[0] * vk[1] - l[1] * vk[0];
        }
        r
    }

    /// Rounding level of the cone-gap rows: the gap is a difference of terms
    /// of size `mu^2 lambda_n^2`, so at small `rho` it cannot be resolved to
    /// better than a few ulps of that.
    fn rounding_floor(&self, x: &DVector<f64>) -> f64 {
        let mu = self.problem.mu;
        let v = self.velocity(x);
        self.active
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let l = x.fixed_rows::<3>(3 * i);
                let vk = v.fixed_rows::<3>(3 * k);
                let vt = (vk[0] * vk[0] + vk[1] * vk[1]).sqrt();
                16.0 * f64::EPSILON * mu * mu * l[2] * l[2] * vt / self.rho
            })
            .fold(0.0, f64::max)
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mu = self.problem.mu;
        let v = self.velocity(x);
        let m = self.active.len();
        let d = &self.problem.delassus;
        let mut jac = DMatrix::zeros(3 * m, 3 * m);
        for (i, &k) in self.active.iter().enumerate() {
            let l = x.fixed_rows::<3>(3 * i);
            let vk = v.fixed_rows::<3>(3 * k);
            let den = mu * mu * l[2] * l[2] - l[0] * l[0] - l[1] * l[1];
            let vt = (vk[0] * vk[0] + vk[1] * vk[1]).sqrt();
            for (j, &kk) in self.active.iter().enumerate() {
                for c in 0..3 {
                    let col = 3 * j + c;
                    let dvx = d[(3 * k, 3 * kk + c)];
                    let dvy = d[(3 * k + 1, 3 * kk + c)];
                    let dvz = d[(3 * k + 2, 3 * kk + c)];
                    jac[(3 * i, col)] = dvz;
                    if vt > 0.0 {
                        jac[(3 * i + 1, col)] = (vk[0] * dvx + vk[1] * dvy) / vt * den / self.rho;
                    }
                    jac[(3 * i + 2, col)] = l[0] * dvy - l[1] * dvx;
                }
            }
            let dden = [-2.0 * l[0], -2.0 * l[1], 2.0 * mu * mu * l[2]];
            for c in 0..3 {
                jac[(3 * i + 1, 3 * i + c)] += vt * dden[c] / self.rho;
            }
            jac[(3 * i + 2, 3 * i)] += vk[1];
            jac[(3 * i + 2, 3 * i + 1)] -= vk[0];
        }
        jac
    }
}

/// Newton solve of the relaxed problem, warm-started from the hard solution.
pub fn smoothed_solution_oracle(
    problem: &ContactProblem,
    hard: &ContactSolution,
    rho: f64,
    settings: &OracleSettings,
) -> Result<OracleSolution> {
    let active: Vec<usize> = (0..hard.n_contacts())
        .filter(|&k| hard.labels[k] != ContactLabel::Open)
        .collect();
    let mut lambda0 = hard.lambda.clone();
    for &k in &active {
        lambda0[3 * k] *= 1.0 - settings.shrink;
        lambda0[3 * k + 1] *= 1.0 - settings.shrink;
    }
    smoothed_solution_oracle_from(problem, &active, &lambda0, rho, settings)
}

/// Newton solve of the relaxed problem over `active` contacts from an explicit
/// starting impulse (stacked over all contacts).
pub fn smoothed_solution_oracle_from(
    problem: &ContactProblem,
    active: &[usize],
    lambda0: &DVector<f64>,
    rho: f64,
    settings: &OracleSettings,
) -> Result<OracleSolution> {
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rho must be positive, got {rho}"
        )));
    }
    let sys = Relaxed {
        problem,
        active,
        rho,
    };
    let mut x = DVector::from_iterator(
        3 * active.len(),
        active
            .iter()
            .flat_map(|&k| (0..3).map(move |c| lambda0[3 * k + c])),
    );
    if !sys.feasible(&x) {
        return Err(Error::OracleFailure(
            "starting impulse is not strictly inside the friction cone".into(),
        ));
    }
    let mut r = sys.residual(&x);
    let mut norm = r.norm();
    let mut iterations = 0;
    while r.amax() > settings.tol.max(sys.rounding_floor(&x)) {
        if iterations >= settings.max_iterations {
            return Err(Error::OracleFailure(format!(
                "no convergence after {iterations} Newton iterations (residual {:.3e})",
                r.amax()
            )));
        }
        iterations += 1;
        let jac = sys.jacobian(&x);
        let step = jac.lu().solve(&(-&r)).ok_or_else(|| {
            Error::OracleFailure(format!("singular Newton system at iteration {iterations}"))
        })?;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &x + &step * alpha;
            if sys.feasible(&trial) {
                let rt = sys.residual(&trial);
                let nt = rt.norm();
                if nt < (1.0 - 1e-4 * alpha) * norm {
                    x = trial;
                    r = rt;
                    norm = nt;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::OracleFailure(format!(
                "line search stalled at residual {:.3e}",
                r.amax()
            )));
        }
    }
    let lambda = sys.scatter(&x);
    let velocity = sys.velocity(&x);
    Ok(OracleSolution {
        lambda,
        velocity,
        active: active.to_vec(),
        iterations,
        residual: r.amax(),
    })
}
