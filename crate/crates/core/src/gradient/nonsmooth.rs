use nalgebra::{DMatrix, DVector, Vector3};

use super::{solve_checked, GradientDiagnostics, GradientMethod, ImpulseGradient};
use crate::error::Result;
use crate::solver::{ContactLabel, ContactProblem, ContactSolution};

/// Reduced system `0 = A lambda_contact + b` over clamping impulses (3 rows
/// each) and sliding normal impulses (1 row each), with sliding impulses
/// parameterized as `E_k lambda_n` on the cone boundary.
#[derive(Debug, Clone)]
pub struct StackedContactSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub da_dmu: DMatrix<f64>,
    pub db_dmu: DVector<f64>,
    pub clamping: Vec<usize>,
    pub sliding: Vec<usize>,
    /// `[-mu cos(theta), -mu sin(theta), 1]` per sliding contact.
    pub e_dirs: Vec<Vector3<f64>>,
}

impl StackedContactSystem {
    pub fn dim(&self) -> usize {
        3 * self.clamping.len() + self.sliding.len()
    }
}

pub fn stacked_system(
    problem: &ContactProblem,
    solution: &ContactSolution,
) -> StackedContactSystem {
    let mu = problem.mu;
    let clamping: Vec<usize> = (0..solution.n_contacts())
        .filter(|&k| solution.labels[k] == ContactLabel::Clamping)
        .collect();
    let sliding: Vec<usize> = (0..solution.n_contacts())
        .filter(|&k| solution.labels[k] == ContactLabel::Sliding)
        .collect();
    let thetas: Vec<f64> = sliding
        .iter()
        .map(|&k| solution.theta[k].unwrap_or(0.0))
        .collect();
    let e_dirs: Vec<Vector3<f64>> = thetas
        .iter()
        .map(|t| Vector3::new(-mu * t.cos(), -mu * t.sin(), 1.0))
        .collect();
    let de_dirs: Vec<Vector3<f64>> = thetas
        .iter()
        .map(|t| Vector3::new(-t.cos(), -t.sin(), 0.0))
        .collect();

    let rows: Vec<usize> = clamping
        .iter()
        .flat_map(|&k| [3 * k, 3 * k + 1, 3 * k + 2])
        .chain(sliding.iter().map(|&k| 3 * k + 2))
        .collect();
    let n = rows.len();
    let d = &problem.delassus;
    let mut a = DMatrix::zeros(n, n);
    let mut da = DMatrix::zeros(n, n);
    for (ri, &r) in rows.iter().enumerate() {
        for (ci, &k) in clamping.iter().enumerate() {
            for c in 0..3 {
                a[(ri, 3 * ci + c)] = d[(r, 3 * k + c)];
            }
        }
        let off = 3 * clamping.len();
        for (si, &k) in sliding.iter().enumerate() {
            let drow = Vector3::new(d[(r, 3 * k)], d[(r, 3 * k + 1)], d[(r, 3 * k + 2)]);
            a[(ri, off + si)] = drow.dot(&e_dirs[si]);
            da[(ri, off + si)] = drow.dot(&de_dirs[si]);
        }
    }
    let b = DVector::from_iterator(n, rows.iter().map(|&r| problem.free_velocity[r]));
    StackedContactSystem {
        a,
        b,
        da_dmu: da,
        db_dmu: DVector::zeros(n),
        clamping,
        sliding,
        e_dirs,
    }
}

/// `d lambda / d mu` of the hard solution from the reduced system, with sliding
/// tangential rows expanded through `lambda_t = E^t lambda_n`. The sliding
/// direction is held fixed.
pub fn nonsmooth_impulse_gradient(
    problem: &ContactProblem,
    solution: &ContactSolution,
) -> Result<ImpulseGradient> {
    let n_c = solution.n_contacts();
    let mut grad = ImpulseGradient::zeros(n_c, GradientMethod::Nonsmooth);
    if !solution.any_sliding() {
        // the reduced system does not involve mu at all
        return Ok(grad);
    }
    let sys = stacked_system(problem, solution);
    let (x, cond) = solve_checked(&sys.a, &sys.b, "stacked contact system")?;
    let y = &sys.da_dmu * &x - &sys.db_dmu;
    let (dl, _) = solve_checked(&sys.a, &y, "stacked contact system")?;

    let mu = problem.mu;
    for (ci, &k) in sys.clamping.iter().enumerate() {
        for c in 0..3 {
            grad.dlambda_dmu[3 * k + c] = dl[3 * ci + c];
        }
    }
    let off = 3 * sys.clamping.len();
    for (si, &k) in sys.sliding.iter().enumerate() {
        let theta = solution.theta[k].unwrap_or(0.0);
        let (c, s) = (theta.cos(), theta.sin());
        let lambda_n = solution.lambda[3 * k + 2];
        let dln = dl[off + si];
        grad.dlambda_dmu[3 * k] = -c * lambda_n - mu * c * dln;
        grad.dlambda_dmu[3 * k + 1] = -s * lambda_n - mu * s * dln;
        grad.dlambda_dmu[3 * k + 2] = dln;
    }
    grad.diagnostics = GradientDiagnostics {
        condition_number: cond,
        clamped_denominators: 0,
    };
    Ok(grad)
}
