//! Derivatives of contact impulses (and the next state) with respect to the
//! friction coefficient.

mod nonsmooth;
mod oracle;
mod randomized;
mod smoothed;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::ContactProblem;

pub use nonsmooth::{nonsmooth_impulse_gradient, stacked_system, StackedContactSystem};
pub use oracle::{
    smoothed_solution_oracle, smoothed_solution_oracle_from, OracleSettings, OracleSolution,
};
pub use randomized::{
    first_order_estimate, randomized_gradient, zeroth_order_estimate, RandomizedEstimate,
    RandomizedOrder, RandomizedSettings,
};
pub use smoothed::{
    smoothed_impulse_gradient, smoothed_terms, SmoothedGradientTerms, DEFAULT_EPS_DEN,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientMethod {
    Nonsmooth,
    Smoothed,
    #[serde(rename = "rand0")]
    RandZeroth,
    #[serde(rename = "rand1")]
    RandFirst,
    #[serde(rename = "fd")]
    FiniteDiff,
}

impl GradientMethod {
    pub const ALL_IDENTIFIERS: [GradientMethod; 4] = [
        GradientMethod::Nonsmooth,
        GradientMethod::Smoothed,
        GradientMethod::RandZeroth,
        GradientMethod::RandFirst,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            GradientMethod::Nonsmooth => "Nonsmooth",
            GradientMethod::Smoothed => "Smoothed",
            GradientMethod::RandZeroth => "RandZeroth",
            GradientMethod::RandFirst => "RandFirst",
            GradientMethod::FiniteDiff => "FiniteDiff",
        }
    }

    pub fn cli_name(&self) -> &'static str {
        match self {
            GradientMethod::Nonsmooth => "nonsmooth",
            GradientMethod::Smoothed => "smoothed",
            GradientMethod::RandZeroth => "rand0",
            GradientMethod::RandFirst => "rand1",
            GradientMethod::FiniteDiff => "fd",
        }
    }
}

impl fmt::Display for GradientMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for GradientMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nonsmooth" => Ok(GradientMethod::Nonsmooth),
            "smoothed" => Ok(GradientMethod::Smoothed),
            "rand0" | "randzeroth" => Ok(GradientMethod::RandZeroth),
            "rand1" | "randfirst" => Ok(GradientMethod::RandFirst),
            "fd" | "finitediff" => Ok(GradientMethod::FiniteDiff),
            other => Err(Error::InvalidArgument(format!(
                "unknown gradient method '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradientDiagnostics {
    /// Condition number of the linear system that was solved (1 if none).
    pub condition_number: f64,
    /// Smoothing denominators raised to the floor.
    pub clamped_denominators: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseGradient {
    /// d lambda / d mu stacked like `ContactSolution::lambda` (N s per unit mu).
    pub dlambda_dmu: DVector<f64>,
    pub method: GradientMethod,
    pub diagnostics: GradientDiagnostics,
}

impl ImpulseGradient {
    pub fn zeros(n_contacts: usize, method: GradientMethod) -> Self {
        Self {
            dlambda_dmu: DVector::zeros(3 * n_contacts),
            method,
            diagnostics: GradientDiagnostics {
                condition_number: 1.0,
                clamped_denominators: 0,
            },
        }
    }

    /// Zero the rows of the given contacts (positions in solve order).
    pub fn mask_contacts(&mut self, excluded: &[usize]) {
        for &k in excluded {
            self.dlambda_dmu.fixed_rows_mut::<3>(3 * k).fill(0.0);
        }
    }
}

/// Derivative of the next state `[q_{i+1}; upsilon_{i+1}]`; the position part
/// is expressed in the configuration tangent space (nv rows).
#[derive(Debug, Clone, PartialEq)]
pub struct StateGradient {
    pub dq_dmu: DVector<f64>,
    pub dupsilon_dmu: DVector<f64>,
}

/// Chain rule through the velocity update and semi-implicit position update.
pub fn state_gradient(grad: &ImpulseGradient, problem: &ContactProblem, dt: f64) -> StateGradient {
    let nv = problem.upsilon_free.len();
    let dupsilon = if grad.dlambda_dmu.is_empty() {
        DVector::zeros(nv)
    } else {
        &problem.minv_jt * &grad.dlambda_dmu
    };
    StateGradient {
        dq_dmu: &dupsilon * dt,
        dupsilon_dmu: dupsilon,
    }
}

/// Central difference of a vector-valued function of mu.
pub fn central_difference<F>(mut f: F, mu: f64, h: f64) -> Result<DVector<f64>>
where
    F: FnMut(f64) -> Result<DVector<f64>>,
{
    let plus = f(mu + h)?;
    let minus = f(mu - h)?;
    Ok((plus - minus) / (2.0 * h))
}

/// LU solve with a singular-value condition estimate.
pub(crate) fn solve_checked(
    a: &DMatrix<f64>,
    rhs: &DVector<f64>,
    context: &'static str,
) -> Result<(DVector<f64>, f64)> {
    let sv = a.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !cond.is_finite() || cond > 1e14 {
        return Err(Error::Singular {
            context,
            condition: cond,
        });
    }
    let x = a.clone().lu().solve(rhs).ok_or(Error::Singular {
        context,
        condition: cond,
    })?;
    Ok((x, cond))
}

/// Small contact problems with known behaviour, used for gradient checks.
pub mod fixtures {
    use nalgebra::{DMatrix, DVector, Matrix3};

    use crate::solver::ContactProblem;

    /// Contact problem with an explicit Delassus matrix; generalized
    /// quantities are the contact-space ones.
    pub fn synthetic(
        delassus: DMatrix<f64>,
        free_velocity: DVector<f64>,
        mu: f64,
    ) -> ContactProblem {
        let n = delassus.nrows() / 3;
        let apparent_inertia = (0..n)
            .map(|k| {
                let b: Matrix3<f64> = delassus.fixed_view::<3, 3>(3 * k, 3 * k).into_owned();
                b.try_inverse().unwrap()
            })
            .collect();
        ContactProblem {
            minv_jt: delassus.clone(),
            upsilon_free: free_velocity.clone(),
            delassus,
            free_velocity,
            mu,
            apparent_inertia,
            contact_indices: (0..n).collect(),
        }
    }

    pub fn point_mass(m: f64, vx: f64, vy: f64, mu: f64) -> ContactProblem {
        synthetic(
            DMatrix::identity(3, 3) / m,
            DVector::from_vec(vec![vx, vy, -9.81 * 0.01]),
            mu,
        )
    }

    /// Two contacts on a rigid bar (mass `m`, inertia `i`, contacts at +-`l`
    /// along x) sliding along its own axis, which keeps the slip directions
    /// fixed. Sliding across the axis would leave the axial impulses
    /// indeterminate in the smoothed system.
    pub fn bar(m: f64, i: f64, l: f64, vx: f64, mu: f64) -> ContactProblem {
        // generalized coordinates: linear velocity (3), angular velocity (3)
        let mut j = DMatrix::zeros(6, 6);
        for (k, x) in [l, -l].iter().enumerate() {
            let r = nalgebra::Vector3::new(*x, 0.0, 0.0);
            let rx = crate::so3::skew(&r);
            for a in 0..3 {
                j[(3 * k + a, a)] = 1.0;
                for b in 0..3 {
                    j[(3 * k + a, 3 + b)] = -rx[(a, b)];
                }
            }
        }
        let mut minv = DMatrix::zeros(6, 6);
        for a in 0..3 {
            minv[(a, a)] = 1.0 / m;
            minv[(3 + a, 3 + a)] = 1.0 / i;
        }
        let d = &j * &minv * j.transpose();
        let mut sigma = DVector::zeros(6);
        for k in 0..2 {
            sigma[3 * k] = vx;
            sigma[3 * k + 2] = -9.81 * 0.01;
        }
        synthetic(d, sigma, mu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_roundtrip() {
        for m in GradientMethod::ALL_IDENTIFIERS {
            assert_eq!(m.cli_name().parse::<GradientMethod>().unwrap(), m);
        }
        assert!("bogus".parse::<GradientMethod>().is_err());
    }
}

#[cfg(test)]
mod gradient_tests {
    use super::fixtures::{bar, point_mass, synthetic};
    use super::*;
    use crate::solver::{solve_contacts, ContactLabel, ContactSolution};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn hard(problem: &ContactProblem) -> ContactSolution {
        solve_contacts(problem, 1e-13, 1000).unwrap()
    }

    fn fd_hard(problem: &ContactProblem, h: f64) -> DVector<f64> {
        central_difference(|m| Ok(hard(&problem.with_mu(m)).lambda), problem.mu, h).unwrap()
    }

    #[test]
    fn point_mass_sliding_matches_closed_form() {
        let (m, mu) = (1.0, 0.19);
        let p = point_mass(m, 1.0, 0.0, mu);
        let s = hard(&p);
        assert_eq!(s.labels[0], ContactLabel::Sliding);
        let g = nonsmooth_impulse_gradient(&p, &s).unwrap();
        assert_relative_eq!(g.dlambda_dmu[0], -m * 9.81 * 0.01, epsilon = 1e-12);
        assert!(g.dlambda_dmu[1].abs() < 1e-14);
        assert!(g.dlambda_dmu[2].abs() < 1e-14);
        let fd = fd_hard(&p, 1e-6);
        assert!((fd - &g.dlambda_dmu).amax() < 1e-7);
    }

    #[test]
    fn clamping_gives_exact_zero() {
        let p = point_mass(1.0, 0.01, 0.0, 0.8);
        let s = hard(&p);
        assert_eq!(s.labels[0], ContactLabel::Clamping);
        let g = nonsmooth_impulse_gradient(&p, &s).unwrap();
        assert_eq!(g.dlambda_dmu, DVector::zeros(3));
        assert!(fd_hard(&p, 1e-6).amax() < 1e-9);
    }

    #[test]
    fn smoothed_is_informative_where_nonsmooth_is_not() {
        let p = point_mass(1.0, 0.01, 0.0, 0.8);
        let s = hard(&p);
        let g = smoothed_impulse_gradient(&p, &s, 0.05, DEFAULT_EPS_DEN).unwrap();
        assert!(g.dlambda_dmu.norm() > 1e-6, "{}", g.dlambda_dmu);
    }

    #[test]
    fn open_contacts_have_zero_gradients() {
        let p = point_mass(1.0, 0.3, 0.0, 0.5);
        let mut p = p;
        p.free_velocity[2] = 0.1;
        let s = hard(&p);
        assert_eq!(s.labels[0], ContactLabel::Open);
        for g in [
            nonsmooth_impulse_gradient(&p, &s).unwrap(),
            smoothed_impulse_gradient(&p, &s, 0.05, DEFAULT_EPS_DEN).unwrap(),
        ] {
            assert_eq!(g.dlambda_dmu, DVector::zeros(3));
        }
    }

    #[test]
    fn coupled_bar_sliding_matches_finite_differences() {
        let p = bar(2.0, 0.05, 0.2, 0.8, 0.4);
        let s = hard(&p);
        assert!(s.labels.iter().all(|l| *l == ContactLabel::Sliding));
        let g = nonsmooth_impulse_gradient(&p, &s).unwrap();
        let fd = fd_hard(&p, 1e-6);
        assert!(
            (&fd - &g.dlambda_dmu).amax() < 1e-6 * fd.amax().max(1e-3),
            "{fd} vs {}",
            g.dlambda_dmu
        );
    }

    #[test]
    fn smoothed_matches_finite_differences_of_relaxed_solution() {
        let settings = OracleSettings::default();
        for p in [
            point_mass(20.0, 0.5, 0.0, 0.5),
            bar(40.0, 2.0, 0.2, 0.5, 0.5),
        ] {
            let s = hard(&p);
            let rho = 0.05;
            let oracle = smoothed_solution_oracle(&p, &s, rho, &settings).unwrap();
            let active: Vec<usize> = oracle.active.clone();
            let fd = central_difference(
                |m| {
                    smoothed_solution_oracle_from(
                        &p.with_mu(m),
                        &active,
                        &oracle.lambda,
                        rho,
                        &settings,
                    )
                    .map(|o| o.lambda)
                },
                p.mu,
                1e-6,
            )
            .unwrap();
            let at = oracle.as_contact_solution(&s);
            let g = smoothed_impulse_gradient(&p, &at, rho, DEFAULT_EPS_DEN).unwrap();
            assert_eq!(g.diagnostics.clamped_denominators, 0);
            assert!(
                (&fd - &g.dlambda_dmu).amax() < 1e-6 * fd.amax(),
                "{fd} vs {}",
                g.dlambda_dmu
            );
        }
    }

    #[test]
    fn relaxed_solution_approaches_hard_one() {
        let p = point_mass(20.0, 0.5, 0.0, 0.5);
        let s = hard(&p);
        let mut prev = f64::INFINITY;
        for rho in [1e-1, 1e-2, 1e-3, 1e-4] {
            let o = smoothed_solution_oracle(&p, &s, rho, &OracleSettings::default()).unwrap();
            let err = (&o.lambda - &s.lambda).amax();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn rejects_bad_rho() {
        let p = point_mass(1.0, 0.5, 0.0, 0.5);
        let s = hard(&p);
        assert!(smoothed_impulse_gradient(&p, &s, 0.0, DEFAULT_EPS_DEN).is_err());
        assert!(smoothed_solution_oracle(&p, &s, -1.0, &OracleSettings::default()).is_err());
    }

    #[test]
    fn randomized_first_order_of_constant_is_exact() {
        let settings = RandomizedSettings::default();
        let est =
            first_order_estimate(|_| Ok(DVector::from_element(2, 3.5)), 0.5, &settings).unwrap();
        assert_relative_eq!(est.gradient[0], 3.5, epsilon = 1e-14);
        assert_eq!(est.n_used, 50);
    }

    #[test]
    fn randomized_zeroth_order_on_linear_is_unbiased() {
        let settings = RandomizedSettings {
            n_samples: 20_000,
            ..Default::default()
        };
        let est = zeroth_order_estimate(|m| Ok(DVector::from_element(1, 2.0 * m)), 0.5, &settings)
            .unwrap();
        // standard error ~ 2 * 0.5 / sigma / sqrt(N) ~ 0.14
        assert!((est.gradient[0] - 2.0).abs() < 0.6, "{}", est.gradient[0]);
    }

    #[test]
    fn randomized_is_reproducible_and_counts_clipping() {
        let settings = RandomizedSettings {
            seed: 7,
            ..Default::default()
        };
        let f = |m: f64| Ok(DVector::from_element(1, m * m));
        let a = zeroth_order_estimate(f, 0.99, &settings).unwrap();
        let b = zeroth_order_estimate(f, 0.99, &settings).unwrap();
        assert_eq!(a.gradient, b.gradient);
        assert!(a.n_clipped > 0 && a.n_clipped < 50);
        let other = zeroth_order_estimate(
            f,
            0.99,
            &RandomizedSettings {
                seed: 8,
                ..settings
            },
        )
        .unwrap();
        assert_ne!(a.gradient, other.gradient);
    }

    #[test]
    fn randomized_impulse_gradient_on_sliding_point_mass() {
        let p = point_mass(1.0, 1.0, 0.0, 0.3);
        let g = randomized_gradient(
            &p,
            RandomizedOrder::First,
            &RandomizedSettings::default(),
            &crate::solver::SolverSettings::default(),
        )
        .unwrap();
        // the point mass slides for every sampled mu, so every sample is exact
        assert_relative_eq!(g.dlambda_dmu[0], -0.0981, epsilon = 1e-9);
        assert_eq!(g.method, GradientMethod::RandFirst);
    }

    #[test]
    fn state_gradient_is_linear_map_of_impulse_gradient() {
        let p = point_mass(2.0, 1.0, 0.0, 0.3);
        let s = hard(&p);
        let g = nonsmooth_impulse_gradient(&p, &s).unwrap();
        let sg = state_gradient(&g, &p, 0.01);
        assert_relative_eq!(sg.dupsilon_dmu[0], -0.0981, epsilon = 1e-12);
        assert_relative_eq!(sg.dq_dmu[0], -0.000981, epsilon = 1e-12);
    }

    #[test]
    fn masking_zeroes_rows() {
        let p = bar(2.0, 0.05, 0.2, 0.8, 0.4);
        let s = hard(&p);
        let mut g = nonsmooth_impulse_gradient(&p, &s).unwrap();
        g.mask_contacts(&[1]);
        assert_eq!(g.dlambda_dmu.fixed_rows::<3>(3).norm(), 0.0);
        assert!(g.dlambda_dmu.fixed_rows::<3>(0).norm() > 0.0);
    }

    #[test]
    fn gamma_matrix_is_block_diagonal_with_zero_normal_rows() {
        let p = bar(40.0, 2.0, 0.2, 0.5, 0.5);
        let s = hard(&p);
        let t = smoothed_terms(&p, &s, 0.05, DEFAULT_EPS_DEN);
        let g = t.gamma_matrix();
        assert_eq!(g.fixed_view::<3, 3>(0, 3).norm(), 0.0);
        assert_eq!(g.row(2).norm(), 0.0);
        assert_eq!(t.gamma_vec[2], 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        // Sliding point masses with arbitrary mass, slip velocity and mu.
        #[test]
        fn nonsmooth_matches_fd_on_random_sliding(
            m in 0.2f64..20.0,
            vx in -2.0f64..2.0,
            vy in -2.0f64..2.0,
            mu in 0.05f64..0.95,
        ) {
            let p = point_mass(m, vx, vy, mu);
            let s = hard(&p);
            prop_assume!(s.labels[0] == ContactLabel::Sliding);
            let vt = s.velocity_k(0).xy().norm();
            prop_assume!(vt > 1e-3);
            let g = nonsmooth_impulse_gradient(&p, &s).unwrap();
            let fd = fd_hard(&p, 1e-7);
            prop_assert!((&fd - &g.dlambda_dmu).amax() < 1e-5 * fd.amax().max(1e-6));
        }

        #[test]
        fn clamping_always_zero(m in 0.2f64..20.0, mu in 0.3f64..1.0, vx in -0.01f64..0.01) {
            let p = point_mass(m, vx, 0.0, mu);
            let s = hard(&p);
            prop_assert_eq!(s.labels[0], ContactLabel::Clamping);
            let g = nonsmooth_impulse_gradient(&p, &s).unwrap();
            prop_assert_eq!(g.dlambda_dmu, DVector::zeros(3));
        }
    }

    #[test]
    fn synthetic_fixture_is_consistent() {
        let p = synthetic(
            DMatrix::identity(3, 3),
            DVector::from_vec(vec![0.0, 0.0, -1.0]),
            0.5,
        );
        assert_eq!(p.n_contacts(), 1);
    }
}
