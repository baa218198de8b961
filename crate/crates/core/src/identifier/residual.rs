use nalgebra::{DVector, Vector3};

use super::buffer::BufferEntry;
use super::config::IdentifierConfig;
use crate::error::{Error, Result};
use crate::gradient::{
    central_difference, first_order_estimate, nonsmooth_impulse_gradient,
    smoothed_impulse_gradient, zeroth_order_estimate, GradientMethod, ImpulseGradient,
    RandomizedSettings,
};
use crate::model::RobotModel;
use crate::so3;
use crate::solver::{step_dynamics, StepResult};

/// Step used for the finite-difference Jacobian.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct ResidualEvaluation {
    /// Stacked weighted residuals, `2 nv` rows per pair.
    pub residual: DVector<f64>,
    pub jacobian: Option<DVector<f64>>,
    pub n_pairs: usize,
    /// Pairs whose forward step failed (zero rows).
    pub n_skipped: usize,
    /// Pairs whose impulse gradient failed (zero Jacobian rows).
    pub n_gradient_failures: usize,
}

impl ResidualEvaluation {
    /// Sum of squared weighted residuals.
    pub fn loss(&self) -> f64 {
        self.residual.norm_squared()
    }

    pub fn mean_loss(&self) -> f64 {
        self.loss() / self.n_pairs.max(1) as f64
    }
}

/// The Gauss-Newton objective over one buffer snapshot.
pub struct IdentificationProblem<'a> {
    pub model: &'a RobotModel,
    pub entries: &'a [BufferEntry],
    pub config: &'a IdentifierConfig,
}

fn pair_slipping(entry: &BufferEntry, threshold: f64) -> bool {
    (0..entry.n_contacts())
        .any(|k| entry.contact_flags[k] && entry.foot_velocities[k].xy().norm() > threshold)
}

impl<'a> IdentificationProblem<'a> {
    pub fn new(
        model: &'a RobotModel,
        entries: &'a [BufferEntry],
        config: &'a IdentifierConfig,
    ) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::Identification(format!(
                "need at least 2 buffer entries, got {}",
                entries.len()
            )));
        }
        Ok(Self {
            model,
            entries,
            config,
        })
    }

    pub fn n_pairs(&self) -> usize {
        self.entries.len() - 1
    }

    pub fn pair_dim(&self) -> usize {
        2 * self.model.nv()
    }

    fn predict(&self, i: usize, mu: f64) -> Result<StepResult> {
        let e = &self.entries[i];
        step_dynamics(
            self.model,
            &e.state(),
            &e.actuation(self.model),
            mu,
            self.config.dt_buffer,
            &self.config.solver_settings(),
        )
    }

    fn weights(&self, i: usize) -> DVector<f64> {
        let slipping = pair_slipping(&self.entries[i + 1], self.config.slip_threshold);
        self.config
            .weights()
            .sqrt_diagonal(self.model.n_joints(), slipping)
    }

    fn raw_residual(&self, step: &StepResult, meas: &BufferEntry) -> DVector<f64> {
        let nj = self.model.n_joints();
        let pred = &step.state;
        let mut r = DVector::zeros(self.pair_dim());
        r.fixed_rows_mut::<3>(0)
            .copy_from(&(pred.position() - meas.position));
        let rel = pred.orientation().to_rotation_matrix().transpose()
            * meas.rotation.to_rotation_matrix();
        r.fixed_rows_mut::<3>(3).copy_from(&so3::log(&rel));
        for j in 0..nj {
            r[6 + j] = pred.q[7 + j] - meas.q_jnt[j];
        }
        let o = 6 + nj;
        r.fixed_rows_mut::<3>(o)
            .copy_from(&(pred.linear_velocity() - meas.p_dot));
        r.fixed_rows_mut::<3>(o + 3)
            .copy_from(&(pred.angular_velocity() - meas.omega));
        for j in 0..nj {
            r[o + 6 + j] = pred.upsilon[6 + j] - meas.qdot_jnt[j];
        }
        r
    }

    /// Derivative of the unweighted pair residual through `d upsilon`.
    fn raw_jacobian(
        &self,
        step: &StepResult,
        raw: &DVector<f64>,
        dupsilon: &DVector<f64>,
    ) -> DVector<f64> {
        let nj = self.model.n_joints();
        let dt = self.config.dt_buffer;
        let mut d = DVector::zeros(self.pair_dim());
        d.fixed_rows_mut::<3>(0)
            .copy_from(&(dupsilon.fixed_rows::<3>(0) * dt));
        let omega = step.state.angular_velocity();
        let domega: Vector3<f64> = dupsilon.fixed_rows::<3>(3).into_owned();
        let r_rot: Vector3<f64> = raw.fixed_rows::<3>(3).into_owned();
        let rpred_t = step.state.orientation().to_rotation_matrix().transpose();
        let drot = -so3::left_jacobian_inverse(&r_rot)
            * rpred_t.matrix()
            * so3::left_jacobian(&(omega * dt))
            * (domega * dt);
        d.fixed_rows_mut::<3>(3).copy_from(&drot);
        for j in 0..nj {
            d[6 + j] = dupsilon[6 + j] * dt;
        }
        let o = 6 + nj;
        d.rows_mut(o, 6 + nj).copy_from(dupsilon);
        d
    }

    /// Contacts (positions in the step's solution) excluded from gradients.
    fn rejected_positions(&self, i: usize, step: &StepResult) -> Vec<usize> {
        let (a, b) = (&self.entries[i], &self.entries[i + 1]);
        step.solution
            .contact_indices
            .iter()
            .enumerate()
            .filter(|(_, &k)| a.rejected.get(k) == Some(&true) || b.rejected.get(k) == Some(&true))
            .map(|(pos, _)| pos)
            .collect()
    }

    fn impulse_gradient(
        &self,
        step: &StepResult,
        method: GradientMethod,
    ) -> Result<ImpulseGradient> {
        match method {
            GradientMethod::Nonsmooth => nonsmooth_impulse_gradient(&step.problem, &step.solution),
            GradientMethod::Smoothed => smoothed_impulse_gradient(
                &step.problem,
                &step.solution,
                self.config.rho_t,
                self.config.eps_den,
            ),
            other => Err(Error::InvalidArgument(format!(
                "{other} is not a per-pair analytic method"
            ))),
        }
    }

    /// Residuals (and, for analytic methods, the Jacobian) at `mu`.
    fn evaluate_analytic(&self, mu: f64, method: Option<GradientMethod>) -> ResidualEvaluation {
        let dim = self.pair_dim();
        let n = self.n_pairs();
        let mut residual = DVector::zeros(n * dim);
        let mut jacobian = method.map(|_| DVector::zeros(n * dim));
        let (mut n_skipped, mut n_gradient_failures) = (0, 0);
        for i in 0..n {
            let step = match self.predict(i, mu) {
                Ok(s) => s,
                Err(_) => {
                    n_skipped += 1;
                    continue;
                }
            };
            let w = self.weights(i);
            let raw = self.raw_residual(&step, &self.entries[i + 1]);
            residual
                .rows_mut(i * dim, dim)
                .copy_from(&raw.component_mul(&w));
            if let (Some(jac), Some(m)) = (jacobian.as_mut(), method) {
                match self.impulse_gradient(&step, m) {
                    Ok(mut g) => {
                        g.mask_contacts(&self.rejected_positions(i, &step));
                        let dupsilon = if g.dlambda_dmu.is_empty() {
                            DVector::zeros(self.model.nv())
                        } else {
                            &step.problem.minv_jt * &g.dlambda_dmu
                        };
                        let d = self.raw_jacobian(&step, &raw, &dupsilon);
                        jac.rows_mut(i * dim, dim).copy_from(&d.component_mul(&w));
                    }
                    Err(_) => n_gradient_failures += 1,
                }
            }
        }
        ResidualEvaluation {
            residual,
            jacobian,
            n_pairs: n,
            n_skipped,
            n_gradient_failures,
        }
    }

    pub fn residual(&self, mu: f64) -> ResidualEvaluation {
        self.evaluate_analytic(mu, None)
    }

    pub fn loss(&self, mu: f64) -> f64 {
        self.residual(mu).loss()
    }

    fn random_settings(&self, seed: u64) -> RandomizedSettings {
        RandomizedSettings {
            n_samples: self.config.random_samples,
            sigma: self.config.random_sigma,
            seed,
            mu_min: self.config.mu_min,
            mu_max: self.config.mu_max,
            baseline: false,
        }
    }

    /// Residuals and `d residual / d mu` with the given method. `seed` drives
    /// the randomized estimators.
    pub fn residual_and_jacobian(
        &self,
        mu: f64,
        method: GradientMethod,
        seed: u64,
    ) -> Result<ResidualEvaluation> {
        match method {
            GradientMethod::Nonsmooth | GradientMethod::Smoothed => {
                Ok(self.evaluate_analytic(mu, Some(method)))
            }
            GradientMethod::FiniteDiff => {
                let mut eval = self.residual(mu);
                let jac = central_difference(|m| Ok(self.residual(m).residual), mu, FD_STEP)?;
                eval.jacobian = Some(jac);
                Ok(eval)
            }
            GradientMethod::RandZeroth => {
                let mut eval = self.residual(mu);
                let est = zeroth_order_estimate(
                    |m| Ok(self.residual(m).residual),
                    mu,
                    &self.random_settings(seed),
                )?;
                eval.jacobian = Some(est.gradient);
                Ok(eval)
            }
            GradientMethod::RandFirst => {
                let mut eval = self.residual(mu);
                let est = first_order_estimate(
                    |m| {
                        self.evaluate_analytic(m, Some(GradientMethod::Nonsmooth))
                            .jacobian
                            .ok_or_else(|| Error::Identification("missing Jacobian".into()))
                    },
                    mu,
                    &self.random_settings(seed),
                )?;
                eval.jacobian = Some(est.gradient);
                Ok(eval)
            }
        }
    }
}
