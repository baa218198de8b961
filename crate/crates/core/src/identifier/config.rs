use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradient::GradientMethod;
use crate::model::DEFAULT_ACTIVATION_THRESHOLD;
use crate::solver::SolverSettings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentifierConfig {
    pub alpha_rej: f64,
    pub gamma_rej: f64,
    pub dt_buffer: f64,
    /// Wall-clock budget of one identification solve, s.
    pub dt_bound: f64,
    pub sigma_slip: f64,
    pub sigma_q_base: f64,
    pub sigma_q_jnt: f64,
    pub alpha_conf: f64,
    pub gamma_conf: f64,
    pub epsilon: f64,
    pub horizon: usize,
    pub rho_t: f64,
    pub sigma_qdot_base: f64,
    pub sigma_qdot_jnt: f64,
    pub mu_def: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    /// Time without confident data before the estimate falls back to `mu_def`, s.
    pub reset_hold: f64,
    /// Tangential foot speed above which joint weights are scaled, m/s.
    pub slip_threshold: f64,
    /// Tangential speeds at or below this count as zero in the confidence score, m/s.
    pub nonzero_speed: f64,
    pub gradient_method: GradientMethod,
    pub eps_den: f64,
    pub rejection_enabled: bool,
    pub reset_enabled: bool,
    pub enforce_time_budget: bool,
    pub max_iterations: usize,
    pub min_step: f64,
    pub min_decrease: f64,
    pub lm_damping: f64,
    pub min_curvature: f64,
    pub random_samples: usize,
    pub random_sigma: f64,
    pub seed: u64,
    pub activation_threshold: f64,
    pub solver_tol: f64,
    pub solver_max_sweeps: usize,
}

impl Default for IdentifierConfig {
    fn default() -> Self {
        Self {
            alpha_rej: 5.0,
            gamma_rej: 0.4,
            dt_buffer: 0.01,
            dt_bound: 0.1,
            sigma_slip: 30.0,
            sigma_q_base: 1e-4,
            sigma_q_jnt: 20.0,
            alpha_conf: 3.0,
            gamma_conf: 0.58,
            epsilon: 0.1,
            horizon: 50,
            rho_t: 0.05,
            sigma_qdot_base: 1e-4,
            sigma_qdot_jnt: 1.0,
            mu_def: 0.8,
            mu_min: 0.01,
            mu_max: 1.0,
            reset_hold: 0.5,
            slip_threshold: 0.4,
            nonzero_speed: 0.01,
            gradient_method: GradientMethod::Smoothed,
            eps_den: crate::gradient::DEFAULT_EPS_DEN,
            rejection_enabled: true,
            reset_enabled: true,
            enforce_time_budget: true,
            max_iterations: 20,
            min_step: 1e-4,
            min_decrease: 1e-8,
            lm_damping: 1e-8,
            min_curvature: 1e-12,
            random_samples: 50,
            random_sigma: 0.05,
            seed: 0,
            activation_threshold: DEFAULT_ACTIVATION_THRESHOLD,
            solver_tol: 1e-10,
            solver_max_sweeps: 200,
        }
    }
}

impl IdentifierConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha_rej", self.alpha_rej),
            ("gamma_rej", self.gamma_rej),
            ("dt_buffer", self.dt_buffer),
            ("dt_bound", self.dt_bound),
            ("sigma_slip", self.sigma_slip),
            ("alpha_conf", self.alpha_conf),
            ("epsilon", self.epsilon),
            ("rho_t", self.rho_t),
            ("mu_def", self.mu_def),
            ("mu_min", self.mu_min),
            ("reset_hold", self.reset_hold),
            ("slip_threshold", self.slip_threshold),
            ("random_sigma", self.random_sigma),
            ("solver_tol", self.solver_tol),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "{name} must be positive, got {v}"
            )));
        }
        let nonneg = [
            ("sigma_q_base", self.sigma_q_base),
            ("sigma_q_jnt", self.sigma_q_jnt),
            ("sigma_qdot_base", self.sigma_qdot_base),
            ("sigma_qdot_jnt", self.sigma_qdot_jnt),
            ("nonzero_speed", self.nonzero_speed),
            ("eps_den", self.eps_den),
            ("activation_threshold", self.activation_threshold),
        ];
        if let Some((name, v)) = nonneg.iter().find(|(_, v)| !(*v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "{name} must be nonnegative, got {v}"
            )));
        }
        if !(self.gamma_conf > 0.0 && self.gamma_conf < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma_conf must lie in (0, 1), got {}",
                self.gamma_conf
            )));
        }
        if !(self.mu_min < self.mu_max) || !(self.mu_min..=self.mu_max).contains(&self.mu_def) {
            return Err(Error::InvalidArgument(format!(
                "need mu_min < mu_max with mu_def inside, got [{}, {}] and {}",
                self.mu_min, self.mu_max, self.mu_def
            )));
        }
        if self.horizon < 2 || self.max_iterations == 0 || self.random_samples == 0 {
            return Err(Error::InvalidArgument(
                "horizon must be >= 2, max_iterations and random_samples >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            tol: self.solver_tol,
            max_sweeps: self.solver_max_sweeps,
            activation_threshold: self.activation_threshold,
        }
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            sigma_q_base: self.sigma_q_base,
            sigma_q_jnt: self.sigma_q_jnt,
            sigma_qdot_base: self.sigma_qdot_base,
            sigma_qdot_jnt: self.sigma_qdot_jnt,
            sigma_slip: self.sigma_slip,
            slip_speed_threshold: self.slip_threshold,
        }
    }

    pub fn clamp_mu(&self, mu: f64) -> f64 {
        mu.clamp(self.mu_min, self.mu_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub sigma_q_base: f64,
    pub sigma_q_jnt: f64,
    pub sigma_qdot_base: f64,
    pub sigma_qdot_jnt: f64,
    pub sigma_slip: f64,
    pub slip_speed_threshold: f64,
}

impl LossWeights {
    /// Square roots of the diagonal weights for one pair, laid out as
    /// `[p, rot, q_jnt, p_dot, omega, qdot_jnt]`.
    pub fn sqrt_diagonal(&self, n_joints: usize, slipping: bool) -> nalgebra::DVector<f64> {
        let scale = if slipping { self.sigma_slip } else { 1.0 };
        let mut w = Vec::with_capacity(12 + 2 * n_joints);
        w.extend(std::iter::repeat_n(self.sigma_q_base.sqrt(), 6));
        w.extend(std::iter::repeat_n(
            (self.sigma_q_jnt * scale).sqrt(),
            n_joints,
        ));
        w.extend(std::iter::repeat_n(self.sigma_qdot_base.sqrt(), 6));
        w.extend(std::iter::repeat_n(
            (self.sigma_qdot_jnt * scale).sqrt(),
            n_joints,
        ));
        nalgebra::DVector::from_vec(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = IdentifierConfig::default();
        c.validate().unwrap();
        assert_eq!(c.horizon, 50);
        assert_eq!(c.gamma_conf, 0.58);
    }

    #[test]
    fn invalid_values_rejected() {
        let c = IdentifierConfig {
            gamma_conf: 1.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = IdentifierConfig {
            rho_t: 0.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn slip_scales_joint_weights_only() {
        let w = IdentifierConfig::default().weights();
        let a = w.sqrt_diagonal(2, false);
        let b = w.sqrt_diagonal(2, true);
        assert_eq!(a.len(), 16);
        assert_eq!(a[0], b[0]);
        assert!((b[6] / a[6] - 30f64.sqrt()).abs() < 1e-12);
        assert!((b[14] / a[14] - 30f64.sqrt()).abs() < 1e-12);
    }
}
