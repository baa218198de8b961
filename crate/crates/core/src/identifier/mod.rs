//! Online friction-coefficient identification from a sliding window of
//! proprioceptive data.

mod buffer;
mod config;
mod residual;
mod scores;
mod solve;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gradient::GradientMethod;
use crate::model::RobotModel;

pub use buffer::{BufferEntry, DataBuffer, SharedBuffer};
pub use config::{IdentifierConfig, LossWeights};
pub use residual::{IdentificationProblem, ResidualEvaluation, FD_STEP};
pub use scores::{
    apply_rejection, confidence_from_speed, confidence_score, mean_tangential_speed,
    rejection_scores,
};
pub use solve::{solve_identification, SolveOutcome, Termination};

/// Slack on the reset timer so that cycle timestamps built from sums of
/// `dt_bound` still trigger on the intended cycle.
const TIME_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateState {
    pub mu_hat: f64,
    pub eta: f64,
    /// Confidence score of the previous cycle.
    pub eta_prev: f64,
    /// Confidence score of the last cycle that passed the gate. Logged only.
    pub eta_accepted: f64,
    pub last_above_threshold: f64,
    pub last_mu_star: Option<f64>,
    pub last_loss: Option<f64>,
    pub last_iterations: usize,
    pub last_wall_ms: f64,
}

impl EstimateState {
    pub fn new(mu_hat: f64, now: f64) -> Self {
        Self {
            mu_hat,
            eta: 0.0,
            eta_prev: 0.0,
            eta_accepted: 0.0,
            last_above_threshold: now,
            last_mu_star: None,
            last_loss: None,
            last_iterations: 0,
            last_wall_ms: 0.0,
        }
    }
}

/// Gated update: nothing happens unless `eta > gamma_conf`; large gaps jump
/// straight to `mu_star`, small ones blend with the previous cycle's score.
pub fn update_estimate(
    state: &EstimateState,
    mu_star: f64,
    eta: f64,
    config: &IdentifierConfig,
    now: f64,
) -> EstimateState {
    let mut next = state.clone();
    if eta > config.gamma_conf {
        next.last_above_threshold = now;
        next.eta_accepted = eta;
        next.mu_hat = if (state.mu_hat - mu_star).abs() > config.epsilon {
            mu_star
        } else {
            (1.0 - state.eta_prev) * state.mu_hat + state.eta_prev * mu_star
        };
    }
    next.mu_hat = config.clamp_mu(next.mu_hat);
    next.eta_prev = eta;
    next.eta = eta;
    next
}

/// Falls back to `mu_def` once no confident cycle has been seen for `reset_hold`.
pub fn apply_reset(
    state: &EstimateState,
    config: &IdentifierConfig,
    now: f64,
) -> (EstimateState, bool) {
    let mut next = state.clone();
    let expired = now - state.last_above_threshold >= config.reset_hold - TIME_SLACK;
    let changed = expired && state.mu_hat != config.mu_def;
    if expired {
        next.mu_hat = config.mu_def;
    }
    (next, changed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub t: f64,
    pub mu_hat: f64,
    /// NaN when no solve ran this cycle.
    pub mu_star: f64,
    pub eta: f64,
    /// Confidence at the last accepted update.
    pub eta_accepted: f64,
    /// Weighted loss at `mu_star`, NaN when no solve ran.
    pub loss: f64,
    /// Loss divided by the number of buffer pairs.
    pub mean_loss: f64,
    pub method: GradientMethod,
    pub wall_ms: f64,
    pub n_rejected: usize,
    pub solved: bool,
    pub no_update: bool,
    pub reset: bool,
}

/// The 10 Hz identification loop: rejection, confidence, gated solve,
/// update and reset.
#[derive(Debug, Clone)]
pub struct OnlineIdentifier {
    pub model: RobotModel,
    pub config: IdentifierConfig,
    pub method: GradientMethod,
    pub state: EstimateState,
    cycles: u64,
}

impl OnlineIdentifier {
    pub fn new(
        model: RobotModel,
        config: IdentifierConfig,
        mu_init: f64,
        now: f64,
    ) -> Result<Self> {
        config.validate()?;
        let method = config.gradient_method;
        let mu = config.clamp_mu(mu_init);
        Ok(Self {
            model,
            config,
            method,
            state: EstimateState::new(mu, now),
            cycles: 0,
        })
    }

    pub fn cycles(&self) -> u64 {
        self.cycles
    }

    /// Entries of the snapshot with rejection flags applied (or cleared when
    /// rejection is disabled).
    pub fn filtered_entries(&self, buffer: &DataBuffer) -> (Vec<BufferEntry>, usize) {
        let mut entries = buffer.to_vec();
        let n_rejected = if self.config.rejection_enabled {
            apply_rejection(&mut entries, self.config.alpha_rej, self.config.gamma_rej)
        } else {
            for e in entries.iter_mut() {
                e.rejected.iter_mut().for_each(|r| *r = false);
            }
            0
        };
        (entries, n_rejected)
    }

    pub fn cycle(&mut self, buffer: &DataBuffer, now: f64) -> Result<CycleRecord> {
        let (entries, n_rejected) = self.filtered_entries(buffer);
        let eta = confidence_score(&entries, self.config.alpha_conf, self.config.nonzero_speed);
        let seed = self
            .config
            .seed
            .wrapping_add(self.cycles.wrapping_mul(1_000_003));
        self.cycles += 1;
        let outcome = if eta > self.config.gamma_conf && entries.len() >= 2 {
            Some(solve_identification(
                &self.model,
                &entries,
                self.state.mu_hat,
                &self.config,
                self.method,
                seed,
            )?)
        } else {
            None
        };
        let mu_star = outcome.as_ref().map_or(self.state.mu_hat, |o| o.mu_star);
        let mut next = update_estimate(&self.state, mu_star, eta, &self.config, now);
        if let Some(o) = &outcome {
            next.last_mu_star = Some(o.mu_star);
            next.last_loss = Some(o.loss);
            next.last_iterations = o.iterations;
            next.last_wall_ms = o.wall_ms;
        }
        let mut reset = false;
        if self.config.reset_enabled {
            let (s, changed) = apply_reset(&next, &self.config, now);
            next = s;
            reset = changed;
        }
        self.state = next;
        Ok(CycleRecord {
            t: now,
            mu_hat: self.state.mu_hat,
            mu_star: outcome.as_ref().map_or(f64::NAN, |o| o.mu_star),
            eta,
            eta_accepted: self.state.eta_accepted,
            loss: outcome.as_ref().map_or(f64::NAN, |o| o.loss),
            mean_loss: outcome.as_ref().map_or(f64::NAN, |o| o.mean_loss()),
            method: self.method,
            wall_ms: outcome.as_ref().map_or(0.0, |o| o.wall_ms),
            n_rejected,
            solved: outcome.is_some(),
            no_update: outcome.as_ref().is_some_and(|o| o.no_update),
            reset,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg() -> IdentifierConfig {
        IdentifierConfig::default()
    }

    #[test]
    fn low_confidence_keeps_estimate() {
        let s = EstimateState::new(0.8, 0.0);
        let n = update_estimate(&s, 0.19, 0.3, &cfg(), 0.1);
        assert_eq!(n.mu_hat, 0.8);
        assert_eq!(n.eta_prev, 0.3);
        assert_eq!(n.eta_accepted, 0.0);
        assert_eq!(n.last_above_threshold, 0.0);
    }

    #[test]
    fn large_gap_jumps() {
        let s = EstimateState::new(0.8, 0.0);
        let n = update_estimate(&s, 0.19, 0.9, &cfg(), 0.1);
        assert_eq!(n.mu_hat, 0.19);
        assert_eq!(n.eta_accepted, 0.9);
        assert_eq!(n.last_above_threshold, 0.1);
    }

    #[test]
    fn small_gap_blends_with_previous_score() {
        let mut s = EstimateState::new(0.22, 0.0);
        s.eta_prev = 0.8;
        let n = update_estimate(&s, 0.19, 0.9, &cfg(), 0.1);
        assert_relative_eq!(n.mu_hat, 0.196, epsilon = 1e-12);
    }

    #[test]
    fn reset_after_hold() {
        let c = cfg();
        let mut s = EstimateState::new(0.19, 0.0);
        s.last_above_threshold = 1.0;
        let (a, changed) = apply_reset(&s, &c, 1.4);
        assert!(!changed);
        assert_eq!(a.mu_hat, 0.19);
        let (b, changed) = apply_reset(&s, &c, 1.0 + 0.1 + 0.1 + 0.1 + 0.1 + 0.1);
        assert!(changed);
        assert_eq!(b.mu_hat, 0.8);
    }

    #[test]
    fn continuous_confidence_never_resets() {
        let c = cfg();
        let mut s = EstimateState::new(0.19, 0.0);
        for i in 1..50 {
            let now = i as f64 * 0.1;
            s = update_estimate(&s, 0.19, 0.9, &c, now);
            let (n, changed) = apply_reset(&s, &c, now);
            assert!(!changed);
            s = n;
        }
        assert_eq!(s.mu_hat, 0.19);
    }

    #[test]
    fn estimate_stays_in_bounds() {
        let c = cfg();
        let s = EstimateState::new(0.8, 0.0);
        assert_eq!(update_estimate(&s, 5.0, 0.9, &c, 0.1).mu_hat, 1.0);
        assert_eq!(update_estimate(&s, -1.0, 0.9, &c, 0.1).mu_hat, 0.01);
    }
}
