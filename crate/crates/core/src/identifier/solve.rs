use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::buffer::BufferEntry;
use super::config::IdentifierConfig;
use super::residual::IdentificationProblem;
use crate::error::Result;
use crate::gradient::GradientMethod;
use crate::model::RobotModel;

const LINE_SEARCH_HALVINGS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    SmallStep,
    SmallDecrease,
    IterationCap,
    TimeBudget,
    /// `J^T J` below the curvature floor.
    NoInformation,
    /// No step along the Gauss-Newton direction reduced the loss.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub mu_star: f64,
    /// Loss at `mu_star`.
    pub loss: f64,
    pub initial_loss: f64,
    pub n_pairs: usize,
    pub iterations: usize,
    /// Set when the very first Jacobian carried no information; `mu_star`
    /// then equals the input estimate.
    pub no_update: bool,
    pub termination: Termination,
    pub wall_ms: f64,
    pub n_skipped: usize,
}

impl SolveOutcome {
    pub fn mean_loss(&self) -> f64 {
        self.loss / self.n_pairs.max(1) as f64
    }
}

/// Bound-constrained scalar Gauss-Newton on the buffer loss, starting at
/// `mu_hat`. Plateau steps (equal loss) are accepted so flat regions of the
/// hard model can be crossed; the best point seen is returned.
pub fn solve_identification(
    model: &RobotModel,
    entries: &[BufferEntry],
    mu_hat: f64,
    config: &IdentifierConfig,
    method: GradientMethod,
    seed: u64,
) -> Result<SolveOutcome> {
    let start = Instant::now();
    let problem = IdentificationProblem::new(model, entries, config)?;
    let mut mu = config.clamp_mu(mu_hat);
    let mut eval = problem.residual_and_jacobian(mu, method, seed)?;
    let mut loss = eval.loss();
    let initial_loss = loss;
    let (mut best_mu, mut best_loss) = (mu, loss);
    let mut termination = Termination::IterationCap;
    let mut no_update = false;
    let mut iterations = 0;
    let mut n_skipped = eval.n_skipped;

    while iterations < config.max_iterations {
        if iterations > 0
            && config.enforce_time_budget
            && start.elapsed().as_secs_f64() > config.dt_bound
        {
            termination = Termination::TimeBudget;
            break;
        }
        let jac = eval.jacobian.as_ref().expect("jacobian requested");
        let g = jac.dot(&eval.residual);
        let h = jac.norm_squared();
        if !(h >= config.min_curvature) {
            no_update = iterations == 0;
            termination = Termination::NoInformation;
            break;
        }
        iterations += 1;
        let mut accepted = None;
        for damping in [0.0, config.lm_damping] {
            let step = -g / (h + damping);
            let mut alpha = 1.0;
            for _ in 0..LINE_SEARCH_HALVINGS {
                let trial = config.clamp_mu(mu + alpha * step);
                if (trial - mu).abs() < 1e-12 {
                    break;
                }
                let trial_loss = problem.loss(trial);
                if trial_loss <= loss {
                    accepted = Some((trial, trial_loss));
                    break;
                }
                alpha *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
        }
        let Some((next, next_loss)) = accepted else {
            termination = Termination::Stalled;
            break;
        };
        let moved = (next - mu).abs();
        let decrease = loss - next_loss;
        mu = next;
        loss = next_loss;
        if loss < best_loss {
            best_mu = mu;
            best_loss = loss;
        }
        if moved < config.min_step {
            termination = Termination::SmallStep;
            break;
        }
        if decrease > 0.0 && decrease < config.min_decrease {
            termination = Termination::SmallDecrease;
            break;
        }
        eval = problem.residual_and_jacobian(mu, method, seed.wrapping_add(iterations as u64))?;
        n_skipped = n_skipped.max(eval.n_skipped);
    }
    if no_update {
        best_mu = config.clamp_mu(mu_hat);
        best_loss = initial_loss;
    }
    Ok(SolveOutcome {
        mu_star: best_mu,
        loss: best_loss,
        initial_loss,
        n_pairs: problem.n_pairs(),
        iterations,
        no_update,
        termination,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        n_skipped,
    })
}
