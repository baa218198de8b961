use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{nonsmooth_impulse_gradient, GradientDiagnostics, GradientMethod, ImpulseGradient};
use crate::error::{Error, Result};
use crate::solver::{solve_contacts, ContactProblem, SolverSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandomizedOrder {
    Zeroth,
    First,
}

#[derive(Debug, Clone, Copy)]
pub struct RandomizedSettings {
    pub n_samples: usize,
    pub sigma: f64,
    pub seed: u64,
    pub mu_min: f64,
    pub mu_max: f64,
    /// Subtract `f(mu)` in the zeroth-order estimator (same expectation,
    /// much lower variance for small sigma).
    pub baseline: bool,
}

impl Default for RandomizedSettings {
    fn default() -> Self {
        Self {
            n_samples: 50,
            sigma: 0.05,
            seed: 0,
            mu_min: 0.01,
            mu_max: 1.0,
            baseline: false,
        }
    }
}

impl RandomizedSettings {
    fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || !(self.sigma > 0.0) || !(self.mu_min <= self.mu_max) {
            return Err(Error::InvalidArgument(format!(
                "invalid randomized settings: N={}, sigma={}, bounds=[{}, {}]",
                self.n_samples, self.sigma, self.mu_min, self.mu_max
            )));
        }
        Ok(())
    }

    /// Perturbation of sample `i`; each sample has its own stream so results
    /// do not depend on evaluation order.
    pub fn perturbation(&self, i: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(i as u64);
        Normal::new(0.0, self.sigma)
            .expect("sigma validated positive")
            .sample(&mut rng)
    }
}

#[derive(Debug, Clone)]
pub struct RandomizedEstimate {
    pub gradient: DVector<f64>,
    /// Samples whose perturbed mu fell outside the bounds and was clipped.
    pub n_clipped: usize,
    /// Samples whose evaluation failed and were dropped.
    pub n_failed: usize,
    pub n_used: usize,
}

fn run<F>(
    mut f: F,
    mu: f64,
    settings: &RandomizedSettings,
    zeroth: bool,
) -> Result<RandomizedEstimate>
where
    F: FnMut(f64) -> Result<DVector<f64>>,
{
    settings.validate()?;
    let mut sum: Option<DVector<f64>> = None;
    let (mut n_clipped, mut n_failed, mut n_used) = (0, 0, 0);
    let mut last_err = None;
    let base = if zeroth && settings.baseline {
        Some(f(mu)?)
    } else {
        None
    };
    for i in 0..settings.n_samples {
        let eps = settings.perturbation(i);
        let raw = mu + eps;
        let mu_s = raw.clamp(settings.mu_min, settings.mu_max);
        if mu_s != raw {
            n_clipped += 1;
        }
        match f(mu_s) {
            Ok(val) => {
                let val = match &base {
                    Some(b) => val - b,
                    None => val,
                };
                let term = if zeroth {
                    val * (eps / (settings.sigma * settings.sigma))
                } else {
                    val
                };
                sum = Some(match sum {
                    Some(s) => s + term,
                    None => term,
                });
                n_used += 1;
            }
            Err(e) => {
                n_failed += 1;
                last_err = Some(e);
            }
        }
    }
    match sum {
        Some(s) => Ok(RandomizedEstimate {
            gradient: s / n_used as f64,
            n_clipped,
            n_failed,
            n_used,
        }),
        None => Err(last_err.unwrap_or_else(|| Error::InvalidArgument("no samples".into()))),
    }
}

/// `(1/N) sum f(mu + eps_i) eps_i / sigma^2` with Gaussian `eps_i`.
pub fn zeroth_order_estimate<F>(
    f: F,
    mu: f64,
    settings: &RandomizedSettings,
) -> Result<RandomizedEstimate>
where
    F: FnMut(f64) -> Result<DVector<f64>>,
{
    run(f, mu, settings, true)
}

/// `(1/N) sum df(mu + eps_i)` given a pointwise derivative `df`.
pub fn first_order_estimate<G>(
    df: G,
    mu: f64,
    settings: &RandomizedSettings,
) -> Result<RandomizedEstimate>
where
    G: FnMut(f64) -> Result<DVector<f64>>,
{
    run(df, mu, settings, false)
}

/// Randomized-smoothing estimate of `d lambda / d mu` for a fixed contact
/// problem, re-solving the contact problem at each perturbed coefficient.
pub fn randomized_gradient(
    problem: &ContactProblem,
    order: RandomizedOrder,
    settings: &RandomizedSettings,
    solver: &SolverSettings,
) -> Result<ImpulseGradient> {
    let solve = |mu: f64| solve_contacts(&problem.with_mu(mu), solver.tol, solver.max_sweeps);
    let (estimate, method) = match order {
        RandomizedOrder::Zeroth => (
            zeroth_order_estimate(|m| solve(m).map(|s| s.lambda), problem.mu, settings)?,
            GradientMethod::RandZeroth,
        ),
        RandomizedOrder::First => (
            first_order_estimate(
                |m| {
                    let p = problem.with_mu(m);
                    let s = solve_contacts(&p, solver.tol, solver.max_sweeps)?;
                    nonsmooth_impulse_gradient(&p, &s).map(|g| g.dlambda_dmu)
                },
                problem.mu,
                settings,
            )?,
            GradientMethod::RandFirst,
        ),
    };
    Ok(ImpulseGradient {
        dlambda_dmu: estimate.gradient,
        method,
        diagnostics: GradientDiagnostics {
            condition_number: 1.0,
            clamped_denominators: 0,
        },
    })
}
