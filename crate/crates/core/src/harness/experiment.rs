use serde::{Deserialize, Serialize};

use super::scenario::{
    run_scenario, ScenarioConfig, ScenarioRun, TerrainSchedule, NON_SLIPPERY_MU,
};
use crate::error::{Error, Result};
use crate::gradient::GradientMethod;
use crate::identifier::{
    CycleRecord, DataBuffer, IdentificationProblem, IdentifierConfig, OnlineIdentifier,
};

/// Band around the true coefficient that counts as converged.
pub const CONVERGENCE_TOLERANCE: f64 = 0.05;

/// Identification record of one replayed scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetrics {
    pub method: GradientMethod,
    pub mu_init: f64,
    /// One record per 10 Hz cycle.
    pub records: Vec<CycleRecord>,
    /// True coefficient at each cycle time.
    pub mu_true: Vec<f64>,
    /// Time from the start of each slippery segment until the estimate first
    /// lies within [`CONVERGENCE_TOLERANCE`]; `None` if it never does.
    pub convergence_times: Vec<Option<f64>>,
    /// Estimate at the last cycle of each slippery segment.
    pub segment_final: Vec<f64>,
    /// Mean per-pair loss over solves whose window lies on slippery ground.
    pub average_loss: f64,
    pub wall_ms_per_cycle: f64,
    /// Mean wall time over the cycles that ran a solve.
    pub wall_ms_per_solve: f64,
    pub n_solves: usize,
    /// Solves whose whole window lies on non-slippery ground.
    pub false_updates: usize,
}

impl RunMetrics {
    /// Convergence time of the first slippery segment.
    pub fn convergence_time(&self) -> Option<f64> {
        self.convergence_times.first().copied().flatten()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn mu_hat(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mu_hat).collect()
    }

    pub fn final_mu_hat(&self) -> f64 {
        self.records.last().map_or(self.mu_init, |r| r.mu_hat)
    }

    /// Per-solve estimates.
    pub fn estimates(&self) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.solved)
            .map(|r| r.mu_star)
            .collect()
    }
}

pub fn is_slippery(mu: f64) -> bool {
    mu < NON_SLIPPERY_MU - 1e-9
}

/// Identifier configuration matched to a scenario: buffer spacing and the
/// contact activation threshold must agree with the generator.
pub fn matched_config(
    scenario: &ScenarioConfig,
    method: GradientMethod,
    config: &IdentifierConfig,
) -> IdentifierConfig {
    IdentifierConfig {
        dt_buffer: scenario.dt_buffer,
        activation_threshold: scenario.activation_threshold,
        gradient_method: method,
        ..config.clone()
    }
}

/// Feeds the recorded stream through the online identifier, cycling every
/// `dt_bound`.
pub fn replay(
    run: &ScenarioRun,
    config: &IdentifierConfig,
    mu_init: f64,
) -> Result<Vec<CycleRecord>> {
    let per = (config.dt_bound / config.dt_buffer).round() as usize;
    if per == 0 {
        return Err(Error::InvalidArgument(
            "dt_bound is shorter than dt_buffer".into(),
        ));
    }
    let t0 = run.entries.first().map_or(0.0, |e| e.timestamp);
    let mut identifier = OnlineIdentifier::new(run.model.clone(), config.clone(), mu_init, t0)?;
    let mut buffer = DataBuffer::new(config.horizon, config.dt_buffer)?;
    let mut records = Vec::with_capacity(run.entries.len() / per + 1);
    for (i, e) in run.entries.iter().enumerate() {
        buffer.push(e.clone())?;
        if i > 0 && i % per == 0 {
            records.push(identifier.cycle(&buffer, e.timestamp)?);
        }
    }
    Ok(records)
}

/// Replays an already simulated run and summarises it.
pub fn evaluate_run(
    run: &ScenarioRun,
    terrain: &TerrainSchedule,
    config: &IdentifierConfig,
    mu_init: f64,
) -> Result<RunMetrics> {
    let records = replay(run, config, mu_init)?;
    let window = config.horizon.saturating_sub(1) as f64 * config.dt_buffer;
    let mu_true: Vec<f64> = records.iter().map(|r| terrain.mu_at(r.t)).collect();

    let mut convergence_times = Vec::new();
    let mut segment_final = Vec::new();
    for seg in terrain.segments.iter().filter(|s| is_slippery(s.mu)) {
        let entry_estimate = records
            .iter()
            .take_while(|r| r.t < seg.start - 1e-9)
            .last()
            .map_or(config.clamp_mu(mu_init), |r| r.mu_hat);
        let inside: Vec<&CycleRecord> = records
            .iter()
            .filter(|r| r.t >= seg.start - 1e-9 && r.t < seg.end - 1e-9)
            .collect();
        let time = if (entry_estimate - seg.mu).abs() < CONVERGENCE_TOLERANCE {
            Some(0.0)
        } else {
            inside
                .iter()
                .find(|r| (r.mu_hat - seg.mu).abs() < CONVERGENCE_TOLERANCE)
                .map(|r| r.t - seg.start)
        };
        convergence_times.push(time);
        segment_final.push(inside.last().map_or(entry_estimate, |r| r.mu_hat));
    }

    // all segments overlapping the buffer window ending at `t`
    let window_is = |t: f64, slippery: bool| {
        terrain
            .segments
            .iter()
            .filter(|s| s.end > t - window + 1e-9 && s.start < t + 1e-9)
            .all(|s| is_slippery(s.mu) == slippery)
    };

    let mut loss_sum = 0.0;
    let mut loss_count = 0usize;
    let mut false_updates = 0;
    for r in records.iter().filter(|r| r.solved) {
        if window_is(r.t, true) && r.mean_loss.is_finite() {
            loss_sum += r.mean_loss;
            loss_count += 1;
        }
        if window_is(r.t, false) {
            false_updates += 1;
        }
    }
    let n_solves = records.iter().filter(|r| r.solved).count();
    let total_ms: f64 = records.iter().map(|r| r.wall_ms).sum();
    Ok(RunMetrics {
        method: config.gradient_method,
        mu_init,
        mu_true,
        convergence_times,
        segment_final,
        average_loss: if loss_count > 0 {
            loss_sum / loss_count as f64
        } else {
            f64::NAN
        },
        wall_ms_per_cycle: if records.is_empty() {
            0.0
        } else {
            total_ms / records.len() as f64
        },
        wall_ms_per_solve: if n_solves > 0 {
            total_ms / n_solves as f64
        } else {
            0.0
        },
        n_solves,
        false_updates,
        records,
    })
}

/// Simulates the scenario and identifies it with `method`, starting from
/// `config.mu_def`.
pub fn run_identification_experiment(
    scenario: &ScenarioConfig,
    method: GradientMethod,
    config: &IdentifierConfig,
) -> Result<RunMetrics> {
    let run = run_scenario(scenario)?;
    let cfg = matched_config(scenario, method, config);
    evaluate_run(&run, &scenario.terrain, &cfg, cfg.mu_def)
}

/// Runs `f` over `items` on scoped threads, keeping input order.
fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    f: impl Fn(&T) -> Result<R> + Sync,
) -> Result<Vec<R>> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(items.len().max(1));
    let chunk = items.len().div_ceil(workers).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(|| c.iter().map(&f).collect::<Result<Vec<R>>>()))
            .collect();
        let mut out = Vec::with_capacity(items.len());
        for h in handles {
            out.extend(
                h.join()
                    .map_err(|_| Error::Identification("worker thread panicked".into()))??,
            );
        }
        Ok(out)
    })
}

/// `0.05, 0.10, ..., 1.0`.
pub fn default_initials() -> Vec<f64> {
    (1..=20).map(|i| i as f64 / 20.0).collect()
}

/// One run per initial estimate on a shared simulated stream, with the reset
/// policy disabled.
pub fn sweep_initials(
    scenario: &ScenarioConfig,
    method: GradientMethod,
    initials: &[f64],
    config: &IdentifierConfig,
) -> Result<Vec<RunMetrics>> {
    if initials.is_empty() {
        return Err(Error::InvalidArgument("no initial estimates given".into()));
    }
    let run = run_scenario(scenario)?;
    let cfg = IdentifierConfig {
        reset_enabled: false,
        ..matched_config(scenario, method, config)
    };
    parallel_map(initials, |&mu0| {
        evaluate_run(&run, &scenario.terrain, &cfg, mu0)
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RhoPoint {
    pub rho: f64,
    pub average_loss: f64,
    pub final_mu_hat: f64,
    pub convergence_time: Option<f64>,
}

/// Smoothed-method identification at each smoothing parameter.
pub fn sweep_rho(
    scenario: &ScenarioConfig,
    rho_values: &[f64],
    config: &IdentifierConfig,
) -> Result<Vec<RhoPoint>> {
    if rho_values.is_empty() {
        return Err(Error::InvalidArgument(
            "no smoothing parameters given".into(),
        ));
    }
    if let Some(r) = rho_values.iter().find(|r| !(**r > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "smoothing parameter {r} must be positive"
        )));
    }
    let run = run_scenario(scenario)?;
    let base = matched_config(scenario, GradientMethod::Smoothed, config);
    parallel_map(rho_values, |&rho| {
        let cfg = IdentifierConfig {
            rho_t: rho,
            ..base.clone()
        };
        let m = evaluate_run(&run, &scenario.terrain, &cfg, cfg.mu_def)?;
        Ok(RhoPoint {
            rho,
            average_loss: m.average_loss,
            final_mu_hat: m.final_mu_hat(),
            convergence_time: m.convergence_time(),
        })
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: GradientMethod,
    pub trial: usize,
    pub seed: u64,
    pub push_amplitude: f64,
    pub wall_ms_per_solve: f64,
    pub n_solves: usize,
    pub final_estimate: f64,
    pub average_loss: f64,
    pub estimates: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: GradientMethod,
    pub mean_solve_ms: f64,
    pub median_solve_ms: f64,
    /// Mean and spread of the final estimates over trials.
    pub estimate_mean: f64,
    pub estimate_std: f64,
    pub average_loss: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub summaries: Vec<MethodSummary>,
}

impl BenchReport {
    pub fn summary(&self, method: GradientMethod) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Trial `k` re-simulates [`ScenarioConfig::trial`]`(k)`. Runs
/// are sequential so that wall times are not distorted by sharing cores.
pub fn bench_methods(
    scenario: &ScenarioConfig,
    methods: &[GradientMethod],
    n_trials: usize,
    config: &IdentifierConfig,
) -> Result<BenchReport> {
    if n_trials == 0 {
        return Err(Error::InvalidArgument("n_trials must be at least 1".into()));
    }
    let mut rows = Vec::new();
    for trial in 0..n_trials {
        let sc = scenario.trial(trial);
        let run = run_scenario(&sc)?;
        for &method in methods {
            let cfg = IdentifierConfig {
                seed: config.seed.wrapping_add(trial as u64),
                ..matched_config(&sc, method, config)
            };
            let m = evaluate_run(&run, &sc.terrain, &cfg, cfg.mu_def)?;
            rows.push(BenchRow {
                method,
                trial,
                seed: sc.seed,
                push_amplitude: sc.push_amplitude,
                wall_ms_per_solve: m.wall_ms_per_solve,
                n_solves: m.n_solves,
                final_estimate: m.final_mu_hat(),
                average_loss: m.average_loss,
                estimates: m.estimates(),
            });
        }
    }
    let summaries = methods
        .iter()
        .map(|&method| {
            let mine: Vec<&BenchRow> = rows.iter().filter(|r| r.method == method).collect();
            let times: Vec<f64> = mine
                .iter()
                .filter(|r| r.n_solves > 0)
                .map(|r| r.wall_ms_per_solve)
                .collect();
            let estimates: Vec<f64> = mine.iter().map(|r| r.final_estimate).collect();
            let losses: Vec<f64> = mine
                .iter()
                .map(|r| r.average_loss)
                .filter(|l| l.is_finite())
                .collect();
            MethodSummary {
                method,
                mean_solve_ms: mean(&times),
                median_solve_ms: median(&times),
                estimate_mean: mean(&estimates),
                estimate_std: std_dev(&estimates),
                average_loss: mean(&losses),
            }
        })
        .collect();
    Ok(BenchReport { rows, summaries })
}

/// Per-pair weighted loss of the recorded stream at the true coefficient.
/// On noise-free data this is zero up to solver tolerance.
pub fn ground_truth_losses(run: &ScenarioRun, config: &IdentifierConfig) -> Result<Vec<f64>> {
    run.entries
        .windows(2)
        .zip(&run.truth)
        .map(|(pair, truth)| {
            Ok(IdentificationProblem::new(&run.model, pair, config)?.loss(truth.mu_true))
        })
        .collect()
}
