use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use frictid_core::gradient::GradientMethod;
use frictid_core::harness::{
    bench_methods, evaluate_run, matched_config, run_identification_experiment, run_scenario,
    sweep_initials, sweep_rho, RunMetrics, ScenarioRun,
};

mod config;
mod gradcheck;
mod output;
mod stream;

use config::{ExperimentConfig, Overrides};
use output::{header, num, opt, RunOutput};

#[derive(Parser)]
#[command(
    name = "frictid",
    version,
    about = "Friction-coefficient identification experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML); every key is optional.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured scenario and write the sample stream.
    Simulate(Common),
    /// Run the online identifier and write the estimate series.
    Identify {
        #[command(flatten)]
        common: Common,
        /// Identify from a recorded stream instead of simulating.
        #[arg(long, value_name = "PATH")]
        stream: Option<PathBuf>,
    },
    /// Compare analytic gradients with finite differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, hide = true)]
        flip_sign: bool,
    },
    /// Sweep initial estimates or smoothing parameters.
    Sweep {
        #[arg(value_enum)]
        kind: SweepKind,
        #[command(flatten)]
        common: Common,
    },
    /// Time and compare the gradient methods over repeated trials.
    Bench(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Nonsmooth,
    Smoothed,
    Rand0,
    Rand1,
}

impl From<MethodArg> for GradientMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Nonsmooth => GradientMethod::Nonsmooth,
            MethodArg::Smoothed => GradientMethod::Smoothed,
            MethodArg::Rand0 => GradientMethod::RandZeroth,
            MethodArg::Rand1 => GradientMethod::RandFirst,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    Initials,
    Rho,
}

enum Failure {
    /// Bad arguments or config.
    Usage(anyhow::Error),
    /// A check failed or the run itself errored.
    Run(anyhow::Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Run(_) => 1,
        }
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, Failure> {
    let overrides = Overrides {
        seed: common.seed,
        method: common.method.map(Into::into),
        out: common.out.clone(),
    };
    ExperimentConfig::load(&common.config)
        .and_then(|c| c.resolve(&overrides))
        .map_err(Failure::Usage)
}

fn run_err<T>(r: Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Run)
}

fn summary(pairs: &[(&str, toml::Value)]) -> toml::Table {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

fn simulate(cfg: &ExperimentConfig) -> Result<()> {
    let run = run_scenario(&cfg.scenario)?;
    let mut out = RunOutput::create(cfg, "simulate")?;
    let n_joints = run.model.n_actuated();
    let n_contacts = run.model.contact_points.len();
    let path = out.csv(
        "stream.csv",
        &stream::header(n_joints, n_contacts),
        stream::rows(&run),
    )?;
    let slipping = run
        .truth
        .iter()
        .filter(|g| {
            g.labels
                .contains(&frictid_core::solver::ContactLabel::Sliding)
        })
        .count();
    out.finish(summary(&[
        ("samples", (run.entries.len() as i64).into()),
        ("sliding_samples", (slipping as i64).into()),
    ]))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn identify(cfg: &ExperimentConfig, stream_path: Option<&PathBuf>) -> Result<()> {
    let method = cfg.method();
    let metrics = match stream_path {
        None => run_identification_experiment(&cfg.scenario, method, &cfg.identifier)?,
        Some(path) => {
            let model = cfg.scenario.build_model()?;
            let entries = stream::read(path, model.n_actuated(), model.contact_points.len())?;
            let run = ScenarioRun {
                model,
                entries,
                truth: Vec::new(),
            };
            let id = matched_config(&cfg.scenario, method, &cfg.identifier);
            evaluate_run(&run, &cfg.scenario.terrain, &id, id.mu_def)?
        }
    };
    let mut out = RunOutput::create(cfg, "identify")?;
    let path = out.csv(
        "identify.csv",
        &header(&[
            "t",
            "mu_hat",
            "mu_star",
            "eta",
            "eta_accepted",
            "loss",
            "method",
            "wall_ms",
            "n_rejected",
        ]),
        metrics.records.iter().map(|r| {
            [
                num(r.t),
                num(r.mu_hat),
                num(r.mu_star),
                num(r.eta),
                num(r.eta_accepted),
                num(r.loss),
                r.method.tag().to_string(),
                num(r.wall_ms),
                r.n_rejected.to_string(),
            ]
        }),
    )?;
    out.finish(run_summary(&metrics))?;
    println!(
        "final mu_hat {:.4} after {} solves",
        metrics.final_mu_hat(),
        metrics.n_solves
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn run_summary(m: &RunMetrics) -> toml::Table {
    let times: Vec<toml::Value> = m
        .convergence_times
        .iter()
        .map(|t| t.unwrap_or(f64::NAN).into())
        .collect();
    summary(&[
        ("final_mu_hat", m.final_mu_hat().into()),
        ("convergence_times", times.into()),
        ("average_loss", m.average_loss.into()),
        ("n_solves", (m.n_solves as i64).into()),
        ("false_updates", (m.false_updates as i64).into()),
        ("wall_ms_per_solve", m.wall_ms_per_solve.into()),
    ])
}

fn gradcheck_cmd(cfg: &ExperimentConfig, flip_sign: bool) -> Result<bool> {
    let checks = gradcheck::run(cfg, flip_sign)?;
    let mut out = RunOutput::create(cfg, "gradcheck")?;
    for c in &checks {
        println!(
            "{} {:<34} {:<30} value {:>10.3e} tol {:>8.1e} cond {:>9.3e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.case,
            c.check,
            c.value,
            c.tolerance,
            c.condition_number
        );
    }
    out.csv(
        "gradcheck.csv",
        &header(&[
            "case",
            "check",
            "value",
            "tolerance",
            "condition_number",
            "pass",
        ]),
        checks.iter().map(|c| {
            [
                c.case.clone(),
                c.check.to_string(),
                num(c.value),
                num(c.tolerance),
                num(c.condition_number),
                c.pass.to_string(),
            ]
        }),
    )?;
    let failed = checks.iter().filter(|c| !c.pass).count();
    out.finish(summary(&[
        ("checks", (checks.len() as i64).into()),
        ("failed", (failed as i64).into()),
    ]))?;
    println!(
        "{} of {} checks passed",
        checks.len() - failed,
        checks.len()
    );
    Ok(failed == 0)
}

fn sweep(cfg: &ExperimentConfig, kind: SweepKind) -> Result<()> {
    let mut out;
    let path = match kind {
        SweepKind::Initials => {
            let runs = sweep_initials(
                &cfg.scenario,
                cfg.method(),
                &cfg.sweep.initials,
                &cfg.identifier,
            )?;
            out = RunOutput::create(cfg, "sweep")?;
            let path = out.csv(
                "sweep_initials.csv",
                &header(&[
                    "mu_init",
                    "method",
                    "final_mu_hat",
                    "convergence_time",
                    "average_loss",
                    "n_solves",
                ]),
                runs.iter().map(|m| {
                    [
                        num(m.mu_init),
                        m.method.tag().to_string(),
                        num(m.final_mu_hat()),
                        opt(m.convergence_time()),
                        num(m.average_loss),
                        m.n_solves.to_string(),
                    ]
                }),
            )?;
            let converged = runs
                .iter()
                .filter(|m| m.convergence_time().is_some())
                .count();
            out.finish(summary(&[
                ("runs", (runs.len() as i64).into()),
                ("converged", (converged as i64).into()),
            ]))?;
            path
        }
        SweepKind::Rho => {
            let points = sweep_rho(&cfg.scenario, &cfg.sweep.rho, &cfg.identifier)?;
            out = RunOutput::create(cfg, "sweep")?;
            let path = out.csv(
                "sweep_rho.csv",
                &header(&["rho", "average_loss", "final_mu_hat", "convergence_time"]),
                points.iter().map(|p| {
                    [
                        num(p.rho),
                        num(p.average_loss),
                        num(p.final_mu_hat),
                        opt(p.convergence_time),
                    ]
                }),
            )?;
            let best = points
                .iter()
                .filter(|p| p.average_loss.is_finite())
                .min_by(|a, b| a.average_loss.total_cmp(&b.average_loss))
                .map_or(f64::NAN, |p| p.rho);
            out.finish(summary(&[
                ("points", (points.len() as i64).into()),
                ("best_rho", best.into()),
            ]))?;
            path
        }
    };
    println!("wrote {}", path.display());
    Ok(())
}

fn bench(cfg: &ExperimentConfig, only: Option<GradientMethod>) -> Result<()> {
    let methods = only.map_or_else(|| cfg.bench.methods.clone(), |m| vec![m]);
    let report = bench_methods(&cfg.scenario, &methods, cfg.bench.trials, &cfg.identifier)?;
    let mut out = RunOutput::create(cfg, "bench")?;
    out.csv(
        "bench.csv",
        &header(&[
            "method",
            "trial",
            "seed",
            "push_amplitude",
            "wall_ms_per_solve",
            "n_solves",
            "final_estimate",
            "average_loss",
        ]),
        report.rows.iter().map(|r| {
            [
                r.method.tag().to_string(),
                r.trial.to_string(),
                r.seed.to_string(),
                num(r.push_amplitude),
                num(r.wall_ms_per_solve),
                r.n_solves.to_string(),
                num(r.final_estimate),
                num(r.average_loss),
            ]
        }),
    )?;
    let path = out.csv(
        "bench_summary.csv",
        &header(&[
            "method",
            "mean_solve_ms",
            "median_solve_ms",
            "estimate_mean",
            "estimate_std",
            "average_loss",
        ]),
        report.summaries.iter().map(|s| {
            println!(
                "{:<10} median {:>8.2} ms  estimate {:.3} +- {:.3}",
                s.method.tag(),
                s.median_solve_ms,
                s.estimate_mean,
                s.estimate_std
            );
            [
                s.method.tag().to_string(),
                num(s.mean_solve_ms),
                num(s.median_solve_ms),
                num(s.estimate_mean),
                num(s.estimate_std),
                num(s.average_loss),
            ]
        }),
    )?;
    out.finish(summary(&[
        ("rows", (report.rows.len() as i64).into()),
        ("trials", (cfg.bench.trials as i64).into()),
    ]))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(c) => run_err(simulate(&load(&c)?)),
        Command::Identify { common, stream } => run_err(identify(&load(&common)?, stream.as_ref())),
        Command::Gradcheck { common, flip_sign } => {
            if run_err(gradcheck_cmd(&load(&common)?, flip_sign))? {
                Ok(())
            } else {
                Err(Failure::Run(anyhow::anyhow!("gradient checks failed")))
            }
        }
        Command::Sweep { kind, common } => run_err(sweep(&load(&common)?, kind)),
        Command::Bench(c) => run_err(bench(&load(&c)?, c.method.map(Into::into))),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(e) | Failure::Run(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.exit_code())
        }
    }
}
