use frictid_core::gradient::GradientMethod;
use frictid_core::harness::{
    bench_methods, evaluate_run, ground_truth_losses, is_slippery, matched_config,
    run_identification_experiment, run_scenario, sweep_rho, ScenarioConfig, ScenarioKind,
    TerrainSchedule, NON_SLIPPERY_MU, SLIPPERY_MU,
};
use frictid_core::identifier::IdentifierConfig;

fn config() -> IdentifierConfig {
    IdentifierConfig {
        enforce_time_budget: false,
        ..IdentifierConfig::default()
    }
}

#[test]
fn resting_robot_stays_put() {
    let run = run_scenario(&ScenarioConfig {
        kind: ScenarioKind::Rest,
        terrain: TerrainSchedule::constant(NON_SLIPPERY_MU, 2.0),
        duration: 2.0,
        ..ScenarioConfig::default()
    })
    .unwrap();
    assert_eq!(run.entries.len(), run.truth.len());
    for g in &run.truth[10..] {
        assert!(
            g.foot_velocities[0].norm() < 1e-6,
            "{}",
            g.foot_velocities[0]
        );
    }
    assert!(run
        .entries
        .iter()
        .all(|e| e.contact_flags.iter().all(|&f| f)));
}

#[test]
fn pushes_slide_only_on_slippery_ground() {
    let sc = ScenarioConfig::default().noise_free();
    let run = run_scenario(&sc).unwrap();
    let mut slip_run = 0;
    let mut longest = 0;
    for g in &run.truth {
        let speed = g.foot_velocities[0].xy().norm();
        if speed > 0.4 {
            assert!(
                is_slippery(g.mu_true),
                "slip {speed} at t = {} on firm ground",
                g.t
            );
            slip_run += 1;
            longest = longest.max(slip_run);
        } else {
            slip_run = 0;
        }
        if !is_slippery(g.mu_true) {
            assert!(speed < 0.05, "speed {speed} at t = {}", g.t);
        }
    }
    assert!(longest >= 10, "longest slip {longest} samples");
}

#[test]
fn streams_are_reproducible() {
    let sc = ScenarioConfig {
        duration: 3.0,
        terrain: TerrainSchedule::alternating(1.5, 2),
        ..ScenarioConfig::default()
    };
    let a = run_scenario(&sc).unwrap();
    let b = run_scenario(&sc).unwrap();
    assert_eq!(a.entries, b.entries);
    assert_eq!(a.truth, b.truth);
    let c = run_scenario(&ScenarioConfig { seed: 1, ..sc }).unwrap();
    assert_ne!(a.entries, c.entries);
}

#[test]
fn true_coefficient_explains_noise_free_data() {
    let sc = ScenarioConfig {
        duration: 6.0,
        terrain: TerrainSchedule::alternating(3.0, 2),
        ..ScenarioConfig::default()
    }
    .noise_free();
    let run = run_scenario(&sc).unwrap();
    let cfg = matched_config(&sc, GradientMethod::Smoothed, &config());
    let losses = ground_truth_losses(&run, &cfg).unwrap();
    assert_eq!(losses.len(), run.entries.len() - 1);
    assert!(
        losses.iter().all(|&l| l < 1e-10),
        "{}",
        losses.iter().cloned().fold(0.0, f64::max)
    );
}

#[test]
fn starting_at_the_truth_converges_immediately() {
    let sc = ScenarioConfig {
        terrain: TerrainSchedule::constant(SLIPPERY_MU, 2.0),
        duration: 2.0,
        ..ScenarioConfig::default()
    };
    let run = run_scenario(&sc).unwrap();
    let cfg = matched_config(&sc, GradientMethod::Smoothed, &config());
    let m = evaluate_run(&run, &sc.terrain, &cfg, SLIPPERY_MU).unwrap();
    assert_eq!(m.convergence_times, vec![Some(0.0)]);
}

#[test]
fn rho_sweep_with_one_value() {
    let sc = ScenarioConfig {
        terrain: TerrainSchedule::constant(SLIPPERY_MU, 2.0),
        duration: 2.0,
        ..ScenarioConfig::default()
    };
    let points = sweep_rho(&sc, &[0.05], &config()).unwrap();
    assert_eq!(points.len(), 1);
    assert!(points[0].average_loss.is_finite() && points[0].average_loss >= 0.0);
    assert!(sweep_rho(&sc, &[], &config()).is_err());
}

#[test]
fn bench_with_one_trial() {
    let sc = ScenarioConfig {
        terrain: TerrainSchedule::constant(SLIPPERY_MU, 1.0),
        duration: 1.0,
        ..ScenarioConfig::default()
    };
    let report = bench_methods(&sc, &GradientMethod::ALL_IDENTIFIERS, 1, &config()).unwrap();
    assert_eq!(report.rows.len(), 4);
    for m in GradientMethod::ALL_IDENTIFIERS {
        assert_eq!(report.rows.iter().filter(|r| r.method == m).count(), 1);
        let s = report.summary(m).unwrap();
        assert_eq!(s.estimate_std, 0.0);
    }
}

#[test]
fn rejection_prevents_updates_while_hopping() {
    let sc = ScenarioConfig {
        kind: ScenarioKind::Hop,
        terrain: TerrainSchedule::constant(NON_SLIPPERY_MU, 5.0),
        duration: 5.0,
        ..ScenarioConfig::default()
    };
    let with = run_identification_experiment(&sc, GradientMethod::Smoothed, &config()).unwrap();
    assert_eq!(with.false_updates, 0);
    assert!(with.mu_hat().iter().all(|&m| m == config().mu_def));
    let without = run_identification_experiment(
        &sc,
        GradientMethod::Smoothed,
        &IdentifierConfig {
            rejection_enabled: false,
            ..config()
        },
    )
    .unwrap();
    assert!(without.false_updates > 0);
}
