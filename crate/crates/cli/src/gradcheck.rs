//! Gradient checks against finite-difference oracles on small fixtures.

use anyhow::Result;
use frictid_core::gradient::fixtures::{bar, point_mass, synthetic};
use frictid_core::gradient::{
    central_difference, nonsmooth_impulse_gradient, smoothed_impulse_gradient,
    smoothed_solution_oracle, smoothed_solution_oracle_from, state_gradient, OracleSettings,
    DEFAULT_EPS_DEN,
};
use frictid_core::model::{build_monoped_model, monoped_nominal_state};
use frictid_core::solver::{
    solve_contacts, step_dynamics, Actuation, ContactLabel, ContactProblem, ContactSolution,
    SolverSettings,
};
use nalgebra::{DMatrix, DVector};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone)]
pub struct Check {
    pub case: String,
    pub check: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub condition_number: f64,
    pub pass: bool,
}

fn hard(p: &ContactProblem) -> frictid_core::Result<ContactSolution> {
    solve_contacts(p, 1e-13, 10_000)
}

fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1e-12)
}

/// Single contact whose Delassus block couples the tangent axes unevenly.
fn coupled(vx: f64, vy: f64, mu: f64) -> ContactProblem {
    let d = DMatrix::from_row_slice(3, 3, &[1.6, 0.3, 0.2, 0.3, 0.9, -0.1, 0.2, -0.1, 1.2]);
    synthetic(d, DVector::from_vec(vec![vx, vy, -0.0981]), mu)
}

/// Runs every check. `flip_sign` negates the analytic gradients, which must
/// make the comparisons fail.
pub fn run(config: &ExperimentConfig, flip_sign: bool) -> Result<Vec<Check>> {
    let gc = &config.gradcheck;
    let sign = if flip_sign { -1.0 } else { 1.0 };
    let mut checks = Vec::new();

    let sliding = [
        ("point mass sliding", point_mass(1.0, 1.0, 0.0, 0.19)),
        (
            "point mass sliding diagonal",
            point_mass(3.0, -0.7, 0.9, 0.4),
        ),
        ("bar sliding", bar(2.0, 0.05, 0.2, 0.8, 0.4)),
        ("heavy bar sliding", bar(10.0, 0.3, 0.5, -1.5, 0.7)),
    ];
    for (name, p) in &sliding {
        let s = hard(p)?;
        let g = nonsmooth_impulse_gradient(p, &s)?;
        let fd = central_difference(|m| hard(&p.with_mu(m)).map(|s| s.lambda), p.mu, gc.fd_step)?;
        let e = rel_err(&(&g.dlambda_dmu * sign), &fd);
        checks.push(Check {
            case: name.to_string(),
            check: "nonsmooth vs fd",
            value: e,
            tolerance: gc.tolerance,
            condition_number: g.diagnostics.condition_number,
            pass: e < gc.tolerance,
        });
    }

    let relaxed = [
        ("heavy point mass sliding", point_mass(20.0, 0.5, 0.0, 0.5)),
        (
            "heavy point mass sticking",
            point_mass(20.0, 0.01, 0.0, 0.8),
        ),
        ("heavy bar sliding", bar(40.0, 2.0, 0.2, 0.5, 0.5)),
    ];
    let oracle_settings = OracleSettings::default();
    for (name, p) in &relaxed {
        let s = hard(p)?;
        for &rho in &gc.rho {
            let o = smoothed_solution_oracle(p, &s, rho, &oracle_settings)?;
            let fd = central_difference(
                |m| {
                    smoothed_solution_oracle_from(
                        &p.with_mu(m),
                        &o.active,
                        &o.lambda,
                        rho,
                        &oracle_settings,
                    )
                    .map(|o| o.lambda)
                },
                p.mu,
                gc.fd_step,
            )?;
            let g = smoothed_impulse_gradient(p, &o.as_contact_solution(&s), rho, DEFAULT_EPS_DEN)?;
            let e = rel_err(&(&g.dlambda_dmu * sign), &fd);
            checks.push(Check {
                case: format!("{name} rho={rho}"),
                check: "smoothed vs relaxed fd",
                value: e,
                tolerance: gc.smoothed_tolerance,
                condition_number: g.diagnostics.condition_number,
                pass: e < gc.smoothed_tolerance,
            });
        }
    }

    // clamping contacts carry no hard-contact gradient; the smoothed one does
    for (name, p) in [
        ("point mass sticking", point_mass(1.0, 0.01, 0.0, 0.8)),
        ("coupled sticking", coupled(0.02, -0.01, 0.9)),
    ] {
        let s = hard(&p)?;
        let clamped = s.labels[0] == ContactLabel::Clamping && s.lambda_k(0).xy().norm() > 0.0;
        let ns = nonsmooth_impulse_gradient(&p, &s)?;
        let sm = smoothed_impulse_gradient(&p, &s, config.identifier.rho_t, DEFAULT_EPS_DEN)?;
        checks.push(Check {
            case: name.to_string(),
            check: "nonsmooth zero when clamping",
            value: ns.dlambda_dmu.amax(),
            tolerance: 0.0,
            condition_number: ns.diagnostics.condition_number,
            pass: clamped && ns.dlambda_dmu.amax() == 0.0,
        });
        checks.push(Check {
            case: name.to_string(),
            check: "smoothed nonzero when clamping",
            value: sm.dlambda_dmu.amax(),
            tolerance: 0.0,
            condition_number: sm.diagnostics.condition_number,
            pass: clamped && sm.dlambda_dmu.amax() > 0.0,
        });
    }

    checks.push(step_check(config, sign)?);
    Ok(checks)
}

/// Next-state derivative of one monoped step sliding at mu = 0.19.
fn step_check(config: &ExperimentConfig, sign: f64) -> Result<Check> {
    let gc = &config.gradcheck;
    let params = &config.scenario.monoped;
    let model = build_monoped_model(config.scenario.base_mass, params)?;
    let mut state = monoped_nominal_state(params);
    state.upsilon[0] = 0.8;
    let act = Actuation::zeros(&model);
    let settings = SolverSettings {
        tol: 1e-13,
        max_sweeps: 10_000,
        ..SolverSettings::default()
    };
    let (mu, dt) = (0.19, 0.01);
    let base = step_dynamics(&model, &state, &act, mu, dt, &settings)?;
    let g = nonsmooth_impulse_gradient(&base.problem, &base.solution)?;
    let sg = state_gradient(&g, &base.problem, dt);
    let fd = central_difference(
        |m| {
            Ok(step_dynamics(&model, &state, &act, m, dt, &settings)?
                .state
                .upsilon)
        },
        mu,
        gc.fd_step,
    )?;
    let e = rel_err(&(&sg.dupsilon_dmu * sign), &fd);
    Ok(Check {
        case: "monoped step sliding".into(),
        check: "state gradient vs fd",
        value: e,
        tolerance: gc.tolerance,
        condition_number: g.diagnostics.condition_number,
        pass: base.solution.any_sliding() && e < gc.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Overrides;

    fn config() -> ExperimentConfig {
        ExperimentConfig::default()
            .resolve(&Overrides::default())
            .unwrap()
    }

    #[test]
    fn default_checks_pass() {
        let checks = run(&config(), false).unwrap();
        for c in &checks {
            assert!(c.pass, "{c:?}");
            assert!(
                c.condition_number.is_finite() && c.condition_number >= 1.0,
                "{c:?}"
            );
        }
    }

    #[test]
    fn flipped_sign_fails() {
        let checks = run(&config(), true).unwrap();
        assert!(checks
            .iter()
            .filter(|c| c.check.ends_with("fd"))
            .all(|c| !c.pass));
    }
}
