use approx::assert_relative_eq;
use frictid_core::model::{
    box_resting_state, build_box_model, build_monoped_model, integrate, monoped_nominal_state,
    solid_box_inertia, MonopedParams, RobotModel,
};
use frictid_core::solver::{
    assemble_problem, step_dynamics, Actuation, ContactLabel, SolverSettings,
};
use nalgebra::{DVector, Vector3};

fn unit_box() -> (RobotModel, Vector3<f64>) {
    let he = Vector3::new(0.1, 0.1, 0.05);
    (
        build_box_model(1.0, he, solid_box_inertia(1.0, he)).unwrap(),
        he,
    )
}

#[test]
fn free_flight_is_ballistic() {
    let (model, he) = unit_box();
    let mut state = box_resting_state(he);
    state.q[2] = 1.0;
    state.upsilon[0] = 0.5;
    let step = step_dynamics(
        &model,
        &state,
        &Actuation::zeros(&model),
        0.8,
        0.01,
        &SolverSettings::default(),
    )
    .unwrap();
    assert_eq!(step.solution.n_contacts(), 0);
    assert_relative_eq!(step.state.upsilon[2], -0.0981, epsilon = 1e-12);
    assert_relative_eq!(step.state.upsilon[0], 0.5, epsilon = 1e-12);
    assert_relative_eq!(step.state.q[0], 0.005, epsilon = 1e-12);
}

#[test]
fn resting_box_free_velocity_is_gravity() {
    let (model, he) = unit_box();
    let state = box_resting_state(he);
    let eval = model.evaluate(&state, SolverSettings::default().activation_threshold);
    let p = assemble_problem(&eval, &state, &Actuation::zeros(&model), 0.01, 0.8).unwrap();
    assert_eq!(p.n_contacts(), 4);
    for k in 0..4 {
        assert_relative_eq!(p.free_velocity[3 * k + 2], -0.0981, epsilon = 1e-9);
    }
    let eig = p.delassus.clone().symmetric_eigen().eigenvalues;
    assert!(eig.iter().all(|e| e.is_finite() && *e > -1e-12), "{eig}");
    for k in 0..4 {
        let block = p.block(k, k);
        let sv = block.singular_values();
        assert!((sv.max() / sv.min()).is_finite());
    }
}

#[test]
fn resting_box_does_not_drift() {
    let (model, he) = unit_box();
    let mut state = box_resting_state(he);
    let z0 = state.q[2];
    let settings = SolverSettings::default();
    for _ in 0..100 {
        let step = step_dynamics(
            &model,
            &state,
            &Actuation::zeros(&model),
            0.8,
            0.01,
            &settings,
        )
        .unwrap();
        assert!(step
            .solution
            .labels
            .iter()
            .all(|l| *l == ContactLabel::Clamping));
        state = step.state;
    }
    assert!((state.q[2] - z0).abs() < 1e-6, "drift {}", state.q[2] - z0);
    assert!(state.q[0].abs() < 1e-9);
}

fn push_box(mu: f64, steps: usize) -> Vec<f64> {
    let (model, he) = unit_box();
    let mut state = box_resting_state(he);
    // 0.5 m g exceeds 0.19 m g but not 1.0 m g
    let force = Vector3::new(0.5 * 9.81, 0.0, 0.0);
    let act = Actuation::with_base_wrench(&model, DVector::zeros(0), force, Vector3::zeros());
    let settings = SolverSettings::default();
    let mut xs = vec![state.q[0]];
    for _ in 0..steps {
        state = step_dynamics(&model, &state, &act, mu, 0.01, &settings)
            .unwrap()
            .state;
        xs.push(state.q[0]);
    }
    xs
}

#[test]
fn push_slides_on_low_friction_only() {
    let slippery = push_box(0.19, 50);
    assert!(slippery.windows(2).all(|w| w[1] > w[0]));
    assert!(slippery.last().unwrap() > &0.01);
    let firm = push_box(1.0, 50);
    assert!(firm.iter().all(|x| x.abs() < 1e-9), "{:?}", firm.last());
}

#[test]
fn monoped_stance_touches_ground() {
    let params = MonopedParams::default();
    let model = build_monoped_model(8.0, &params).unwrap();
    assert_eq!(model.nq(), 9);
    assert_eq!(model.n_actuated(), 2);
    let state = monoped_nominal_state(&params);
    let kin = model.kinematics(&state);
    assert!(model.contact_position(&kin, 0).z.abs() < 1e-9);
}

#[test]
fn box_corner_jacobians_match_finite_differences() {
    let (model, he) = unit_box();
    let mut state = box_resting_state(he);
    state.upsilon = DVector::from_vec(vec![0.3, -0.2, 0.1, 0.4, -0.7, 0.9]);
    let kin = model.kinematics(&state);
    let h = 1e-6;
    let plus = model.kinematics(&integrate(&state, &state.upsilon, h));
    let minus = model.kinematics(&integrate(&state, &(-&state.upsilon), h));
    for k in 0..model.contact_points.len() {
        let j = model.point_jacobian(
            &kin,
            model.contact_points[k].body,
            &model.contact_position(&kin, k),
        );
        let v = &j * &state.upsilon;
        let fd = (model.contact_position(&plus, k) - model.contact_position(&minus, k)) / (2.0 * h);
        for a in 0..3 {
            assert_relative_eq!(v[a], fd[a], max_relative = 1e-6, epsilon = 1e-9);
        }
    }
}
