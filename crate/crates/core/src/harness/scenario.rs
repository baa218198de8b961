use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identifier::BufferEntry;
use crate::model::{
    box_resting_state, build_box_model, build_monoped_model, monoped_nominal_state,
    solid_box_inertia, GeneralizedState, MonopedParams, RobotModel,
};
use crate::so3;
use crate::solver::{step_dynamics, Actuation, ContactLabel, SolverSettings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub mu: f64,
}

/// Piecewise-constant true friction coefficient over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerrainSchedule {
    pub segments: Vec<Segment>,
}

pub const NON_SLIPPERY_MU: f64 = 1.0;
pub const SLIPPERY_MU: f64 = 0.19;

impl TerrainSchedule {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let s = Self { segments };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(mu: f64, duration: f64) -> Self {
        Self {
            segments: vec![Segment {
                start: 0.0,
                end: duration,
                mu,
            }],
        }
    }

    /// Alternating segments of the given length, starting non-slippery.
    pub fn alternating(segment: f64, count: usize) -> Self {
        let segments = (0..count)
            .map(|i| Segment {
                start: i as f64 * segment,
                end: (i + 1) as f64 * segment,
                mu: if i % 2 == 0 {
                    NON_SLIPPERY_MU
                } else {
                    SLIPPERY_MU
                },
            })
            .collect();
        Self { segments }
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::InvalidArgument("terrain schedule is empty".into()));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.end > s.start) {
                return Err(Error::InvalidArgument(format!(
                    "segment {i} has non-positive length"
                )));
            }
            if !(s.mu > 0.0 && s.mu <= 2.0) {
                return Err(Error::InvalidArgument(format!(
                    "segment {i} has mu {} outside (0, 2]",
                    s.mu
                )));
            }
            if i > 0 && (s.start - self.segments[i - 1].end).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "segment {i} does not start where the previous one ends"
                )));
            }
        }
        Ok(())
    }

    pub fn mu_at(&self, t: f64) -> f64 {
        self.segments
            .iter()
            .find(|s| t >= s.start - 1e-12 && t < s.end - 1e-12)
            .or(self.segments.last())
            .map(|s| s.mu)
            .unwrap_or(NON_SLIPPERY_MU)
    }

    pub fn segment_at(&self, t: f64) -> Option<&Segment> {
        self.segments
            .iter()
            .find(|s| t >= s.start - 1e-12 && t < s.end - 1e-12)
    }

    pub fn end(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Monoped,
    Box,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    /// Stand still.
    Rest,
    /// Sinusoidal horizontal push on the base.
    Push,
    /// Periodic lift-and-drop hops with a leg swing in flight.
    Hop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelKind,
    pub kind: ScenarioKind,
    pub base_mass: f64,
    /// Leg geometry and stance posture when `model` is the monoped.
    pub monoped: MonopedParams,
    pub terrain: TerrainSchedule,
    pub dt: f64,
    pub dt_buffer: f64,
    pub duration: f64,
    /// Peak horizontal push, N.
    pub push_amplitude: f64,
    pub push_period: f64,
    /// Relative spread of the push amplitude across repeated trials.
    pub push_amplitude_spread: f64,
    pub hop_period: f64,
    /// Upward boom force during lift as a multiple of the total weight.
    pub hop_lift_ratio: f64,
    pub hop_lift_duration: f64,
    /// Hip swing amplitude during flight, rad.
    pub hop_swing_amplitude: f64,
    /// Fraction of the hop period over which the airborne swing completes.
    pub hop_swing_fraction: f64,
    pub noise_position: f64,
    pub noise_velocity: f64,
    /// Probability of flipping each contact flag.
    pub flag_corruption: f64,
    pub seed: u64,
    /// Feet closer than this while descending are flagged as in contact, m.
    pub contact_margin: f64,
    /// Gap below which contacts enter the dynamics, m.
    pub activation_threshold: f64,
    pub hip_gains: [f64; 2],
    pub knee_gains: [f64; 2],
    /// Airborne joint gains `[kp, kd]` in 1/s^2 and 1/s, scaled by the joint inertia.
    pub swing_gains: [f64; 2],
    pub attitude_gains: [f64; 2],
    /// Horizontal spring and damper holding the base near the origin.
    pub boom_gains: [f64; 2],
    /// Constant upward boom force as a fraction of the total weight.
    pub boom_support: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Monoped,
            kind: ScenarioKind::Push,
            base_mass: 8.0,
            monoped: MonopedParams::default(),
            terrain: TerrainSchedule::alternating(3.0, 5),
            dt: 0.01,
            dt_buffer: 0.01,
            duration: 15.0,
            push_amplitude: 750.0,
            push_period: 2.0,
            push_amplitude_spread: 0.2,
            hop_period: 0.6,
            hop_lift_ratio: 1.5,
            hop_lift_duration: 0.08,
            hop_swing_amplitude: 0.1,
            hop_swing_fraction: 0.35,
            noise_position: 1e-4,
            noise_velocity: 1e-3,
            flag_corruption: 0.0,
            seed: 0,
            contact_margin: 0.01,
            activation_threshold: 0.02,
            hip_gains: [100.0, 2.0],
            knee_gains: [60.0, 0.5],
            swing_gains: [900.0, 60.0],
            attitude_gains: [150.0, 2.0],
            boom_gains: [4000.0, 200.0],
            boom_support: 0.0,
        }
    }
}

impl ScenarioConfig {
    /// Variant for repeated trial `k`: next seed and a push amplitude drawn
    /// uniformly within `push_amplitude_spread` of the nominal one.
    pub fn trial(&self, k: usize) -> Self {
        let seed = self.seed.wrapping_add(k as u64);
        let u: f64 = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_7a1a).gen_range(-1.0..=1.0);
        Self {
            seed,
            push_amplitude: self.push_amplitude * (1.0 + self.push_amplitude_spread * u),
            ..self.clone()
        }
    }

    pub fn noise_free(mut self) -> Self {
        self.noise_position = 0.0;
        self.noise_velocity = 0.0;
        self.flag_corruption = 0.0;
        self
    }

    pub fn steps_per_sample(&self) -> Result<usize> {
        let ratio = self.dt_buffer / self.dt;
        let n = ratio.round();
        if !(self.dt > 0.0) || n < 1.0 || (ratio - n).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "dt {} must divide dt_buffer {}",
                self.dt, self.dt_buffer
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.steps_per_sample()?;
        self.terrain.validate()?;
        if !(self.duration > 0.0) {
            return Err(Error::InvalidArgument("duration must be positive".into()));
        }
        if !(self.base_mass > 0.0) {
            return Err(Error::InvalidArgument("base mass must be positive".into()));
        }
        if !(self.noise_position >= 0.0 && self.noise_velocity >= 0.0) {
            return Err(Error::InvalidArgument(
                "noise levels must be nonnegative".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.push_amplitude_spread) {
            return Err(Error::InvalidArgument(
                "push amplitude spread must lie in [0, 1)".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.flag_corruption) {
            return Err(Error::InvalidArgument(
                "flag corruption must lie in [0, 1]".into(),
            ));
        }
        if self.kind == ScenarioKind::Hop && self.model != ModelKind::Monoped {
            return Err(Error::InvalidArgument("hopping needs the monoped".into()));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<RobotModel> {
        match self.model {
            ModelKind::Monoped => build_monoped_model(self.base_mass, &self.monoped),
            ModelKind::Box => {
                let he = box_half_extents();
                build_box_model(self.base_mass, he, solid_box_inertia(self.base_mass, he))
            }
        }
    }

    fn initial_state(&self) -> GeneralizedState {
        match self.model {
            ModelKind::Monoped => monoped_nominal_state(&self.monoped),
            ModelKind::Box => box_resting_state(box_half_extents()),
        }
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            activation_threshold: self.activation_threshold,
            ..SolverSettings::default()
        }
    }
}

fn box_half_extents() -> Vector3<f64> {
    Vector3::new(0.1, 0.1, 0.05)
}

/// Per-sample ground truth alongside the noisy buffer entry.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub t: f64,
    pub mu_true: f64,
    pub state: GeneralizedState,
    /// Contact state produced by the step that ended at this sample.
    pub in_contact: Vec<bool>,
    pub labels: Vec<ContactLabel>,
    pub foot_velocities: Vec<Vector3<f64>>,
    pub foot_gaps: Vec<f64>,
    /// Normal foot velocity right before the contact became active, when a
    /// touchdown happened on this step.
    pub touchdown_speed: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub model: RobotModel,
    pub entries: Vec<BufferEntry>,
    pub truth: Vec<GroundTruth>,
}

struct Controller<'a> {
    cfg: &'a ScenarioConfig,
    params: MonopedParams,
    weight: f64,
}

impl Controller<'_> {
    fn in_lift(&self, t: f64) -> bool {
        self.cfg.kind == ScenarioKind::Hop && (t % self.cfg.hop_period) < self.cfg.hop_lift_duration
    }

    /// Joint torques that hold the robot's weight (less the boom force) on a
    /// grounded foot.
    fn stance_feedforward(
        &self,
        state: &GeneralizedState,
        model: &RobotModel,
        boom_lift: f64,
    ) -> Vec<f64> {
        let kin = model.kinematics(state);
        let foot = model.contact_position(&kin, 0);
        let support = (self.weight - boom_lift).max(0.0);
        let body = model.contact_points[0].body;
        let jac = model.point_jacobian(&kin, body, &foot);
        let eval = model.evaluate(state, self.cfg.activation_threshold);
        (0..model.n_joints())
            .map(|j| eval.bias[6 + j] - jac[(2, 6 + j)] * support)
            .collect()
    }

    /// Joint PD scaled by the free-floating joint inertia, so that the light
    /// airborne leg stays stable at the control rate.
    fn swing_torques(
        &self,
        state: &GeneralizedState,
        model: &RobotModel,
        targets: &[f64; 2],
    ) -> Vec<f64> {
        let [kp, kd] = self.cfg.swing_gains;
        let q = state.joint_positions();
        let qd = state.joint_velocities();
        let accel = DVector::from_fn(2, |j, _| kp * (targets[j] - q[j]) - kd * qd[j]);
        let eval = model.evaluate(state, self.cfg.activation_threshold);
        let joint_inertia = eval
            .mass_matrix
            .clone()
            .cholesky()
            .map(|c| c.inverse().view((6, 6), (2, 2)).into_owned())
            .and_then(|minv| minv.try_inverse());
        match joint_inertia {
            Some(lambda) => (lambda * accel).iter().copied().collect(),
            None => vec![0.0; 2],
        }
    }

    /// Joint torques and base wrench for the current (true) state.
    /// `grounded` is the foot contact state produced by the previous step.
    fn command(
        &self,
        state: &GeneralizedState,
        model: &RobotModel,
        grounded: bool,
    ) -> (Vec<f64>, Vector3<f64>, Vector3<f64>) {
        let t = state.time;
        let mut force = Vector3::zeros();
        if self.cfg.kind == ScenarioKind::Push {
            force.x = self.cfg.push_amplitude
                * (2.0 * std::f64::consts::PI * t / self.cfg.push_period).sin();
        }
        if self.cfg.model == ModelKind::Monoped {
            let [kx, dx] = self.cfg.boom_gains;
            force.x += -kx * state.q[0] - dx * state.upsilon[0];
            force.y += -kx * state.q[1] - dx * state.upsilon[1];
            force.z += self.cfg.boom_support * self.weight;
        }
        if self.in_lift(t) {
            force.z = self.cfg.hop_lift_ratio * self.weight;
        }
        let tau = match self.cfg.model {
            ModelKind::Box => vec![0.0; model.n_actuated()],
            ModelKind::Monoped => {
                let q = state.joint_positions();
                let qd = state.joint_velocities();
                let mut hip_target = self.params.nominal_hip;
                if self.cfg.kind == ScenarioKind::Hop && !grounded {
                    // one full swing cycle per flight, back at nominal for touchdown
                    let phase = (t % self.cfg.hop_period) / self.cfg.hop_period;
                    if phase < self.cfg.hop_swing_fraction {
                        hip_target += self.cfg.hop_swing_amplitude
                            * (2.0 * std::f64::consts::PI * phase / self.cfg.hop_swing_fraction)
                                .sin();
                    }
                }
                let targets = [hip_target, self.params.nominal_knee];
                let mut tau = if grounded {
                    let [kph, kdh] = self.cfg.hip_gains;
                    let [kpk, kdk] = self.cfg.knee_gains;
                    vec![
                        kph * (targets[0] - q[0]) - kdh * qd[0],
                        kpk * (targets[1] - q[1]) - kdk * qd[1],
                    ]
                } else {
                    self.swing_torques(state, model, &targets)
                };
                if grounded {
                    let ff = self.stance_feedforward(state, model, force.z);
                    tau.iter_mut().zip(ff).for_each(|(t, f)| *t += f);
                }
                tau
            }
        };
        let [kpa, kda] = self.cfg.attitude_gains;
        let rot = so3::log(&state.orientation().to_rotation_matrix());
        let torque = if self.cfg.model == ModelKind::Monoped {
            -kpa * rot - kda * state.angular_velocity()
        } else {
            Vector3::zeros()
        };
        (tau, force, torque)
    }
}

fn foot_kinematics(model: &RobotModel, state: &GeneralizedState) -> (Vec<f64>, Vec<Vector3<f64>>) {
    let kin = model.kinematics(state);
    (0..model.contact_points.len())
        .map(|k| {
            (
                model.contact_position(&kin, k).z,
                model.contact_velocity(&kin, k),
            )
        })
        .unzip()
}

/// Simulates the scenario with the hard contact model and samples noisy
/// buffer entries every `dt_buffer`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioRun> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    let settings = cfg.solver_settings();
    let controller = Controller {
        cfg,
        params: cfg.monoped.clone(),
        weight: model.total_mass() * model.gravity.norm(),
    };
    let n_sub = cfg.steps_per_sample()?;
    let n_samples = (cfg.duration / cfg.dt_buffer).round() as usize;
    let n_c = model.contact_points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pos_noise = Normal::new(0.0, cfg.noise_position.max(0.0))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let vel_noise = Normal::new(0.0, cfg.noise_velocity.max(0.0))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let mut state = cfg.initial_state();
    let mut in_contact = vec![true; n_c];
    let mut labels = vec![ContactLabel::Clamping; n_c];
    let mut touchdown = vec![None; n_c];
    let mut entries = Vec::with_capacity(n_samples + 1);
    let mut truth = Vec::with_capacity(n_samples + 1);
    for i in 0..=n_samples {
        // sample times are exact multiples of dt_buffer
        state.time = i as f64 * cfg.dt_buffer;
        let (tau, force, torque) =
            controller.command(&state, &model, in_contact.first() == Some(&true));
        let (gaps, foot_vel) = foot_kinematics(&model, &state);
        let flags: Vec<bool> = (0..n_c)
            .map(|k| {
                let approaching = gaps[k] < cfg.contact_margin && foot_vel[k].z < 0.0;
                let flag = in_contact[k] || approaching;
                if cfg.flag_corruption > 0.0 && rng.gen::<f64>() < cfg.flag_corruption {
                    !flag
                } else {
                    flag
                }
            })
            .collect();
        let mut noisy = state.clone();
        if cfg.noise_position > 0.0 || cfg.noise_velocity > 0.0 {
            let nv = model.nv();
            let delta = DVector::from_fn(nv, |_, _| pos_noise.sample(&mut rng));
            noisy = crate::model::retract(&noisy, &delta);
            for j in 0..nv {
                noisy.upsilon[j] += vel_noise.sample(&mut rng);
            }
        }
        let measured_feet: Vec<Vector3<f64>> = foot_vel
            .iter()
            .map(|v| {
                v + Vector3::new(
                    vel_noise.sample(&mut rng),
                    vel_noise.sample(&mut rng),
                    vel_noise.sample(&mut rng),
                )
            })
            .collect();
        entries.push(BufferEntry::from_state(
            &noisy,
            &tau,
            force,
            torque,
            flags,
            measured_feet,
        ));
        truth.push(GroundTruth {
            t: state.time,
            mu_true: cfg.terrain.mu_at(state.time),
            state: state.clone(),
            in_contact: in_contact.clone(),
            labels: labels.clone(),
            foot_velocities: foot_vel.clone(),
            foot_gaps: gaps.clone(),
            touchdown_speed: touchdown.clone(),
        });
        if i == n_samples {
            break;
        }
        let actuation = Actuation::with_base_wrench(&model, DVector::from_vec(tau), force, torque);
        touchdown = vec![None; n_c];
        for _ in 0..n_sub {
            let mu = cfg.terrain.mu_at(state.time);
            let (_, pre_vel) = foot_kinematics(&model, &state);
            let step =
                step_dynamics(&model, &state, &actuation, mu, cfg.dt, &settings).map_err(|e| {
                    Error::Scenario {
                        step: i,
                        source: Box::new(e),
                    }
                })?;
            let mut now_contact = vec![false; n_c];
            let mut now_labels = vec![ContactLabel::Open; n_c];
            for (pos, &k) in step.solution.contact_indices.iter().enumerate() {
                if step.solution.lambda_k(pos).z > 0.0 {
                    now_contact[k] = true;
                    now_labels[k] = step.solution.labels[pos];
                }
            }
            for k in 0..n_c {
                if now_contact[k] && !in_contact[k] {
                    touchdown[k] = Some(-pre_vel[k].z);
                }
            }
            in_contact = now_contact;
            labels = now_labels;
            state = step.state;
        }
    }
    Ok(ScenarioRun {
        model,
        entries,
        truth,
    })
}
