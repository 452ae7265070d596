//! Pre-training, lesioning, rehabilitation sessions and multi-seed aggregation.
//!
//! A session runs `trials` trials for one seed: the controller picks an
//! amplitude, the patient attempts the task, and the error norm feeds the next
//! update. An experiment repeats the session over every seed, in parallel, and
//! aggregates per-trial statistics over the seeds that completed. Results are
//! merged in seed order, so they do not depend on scheduling or thread count.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{self, ControllerConfig, ControllerState, UpdateLaw};
use crate::elbow::{simulate, JointParams, JointSpread, JointState};
use crate::error::{Result, SimError};
use crate::narx::{
    train_with, NarxNetwork, NarxTopology, NetworkVariant, TrainOptions, TrainingReport,
};
use crate::seeding::{stream_rng, stream_seed, Stream};
use crate::task::{error_l2_norm, sample_task, target_motor_command, TaskSpec, Trajectory, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Healthy,
    Stroke,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::Healthy => "healthy",
            Condition::Stroke => "stroke",
        }
    }
}

/// Joint state at the start of every trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialCondition {
    /// θ(0) = 0, θ̇(0) = A·ω: a perfect motor command tracks the task with no transient.
    #[default]
    Tracking,
    /// θ(0) = 0, θ̇(0) = 0.
    Rest,
}

impl InitialCondition {
    pub fn state(self, task: &TaskSpec) -> JointState {
        match self {
            InitialCondition::Tracking => {
                JointState::tracking(task.amplitude, task.angular_frequency)
            }
            InitialCondition::Rest => JointState::rest(),
        }
    }
}

/// What plays the patient in a session.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatientModel {
    /// Pre-trained NARX network driving the joint model.
    #[default]
    Narx,
    /// Motor command equals the target command.
    Perfect,
    /// Motor command is identically zero.
    Silent,
    /// Every trial reports the given error norm.
    ConstantError(f64),
}

/// Everything a single trial needs besides the amplitude and the motor model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSetup {
    /// Task template; its amplitude is replaced per trial.
    pub task: TaskSpec,
    pub joint: JointParams,
    pub initial: InitialCondition,
}

/// One scenario: network variant × condition × update law, over a set of seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub variant: NetworkVariant,
    pub condition: Condition,
    pub law: UpdateLaw,
    pub controller: ControllerConfig,
    /// Template whose amplitude is the ultimate amplitude `r*`.
    pub task: TaskSpec,
    pub initial_condition: InitialCondition,
    pub joint: JointParams,
    /// Per-seed Gaussian perturbation of the joint parameters; `None` uses the means.
    pub joint_spread: Option<JointSpread>,
    pub topology: NarxTopology,
    /// Hidden nodes removed per layer for [`Condition::Stroke`].
    pub lesion_removals: Vec<usize>,
    /// Pre-training options; `train.epochs` is the pre-training epoch count.
    pub train: TrainOptions,
    /// Fine-tuning epochs after each trial (0 keeps the network frozen).
    pub per_trial_epochs: usize,
    pub trials: usize,
    pub seeds: Vec<u64>,
    pub master_seed: u64,
    pub patient: PatientModel,
}

impl ScenarioConfig {
    /// Defaults for one scenario: 20 trials, 100 seeds, 100 pre-training epochs.
    pub fn new(variant: NetworkVariant, condition: Condition, law: UpdateLaw) -> Self {
        let controller = ControllerConfig::default();
        Self {
            name: format!("{}_{}_{}", variant.name(), condition.name(), law.name()),
            variant,
            condition,
            law,
            controller,
            task: TaskSpec {
                amplitude: controller.r_star,
                angular_frequency: 2.0 * std::f64::consts::PI / 3.0,
                duration: 30.0,
                sample_rate: 100.0,
            },
            initial_condition: InitialCondition::Tracking,
            joint: JointParams::default(),
            joint_spread: None,
            topology: NarxTopology::for_variant(variant),
            lesion_removals: variant.stroke_removals(),
            train: TrainOptions::default(),
            per_trial_epochs: 0,
            trials: 20,
            seeds: (0..100).collect(),
            master_seed: 0,
            patient: PatientModel::Narx,
        }
    }

    /// The eight combinations of variant, condition and law sharing this template.
    pub fn matrix(template: &ScenarioConfig) -> Vec<ScenarioConfig> {
        let mut out = Vec::with_capacity(8);
        for variant in [NetworkVariant::Narx1, NetworkVariant::Narx2] {
            for condition in [Condition::Healthy, Condition::Stroke] {
                for law in [UpdateLaw::Ilc, UpdateLaw::RuleBased] {
                    let mut c = template.clone();
                    c.name = format!("{}_{}_{}", variant.name(), condition.name(), law.name());
                    c.variant = variant;
                    c.condition = condition;
                    c.law = law;
                    c.topology.hidden_layers = variant.hidden_layers();
                    c.lesion_removals = variant.stroke_removals();
                    out.push(c);
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SimError::InvalidScenario(m));
        if self.trials < 1 {
            return bad("trials must be >= 1".into());
        }
        if self.seeds.is_empty() {
            return bad("seed list is empty".into());
        }
        if self.train.epochs < 1 {
            return bad("pretrain epochs must be >= 1".into());
        }
        self.task.validate()?;
        self.joint.validate()?;
        self.controller.validate()?;
        self.topology.validate()?;
        if (self.task.amplitude - self.controller.r_star).abs() > 1e-12 {
            return bad(format!(
                "task amplitude {} differs from controller r_star {}",
                self.task.amplitude, self.controller.r_star
            ));
        }
        if self.lesion_removals.len() != self.topology.hidden_layers.len() {
            return bad("lesion_removals needs one count per hidden layer".into());
        }
        if let Some((i, (&k, &w))) = self
            .lesion_removals
            .iter()
            .zip(&self.topology.hidden_layers)
            .enumerate()
            .find(|(_, (&k, &w))| k > w)
        {
            return bad(format!(
                "cannot remove {k} nodes from hidden layer {i} of width {w}"
            ));
        }
        Ok(())
    }

    /// Joint parameters used for `seed` (perturbed when `joint_spread` is set).
    pub fn joint_for_seed(&self, seed: u64) -> JointParams {
        match &self.joint_spread {
            Some(spread) => {
                let mut rng = stream_rng(self.master_seed, seed, Stream::JointPerturbation);
                self.joint.perturbed(spread, &mut rng)
            }
            None => self.joint,
        }
    }

    pub fn setup_for_seed(&self, seed: u64) -> TrialSetup {
        TrialSetup {
            task: self.task,
            joint: self.joint_for_seed(seed),
            initial: self.initial_condition,
        }
    }
}

/// Produces a motor command for a target motor command.
pub trait MotorModel {
    fn motor_command(&self, target: &Trajectory) -> Result<Trajectory>;

    /// Optional learning between trials.
    fn adapt(&mut self, _target: &Trajectory, _epochs: usize) -> Result<()> {
        Ok(())
    }
}

impl MotorModel for NarxNetwork {
    fn motor_command(&self, target: &Trajectory) -> Result<Trajectory> {
        self.forward_closed_loop(target)
    }

    fn adapt(&mut self, target: &Trajectory, epochs: usize) -> Result<()> {
        if epochs == 0 {
            return Ok(());
        }
        let opts = TrainOptions {
            epochs,
            ..TrainOptions::default()
        };
        let (net, _) = train_with(self, target, target, &opts)?;
        *self = net;
        Ok(())
    }
}

/// Reproduces the target command exactly.
#[derive(Debug, Clone, Copy, Default)]
pub struct PerfectMotor;

impl MotorModel for PerfectMotor {
    fn motor_command(&self, target: &Trajectory) -> Result<Trajectory> {
        Ok(target.clone())
    }
}

/// Produces no torque.
#[derive(Debug, Clone, Copy, Default)]
pub struct SilentMotor;

impl MotorModel for SilentMotor {
    fn motor_command(&self, target: &Trajectory) -> Result<Trajectory> {
        target.with_samples(vec![0.0; target.len()], Unit::NewtonMeters)
    }
}

/// Signals of one executed trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub error_norm: f64,
    pub target_angle: Trajectory,
    pub target_command: Trajectory,
    pub motor_command: Trajectory,
    pub angle: Trajectory,
}

/// Runs one trial at `amplitude`: task → target command → motor model → joint → error.
pub fn run_trial<M: MotorModel + ?Sized>(
    motor: &M,
    amplitude: f64,
    setup: &TrialSetup,
) -> Result<TrialOutcome> {
    let task = setup.task.with_amplitude(amplitude);
    let target_angle = sample_task(&task)?;
    let target_command = target_motor_command(&task, &setup.joint)?;
    let motor_command = motor.motor_command(&target_command)?;
    let angle = simulate(&motor_command, &setup.joint, setup.initial.state(&task))?;
    let error_norm = error_l2_norm(&target_angle, &angle)?;
    Ok(TrialOutcome {
        error_norm,
        target_angle,
        target_command,
        motor_command,
        angle,
    })
}

/// Session-level view of a patient: one error norm per attempted amplitude.
pub trait Patient {
    fn attempt(&mut self, amplitude: f64) -> Result<f64>;
}

/// Motor model plus joint dynamics, optionally fine-tuned after each trial.
#[derive(Debug, Clone)]
pub struct SimulatedPatient<M> {
    pub motor: M,
    pub setup: TrialSetup,
    pub per_trial_epochs: usize,
}

impl<M: MotorModel> Patient for SimulatedPatient<M> {
    fn attempt(&mut self, amplitude: f64) -> Result<f64> {
        let outcome = run_trial(&self.motor, amplitude, &self.setup)?;
        if self.per_trial_epochs > 0 {
            self.motor
                .adapt(&outcome.target_command, self.per_trial_epochs)?;
        }
        Ok(outcome.error_norm)
    }
}

/// Reports the same error on every trial.
#[derive(Debug, Clone, Copy)]
pub struct ConstantErrorPatient(pub f64);

impl Patient for ConstantErrorPatient {
    fn attempt(&mut self, _amplitude: f64) -> Result<f64> {
        Ok(self.0)
    }
}

/// One trial of a session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub trial: usize,
    /// rad
    pub amplitude: f64,
    pub error_norm: f64,
    /// Update term that produced this trial's amplitude, before clamping (0 on trial 1).
    pub update: f64,
    pub clamped: bool,
}

/// Pre-trains the network for `seed` on the ultimate task and lesions it for stroke scenarios.
pub fn prepare_patient(cfg: &ScenarioConfig, seed: u64) -> Result<(NarxNetwork, TrainingReport)> {
    let (healthy, report) = pretrain(cfg, seed)?;
    Ok((apply_condition(cfg, seed, healthy)?, report))
}

fn pretrain(cfg: &ScenarioConfig, seed: u64) -> Result<(NarxNetwork, TrainingReport)> {
    cfg.validate()?;
    let net = NarxNetwork::init(
        cfg.topology.clone(),
        stream_seed(cfg.master_seed, seed, Stream::WeightInit),
    )?;
    let tau = target_motor_command(&cfg.task, &cfg.joint_for_seed(seed))?;
    train_with(&net, &tau, &tau, &cfg.train)
}

fn apply_condition(cfg: &ScenarioConfig, seed: u64, net: NarxNetwork) -> Result<NarxNetwork> {
    match cfg.condition {
        Condition::Healthy => Ok(net),
        Condition::Stroke => net.lesion(
            &cfg.lesion_removals,
            stream_seed(cfg.master_seed, seed, Stream::Lesion),
        ),
    }
}

/// Drives `patient` through `trials` trials under `law`.
pub fn run_session_with<P: Patient + ?Sized>(
    patient: &mut P,
    law: UpdateLaw,
    controller: &ControllerConfig,
    trials: usize,
    seed: u64,
) -> Result<Vec<TrialRecord>> {
    controller.validate()?;
    let mut state = ControllerState::initial(controller);
    let mut records = Vec::with_capacity(trials);
    for k in 1..=trials {
        let upd = controller::update(law, &state, controller)?;
        let error_norm = patient
            .attempt(upd.amplitude)
            .map_err(|e| SimError::Trial {
                seed,
                trial: k,
                source: Box::new(e),
            })?;
        records.push(TrialRecord {
            seed,
            trial: k,
            amplitude: upd.amplitude,
            error_norm,
            update: upd.step,
            clamped: upd.clamped,
        });
        state = state.advance(upd.amplitude, error_norm);
    }
    Ok(records)
}

fn session_from_network(
    cfg: &ScenarioConfig,
    seed: u64,
    net: NarxNetwork,
) -> Result<Vec<TrialRecord>> {
    let mut patient = SimulatedPatient {
        motor: net,
        setup: cfg.setup_for_seed(seed),
        per_trial_epochs: cfg.per_trial_epochs,
    };
    run_session_with(&mut patient, cfg.law, &cfg.controller, cfg.trials, seed)
}

/// Full session for one seed, including patient preparation.
pub fn run_session(cfg: &ScenarioConfig, seed: u64) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let setup = cfg.setup_for_seed(seed);
    let (law, ctl, trials) = (cfg.law, &cfg.controller, cfg.trials);
    match cfg.patient {
        PatientModel::Narx => {
            let (net, _) = prepare_patient(cfg, seed)?;
            session_from_network(cfg, seed, net)
        }
        PatientModel::Perfect => {
            let mut p = SimulatedPatient {
                motor: PerfectMotor,
                setup,
                per_trial_epochs: 0,
            };
            run_session_with(&mut p, law, ctl, trials, seed)
        }
        PatientModel::Silent => {
            let mut p = SimulatedPatient {
                motor: SilentMotor,
                setup,
                per_trial_epochs: 0,
            };
            run_session_with(&mut p, law, ctl, trials, seed)
        }
        PatientModel::ConstantError(e) => {
            run_session_with(&mut ConstantErrorPatient(e), law, ctl, trials, seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub seed: u64,
    pub records: Vec<TrialRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub trial: usize,
    pub error_mean: f64,
    pub error_std: f64,
    pub amplitude_mean: f64,
    pub amplitude_std: f64,
}

/// Per-trial statistics over the seeds that completed. Standard deviations are
/// population values (divide by n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub per_trial: Vec<TrialStats>,
    /// Amplitude std averaged over trials.
    pub mean_amplitude_std: f64,
    pub seeds: Vec<u64>,
    pub std_kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub scenario: String,
    pub stats: AggregateStats,
    /// Successful sessions, sorted by seed.
    pub sessions: Vec<SessionResult>,
    pub failures: Vec<SeedFailure>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aggregates sessions (any order) over seeds.
pub fn aggregate(sessions: &[SessionResult]) -> AggregateStats {
    let mut sorted: Vec<&SessionResult> = sessions.iter().collect();
    sorted.sort_by_key(|s| s.seed);
    let trials = sorted.iter().map(|s| s.records.len()).min().unwrap_or(0);
    let per_trial: Vec<TrialStats> = (0..trials)
        .map(|k| {
            let errs: Vec<f64> = sorted.iter().map(|s| s.records[k].error_norm).collect();
            let amps: Vec<f64> = sorted.iter().map(|s| s.records[k].amplitude).collect();
            let (error_mean, error_std) = mean_std(&errs);
            let (amplitude_mean, amplitude_std) = mean_std(&amps);
            TrialStats {
                trial: k + 1,
                error_mean,
                error_std,
                amplitude_mean,
                amplitude_std,
            }
        })
        .collect();
    let mean_amplitude_std = if per_trial.is_empty() {
        0.0
    } else {
        per_trial.iter().map(|t| t.amplitude_std).sum::<f64>() / per_trial.len() as f64
    };
    AggregateStats {
        per_trial,
        mean_amplitude_std,
        seeds: sorted.iter().map(|s| s.seed).collect(),
        std_kind: "population".into(),
    }
}

fn collect_outcome(name: &str, results: Vec<(u64, Result<Vec<TrialRecord>>)>) -> ExperimentOutcome {
    let mut sessions = Vec::new();
    let mut failures = Vec::new();
    for (seed, r) in results {
        match r {
            Ok(records) => sessions.push(SessionResult { seed, records }),
            Err(e) => failures.push(SeedFailure {
                seed,
                error: e.to_string(),
            }),
        }
    }
    sessions.sort_by_key(|s| s.seed);
    failures.sort_by_key(|f| f.seed);
    ExperimentOutcome {
        scenario: name.to_string(),
        stats: aggregate(&sessions),
        sessions,
        failures,
    }
}

/// Runs every seed of the scenario (in parallel on the current rayon pool) and aggregates.
pub fn run_experiment(cfg: &ScenarioConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let results: Vec<(u64, Result<Vec<TrialRecord>>)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| (seed, run_session(cfg, seed)))
        .collect();
    Ok(collect_outcome(&cfg.name, results))
}

/// Same as `run_experiment` for a custom patient factory (one fresh patient per seed).
pub fn run_experiment_with<P, F>(cfg: &ScenarioConfig, make_patient: F) -> Result<ExperimentOutcome>
where
    P: Patient,
    F: Fn(u64) -> Result<P> + Sync,
{
    cfg.validate()?;
    let results: Vec<(u64, Result<Vec<TrialRecord>>)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let r = make_patient(seed).and_then(|mut p| {
                run_session_with(&mut p, cfg.law, &cfg.controller, cfg.trials, seed)
            });
            (seed, r)
        })
        .collect();
    Ok(collect_outcome(&cfg.name, results))
}

/// Inputs that determine a pre-trained network.
#[derive(Serialize)]
struct PretrainKey<'a> {
    topology: &'a NarxTopology,
    train: &'a TrainOptions,
    task: &'a TaskSpec,
    joint: JointParams,
    master_seed: u64,
    seed: u64,
}

fn pretrain_key(cfg: &ScenarioConfig, seed: u64) -> String {
    serde_json::to_string(&PretrainKey {
        topology: &cfg.topology,
        train: &cfg.train,
        task: &cfg.task,
        joint: cfg.joint_for_seed(seed),
        master_seed: cfg.master_seed,
        seed,
    })
    .expect("pretrain key serializes")
}

/// Runs several scenarios, pre-training each distinct (network, seed) once and
/// sharing it between scenarios that differ only in condition or update law.
pub fn run_scenarios(cfgs: &[ScenarioConfig]) -> Result<Vec<ExperimentOutcome>> {
    for c in cfgs {
        c.validate()?;
    }
    let mut jobs: BTreeMap<String, (usize, u64)> = BTreeMap::new();
    for (i, c) in cfgs.iter().enumerate() {
        if c.patient != PatientModel::Narx {
            continue;
        }
        for &seed in &c.seeds {
            jobs.entry(pretrain_key(c, seed)).or_insert((i, seed));
        }
    }
    let jobs: Vec<(String, (usize, u64))> = jobs.into_iter().collect();
    let trained: BTreeMap<String, std::result::Result<NarxNetwork, String>> = jobs
        .par_iter()
        .map(|(key, (i, seed))| {
            let r = pretrain(&cfgs[*i], *seed)
                .map(|(n, _)| n)
                .map_err(|e| e.to_string());
            (key.clone(), r)
        })
        .collect();

    let pairs: Vec<(usize, u64)> = cfgs
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let results: Vec<(usize, u64, Result<Vec<TrialRecord>>)> = pairs
        .par_iter()
        .map(|&(i, seed)| {
            let c = &cfgs[i];
            let r = if c.patient == PatientModel::Narx {
                match &trained[&pretrain_key(c, seed)] {
                    Ok(net) => apply_condition(c, seed, net.clone())
                        .and_then(|n| session_from_network(c, seed, n)),
                    Err(msg) => Err(SimError::InvalidScenario(format!(
                        "pre-training failed: {msg}"
                    ))),
                }
            } else {
                run_session(c, seed)
            };
            (i, seed, r)
        })
        .collect();

    let mut grouped: Vec<Vec<(u64, Result<Vec<TrialRecord>>)>> =
        cfgs.iter().map(|_| Vec::new()).collect();
    for (i, seed, r) in results {
        grouped[i].push((seed, r));
    }
    Ok(cfgs
        .iter()
        .zip(grouped)
        .map(|(c, g)| collect_outcome(&c.name, g))
        .collect())
}

/// `(amplitude, mean error)` pairs for one seed's records; repeated amplitudes
/// are merged by averaging their errors. Sorted by amplitude.
pub fn mean_error_by_amplitude(records: &[TrialRecord]) -> Vec<(f64, f64)> {
    let mut groups: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
    for r in records {
        // non-negative floats order like their bit patterns
        let e = groups
            .entry(r.amplitude.to_bits())
            .or_insert((r.amplitude, 0.0, 0));
        e.1 += r.error_norm;
        e.2 += 1;
    }
    groups
        .into_values()
        .map(|(a, s, n)| (a, s / n as f64))
        .collect()
}
