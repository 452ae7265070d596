//! Bayesian-regularized Levenberg–Marquardt training of the closed-loop network.
//!
//! Objective: `F = β·E_D + α·E_W` with `E_D` the sum of squared normalized output
//! errors over the closed-loop run and `E_W` the sum of squared parameters.
//!
//! Two independent derivative routes exist:
//! - [`objective_gradient`] runs backpropagation through time over the unrolled
//!   closed loop;
//! - [`jacobian`] propagates output sensitivities forward in time
//!   (`∂y(t)/∂w = ∂f/∂w + Σ_d ∂f/∂y(t−d) · ∂y(t−d)/∂w`) and feeds the
//!   Gauss–Newton system.
//!
//! After each accepted step the hyperparameters are re-estimated:
//! `γ = N_w − α·tr((β·JᵀJ + α·I)⁻¹)`, `α = γ / (2E_W)`, `β = (N − γ) / (2E_D)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{NarxNetwork, Normalization};
use crate::error::{Result, SimError};
use crate::task::Trajectory;

/// Regularization hyperparameters of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regularization {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for Regularization {
    /// Starting point of the evidence iteration: α = 0, β = 1.
    fn default() -> Self {
        Self {
            alpha: 0.0,
            beta: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    pub mu_init: f64,
    pub mu_dec: f64,
    pub mu_inc: f64,
    pub mu_max: f64,
    /// Re-estimate α, β after each accepted step. When false, α = 0 and β = 1 throughout.
    pub bayesian: bool,
    /// Teacher-forced (series-parallel) epochs run before closed-loop training.
    pub series_parallel_warmup: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 100,
            mu_init: 1e-3,
            mu_dec: 0.1,
            mu_inc: 10.0,
            mu_max: 1e10,
            bayesian: true,
            series_parallel_warmup: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Objective before the step, under the hyperparameters used for acceptance.
    pub objective_before: f64,
    /// Objective after the accepted step, same hyperparameters.
    pub objective_after: f64,
    pub sse: f64,
    pub weight_sq_sum: f64,
    pub gamma: f64,
    pub alpha_reg: f64,
    pub beta_reg: f64,
    pub mu: f64,
    pub closed_loop: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub epochs_run: usize,
    /// Closed-loop E_D of the network handed to training.
    pub initial_sse: f64,
    /// Closed-loop E_D of the returned network.
    pub final_sse: f64,
    /// Euclidean norm of the final parameter vector.
    pub final_weight_norm: f64,
    pub effective_parameters: f64,
    pub regularization: Regularization,
    pub stop: StopReason,
    pub history: Vec<EpochStats>,
}

/// Why training ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EpochLimit,
    /// No step improved the objective even at maximum damping: a local minimum.
    MaxDamping,
    /// Training data fitted exactly.
    ZeroError,
}

struct Problem {
    u_n: Vec<f64>,
    target_n: Vec<f64>,
}

impl Problem {
    fn new(net: &NarxNetwork, u: &Trajectory, target: &Trajectory) -> Result<Self> {
        u.check_compatible(target)?;
        if u.len() <= net.topology.max_delay() {
            return Err(SimError::IncompatibleTrajectory(
                "training sequence shorter than the maximum delay".into(),
            ));
        }
        let norm = net.normalization.unwrap_or_default();
        Ok(Self {
            u_n: u
                .samples()
                .iter()
                .map(|&v| norm.normalize_input(v))
                .collect(),
            target_n: target
                .samples()
                .iter()
                .map(|&v| norm.normalize_output(v))
                .collect(),
        })
    }
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Output sequence; teacher forcing replaces fed-back outputs with the target.
fn run(net: &NarxNetwork, p: &Problem, closed_loop: bool) -> Result<Vec<f64>> {
    if closed_loop {
        return net.forward_normalized(&p.u_n);
    }
    let mut acts = net.new_activations();
    let mut y = Vec::with_capacity(p.u_n.len());
    for t in 0..p.u_n.len() {
        net.fill_inputs(&mut acts, t, &p.u_n, &p.target_n);
        let v = net.eval(&mut acts);
        if !v.is_finite() {
            return Err(SimError::NetworkDivergence { step: t });
        }
        y.push(v);
    }
    Ok(y)
}

fn sse(net: &NarxNetwork, p: &Problem, closed_loop: bool) -> Result<f64> {
    let y = run(net, p, closed_loop)?;
    Ok(y.iter()
        .zip(&p.target_n)
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// `F = β·E_D + α·E_W` in normalized units for the closed-loop run.
pub fn objective(
    net: &NarxNetwork,
    u: &Trajectory,
    target: &Trajectory,
    reg: Regularization,
) -> Result<f64> {
    let p = Problem::new(net, u, target)?;
    Ok(reg.beta * sse(net, &p, true)? + reg.alpha * sum_sq(&net.params()))
}

/// Gradient of the closed-loop objective by backpropagation through time.
pub fn objective_gradient(
    net: &NarxNetwork,
    u: &Trajectory,
    target: &Trajectory,
    reg: Regularization,
) -> Result<(f64, Vec<f64>)> {
    let p = Problem::new(net, u, target)?;
    let n = p.u_n.len();
    let fb = &net.topology.feedback_delays;
    let n_exo = net.topology.exogenous_delays.len();

    let mut y = Vec::with_capacity(n);
    let mut tape = Vec::with_capacity(n);
    let mut acts = net.new_activations();
    for t in 0..n {
        net.fill_inputs(&mut acts, t, &p.u_n, &y);
        let v = net.eval(&mut acts);
        if !v.is_finite() {
            return Err(SimError::NetworkDivergence { step: t });
        }
        y.push(v);
        tape.push(acts.clone());
    }

    let params = net.params();
    let mut grad = vec![0.0; params.len()];
    let mut grad_x = vec![0.0; net.topology.input_count()];
    // dF/dy(t) arriving from later steps through the feedback taps
    let mut pending = vec![0.0; n];
    let mut ed = 0.0;
    for t in (0..n).rev() {
        let e = y[t] - p.target_n[t];
        ed += e * e;
        let lambda = 2.0 * reg.beta * e + pending[t];
        net.backprop(&tape[t], lambda, &mut grad, &mut grad_x);
        for (k, &d) in fb.iter().enumerate() {
            if t >= d {
                pending[t - d] += grad_x[n_exo + k];
            }
        }
    }
    for (g, w) in grad.iter_mut().zip(&params) {
        *g += 2.0 * reg.alpha * w;
    }
    Ok((reg.beta * ed + reg.alpha * sum_sq(&params), grad))
}

fn residuals_and_jacobian(
    net: &NarxNetwork,
    p: &Problem,
    closed_loop: bool,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = p.u_n.len();
    let np = net.param_count();
    let fb = &net.topology.feedback_delays;
    let n_exo = net.topology.exogenous_delays.len();

    // row-major sensitivities, one row per time step
    let mut sens = vec![0.0; n * np];
    let mut y = Vec::with_capacity(n);
    let mut acts = net.new_activations();
    let mut grad_x = vec![0.0; net.topology.input_count()];
    for t in 0..n {
        let history = if closed_loop { &y } else { &p.target_n };
        net.fill_inputs(&mut acts, t, &p.u_n, history);
        let v = net.eval(&mut acts);
        if !v.is_finite() {
            return Err(SimError::NetworkDivergence { step: t });
        }
        y.push(v);
        let (done, rest) = sens.split_at_mut(t * np);
        let row = &mut rest[..np];
        net.backprop(&acts, 1.0, row, &mut grad_x);
        if closed_loop {
            for (k, &d) in fb.iter().enumerate() {
                let g = grad_x[n_exo + k];
                if t >= d && g != 0.0 {
                    let prev = &done[(t - d) * np..(t - d + 1) * np];
                    for (r, s) in row.iter_mut().zip(prev) {
                        *r += g * s;
                    }
                }
            }
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NetworkDivergence { step: t });
        }
    }
    let e: Vec<f64> = y.iter().zip(&p.target_n).map(|(a, b)| a - b).collect();
    Ok((e, DMatrix::from_row_slice(n, np, &sens)))
}

/// Residuals `y − target` (normalized) and their Jacobian with respect to the parameters
/// for the closed-loop run.
pub fn jacobian(
    net: &NarxNetwork,
    u: &Trajectory,
    target: &Trajectory,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let p = Problem::new(net, u, target)?;
    residuals_and_jacobian(net, &p, true)
}

/// Trains with default options for `epochs` epochs.
pub fn train(
    net: &NarxNetwork,
    u: &Trajectory,
    target: &Trajectory,
    epochs: usize,
) -> Result<(NarxNetwork, TrainingReport)> {
    train_with(
        net,
        u,
        target,
        &TrainOptions {
            epochs,
            ..TrainOptions::default()
        },
    )
}

fn effective_parameters(jtj: &DMatrix<f64>, reg: Regularization) -> f64 {
    let np = jtj.nrows();
    if reg.alpha <= 0.0 {
        return np as f64;
    }
    let h = jtj * reg.beta + DMatrix::identity(np, np) * reg.alpha;
    let trace = match h.clone().cholesky() {
        Some(ch) => ch.inverse().trace(),
        None => match h.try_inverse() {
            Some(inv) => inv.trace(),
            None => return np as f64,
        },
    };
    (np as f64 - reg.alpha * trace).clamp(0.0, np as f64)
}

fn reestimate(
    jtj: &DMatrix<f64>,
    reg: Regularization,
    ed: f64,
    ew: f64,
    n: usize,
) -> (Regularization, f64) {
    let gamma = effective_parameters(jtj, reg);
    let mut next = reg;
    if ew > 0.0 {
        next.alpha = gamma / (2.0 * ew);
    }
    if ed > 0.0 && (n as f64) > gamma {
        next.beta = (n as f64 - gamma) / (2.0 * ed);
    }
    (next, gamma)
}

/// Levenberg–Marquardt training with optional evidence-framework regularization.
///
/// Freezes the network's normalization from the ranges of `u` and `target` if none is set.
pub fn train_with(
    net: &NarxNetwork,
    u: &Trajectory,
    target: &Trajectory,
    opts: &TrainOptions,
) -> Result<(NarxNetwork, TrainingReport)> {
    if opts.epochs == 0 {
        return Err(SimError::InvalidScenario(
            "training needs at least one epoch".into(),
        ));
    }
    let mut net = net.clone();
    if net.normalization.is_none() {
        net.normalization = Some(Normalization::from_ranges(u.samples(), target.samples()));
    }
    let p = Problem::new(&net, u, target)?;
    let n = p.u_n.len();
    let np = net.param_count();

    let initial_sse = sse(&net, &p, true)?;
    let mut reg = Regularization::default();
    let mut gamma = np as f64;
    let mut mu = opts.mu_init;
    let mut history = Vec::with_capacity(opts.epochs);
    let total = opts.epochs + opts.series_parallel_warmup;

    let mut closed_loop = opts.series_parallel_warmup == 0;
    let (mut e, mut jac) = residuals_and_jacobian(&net, &p, closed_loop)?;
    let mut w = DVector::from_vec(net.params());

    let mut stop = StopReason::EpochLimit;
    for epoch in 1..=total {
        let want_closed = epoch > opts.series_parallel_warmup;
        if want_closed != closed_loop {
            closed_loop = want_closed;
            (e, jac) = residuals_and_jacobian(&net, &p, closed_loop)?;
        }
        let ed = sum_sq(&e);
        let ew = w.norm_squared();
        let f = reg.beta * ed + reg.alpha * ew;

        let jtj = jac.tr_mul(&jac);
        let jte = jac.tr_mul(&DVector::from_column_slice(&e));
        let rhs = -(jte * reg.beta + &w * reg.alpha);

        // `singular` stays true only if every attempt failed to produce a finite step.
        let mut singular = true;
        let accepted = loop {
            let a = &jtj * reg.beta + DMatrix::identity(np, np) * (reg.alpha + mu);
            let step = a.cholesky().map(|ch| ch.solve(&rhs));
            if let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) {
                let w_new = &w + step;
                let mut trial = net.clone();
                trial.set_params(w_new.as_slice());
                let f_new = match sse(&trial, &p, closed_loop) {
                    Ok(ed_new) => reg.beta * ed_new + reg.alpha * w_new.norm_squared(),
                    Err(_) => f64::INFINITY,
                };
                if f_new.is_finite() {
                    singular = false;
                }
                if f_new.is_finite() && f_new < f {
                    mu = (mu * opts.mu_dec).max(1e-20);
                    break Some((trial, w_new, f_new));
                }
            }
            mu *= opts.mu_inc;
            if mu > opts.mu_max {
                break None;
            }
        };

        let Some((trial, w_new, f_new)) = accepted else {
            if singular {
                let final_sse = sse(&net, &p, true)?;
                return Err(SimError::TrainingStalled {
                    report: Box::new(TrainingReport {
                        epochs_run: epoch - 1,
                        initial_sse,
                        final_sse,
                        final_weight_norm: w.norm(),
                        effective_parameters: gamma,
                        regularization: reg,
                        stop: StopReason::MaxDamping,
                        history,
                    }),
                });
            }
            stop = StopReason::MaxDamping;
            break;
        };

        net = trial;
        w = w_new;
        (e, jac) = residuals_and_jacobian(&net, &p, closed_loop)?;
        let ed_new = sum_sq(&e);
        let ew_new = w.norm_squared();
        let used = reg;
        if opts.bayesian {
            let jtj_new = jac.tr_mul(&jac);
            (reg, gamma) = reestimate(&jtj_new, reg, ed_new, ew_new, n);
        }
        history.push(EpochStats {
            epoch,
            objective_before: f,
            objective_after: f_new,
            sse: ed_new,
            weight_sq_sum: ew_new,
            gamma,
            alpha_reg: used.alpha,
            beta_reg: used.beta,
            mu,
            closed_loop,
        });
        if ed_new == 0.0 {
            stop = StopReason::ZeroError;
            break;
        }
    }

    let final_sse = sse(&net, &p, true)?;
    let report = TrainingReport {
        epochs_run: history.len(),
        initial_sse,
        final_sse,
        final_weight_norm: w.norm(),
        effective_parameters: gamma,
        regularization: reg,
        stop,
        history,
    };
    Ok((net, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::narx::{NarxTopology, NetworkVariant};
    use crate::task::Unit;

    fn short_signal(len: usize) -> Trajectory {
        let v = (0..len)
            .map(|i| 0.8 * (i as f64 * 0.21).sin() + 0.1 * (i as f64 * 0.05).cos())
            .collect();
        Trajectory::new(0.0, 0.01, v, Unit::NewtonMeters).unwrap()
    }

    fn tiny_net(seed: u64) -> NarxNetwork {
        NarxNetwork::init(
            NarxTopology::new(vec![0, 1], vec![1, 2], vec![2]).unwrap(),
            seed,
        )
        .unwrap()
    }

    #[test]
    fn jacobian_and_bptt_agree() {
        let u = short_signal(80);
        let target = u.scaled(0.9);
        let net = NarxNetwork::for_variant(NetworkVariant::Narx2, 3).unwrap();
        let reg = Regularization {
            alpha: 0.0,
            beta: 1.0,
        };
        let (_, g) = objective_gradient(&net, &u, &target, reg).unwrap();
        let (e, j) = jacobian(&net, &u, &target).unwrap();
        let jte = j.tr_mul(&DVector::from_vec(e)) * 2.0;
        for (a, b) in g.iter().zip(jte.iter()) {
            assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn one_epoch_does_not_increase_objective() {
        let u = short_signal(200);
        for seed in 0..5 {
            let net = tiny_net(seed);
            let (_, report) = train(&net, &u, &u, 1).unwrap();
            assert_eq!(report.epochs_run, 1);
            let s = &report.history[0];
            assert!(s.objective_after <= s.objective_before);
        }
    }

    #[test]
    fn plain_lm_decreases_sse_monotonically() {
        let u = short_signal(300);
        let net = NarxNetwork::for_variant(NetworkVariant::Narx1, 2).unwrap();
        let opts = TrainOptions {
            epochs: 30,
            bayesian: false,
            ..TrainOptions::default()
        };
        let (_, report) = train_with(&net, &u, &u, &opts).unwrap();
        let mut prev = report.initial_sse;
        for s in &report.history {
            assert!(s.sse <= prev, "epoch {}: {} > {}", s.epoch, s.sse, prev);
            prev = s.sse;
        }
        assert!(report.final_sse < report.initial_sse);
    }

    #[test]
    fn bayesian_history_is_consistent() {
        let u = short_signal(300);
        let net = NarxNetwork::for_variant(NetworkVariant::Narx1, 5).unwrap();
        let (trained, report) = train(&net, &u, &u, 15).unwrap();
        assert!(report.epochs_run <= 15);
        assert!(trained.normalization().is_some());
        for s in &report.history {
            assert!(s.objective_after <= s.objective_before);
            assert!(s.gamma >= 0.0 && s.gamma <= trained.param_count() as f64);
        }
        // first step uses α = 0, β = 1
        assert_eq!(report.history[0].alpha_reg, 0.0);
        assert_eq!(report.history[0].beta_reg, 1.0);
        assert!(report.regularization.alpha > 0.0);
    }

    #[test]
    fn warmup_then_closed_loop() {
        let u = short_signal(200);
        let opts = TrainOptions {
            epochs: 3,
            series_parallel_warmup: 2,
            ..TrainOptions::default()
        };
        let (_, report) = train_with(&tiny_net(1), &u, &u, &opts).unwrap();
        let modes: Vec<bool> = report.history.iter().map(|s| s.closed_loop).collect();
        assert_eq!(modes, vec![false, false, true, true, true]);
    }

    #[test]
    fn zero_epochs_rejected() {
        let u = short_signal(50);
        assert!(train(&tiny_net(0), &u, &u, 0).is_err());
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let u = short_signal(50);
        let t = short_signal(51);
        assert!(train(&tiny_net(0), &u, &t, 1).is_err());
    }
}
