//! Second-order elbow joint: `τ = J·θ̈ + B·θ̇ + K·θ`.
//!
//! [`simulate`] integrates the model with classical RK4 at the sample spacing of the
//! torque trajectory. [`analytic_response`] is the closed-form solution for
//! sinusoidal forcing and serves as the oracle for the integrator.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::task::{Trajectory, Unit};

/// Inertia, viscosity and stiffness of the joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointParams {
    /// kg·m²
    pub inertia: f64,
    /// N·m·s/rad
    pub viscosity: f64,
    /// N·m/rad
    pub stiffness: f64,
}

impl Default for JointParams {
    /// Mean elbow parameters: J = 0.144, B = 0.22, K = 4.96.
    fn default() -> Self {
        Self {
            inertia: 0.144,
            viscosity: 0.22,
            stiffness: 4.96,
        }
    }
}

/// Standard deviations used when perturbing [`JointParams`] per seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointSpread {
    pub inertia: f64,
    pub viscosity: f64,
    pub stiffness: f64,
}

impl Default for JointSpread {
    fn default() -> Self {
        Self {
            inertia: 0.014,
            viscosity: 0.10,
            stiffness: 1.16,
        }
    }
}

impl JointParams {
    pub fn new(inertia: f64, viscosity: f64, stiffness: f64) -> Result<Self> {
        let p = Self {
            inertia,
            viscosity,
            stiffness,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.inertia.is_finite()
            && self.viscosity.is_finite()
            && self.stiffness.is_finite()
            && self.inertia > 0.0
            && self.viscosity >= 0.0
            && self.stiffness > 0.0;
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidJoint(format!(
                "need J > 0, B >= 0, K > 0; got J={}, B={}, K={}",
                self.inertia, self.viscosity, self.stiffness
            )))
        }
    }

    /// Draws Gaussian-perturbed parameters. J and K are floored at 1% of their mean,
    /// B at zero.
    pub fn perturbed<R: Rng + ?Sized>(&self, spread: &JointSpread, rng: &mut R) -> Self {
        let mut draw = |mean: f64, std: f64| -> f64 {
            if std > 0.0 {
                Normal::new(mean, std)
                    .map(|d| d.sample(rng))
                    .unwrap_or(mean)
            } else {
                mean
            }
        };
        let j = draw(self.inertia, spread.inertia);
        let b = draw(self.viscosity, spread.viscosity);
        let k = draw(self.stiffness, spread.stiffness);
        Self {
            inertia: j.max(0.01 * self.inertia),
            viscosity: b.max(0.0),
            stiffness: k.max(0.01 * self.stiffness),
        }
    }

    /// Damping ratio ζ = B / (2·sqrt(JK)).
    pub fn damping_ratio(&self) -> f64 {
        self.viscosity / (2.0 * (self.inertia * self.stiffness).sqrt())
    }

    /// Undamped natural frequency ω_n = sqrt(K/J).
    pub fn natural_frequency(&self) -> f64 {
        (self.stiffness / self.inertia).sqrt()
    }

    fn acceleration(&self, tau: f64, theta: f64, theta_dot: f64) -> f64 {
        (tau - self.viscosity * theta_dot - self.stiffness * theta) / self.inertia
    }
}

/// Joint angle and angular velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointState {
    pub theta: f64,
    pub theta_dot: f64,
}

impl JointState {
    pub fn new(theta: f64, theta_dot: f64) -> Self {
        Self { theta, theta_dot }
    }

    pub fn rest() -> Self {
        Self::default()
    }

    /// State of `A·sin(ωt)` at t = 0.
    pub fn tracking(amplitude: f64, angular_frequency: f64) -> Self {
        Self {
            theta: 0.0,
            theta_dot: amplitude * angular_frequency,
        }
    }
}

/// Midpoint value of the torque between samples `i` and `i+1` by 4-point
/// Lagrange interpolation (stencil shifted inward at the edges).
fn torque_midpoint(tau: &[f64], i: usize) -> f64 {
    let n = tau.len();
    if n < 4 {
        return 0.5 * (tau[i] + tau[i + 1]);
    }
    if i == 0 {
        0.3125 * tau[0] + 0.9375 * tau[1] - 0.3125 * tau[2] + 0.0625 * tau[3]
    } else if i + 2 >= n {
        0.0625 * tau[n - 4] - 0.3125 * tau[n - 3] + 0.9375 * tau[n - 2] + 0.3125 * tau[n - 1]
    } else {
        -0.0625 * tau[i - 1] + 0.5625 * tau[i] + 0.5625 * tau[i + 1] - 0.0625 * tau[i + 2]
    }
}

/// Integrates the joint model driven by `tau`, returning θ on the same grid.
pub fn simulate(tau: &Trajectory, params: &JointParams, initial: JointState) -> Result<Trajectory> {
    params.validate()?;
    if tau.unit() != Unit::NewtonMeters {
        return Err(SimError::IncompatibleTrajectory(
            "joint model needs a torque trajectory".into(),
        ));
    }
    if !(initial.theta.is_finite() && initial.theta_dot.is_finite()) {
        return Err(SimError::Divergence { step: 0 });
    }
    let u = tau.samples();
    let h = tau.dt();
    let mut theta = Vec::with_capacity(u.len());
    let (mut x, mut v) = (initial.theta, initial.theta_dot);
    theta.push(x);

    for i in 0..u.len().saturating_sub(1) {
        let (t0, tm, t1) = (u[i], torque_midpoint(u, i), u[i + 1]);

        let k1x = v;
        let k1v = params.acceleration(t0, x, v);
        let k2x = v + 0.5 * h * k1v;
        let k2v = params.acceleration(tm, x + 0.5 * h * k1x, k2x);
        let k3x = v + 0.5 * h * k2v;
        let k3v = params.acceleration(tm, x + 0.5 * h * k2x, k3x);
        let k4x = v + h * k3v;
        let k4v = params.acceleration(t1, x + h * k3x, k4x);

        x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if !(x.is_finite() && v.is_finite()) {
            return Err(SimError::Divergence { step: i + 1 });
        }
        theta.push(x);
    }
    tau.with_samples(theta, Unit::Radians)
}

/// Sample grid for [`analytic_response`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub t0: f64,
    pub dt: f64,
    pub len: usize,
}

impl Grid {
    pub fn of(tr: &Trajectory) -> Self {
        Self {
            t0: tr.t0(),
            dt: tr.dt(),
            len: tr.len(),
        }
    }
}

/// Exact response of the underdamped joint to `τ(t) = s·sin(ωt) + c·cos(ωt)`,
/// with the homogeneous part matched to `initial` at `t = grid.t0`.
pub fn analytic_response(
    params: &JointParams,
    tau_sin_amp: f64,
    tau_cos_amp: f64,
    omega: f64,
    initial: JointState,
    grid: Grid,
) -> Result<Trajectory> {
    params.validate()?;
    let JointParams {
        inertia: j,
        viscosity: b,
        stiffness: k,
    } = *params;
    let discriminant = b * b - 4.0 * j * k;
    if discriminant >= 0.0 {
        return Err(SimError::UnsupportedRegime { discriminant });
    }

    // Particular solution X·sin + Y·cos solves
    //   (K − Jω²)X − BωY = s,  BωX + (K − Jω²)Y = c.
    let a = k - j * omega * omega;
    let bw = b * omega;
    let det = a * a + bw * bw;
    let x_amp = (a * tau_sin_amp + bw * tau_cos_amp) / det;
    let y_amp = (a * tau_cos_amp - bw * tau_sin_amp) / det;

    let sigma = b / (2.0 * j);
    let wd = (k / j - sigma * sigma).sqrt();

    let theta_at = |t: f64| x_amp * (omega * t).sin() + y_amp * (omega * t).cos();
    let dtheta_at = |t: f64| omega * (x_amp * (omega * t).cos() - y_amp * (omega * t).sin());

    let t0 = grid.t0;
    let c1 = initial.theta - theta_at(t0);
    let c2 = (initial.theta_dot - dtheta_at(t0) + sigma * c1) / wd;

    let samples = (0..grid.len)
        .map(|i| {
            let t = t0 + i as f64 * grid.dt;
            let s = t - t0;
            theta_at(t) + (-sigma * s).exp() * (c1 * (wd * s).cos() + c2 * (wd * s).sin())
        })
        .collect();
    Trajectory::new(t0, grid.dt, samples, Unit::Radians)
}
