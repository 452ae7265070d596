//! Sinusoidal target tasks and the trajectories they produce.
//!
//! A trial asks the patient to track `θ*(t) = A·sin(ωt)` on a half-open grid
//! `t ∈ {0, dt, …, (N−1)·dt}` with `N = round(duration × sample_rate)`.

use serde::{Deserialize, Serialize};

use crate::elbow::JointParams;
use crate::error::{Result, SimError};

/// Physical unit carried by a [`Trajectory`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    Radians,
    NewtonMeters,
}

/// Parametric description of a sinusoidal reaching task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    /// Peak joint angle (rad).
    pub amplitude: f64,
    /// rad/s
    pub angular_frequency: f64,
    /// s
    pub duration: f64,
    /// Hz
    pub sample_rate: f64,
}

impl TaskSpec {
    pub fn new(
        amplitude: f64,
        angular_frequency: f64,
        duration: f64,
        sample_rate: f64,
    ) -> Result<Self> {
        let spec = Self {
            amplitude,
            angular_frequency,
            duration,
            sample_rate,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Same timing, different amplitude.
    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Self { amplitude, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("amplitude", self.amplitude),
            ("angular_frequency", self.angular_frequency),
            ("duration", self.duration),
            ("sample_rate", self.sample_rate),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(SimError::InvalidSpec(format!("{name} is not finite")));
            }
        }
        if self.amplitude < 0.0 {
            return Err(SimError::InvalidSpec("amplitude must be >= 0".into()));
        }
        for (name, v) in &fields[1..] {
            if *v <= 0.0 {
                return Err(SimError::InvalidSpec(format!("{name} must be > 0")));
            }
        }
        let n = (self.duration * self.sample_rate).round();
        if n < 2.0 {
            return Err(SimError::InvalidSpec(format!(
                "duration x sample_rate rounds to {n}, need at least 2 samples"
            )));
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }
}

/// Uniformly sampled time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    t0: f64,
    dt: f64,
    samples: Vec<f64>,
    unit: Unit,
}

impl Trajectory {
    pub fn new(t0: f64, dt: f64, samples: Vec<f64>, unit: Unit) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) || !t0.is_finite() {
            return Err(SimError::IncompatibleTrajectory(format!(
                "bad time base t0={t0}, dt={dt}"
            )));
        }
        if samples.is_empty() {
            return Err(SimError::IncompatibleTrajectory("no samples".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(SimError::IncompatibleTrajectory(format!(
                "sample {i} is not finite"
            )));
        }
        Ok(Self {
            t0,
            dt,
            samples,
            unit,
        })
    }

    pub fn zeros(len: usize, dt: f64, unit: Unit) -> Self {
        Self {
            t0: 0.0,
            dt,
            samples: vec![0.0; len.max(1)],
            unit,
        }
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// A trajectory on the same grid with new values and unit.
    pub fn with_samples(&self, samples: Vec<f64>, unit: Unit) -> Result<Self> {
        if samples.len() != self.samples.len() {
            return Err(SimError::IncompatibleTrajectory(format!(
                "length {} != {}",
                samples.len(),
                self.samples.len()
            )));
        }
        Self::new(self.t0, self.dt, samples, unit)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn check_compatible(&self, other: &Trajectory) -> Result<()> {
        if self.unit != other.unit {
            return Err(SimError::IncompatibleTrajectory(format!(
                "unit {:?} vs {:?}",
                self.unit, other.unit
            )));
        }
        if self.samples.len() != other.samples.len() {
            return Err(SimError::IncompatibleTrajectory(format!(
                "length {} vs {}",
                self.samples.len(),
                other.samples.len()
            )));
        }
        if self.t0 != other.t0 || self.dt != other.dt {
            return Err(SimError::IncompatibleTrajectory(format!(
                "grid (t0={}, dt={}) vs (t0={}, dt={})",
                self.t0, self.dt, other.t0, other.dt
            )));
        }
        Ok(())
    }
}

/// Samples `A·sin(ω·i·dt)` on the task grid.
pub fn sample_task(spec: &TaskSpec) -> Result<Trajectory> {
    spec.validate()?;
    let dt = spec.dt();
    let samples = (0..spec.sample_count())
        .map(|i| spec.amplitude * (spec.angular_frequency * i as f64 * dt).sin())
        .collect();
    Trajectory::new(0.0, dt, samples, Unit::Radians)
}

/// Sine and cosine coefficients of the torque that makes the joint follow the task exactly:
/// `τ*(t) = s·sin(ωt) + c·cos(ωt)` with `s = (K − Jω²)A` and `c = BωA`.
pub fn motor_command_coefficients(spec: &TaskSpec, params: &JointParams) -> (f64, f64) {
    let w = spec.angular_frequency;
    let a = spec.amplitude;
    (
        (params.stiffness - params.inertia * w * w) * a,
        params.viscosity * w * a,
    )
}

/// Inverse dynamics of the task, evaluated analytically on the task grid.
pub fn target_motor_command(spec: &TaskSpec, params: &JointParams) -> Result<Trajectory> {
    spec.validate()?;
    params.validate()?;
    let (s, c) = motor_command_coefficients(spec, params);
    let dt = spec.dt();
    let w = spec.angular_frequency;
    let samples = (0..spec.sample_count())
        .map(|i| {
            let t = i as f64 * dt;
            s * (w * t).sin() + c * (w * t).cos()
        })
        .collect();
    Trajectory::new(0.0, dt, samples, Unit::NewtonMeters)
}

/// Raw Euclidean norm of the sample-wise difference (not RMS).
pub fn error_l2_norm(target: &Trajectory, actual: &Trajectory) -> Result<f64> {
    target.check_compatible(actual)?;
    let sum: f64 = target
        .samples
        .iter()
        .zip(&actual.samples)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn spec(a: f64) -> TaskSpec {
        TaskSpec::new(a, 2.0 * PI / 3.0, 30.0, 100.0).unwrap()
    }

    #[test]
    fn zero_amplitude_is_all_zero() {
        let tr = sample_task(&spec(0.0)).unwrap();
        assert_eq!(tr.len(), 3000);
        assert!(tr.samples().iter().all(|&v| v == 0.0));
        assert_eq!(tr.unit(), Unit::Radians);
    }

    #[test]
    fn quarter_period_hits_peak() {
        let tr = sample_task(&spec(0.2)).unwrap();
        assert!((tr.samples()[75] - 0.2).abs() < 1e-12);
        assert!((tr.time(75) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn max_equals_amplitude() {
        let tr = sample_task(&spec(0.04)).unwrap();
        assert!((tr.max_abs() - 0.04).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(TaskSpec::new(-0.1, 1.0, 30.0, 100.0).is_err());
        assert!(TaskSpec::new(0.1, 0.0, 30.0, 100.0).is_err());
        assert!(TaskSpec::new(0.1, 1.0, f64::NAN, 100.0).is_err());
        assert!(TaskSpec::new(0.1, 1.0, 0.01, 100.0).is_err());
        let bad = TaskSpec {
            amplitude: 0.1,
            angular_frequency: 1.0,
            duration: 30.0,
            sample_rate: -1.0,
        };
        assert!(matches!(sample_task(&bad), Err(SimError::InvalidSpec(_))));
    }

    #[test]
    fn motor_command_values() {
        let p = JointParams::default();
        let zero = target_motor_command(&spec(0.0), &p).unwrap();
        assert!(zero.samples().iter().all(|&v| v == 0.0));

        let tau = target_motor_command(&spec(0.2), &p).unwrap();
        assert_eq!(tau.unit(), Unit::NewtonMeters);
        assert!((tau.samples()[0] - 0.22 * (2.0 * PI / 3.0) * 0.2).abs() < 1e-12);
        assert!((tau.samples()[0] - 0.09215).abs() < 1e-5);
        let (s, _) = motor_command_coefficients(&spec(0.2), &p);
        assert!((s - 0.86566).abs() < 1e-5);
    }

    #[test]
    fn l2_norm_examples() {
        let a = sample_task(&spec(0.2)).unwrap();
        assert_eq!(error_l2_norm(&a, &a).unwrap(), 0.0);

        let z = Trajectory::zeros(3000, 0.01, Unit::Radians);
        let c = z.with_samples(vec![0.01; 3000], Unit::Radians).unwrap();
        assert!((error_l2_norm(&z, &c).unwrap() - 0.547_722_557_505_166).abs() < 1e-9);

        let mut one = vec![0.0; 3000];
        one[1234] = 0.222;
        let o = z.with_samples(one, Unit::Radians).unwrap();
        assert!((error_l2_norm(&z, &o).unwrap() - 0.222).abs() < 1e-15);
    }

    #[test]
    fn l2_norm_rejects_mismatch() {
        let a = Trajectory::zeros(10, 0.01, Unit::Radians);
        let b = Trajectory::zeros(10, 0.01, Unit::NewtonMeters);
        let c = Trajectory::zeros(11, 0.01, Unit::Radians);
        let d = Trajectory::zeros(10, 0.02, Unit::Radians);
        for other in [&b, &c, &d] {
            assert!(matches!(
                error_l2_norm(&a, other),
                Err(SimError::IncompatibleTrajectory(_))
            ));
        }
    }

    #[test]
    fn trajectory_rejects_non_finite() {
        assert!(Trajectory::new(0.0, 0.01, vec![0.0, f64::INFINITY], Unit::Radians).is_err());
        assert!(Trajectory::new(0.0, 0.0, vec![0.0], Unit::Radians).is_err());
        assert!(Trajectory::new(0.0, 0.01, vec![], Unit::Radians).is_err());
    }
}
