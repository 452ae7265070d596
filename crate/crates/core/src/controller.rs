//! Trial-to-trial amplitude updates.
//!
//! ILC: `r_k = r_{k−1} + α·r*·(1 − min(β·‖e_{k−1}‖, 1))`.
//! Rule-based: `r_k = r_{k−1} + α·r*` if `‖e_{k−1}‖ ≤ threshold`, else `r_{k−1}`.
//!
//! The first trial has no measured error. It carries [`PreviousError::Nominal`],
//! which the ILC law reads as `1/β` (zero update) and the rule-based law as
//! "no update", so both start at `r_init`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateLaw {
    Ilc,
    RuleBased,
}

impl UpdateLaw {
    pub fn name(self) -> &'static str {
        match self {
            UpdateLaw::Ilc => "ilc",
            UpdateLaw::RuleBased => "rule_based",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    /// Maximum step as a fraction of `r_star`.
    pub alpha: f64,
    /// Error sensitivity (1/error units).
    pub beta: f64,
    /// Ultimate amplitude (rad).
    pub r_star: f64,
    /// Rule-based threshold on the error norm.
    pub threshold: f64,
    /// First-trial amplitude (rad).
    pub r_init: f64,
    pub clamp_to_r_star: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            beta: 1.0,
            r_star: 0.2,
            threshold: 0.7,
            r_init: 0.04,
            clamp_to_r_star: true,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SimError::InvalidController(m.into()));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must be in (0, 1]");
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta must be > 0");
        }
        if !(self.r_star.is_finite() && self.r_init > 0.0 && self.r_init <= self.r_star) {
            return bad("need 0 < r_init <= r_star");
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return bad("threshold must be > 0");
        }
        Ok(())
    }

    /// Largest possible step, `α·r*`.
    pub fn max_step(&self) -> f64 {
        self.alpha * self.r_star
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PreviousError {
    /// No previous trial; stands in for `1/β`.
    Nominal,
    Measured(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    /// 1-based index of the trial about to run.
    pub trial: usize,
    pub r_prev: f64,
    pub e_prev: PreviousError,
}

impl ControllerState {
    pub fn initial(cfg: &ControllerConfig) -> Self {
        Self {
            trial: 1,
            r_prev: cfg.r_init,
            e_prev: PreviousError::Nominal,
        }
    }

    /// State for the next trial after running at `amplitude` with error norm `error`.
    pub fn advance(&self, amplitude: f64, error: f64) -> Self {
        Self {
            trial: self.trial + 1,
            r_prev: amplitude,
            e_prev: PreviousError::Measured(error),
        }
    }

    fn measured(&self) -> Result<Option<f64>> {
        match self.e_prev {
            PreviousError::Nominal => Ok(None),
            PreviousError::Measured(e) if e >= 0.0 && e.is_finite() => Ok(Some(e)),
            PreviousError::Measured(e) => Err(SimError::InvalidState(format!(
                "error norm must be finite and non-negative, got {e}"
            ))),
        }
    }
}

/// Result of one amplitude update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Update {
    /// Amplitude for the coming trial, after clamping.
    pub amplitude: f64,
    /// Update term produced by the law, before clamping.
    pub step: f64,
    /// Whether the clamp at `r_star` reduced the amplitude.
    pub clamped: bool,
}

fn finish(r_prev: f64, step: f64, cfg: &ControllerConfig) -> Update {
    let raw = r_prev + step;
    if cfg.clamp_to_r_star && raw > cfg.r_star {
        Update {
            amplitude: cfg.r_star,
            step,
            clamped: true,
        }
    } else {
        Update {
            amplitude: raw,
            step,
            clamped: false,
        }
    }
}

pub fn ilc_update(state: &ControllerState, cfg: &ControllerConfig) -> Result<Update> {
    let scaled = match state.measured()? {
        None => 1.0,
        Some(e) => (cfg.beta * e).min(1.0),
    };
    let step = cfg.max_step() * (1.0 - scaled);
    Ok(finish(state.r_prev, step, cfg))
}

pub fn rule_based_update(state: &ControllerState, cfg: &ControllerConfig) -> Result<Update> {
    let step = match state.measured()? {
        Some(e) if e <= cfg.threshold => cfg.max_step(),
        _ => 0.0,
    };
    Ok(finish(state.r_prev, step, cfg))
}

pub fn update(law: UpdateLaw, state: &ControllerState, cfg: &ControllerConfig) -> Result<Update> {
    match law {
        UpdateLaw::Ilc => ilc_update(state, cfg),
        UpdateLaw::RuleBased => rule_based_update(state, cfg),
    }
}

/// Amplitudes produced by replaying a recorded error sequence: `errors[k]` is the
/// error of trial `k+1`, so the result has one more entry than `errors`.
pub fn simulate_update_sequence(
    errors: &[f64],
    cfg: &ControllerConfig,
    law: UpdateLaw,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut state = ControllerState::initial(cfg);
    let mut amps = Vec::with_capacity(errors.len() + 1);
    let first = update(law, &state, cfg)?;
    amps.push(first.amplitude);
    let mut current = first.amplitude;
    for &e in errors {
        state = state.advance(current, e);
        current = update(law, &state, cfg)?.amplitude;
        amps.push(current);
    }
    Ok(amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn measured(r_prev: f64, e: f64) -> ControllerState {
        ControllerState {
            trial: 2,
            r_prev,
            e_prev: PreviousError::Measured(e),
        }
    }

    fn cfg(alpha: f64, beta: f64) -> ControllerConfig {
        ControllerConfig {
            alpha,
            beta,
            ..ControllerConfig::default()
        }
    }

    #[test]
    fn ilc_second_trial_amplitudes() {
        let r = |a, b| {
            ilc_update(&measured(0.040, 0.222), &cfg(a, b))
                .unwrap()
                .amplitude
        };
        assert!((r(0.2, 1.0) - 0.0711).abs() < 5e-5);
        assert!((r(0.3, 1.0) - 0.0867).abs() < 5e-5);
        assert!((r(0.2, 0.5) - 0.0756).abs() < 5e-5);
    }

    #[test]
    fn nominal_error_means_no_update() {
        for beta in [0.3, 0.5, 1.0, 1.5, 7.0] {
            let c = cfg(0.2, beta);
            let u = ilc_update(&ControllerState::initial(&c), &c).unwrap();
            assert_eq!(u.amplitude, c.r_init);
            assert_eq!(u.step, 0.0);
            let u = rule_based_update(&ControllerState::initial(&c), &c).unwrap();
            assert_eq!(u.amplitude, c.r_init);
        }
    }

    #[test]
    fn large_error_is_capped() {
        let u = ilc_update(&measured(0.04, 5.0), &cfg(0.2, 1.0)).unwrap();
        assert_eq!(u.amplitude, 0.04);
        assert_eq!(u.step, 0.0);
    }

    #[test]
    fn zero_error_gives_full_step() {
        let u = ilc_update(&measured(0.04, 0.0), &cfg(0.2, 1.0)).unwrap();
        assert!((u.step - 0.04).abs() < 1e-15);
    }

    #[test]
    fn rule_based_threshold() {
        let c = ControllerConfig::default();
        let r = |e| rule_based_update(&measured(0.04, e), &c).unwrap().amplitude;
        assert!((r(0.5) - 0.08).abs() < 1e-15);
        assert_eq!(r(0.71), 0.04);
        assert!((r(0.7) - 0.08).abs() < 1e-15);
    }

    #[test]
    fn clamp_binds_at_r_star() {
        let c = ControllerConfig::default();
        let u = ilc_update(&measured(0.19, 0.0), &c).unwrap();
        assert_eq!(u.amplitude, 0.2);
        assert!(u.clamped);
        let free = ControllerConfig {
            clamp_to_r_star: false,
            ..c
        };
        let u = ilc_update(&measured(0.19, 0.0), &free).unwrap();
        assert!((u.amplitude - 0.23).abs() < 1e-15);
        assert!(!u.clamped);
    }

    #[test]
    fn negative_error_rejected() {
        let c = ControllerConfig::default();
        for e in [-0.1, f64::NAN] {
            assert!(matches!(
                ilc_update(&measured(0.04, e), &c),
                Err(SimError::InvalidState(_))
            ));
            assert!(rule_based_update(&measured(0.04, e), &c).is_err());
            assert!(simulate_update_sequence(&[0.2, e], &c, UpdateLaw::Ilc).is_err());
        }
    }

    #[test]
    fn config_validation() {
        let ok = ControllerConfig::default();
        ok.validate().unwrap();
        for bad in [
            ControllerConfig { alpha: 0.0, ..ok },
            ControllerConfig { alpha: 1.5, ..ok },
            ControllerConfig { beta: 0.0, ..ok },
            ControllerConfig { r_init: 0.3, ..ok },
            ControllerConfig { r_init: 0.0, ..ok },
            ControllerConfig {
                threshold: 0.0,
                ..ok
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn empty_sequence_is_initial_amplitude() {
        let c = ControllerConfig::default();
        assert_eq!(
            simulate_update_sequence(&[], &c, UpdateLaw::Ilc).unwrap(),
            vec![0.04]
        );
        assert_eq!(
            simulate_update_sequence(&[], &c, UpdateLaw::RuleBased).unwrap(),
            vec![0.04]
        );
    }

    #[test]
    fn replay_alpha_02_row() {
        let amps = simulate_update_sequence(
            &[0.222, 0.398, 0.533, 0.638],
            &cfg(0.2, 1.0),
            UpdateLaw::Ilc,
        )
        .unwrap();
        for (a, b) in amps.iter().zip([0.040, 0.071, 0.095, 0.114, 0.128]) {
            assert!((a - b).abs() <= 5e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn zero_errors_ramp_then_saturate() {
        let amps =
            simulate_update_sequence(&[0.0; 6], &ControllerConfig::default(), UpdateLaw::Ilc)
                .unwrap();
        let want = [0.04, 0.08, 0.12, 0.16, 0.20, 0.20, 0.20];
        for (a, b) in amps.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{amps:?}");
        }
    }

    proptest! {
        #[test]
        fn ilc_steps_are_bounded_and_monotone(errors in prop::collection::vec(0.0f64..3.0, 0..30),
                                             alpha in 0.01f64..=1.0, beta in 0.1f64..3.0) {
            let c = ControllerConfig { alpha, beta, clamp_to_r_star: false, ..ControllerConfig::default() };
            let amps = simulate_update_sequence(&errors, &c, UpdateLaw::Ilc).unwrap();
            for w in amps.windows(2) {
                let step = w[1] - w[0];
                prop_assert!(step >= 0.0);
                prop_assert!(step <= c.max_step() * (1.0 + 1e-12));
            }
        }

        #[test]
        fn rule_steps_are_all_or_nothing(errors in prop::collection::vec(0.0f64..2.0, 0..30)) {
            let c = ControllerConfig { clamp_to_r_star: false, ..ControllerConfig::default() };
            let mut state = ControllerState::initial(&c);
            let mut r = c.r_init;
            for e in errors {
                state = state.advance(r, e);
                let u = rule_based_update(&state, &c).unwrap();
                prop_assert!(u.step == 0.0 || u.step == c.max_step());
                r = u.amplitude;
            }
        }
    }
}
