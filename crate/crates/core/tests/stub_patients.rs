//! ILC versus rule-based progression on patients whose behaviour is known in
//! closed form.

use rehab_ilc::controller::{ControllerConfig, UpdateLaw};
use rehab_ilc::experiment::{
    run_experiment, run_experiment_with, run_session_with, Condition, ConstantErrorPatient,
    PatientModel, ScenarioConfig,
};
use rehab_ilc::narx::NetworkVariant;

fn scenario(law: UpdateLaw, patient: PatientModel, seeds: Vec<u64>) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(NetworkVariant::Narx1, Condition::Healthy, law);
    cfg.patient = patient;
    cfg.seeds = seeds;
    cfg
}

fn final_amplitude(law: UpdateLaw, patient: PatientModel) -> f64 {
    let out = run_experiment(&scenario(law, patient, vec![0, 1, 2])).unwrap();
    out.stats.per_trial.last().unwrap().amplitude_mean
}

#[test]
fn ilc_ends_higher_when_rule_based_stalls() {
    // Errors above the 0.7 threshold freeze the rule-based law; ILC keeps
    // taking small steps while beta * e < 1.
    for e in [0.71, 0.8, 0.95] {
        let ilc = final_amplitude(UpdateLaw::Ilc, PatientModel::ConstantError(e));
        let rule = final_amplitude(UpdateLaw::RuleBased, PatientModel::ConstantError(e));
        assert_eq!(rule, 0.04, "e={e}");
        assert!(ilc > rule, "e={e}: ilc {ilc} rule {rule}");
    }
}

#[test]
fn both_laws_reach_target_with_perfect_patient() {
    for law in [UpdateLaw::Ilc, UpdateLaw::RuleBased] {
        let out = run_experiment(&scenario(law, PatientModel::Perfect, vec![0, 1])).unwrap();
        let last = out.stats.per_trial.last().unwrap();
        assert!((last.amplitude_mean - 0.2).abs() < 1e-12, "{law:?}");
        assert!(last.error_mean < 1e-4, "{law:?}: {}", last.error_mean);
    }
}

#[test]
fn ilc_takes_smaller_steps_at_moderate_error() {
    let cfg = ControllerConfig::default();
    let ilc = run_session_with(&mut ConstantErrorPatient(0.3), UpdateLaw::Ilc, &cfg, 5, 0).unwrap();
    let rule = run_session_with(
        &mut ConstantErrorPatient(0.3),
        UpdateLaw::RuleBased,
        &cfg,
        5,
        0,
    )
    .unwrap();
    for (a, b) in ilc.iter().zip(&rule).skip(1) {
        assert!(a.update < b.update);
        assert!(a.update > 0.0);
    }
}

#[test]
fn silent_patient_stalls_ilc() {
    // A silent patient's error is large, so beta * e saturates and ILC does not move.
    let out = run_experiment(&scenario(UpdateLaw::Ilc, PatientModel::Silent, vec![0])).unwrap();
    for t in &out.stats.per_trial {
        assert_eq!(t.amplitude_mean, 0.04);
        assert!(t.error_mean > 1.0);
    }
}

#[test]
fn per_seed_stub_errors_aggregate_with_population_std() {
    let cfg = scenario(UpdateLaw::Ilc, PatientModel::ConstantError(0.0), vec![0, 1]);
    let out = run_experiment_with(&cfg, |seed| {
        Ok(ConstantErrorPatient(if seed == 0 { 0.2 } else { 0.4 }))
    })
    .unwrap();
    for t in &out.stats.per_trial {
        assert!((t.error_mean - 0.3).abs() < 1e-15);
        assert!((t.error_std - 0.1).abs() < 1e-15);
    }
}
