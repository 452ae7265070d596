//! ILC versus rule-based sessions on patients with fixed error levels. Errors
//! above the rule-based threshold freeze the baseline while ILC keeps stepping.
//!
//!     cargo run --example stub_sessions

use rehab_ilc::controller::{ControllerConfig, UpdateLaw};
use rehab_ilc::experiment::{run_session_with, ConstantErrorPatient};

fn main() -> rehab_ilc::Result<()> {
    let cfg = ControllerConfig::default();
    println!(
        "{:>6} {:>10} {:>10} {:>12}",
        "error", "ILC final", "rule final", "ILC mean step"
    );
    for e in [0.0, 0.2, 0.5, 0.7, 0.75, 0.9, 1.2] {
        let ilc = run_session_with(&mut ConstantErrorPatient(e), UpdateLaw::Ilc, &cfg, 20, 0)?;
        let rule = run_session_with(
            &mut ConstantErrorPatient(e),
            UpdateLaw::RuleBased,
            &cfg,
            20,
            0,
        )?;
        let mean_step = ilc.iter().skip(1).map(|r| r.update).sum::<f64>() / 19.0;
        println!(
            "{e:>6.2} {:>10.4} {:>10.4} {:>12.5}",
            ilc.last().unwrap().amplitude,
            rule.last().unwrap().amplitude,
            mean_step
        );
    }
    Ok(())
}
