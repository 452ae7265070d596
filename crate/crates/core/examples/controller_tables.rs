//! Replays the ILC update law over recorded error sequences and compares it
//! with the rule-based law on the same errors.
//!
//!     cargo run --example controller_tables

use rehab_ilc::controller::{simulate_update_sequence, ControllerConfig, UpdateLaw};

fn main() -> rehab_ilc::Result<()> {
    let rows = [
        ("alpha=0.2 beta=1.0", 0.2, 1.0, [0.222, 0.398, 0.533, 0.638]),
        ("alpha=0.3 beta=1.0", 0.3, 1.0, [0.222, 0.486, 0.659, 0.773]),
        ("alpha=0.2 beta=0.5", 0.2, 0.5, [0.222, 0.423, 0.600, 0.757]),
        ("alpha=0.2 beta=1.5", 0.2, 1.5, [0.222, 0.374, 0.472, 0.539]),
    ];
    println!(
        "{:<20} {:>6} {:>6} {:>6} {:>6} {:>6}",
        "", "k=1", "k=2", "k=3", "k=4", "k=5"
    );
    for (label, alpha, beta, errors) in rows {
        let cfg = ControllerConfig {
            alpha,
            beta,
            ..ControllerConfig::default()
        };
        for law in [UpdateLaw::Ilc, UpdateLaw::RuleBased] {
            let amps = simulate_update_sequence(&errors, &cfg, law)?;
            let cells: Vec<String> = amps.iter().map(|a| format!("{a:6.3}")).collect();
            println!("{:<20} {}  ({})", label, cells.join(" "), law.name());
        }
    }
    Ok(())
}
