//! Runs the paper preset (all eight scenarios) over a seed range and prints
//! final amplitudes, final errors and the trial-averaged amplitude spread.
//!
//!     cargo run --release --example paper_sweep [seeds]    # e.g. 0..19

use rehab_ilc::config::{parse_seed_list, ConfigDocument};
use rehab_ilc::experiment::run_scenarios;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seeds = match std::env::args().nth(1) {
        Some(s) => parse_seed_list(&s)?,
        None => (0..10).collect(),
    };
    let doc = ConfigDocument::paper();
    println!("config hash {}", doc.hash());
    let mut scenarios = doc.scenarios();
    for s in &mut scenarios {
        s.seeds = seeds.clone();
    }
    let outcomes = run_scenarios(&scenarios)?;
    println!(
        "\n{:<26} {:>5} {:>6} {:>10} {:>10} {:>10}",
        "scenario", "seeds", "failed", "final amp", "final err", "amp std"
    );
    for o in &outcomes {
        let last = o.stats.per_trial.last();
        println!(
            "{:<26} {:>5} {:>6} {:>10.4} {:>10.4} {:>10.5}",
            o.scenario,
            o.sessions.len(),
            o.failures.len(),
            last.map_or(f64::NAN, |t| t.amplitude_mean),
            last.map_or(f64::NAN, |t| t.error_mean),
            o.stats.mean_amplitude_std
        );
    }
    Ok(())
}
