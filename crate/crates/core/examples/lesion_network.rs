//! Pre-trains a network, removes hidden nodes, and compares trial errors of the
//! healthy and lesioned patient across task amplitudes.
//!
//!     cargo run --release --example lesion_network [narx1|narx2] [seed]

use rehab_ilc::elbow::JointParams;
use rehab_ilc::experiment::{run_trial, InitialCondition, TrialSetup};
use rehab_ilc::narx::{train, NarxNetwork, NetworkVariant};
use rehab_ilc::task::{target_motor_command, TaskSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let variant = match args.next().as_deref() {
        Some("narx2") => NetworkVariant::Narx2,
        _ => NetworkVariant::Narx1,
    };
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);

    let task = TaskSpec::new(0.2, 2.0 * std::f64::consts::PI / 3.0, 30.0, 100.0)?;
    let joint = JointParams::default();
    let tau = target_motor_command(&task, &joint)?;
    let (healthy, report) = train(&NarxNetwork::for_variant(variant, seed)?, &tau, &tau, 100)?;
    let stroke = healthy.lesion(&variant.stroke_removals(), seed)?;

    println!(
        "{} seed {seed}: trained {} epochs ({:?})",
        variant.name(),
        report.epochs_run,
        report.stop
    );
    println!(
        "hidden widths {:?} -> {:?}, active nodes {} -> {}",
        healthy.active_widths(),
        stroke.active_widths(),
        healthy.active_node_count(),
        stroke.active_node_count()
    );

    let setup = TrialSetup {
        task,
        joint,
        initial: InitialCondition::Tracking,
    };
    println!("\n{:>8} {:>12} {:>12}", "A (rad)", "healthy", "stroke");
    for amp in [0.04, 0.08, 0.12, 0.16, 0.2] {
        let h = run_trial(&healthy, amp, &setup)?.error_norm;
        let s = match run_trial(&stroke, amp, &setup) {
            Ok(o) => format!("{:12.4}", o.error_norm),
            Err(e) => format!("{e}"),
        };
        println!("{amp:>8.2} {h:>12.4} {s}");
    }

    // Masked evaluation is exactly the compacted network.
    let compact = stroke.compact();
    let a = stroke.forward_closed_loop(&tau)?;
    let b = compact.forward_closed_loop(&tau)?;
    let same = a
        .samples()
        .iter()
        .zip(b.samples())
        .all(|(x, y)| x.to_bits() == y.to_bits());
    println!(
        "\ncompacted network ({} params) matches masked evaluation: {same}",
        compact.param_count()
    );
    Ok(())
}
