//! Reference pre-training run: NARX1, weight seed 0, 100 epochs on the ultimate task.
//!
//! Prints the closed-loop E_D before and after training and their ratio. The
//! acceptance suite pins its training-effectiveness bound to the ratio this run
//! reports.
//!
//!     cargo run --release --example pretrain_reference [seed] [variant]

use std::time::Instant;

use rehab_ilc::elbow::JointParams;
use rehab_ilc::experiment::{run_trial, InitialCondition, TrialSetup};
use rehab_ilc::narx::{train, NarxNetwork, NetworkVariant};
use rehab_ilc::task::{target_motor_command, TaskSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let variant = match args.next().as_deref() {
        Some("narx2") => NetworkVariant::Narx2,
        _ => NetworkVariant::Narx1,
    };

    let task = TaskSpec::new(0.2, 2.0 * std::f64::consts::PI / 3.0, 30.0, 100.0)?;
    let joint = JointParams::default();
    let tau = target_motor_command(&task, &joint)?;

    let net = NarxNetwork::for_variant(variant, seed)?;
    let start = Instant::now();
    let (trained, report) = train(&net, &tau, &tau, 100)?;
    let elapsed = start.elapsed();

    println!("variant {:?}, seed {seed}", variant);
    println!("epochs run      {}", report.epochs_run);
    println!("initial E_D     {:.6e}", report.initial_sse);
    println!("final E_D       {:.6e}", report.final_sse);
    println!(
        "reduction       {:.3}x",
        report.initial_sse / report.final_sse
    );
    println!(
        "gamma           {:.3} of {}",
        report.effective_parameters,
        trained.param_count()
    );
    println!(
        "alpha_reg {:.4e}  beta_reg {:.4e}",
        report.regularization.alpha, report.regularization.beta
    );
    println!("training time   {:.2?}", elapsed);

    let y = trained.forward_closed_loop(&tau)?;
    let fit = rehab_ilc::task::error_l2_norm(&tau, &y)?
        / rehab_ilc::task::error_l2_norm(&tau, &tau.scaled(0.0))?;
    println!("relative torque fit error  {:.4}", fit);

    let setup = TrialSetup {
        task,
        joint,
        initial: InitialCondition::Tracking,
    };
    for amp in [0.04, 0.08, 0.12, 0.16, 0.2] {
        let out = run_trial(&trained, amp, &setup)?;
        println!("trial error at A={amp:.2}: {:.4}", out.error_norm);
    }
    Ok(())
}
