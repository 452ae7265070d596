//! Elbow joint model: inverse-dynamics round trip and RK4 convergence against
//! the closed-form response.
//!
//!     cargo run --release --example joint_dynamics

use rehab_ilc::elbow::{analytic_response, simulate, Grid, JointParams, JointState};
use rehab_ilc::task::{motor_command_coefficients, sample_task, target_motor_command, TaskSpec};

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn main() -> rehab_ilc::Result<()> {
    let params = JointParams::default();
    println!(
        "J={} B={} K={}  damping ratio {:.3}, natural frequency {:.3} rad/s",
        params.inertia,
        params.viscosity,
        params.stiffness,
        params.damping_ratio(),
        params.natural_frequency()
    );

    let omega = 2.0 * std::f64::consts::PI / 3.0;
    for amplitude in [0.04, 0.1, 0.2] {
        let task = TaskSpec::new(amplitude, omega, 30.0, 100.0)?;
        let tau = target_motor_command(&task, &params)?;
        let theta = simulate(&tau, &params, JointState::tracking(amplitude, omega))?;
        let target = sample_task(&task)?;
        println!(
            "A={amplitude:.2}: peak torque {:.4} N m, round-trip error {:.2e} rad",
            tau.max_abs(),
            max_diff(theta.samples(), target.samples())
        );
    }

    println!("\nRK4 against closed form, rest start, A=0.2:");
    let mut previous: Option<f64> = None;
    for rate in [50.0, 100.0, 200.0, 400.0] {
        let task = TaskSpec::new(0.2, omega, 30.0, rate)?;
        let tau = target_motor_command(&task, &params)?;
        let (s, c) = motor_command_coefficients(&task, &params);
        let numeric = simulate(&tau, &params, JointState::rest())?;
        let exact = analytic_response(&params, s, c, omega, JointState::rest(), Grid::of(&tau))?;
        let err = max_diff(numeric.samples(), exact.samples());
        match previous {
            Some(p) => println!(
                "  dt={:.4}: max error {err:.3e}  ratio {:.1}",
                1.0 / rate,
                p / err
            ),
            None => println!("  dt={:.4}: max error {err:.3e}", 1.0 / rate),
        }
        previous = Some(err);
    }
    Ok(())
}
