//! Compares the backpropagation-through-time gradient with central finite
//! differences on a small closed-loop network.
//!
//!     cargo run --example gradient_check

use rehab_ilc::narx::{
    objective, objective_gradient, NarxNetwork, NarxTopology, Normalization, Regularization,
};
use rehab_ilc::task::{Trajectory, Unit};

fn main() -> rehab_ilc::Result<()> {
    let topology = NarxTopology::new(vec![0, 1], vec![1, 2], vec![3])?;
    let mut net = NarxNetwork::init(topology, 5)?;
    let u: Vec<f64> = (0..80).map(|i| (0.25 * i as f64).sin()).collect();
    let y: Vec<f64> = u.iter().map(|x| 0.5 * x + 0.1).collect();
    net.set_normalization(Normalization::from_ranges(&u, &y));
    let u = Trajectory::new(0.0, 0.01, u, Unit::NewtonMeters)?;
    let y = Trajectory::new(0.0, 0.01, y, Unit::NewtonMeters)?;
    let reg = Regularization {
        alpha: 0.05,
        beta: 1.0,
    };

    let (f, grad) = objective_gradient(&net, &u, &y, reg)?;
    let p0 = net.params();
    println!("objective {f:.6e}, {} parameters", p0.len());
    for h in [1e-4, 1e-6, 1e-8] {
        let mut worst: f64 = 0.0;
        for i in 0..p0.len() {
            let mut p = p0.clone();
            p[i] += h;
            net.set_params(&p);
            let up = objective(&net, &u, &y, reg)?;
            p[i] = p0[i] - h;
            net.set_params(&p);
            let down = objective(&net, &u, &y, reg)?;
            let fd = (up - down) / (2.0 * h);
            worst = worst.max((fd - grad[i]).abs() / grad[i].abs().max(1e-12));
        }
        println!("h={h:.0e}: worst per-parameter relative error {worst:.2e}");
    }
    Ok(())
}
