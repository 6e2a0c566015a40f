//! Step-size convergence of the fixed-step integrator on the bundled
//! four-vessel scenario: halving the step should cut the error by about
//! sixteen (classical fourth order).
//!
//! ```bash
//! cargo run --release --example step_convergence
//! ```

use usvlab::config::parse_config;
use usvlab::sim::{run_simulation, SimConfig};

fn main() {
    let config_path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/paper_nominal.json");
    let cfg = parse_config(config_path).expect("bundled scenario parses");
    let horizon = 10.0;

    let final_state = |dt: f64| -> Vec<f64> {
        let sc = SimConfig {
            dt,
            t_end: horizon,
            record_stride: (horizon / dt).round() as usize,
            noise_power: 0.0,
            noise_sample_time: 0.01,
        };
        let traj = run_simulation(&cfg.formation, &sc, 0).expect("run integrates");
        let last = traj.len() - 1;
        let mut v = Vec::new();
        for f in &traj.followers {
            v.extend_from_slice(&[
                f.poses[last].x,
                f.poses[last].y,
                f.poses[last].theta,
                f.velocities[last].vx,
                f.velocities[last].vy,
                f.velocities[last].omega,
            ]);
        }
        v
    };
    let norm = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };

    let reference = final_state(2.5e-4);
    println!("errors of the final swarm state at t = {horizon} s against a dt = 2.5e-4 reference:\n");
    println!("  dt [s]     error        ratio to next");
    let steps = [1.6e-2, 8e-3, 4e-3, 2e-3, 1e-3];
    let errors: Vec<f64> = steps.iter().map(|&dt| norm(&final_state(dt), &reference)).collect();
    for i in 0..steps.len() {
        let ratio = if i + 1 < errors.len() {
            format!("{:8.2}", errors[i] / errors[i + 1])
        } else {
            "       -".into()
        };
        println!("  {:8.1e}  {:10.3e}  {ratio}", steps[i], errors[i]);
    }
    println!("\nratios near 16 confirm the fourth-order step.");
}
