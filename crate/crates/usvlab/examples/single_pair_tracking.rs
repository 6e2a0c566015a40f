//! Trajectory tracking of a single vessel behind the virtual leader: the
//! two-vessel core of the formation scheme. Shows the split between the
//! kinematic layer (saturated-linear commands, sway feasibility ODE) and
//! the kinetic PD+ layer by printing both error groups as they decay.
//!
//! ```bash
//! cargo run --release --example single_pair_tracking
//! ```

use usvlab::controller::Gains;
use usvlab::formation::{AgentSetup, FormationConfig, ReferenceSetup, Topology};
use usvlab::sim::{run_simulation, SimConfig};
use usvlab::vessel::{BodyVelocity, Pose, VesselParams};

fn main() {
    let fc = FormationConfig {
        reference: ReferenceSetup::default(),
        topology: Topology::chain(1),
        agents: vec![AgentSetup {
            plant: VesselParams::NOMINAL,
            model: VesselParams::NOMINAL,
            gains: Gains {
                kx: 0.2,
                ktheta: 0.2,
                kdx: 10.0,
                komega: 10.0,
            },
            offset: (0.0, 0.0),
            initial_pose: Pose::new(1.46, 0.45, 1.33),
            initial_velocity: BodyVelocity::default(),
        }],
    };
    let sc = SimConfig {
        t_end: 120.0,
        ..Default::default()
    };

    let traj = run_simulation(&fc, &sc, 0).expect("run integrates");
    let f = &traj.followers[0];

    println!("tracking a virtual leader from q(0) = (1.46, 0.45, 1.33):\n");
    println!("  t [s]    |e_p| [m]   e_theta [rad]  |vtilde| [m/s]   vbar_y [m/s]");
    for &t_mark in &[0.0, 1.0, 3.0, 10.0, 30.0, 60.0, 120.0] {
        let i = traj
            .time
            .iter()
            .position(|&t| (t - t_mark).abs() < 1e-9)
            .unwrap();
        println!(
            "  {t_mark:5.0}  {:11.3e}  {:12.3e}  {:13.3e}  {:13.3e}",
            f.errors[i].planar_norm(),
            f.errors[i].etheta,
            f.vtilde_norm(i),
            f.vbar_y[i],
        );
    }
    println!("\nthe velocity error collapses within a second (stiff PD+ loop);");
    println!("the heading follows at the tanh-saturated rate; the position");
    println!("error drains through the persistently exciting yaw motion.");
}
