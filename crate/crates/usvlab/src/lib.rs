//! # usvlab
//!
//! Simulation and numerical gain-certification toolkit for leader-follower
//! formation tracking of underactuated surface vessels (two propellers:
//! surge force and yaw torque, no sway actuation).
//!
//! The library is organized around the closed control loop:
//!
//! - [`vessel`]: the 3-DOF vessel model (kinematics + kinetics) and the
//!   virtual-leader reference generator
//! - [`controller`]: single leader-follower pair control: body-frame errors,
//!   saturated kinematic laws, the sway feasibility ODE, and the PD+ torque
//! - [`formation`]: directed-spanning-tree wiring of many vessels into one
//!   swarm ODE
//! - [`stability`]: persistency-of-excitation metrics, L2-gain/small-gain
//!   constants, and Lyapunov diagnostics along trajectories
//! - [`sim`]: deterministic fixed-step RK4 integration, seeded band-limited
//!   white-noise disturbances, and the Monte Carlo robustness study
//! - [`config`]: JSON configuration ingestion and validation
//! - [`output`]: bit-stable file outputs (CSV trajectories, envelopes,
//!   stability reports, plot data, run manifests)
//!
//! Runnable examples for each capability live in `examples/`; the thin
//! `usvlab` binary exposes the same flows as subcommands.

pub mod config;
pub mod controller;
pub mod formation;
pub mod output;
pub mod sim;
pub mod stability;
pub mod vessel;

pub use config::{parse_config, ConfigError, ParsedConfig};
pub use controller::{BodyError, ControllerState, Gains, VirtualControl};
pub use formation::{FormationConfig, SwarmState, Topology, TopologyError};
pub use sim::{MonteCarloConfig, SimConfig, SimError, Trajectory};
pub use stability::{GainConstants, PEMetrics, StabilityReport};
pub use vessel::{BodyVelocity, ControlInput, Pose, ReferenceProfile, VesselParams};
