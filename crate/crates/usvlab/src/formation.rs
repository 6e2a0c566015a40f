//! Multi-agent wiring: spanning-tree topology, per-agent controller
//! instantiation, and the assembled closed-loop swarm ODE.
//!
//! Agent 0 is the virtual leader (the reference vessel); followers are
//! numbered `1..=n` and each follows exactly one parent with a smaller
//! index, so the communication graph is a directed spanning tree rooted at
//! the reference. A derivative evaluation walks the agents in ascending
//! index order, which makes every parent's freshly computed acceleration
//! available to its children within the same pass: the broadcast of
//! `(v_leader, v_leader_dot)` is instantaneous.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{
    assemble_virtual_control, body_error, error_rates, pd_plus_torque, BodyError, ControllerState,
    Gains,
};
use crate::vessel::{
    body_accel, pose_rate, reference_torque, BodyVelocity, ControlInput, Pose, ReferenceProfile,
    VesselParams,
};

/// Errors from topology validation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("topology is empty")]
    Empty,
    #[error("agent {index} must follow the virtual leader (parent 0), got parent {parent}")]
    UnrootedLeader { index: usize, parent: usize },
    #[error("dangling parent at index {index}: parent {parent} >= own agent number")]
    DanglingParent { index: usize, parent: usize },
    #[error("cyclic topology at index {index}: agent is its own ancestor")]
    CyclicTopology { index: usize },
}

/// Directed-spanning-tree communication topology.
///
/// `parents[k]` is the parent agent number of follower `k + 1`; parent 0 is
/// the virtual leader. Requiring `parents[k] <= k` makes the graph acyclic
/// by construction and every chain of parents terminates at agent 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub parents: Vec<usize>,
}

impl Topology {
    /// A chain: agent 1 follows the leader, agent i follows agent i-1.
    pub fn chain(n: usize) -> Topology {
        Topology {
            parents: (0..n).collect(),
        }
    }

    pub fn agent_count(&self) -> usize {
        self.parents.len()
    }
}

/// Confirms `parents[k] <= k` for every follower and that the swarm leader
/// (agent 1) follows the virtual leader.
pub fn validate_topology(t: &Topology) -> Result<(), TopologyError> {
    if t.parents.is_empty() {
        return Err(TopologyError::Empty);
    }
    for (index, &parent) in t.parents.iter().enumerate() {
        if parent > index {
            return Err(TopologyError::DanglingParent { index, parent });
        }
    }
    if t.parents[0] != 0 {
        return Err(TopologyError::UnrootedLeader {
            index: 0,
            parent: t.parents[0],
        });
    }
    Ok(())
}

/// One follower's physical vessel, controller model, gains, formation slot
/// and initial state.
///
/// `plant` is the vessel being integrated; `model` is what its controller
/// believes. They coincide in nominal runs and diverge in the Monte Carlo
/// robustness study, where only the plant is perturbed.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSetup {
    pub plant: VesselParams,
    pub model: VesselParams,
    pub gains: Gains,
    /// Desired world-frame displacement (dx, dy) from the parent.
    pub offset: (f64, f64),
    pub initial_pose: Pose,
    pub initial_velocity: BodyVelocity,
}

/// The virtual leader: force profile, model and initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSetup {
    pub profile: ReferenceProfile,
    pub params: VesselParams,
    pub initial_pose: Pose,
    pub initial_velocity: BodyVelocity,
}

impl Default for ReferenceSetup {
    fn default() -> Self {
        ReferenceSetup {
            profile: ReferenceProfile::default(),
            params: VesselParams::NOMINAL,
            initial_pose: Pose::default(),
            initial_velocity: BodyVelocity::default(),
        }
    }
}

/// Full formation scenario: reference, topology, and per-agent setups.
#[derive(Debug, Clone, PartialEq)]
pub struct FormationConfig {
    pub reference: ReferenceSetup,
    pub topology: Topology,
    pub agents: Vec<AgentSetup>,
}

impl FormationConfig {
    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    /// Structural validation: topology shape, matching lengths, positive
    /// parameters and gain signs.
    pub fn validate(&self) -> Result<(), String> {
        validate_topology(&self.topology).map_err(|e| e.to_string())?;
        if self.topology.agent_count() != self.agents.len() {
            return Err(format!(
                "topology lists {} agents but {} agent setups are given",
                self.topology.agent_count(),
                self.agents.len()
            ));
        }
        self.reference.profile.validate()?;
        self.reference.params.validate()?;
        for (i, a) in self.agents.iter().enumerate() {
            a.plant
                .validate()
                .map_err(|e| format!("agent {}: plant {e}", i + 1))?;
            a.model
                .validate()
                .map_err(|e| format!("agent {}: model {e}", i + 1))?;
            a.gains
                .validate()
                .map_err(|e| format!("agent {}: {e}", i + 1))?;
        }
        Ok(())
    }

    /// State-vector length: reference (6) plus 7 per follower.
    pub fn state_dim(&self) -> usize {
        6 + 7 * self.agents.len()
    }
}

/// One follower's dynamic state.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FollowerState {
    pub pose: Pose,
    pub velocity: BodyVelocity,
    pub controller: ControllerState,
}

/// Aggregated swarm state: the reference vessel plus all followers.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub reference_pose: Pose,
    pub reference_velocity: BodyVelocity,
    pub followers: Vec<FollowerState>,
}

impl SwarmState {
    /// Initial state from the scenario. Each follower's sway-command
    /// integrator starts at its parent's initial sway velocity.
    pub fn initial(cfg: &FormationConfig) -> SwarmState {
        let followers = cfg
            .agents
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let parent = cfg.topology.parents[k];
                let parent_vy = if parent == 0 {
                    cfg.reference.initial_velocity.vy
                } else {
                    cfg.agents[parent - 1].initial_velocity.vy
                };
                FollowerState {
                    pose: a.initial_pose,
                    velocity: a.initial_velocity,
                    controller: ControllerState { vy_star: parent_vy },
                }
            })
            .collect();
        SwarmState {
            reference_pose: cfg.reference.initial_pose,
            reference_velocity: cfg.reference.initial_velocity,
            followers,
        }
    }

    /// A swarm sitting exactly on the formation manifold relative to the
    /// given reference state: offsets satisfied, headings and velocities
    /// matched, sway integrators aligned.
    pub fn exact_formation(
        cfg: &FormationConfig,
        reference_pose: Pose,
        reference_velocity: BodyVelocity,
    ) -> SwarmState {
        let mut positions = vec![(reference_pose.x, reference_pose.y)];
        for (k, a) in cfg.agents.iter().enumerate() {
            let (px, py) = positions[cfg.topology.parents[k]];
            positions.push((px + a.offset.0, py + a.offset.1));
        }
        let followers = (0..cfg.agents.len())
            .map(|k| FollowerState {
                pose: Pose::new(
                    positions[k + 1].0,
                    positions[k + 1].1,
                    reference_pose.theta,
                ),
                velocity: reference_velocity,
                controller: ControllerState {
                    vy_star: reference_velocity.vy,
                },
            })
            .collect();
        SwarmState {
            reference_pose,
            reference_velocity,
            followers,
        }
    }

    pub fn dim(&self) -> usize {
        6 + 7 * self.followers.len()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.write_flat(&mut out);
        out
    }

    pub fn write_flat(&self, out: &mut [f64]) {
        out[0] = self.reference_pose.x;
        out[1] = self.reference_pose.y;
        out[2] = self.reference_pose.theta;
        out[3] = self.reference_velocity.vx;
        out[4] = self.reference_velocity.vy;
        out[5] = self.reference_velocity.omega;
        for (k, f) in self.followers.iter().enumerate() {
            let b = 6 + 7 * k;
            out[b] = f.pose.x;
            out[b + 1] = f.pose.y;
            out[b + 2] = f.pose.theta;
            out[b + 3] = f.velocity.vx;
            out[b + 4] = f.velocity.vy;
            out[b + 5] = f.velocity.omega;
            out[b + 6] = f.controller.vy_star;
        }
    }

    pub fn from_flat(n_agents: usize, y: &[f64]) -> SwarmState {
        debug_assert_eq!(y.len(), 6 + 7 * n_agents);
        SwarmState {
            reference_pose: Pose::new(y[0], y[1], y[2]),
            reference_velocity: BodyVelocity::new(y[3], y[4], y[5]),
            followers: (0..n_agents)
                .map(|k| {
                    let b = 6 + 7 * k;
                    FollowerState {
                        pose: Pose::new(y[b], y[b + 1], y[b + 2]),
                        velocity: BodyVelocity::new(y[b + 3], y[b + 4], y[b + 5]),
                        controller: ControllerState { vy_star: y[b + 6] },
                    }
                })
                .collect(),
        }
    }
}

/// Swarm evaluation error.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormationError {
    #[error("non-finite state component at flat index {index}")]
    NonFiniteState { index: usize },
    #[error("expected {expected} disturbance entries, got {got}")]
    DisturbanceLength { expected: usize, got: usize },
}

/// Per-agent diagnostics captured during a derivative evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AgentDiag {
    pub error: BodyError,
    pub vbar_y: f64,
    pub vtilde: [f64; 3],
    pub torque: ControlInput,
}

/// Core derivative evaluation on the flat state layout.
///
/// `accels` must hold `n_agents + 1` slots and receives each agent's true
/// acceleration, which is what it broadcasts to its children (slot 0 is the
/// reference). `diag`, when given, must hold `n_agents` entries.
pub(crate) fn eval_flat(
    t: f64,
    y: &[f64],
    cfg: &FormationConfig,
    w: &[[f64; 3]],
    dy: &mut [f64],
    accels: &mut [[f64; 3]],
    mut diag: Option<&mut [AgentDiag]>,
) -> Result<(), FormationError> {
    if let Some(index) = y.iter().position(|v| !v.is_finite()) {
        return Err(FormationError::NonFiniteState { index });
    }
    let n = cfg.agents.len();
    if w.len() != n {
        return Err(FormationError::DisturbanceLength {
            expected: n,
            got: w.len(),
        });
    }

    // Reference vessel (agent 0), undisturbed.
    let qd = Pose::new(y[0], y[1], y[2]);
    let vd = BodyVelocity::new(y[3], y[4], y[5]);
    let tau_d = reference_torque(t, &cfg.reference.profile);
    let a0 = body_accel(
        &vd,
        &tau_d,
        &nalgebra::Vector3::zeros(),
        &cfg.reference.params,
    );
    let q0_rate = pose_rate(&qd, &vd);
    dy[0..3].copy_from_slice(q0_rate.as_slice());
    dy[3..6].copy_from_slice(a0.as_slice());
    accels[0] = [a0[0], a0[1], a0[2]];

    // Followers in ascending order: parents are always already evaluated.
    for k in 0..n {
        let a = &cfg.agents[k];
        let b = 6 + 7 * k;
        let q = Pose::new(y[b], y[b + 1], y[b + 2]);
        let v = BodyVelocity::new(y[b + 3], y[b + 4], y[b + 5]);
        let state = ControllerState { vy_star: y[b + 6] };

        let parent = cfg.topology.parents[k];
        let (qp, vp) = if parent == 0 {
            (qd, vd)
        } else {
            let pb = 6 + 7 * (parent - 1);
            (
                Pose::new(y[pb], y[pb + 1], y[pb + 2]),
                BodyVelocity::new(y[pb + 3], y[pb + 4], y[pb + 5]),
            )
        };
        let ap = accels[parent];

        let e = body_error(&q, &qp, a.offset);
        let vc = assemble_virtual_control(&e, &v, &vp, &ap, &state, &a.gains, &a.model);
        let tau = pd_plus_torque(&v, &vc, &a.gains, &a.model);
        let disturbance = nalgebra::Vector3::new(w[k][0], w[k][1], w[k][2]);
        let acc = body_accel(&v, &tau, &disturbance, &a.plant);
        let q_rate = pose_rate(&q, &v);

        dy[b..b + 3].copy_from_slice(q_rate.as_slice());
        dy[b + 3..b + 6].copy_from_slice(acc.as_slice());
        dy[b + 6] = vc.vy_star_dot;
        accels[k + 1] = [acc[0], acc[1], acc[2]];

        if let Some(d) = diag.as_deref_mut() {
            d[k] = AgentDiag {
                error: e,
                vbar_y: state.vy_star - vp.vy,
                vtilde: [
                    v.vx - vc.vx_star,
                    v.vy - vc.vy_star,
                    v.omega - vc.omega_star,
                ],
                torque: tau,
            };
        }
    }
    Ok(())
}

/// Time derivative of the full swarm state: reference dynamics followed by,
/// per follower, error formation, virtual controls, the sway feasibility
/// ODE, the PD+ torque and the disturbed plant acceleration.
///
/// `disturbance` holds one `[N, N, N m]` entry per follower.
pub fn swarm_derivative(
    t: f64,
    state: &SwarmState,
    cfg: &FormationConfig,
    disturbance: &[[f64; 3]],
) -> Result<SwarmState, FormationError> {
    let y = state.to_flat();
    let mut dy = vec![0.0; y.len()];
    let mut accels = vec![[0.0; 3]; cfg.agents.len() + 1];
    eval_flat(t, &y, cfg, disturbance, &mut dy, &mut accels, None)?;
    Ok(SwarmState::from_flat(cfg.agents.len(), &dy))
}

/// Per-pair diagnostic error coordinates.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PairErrors {
    pub error: BodyError,
    /// Sway command error against the parent: `vy* - vy_parent`.
    pub vbar_y: f64,
    /// Velocity error `v - v*`.
    pub vtilde: [f64; 3],
}

impl PairErrors {
    pub fn vtilde_norm(&self) -> f64 {
        (self.vtilde[0] * self.vtilde[0]
            + self.vtilde[1] * self.vtilde[1]
            + self.vtilde[2] * self.vtilde[2])
            .sqrt()
    }
}

/// All diagnostic error coordinates of the swarm, one entry per follower.
pub fn formation_errors(state: &SwarmState, cfg: &FormationConfig) -> Vec<PairErrors> {
    let n = cfg.agents.len();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let a = &cfg.agents[k];
        let f = &state.followers[k];
        let parent = cfg.topology.parents[k];
        let (qp, vp) = if parent == 0 {
            (state.reference_pose, state.reference_velocity)
        } else {
            let p = &state.followers[parent - 1];
            (p.pose, p.velocity)
        };
        let e = body_error(&f.pose, &qp, a.offset);
        let (vx_star, omega_star) = crate::controller::virtual_controls(&e, &vp, &a.gains);
        out.push(PairErrors {
            error: e,
            vbar_y: f.controller.vy_star - vp.vy,
            vtilde: [
                f.velocity.vx - vx_star,
                f.velocity.vy - f.controller.vy_star,
                f.velocity.omega - omega_star,
            ],
        });
    }
    out
}

/// Pipeline evaluation of the error-coordinate rates
/// `(ex_dot, ey_dot, vbar_y_dot, etheta_dot)` per follower, computed from
/// the printed error kinematics and the sway ODE minus the parent's actual
/// sway acceleration. Used by the decomposition-consistency checks.
pub fn xi_rates(
    t: f64,
    state: &SwarmState,
    cfg: &FormationConfig,
) -> Result<Vec<[f64; 4]>, FormationError> {
    let n = cfg.agents.len();
    let y = state.to_flat();
    let mut dy = vec![0.0; y.len()];
    let mut accels = vec![[0.0; 3]; n + 1];
    let w = vec![[0.0; 3]; n];
    eval_flat(t, &y, cfg, &w, &mut dy, &mut accels, None)?;

    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let a = &cfg.agents[k];
        let f = &state.followers[k];
        let parent = cfg.topology.parents[k];
        let (qp, vp) = if parent == 0 {
            (state.reference_pose, state.reference_velocity)
        } else {
            let p = &state.followers[parent - 1];
            (p.pose, p.velocity)
        };
        let e = body_error(&f.pose, &qp, a.offset);
        let er = error_rates(&e, &f.velocity, &vp);
        let vy_star_dot = dy[6 + 7 * k + 6];
        let parent_sway_accel = accels[parent][1];
        out.push([er[0], er[1], vy_star_dot - parent_sway_accel, er[2]]);
    }
    Ok(out)
}

/// Input matrix of the parent-deviation channel in the closed-loop error
/// system: multiplies `Delta v_parent = v_parent - v_d`. Rows are ordered
/// `(ex, ey, vbar_y, etheta)`.
pub fn h_matrix(e: &BodyError, g: &Gains, p: &VesselParams) -> [[f64; 3]; 4] {
    let (s, c) = e.etheta.sin_cos();
    let th = e.etheta.tanh();
    let ratio = p.m11 / p.m22;
    [
        [1.0 - c, -s, e.ey],
        [s, 1.0 - c, -e.ex],
        [ratio * g.ktheta * th, 0.0, ratio * g.kx * e.ex],
        [0.0, 0.0, 0.0],
    ]
}

/// Input matrix of the velocity-error channel in the closed-loop error
/// system: multiplies `vtilde`. Rows are ordered `(ex, ey, vbar_y, etheta)`.
pub fn g_matrix(e: &BodyError) -> [[f64; 3]; 4] {
    [
        [1.0, 0.0, e.ey],
        [0.0, 1.0, -e.ex],
        [0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0],
    ]
}
