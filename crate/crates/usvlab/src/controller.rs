//! Single leader-follower pair controller.
//!
//! Control is split across two levels. At the kinematics level the commanded
//! surge and yaw-rate are linear / saturated-linear in the body-frame errors,
//!
//! ```text
//! vx*    = -kx ex + vx_leader
//! omega* = -ktheta tanh(etheta) + omega_leader
//! ```
//!
//! while the commanded sway velocity `vy*` cannot be assigned freely (the
//! sway axis is unactuated) and is instead generated by the feasibility ODE
//!
//! ```text
//! vy*_dot = -(m11/m22) vx* omega* - (d22/m22) vy*,   vy*(0) = vy_leader(0).
//! ```
//!
//! At the kinetics level a PD+ law drives the velocity error `v - v*` to
//! zero: model feedforward `M v*_dot + C(v) v* + D v*` plus damping
//! injection `-Kd (v - v*)`, projected onto the two actuated channels. The
//! sway damping-injection gain is structurally zero: injecting damping there
//! would re-introduce the coupling the feasibility ODE removes.

use serde::{Deserialize, Serialize};

use crate::vessel::{BodyVelocity, ControlInput, Pose, VesselParams};

/// Controller gains for one follower.
///
/// `kdy` does not exist: the sway damping-injection gain is identically
/// zero by construction, not a tunable defaulted to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gains {
    /// Surge-error gain (1/s).
    pub kx: f64,
    /// Heading gain (rad/s); also the saturation level of the yaw command.
    pub ktheta: f64,
    /// Surge damping injection (N s/m).
    pub kdx: f64,
    /// Yaw damping injection (N m s).
    pub komega: f64,
}

impl Gains {
    /// Hard validation of the sign constraints. The velocity-tracking bound
    /// `kdx >= min_kdx` is checked separately ([`Gains::kdx_warning`]); it is
    /// sufficient, not necessary, so violating it is a warning rather than
    /// an error.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.kx > 0.0) {
            return Err(format!("kx must be > 0, got {}", self.kx));
        }
        if !(self.ktheta > 0.0) {
            return Err(format!("ktheta must be > 0, got {}", self.ktheta));
        }
        if !(self.komega > 0.0) {
            return Err(format!("komega must be > 0, got {}", self.komega));
        }
        if !self.kdx.is_finite() || self.kdx < 0.0 {
            return Err(format!("kdx must be finite and >= 0, got {}", self.kdx));
        }
        Ok(())
    }

    /// Returns a warning when `kdx` sits below the exponential-tracking
    /// bound for yaw commands capped at `ktheta + omega_bar_d`.
    pub fn kdx_warning(&self, p: &VesselParams, omega_bar_d: f64) -> Option<String> {
        let needed = min_kdx(p, omega_cap(self, omega_bar_d));
        if self.kdx < needed {
            Some(format!(
                "kdx = {} is below the velocity-tracking bound {needed:.6}; \
                 exponential decay of the velocity error is no longer guaranteed",
                self.kdx
            ))
        } else {
            None
        }
    }
}

/// Body-frame tracking error of a follower against its leader.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BodyError {
    pub ex: f64,
    pub ey: f64,
    pub etheta: f64,
}

impl BodyError {
    pub fn planar_norm(&self) -> f64 {
        self.ex.hypot(self.ey)
    }
}

/// Integrator state of the sway feasibility ODE, one per follower.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub vy_star: f64,
}

/// Commanded body velocity and its analytic time derivative.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VirtualControl {
    pub vx_star: f64,
    pub vy_star: f64,
    pub omega_star: f64,
    pub vx_star_dot: f64,
    pub vy_star_dot: f64,
    pub omega_star_dot: f64,
}

impl VirtualControl {
    pub fn velocity(&self) -> BodyVelocity {
        BodyVelocity::new(self.vx_star, self.vy_star, self.omega_star)
    }
}

/// Body-frame error of `q` against `q_leader` with a desired world-frame
/// displacement `offset = (dx, dy)`: the world displacement minus the offset,
/// rotated by the follower's own heading; the heading error is the plain
/// difference.
pub fn body_error(q: &Pose, q_leader: &Pose, offset: (f64, f64)) -> BodyError {
    let dx = q.x - q_leader.x - offset.0;
    let dy = q.y - q_leader.y - offset.1;
    let (s, c) = q.theta.sin_cos();
    BodyError {
        ex: c * dx + s * dy,
        ey: -s * dx + c * dy,
        etheta: q.theta - q_leader.theta,
    }
}

/// Error kinematics `(ex_dot, ey_dot, etheta_dot)` of the body-frame error
/// under own velocity `v` and leader velocity `v_leader`.
pub fn error_rates(e: &BodyError, v: &BodyVelocity, v_leader: &BodyVelocity) -> [f64; 3] {
    let (s, c) = e.etheta.sin_cos();
    [
        v.omega * e.ey + v.vx - v_leader.vx * c - v_leader.vy * s,
        -v.omega * e.ex + v.vy + v_leader.vx * s - v_leader.vy * c,
        v.omega - v_leader.omega,
    ]
}

/// Kinematic control laws: commanded surge and yaw rate.
///
/// At zero error both commands reduce to the leader's velocities, and the
/// yaw command never departs from the leader's rate by more than `ktheta`.
pub fn virtual_controls(e: &BodyError, v_leader: &BodyVelocity, g: &Gains) -> (f64, f64) {
    (
        -g.kx * e.ex + v_leader.vx,
        -g.ktheta * e.etheta.tanh() + v_leader.omega,
    )
}

/// Right-hand side of the sway feasibility ODE.
pub fn vy_star_rate(vx_star: f64, omega_star: f64, vy_star: f64, p: &VesselParams) -> f64 {
    -(p.m11 / p.m22) * vx_star * omega_star - (p.d22 / p.m22) * vy_star
}

/// Analytic time derivatives of the kinematic control laws, given the error
/// rates and the leader's body acceleration `(vx_dot, vy_dot, omega_dot)`.
///
/// Differencing the commands numerically would amplify disturbance noise, so
/// the chain rule is applied instead; this is why each follower is assumed
/// to receive its leader's acceleration along with its velocity.
pub fn virtual_control_rates(
    e: &BodyError,
    e_rates: &[f64; 3],
    v_leader_dot: &[f64; 3],
    g: &Gains,
) -> (f64, f64) {
    let sech2 = {
        let th = e.etheta.tanh();
        1.0 - th * th
    };
    (
        -g.kx * e_rates[0] + v_leader_dot[0],
        -g.ktheta * sech2 * e_rates[2] + v_leader_dot[2],
    )
}

/// PD+ torque on the actuated channels.
///
/// Forms the full three-axis force `M v*_dot + C(v) v* + D v* - Kd (v - v*)`
/// with `Kd = diag{kdx, 0, komega}` and keeps rows 1 and 3, which is the
/// left pseudoinverse of the input matrix applied to it.
pub fn pd_plus_torque(
    v: &BodyVelocity,
    vc: &VirtualControl,
    g: &Gains,
    p: &VesselParams,
) -> ControlInput {
    let tau_x = p.m11 * vc.vx_star_dot - p.m22 * v.vy * vc.omega_star + p.d11 * vc.vx_star
        - g.kdx * (v.vx - vc.vx_star);
    let tau_omega = p.m33 * vc.omega_star_dot
        + (p.m22 * v.vy * vc.vx_star - p.m11 * v.vx * vc.vy_star)
        + p.d33 * vc.omega_star
        - g.komega * (v.omega - vc.omega_star);
    ControlInput { tau_x, tau_omega }
}

/// Upper bound on the commanded yaw rate: saturation level plus the bound on
/// the leader's yaw rate.
pub fn omega_cap(g: &Gains, omega_bar_d: f64) -> f64 {
    g.ktheta + omega_bar_d
}

/// Smallest surge damping injection for which the velocity-error Lyapunov
/// function decays under yaw commands capped at `omega_m`.
pub fn min_kdx(p: &VesselParams, omega_m: f64) -> f64 {
    p.m11 * p.m11 * omega_m * omega_m / (2.0 * p.d22)
}

/// Assembles the full virtual control (commands plus derivatives) for one
/// follower from its error, its own and its leader's velocities, the
/// leader's acceleration, and the integrated sway command.
///
/// This is the per-agent step the swarm derivative runs; it is exposed so
/// single-pair studies and the diagnostics suite evaluate the controller
/// exactly as the simulator does.
pub fn assemble_virtual_control(
    e: &BodyError,
    v: &BodyVelocity,
    v_leader: &BodyVelocity,
    v_leader_dot: &[f64; 3],
    state: &ControllerState,
    g: &Gains,
    p: &VesselParams,
) -> VirtualControl {
    let (vx_star, omega_star) = virtual_controls(e, v_leader, g);
    let e_rates = error_rates(e, v, v_leader);
    let (vx_star_dot, omega_star_dot) = virtual_control_rates(e, &e_rates, v_leader_dot, g);
    let vy_star = state.vy_star;
    VirtualControl {
        vx_star,
        vy_star,
        omega_star,
        vx_star_dot,
        vy_star_dot: vy_star_rate(vx_star, omega_star, vy_star, p),
        omega_star_dot,
    }
}
