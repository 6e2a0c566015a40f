//! 3-DOF underactuated surface vessel model and reference generator.
//!
//! The vessel is described in a body-fixed frame by
//!
//! ```text
//! q_dot = J(q) v
//! M v_dot + C(v) v + D v = G tau + w
//! ```
//!
//! with `q = [x y theta]`, `v = [vx vy omega]`, diagonal inertia
//! `M = diag{m11, m22, m33}` and damping `D = diag{d11, d22, d33}`.
//! Only surge force and yaw torque are actuated: `G` maps
//! `tau = [tau_x tau_omega]` onto rows 1 and 3 of the force balance, so the
//! sway channel is driven purely by Coriolis coupling and damping. The
//! virtual leader is a fictitious vessel with the same model driven by a
//! fixed force profile.

use serde::{Deserialize, Serialize};

use nalgebra::{Matrix3, Vector3};

/// The six inertia/damping constants of the diagonal vessel model.
///
/// `M = diag{m11, m22, m33}` (kg, kg, kg m^2) and
/// `D = diag{d11, d22, d33}` (N s/m, N s/m, N m s). All six must be
/// strictly positive. The Coriolis matrix is derived from `m11` and `m22`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VesselParams {
    pub m11: f64,
    pub m22: f64,
    pub m33: f64,
    pub d11: f64,
    pub d22: f64,
    pub d33: f64,
}

impl VesselParams {
    /// Nominal laboratory-size vessel constants used throughout the bundled
    /// scenarios.
    pub const NOMINAL: VesselParams = VesselParams {
        m11: 1.012,
        m22: 1.982,
        m33: 0.354,
        d11: 3.436,
        d22: 18.99,
        d33: 0.864,
    };

    /// Checks strict positivity of all six constants.
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("m11", self.m11),
            ("m22", self.m22),
            ("m33", self.m33),
            ("d11", self.d11),
            ("d22", self.d22),
            ("d33", self.d33),
        ];
        for (name, value) in fields {
            if !(value > 0.0) || !value.is_finite() {
                return Err(format!("{name} must be strictly positive, got {value}"));
            }
        }
        Ok(())
    }

    /// Returns a copy with each constant multiplied by the matching factor,
    /// in field order `[m11, m22, m33, d11, d22, d33]`. Used by the Monte
    /// Carlo study to perturb plant parameters.
    pub fn scaled(&self, factors: [f64; 6]) -> VesselParams {
        VesselParams {
            m11: self.m11 * factors[0],
            m22: self.m22 * factors[1],
            m33: self.m33 * factors[2],
            d11: self.d11 * factors[3],
            d22: self.d22 * factors[4],
            d33: self.d33 * factors[5],
        }
    }
}

impl Default for VesselParams {
    fn default() -> Self {
        Self::NOMINAL
    }
}

/// Planar pose: position (m) plus heading (rad).
///
/// The heading lives on the unwrapped real line; no modular reduction is
/// ever applied, so heading errors feed the controller continuously.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose { x, y, theta }
    }
}

/// Body-frame velocity: surge (m/s), sway (m/s), yaw rate (rad/s).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BodyVelocity {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl BodyVelocity {
    pub fn new(vx: f64, vy: f64, omega: f64) -> Self {
        BodyVelocity { vx, vy, omega }
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.vx, self.vy, self.omega)
    }
}

/// Actuator command: surge force (N) and yaw torque (N m).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub tau_x: f64,
    pub tau_omega: f64,
}

impl ControlInput {
    pub fn new(tau_x: f64, tau_omega: f64) -> Self {
        ControlInput { tau_x, tau_omega }
    }
}

/// Force profile driving the virtual leader: constant surge thrust plus a
/// sinusoidal yaw torque `amp * sin(freq * t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceProfile {
    pub tau_x0: f64,
    pub amp: f64,
    pub freq: f64,
}

impl ReferenceProfile {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.amp >= 0.0) {
            return Err(format!("reference amp must be >= 0, got {}", self.amp));
        }
        if !(self.freq > 0.0) {
            return Err(format!("reference freq must be > 0, got {}", self.freq));
        }
        Ok(())
    }
}

impl Default for ReferenceProfile {
    /// The bundled scenario profile: 2 N surge, 0.3 sin(0.3 t) N m yaw.
    fn default() -> Self {
        ReferenceProfile {
            tau_x0: 2.0,
            amp: 0.3,
            freq: 0.3,
        }
    }
}

/// Planar rotation `J(theta)` from body frame to world frame.
///
/// Orthogonal with unit determinant; the yaw row/column is the identity.
pub fn rotation_matrix(theta: f64) -> Matrix3<f64> {
    let (s, c) = theta.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Coriolis/centrifugal matrix `C(v)`; skew-symmetric by construction.
pub fn coriolis_matrix(v: &BodyVelocity, p: &VesselParams) -> Matrix3<f64> {
    let a = p.m22 * v.vy;
    let b = p.m11 * v.vx;
    Matrix3::new(0.0, 0.0, -a, 0.0, 0.0, b, a, -b, 0.0)
}

/// Body-frame acceleration `v_dot = M^-1 (G tau + w - C(v) v - D v)`.
///
/// `w` is an additive force/torque disturbance on all three channels (the
/// sway channel is unactuated but still disturbed). `M` is diagonal so the
/// solve is componentwise.
pub fn body_accel(
    v: &BodyVelocity,
    u: &ControlInput,
    w: &Vector3<f64>,
    p: &VesselParams,
) -> Vector3<f64> {
    // C(v) v = [-m22 vy w, m11 vx w, (m22 - m11) vx vy]
    let ax = (u.tau_x + w[0] + p.m22 * v.vy * v.omega - p.d11 * v.vx) / p.m11;
    let ay = (w[1] - p.m11 * v.vx * v.omega - p.d22 * v.vy) / p.m22;
    let aw = (u.tau_omega + w[2] - (p.m22 - p.m11) * v.vx * v.vy - p.d33 * v.omega) / p.m33;
    Vector3::new(ax, ay, aw)
}

/// Pose derivative `q_dot = J(q) v`.
pub fn pose_rate(q: &Pose, v: &BodyVelocity) -> Vector3<f64> {
    let (s, c) = q.theta.sin_cos();
    Vector3::new(c * v.vx - s * v.vy, s * v.vx + c * v.vy, v.omega)
}

/// Leader force profile evaluated at time `t`.
pub fn reference_torque(t: f64, profile: &ReferenceProfile) -> ControlInput {
    ControlInput {
        tau_x: profile.tau_x0,
        tau_omega: profile.amp * (profile.freq * t).sin(),
    }
}
