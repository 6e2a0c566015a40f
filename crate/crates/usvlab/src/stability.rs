//! Numerical certification of the controller's hypotheses: persistency of
//! excitation of the reference yaw rate, the feasibility bound on its
//! magnitude, L2-gain constants of the inner feedback interconnection, the
//! small-gain verdict, and Lyapunov diagnostics along trajectories.
//!
//! All window integrals use the composite trapezoid rule on the uniformly
//! sampled series; at the default analysis spacing of 0.01 s this is far
//! below every tolerance the verdicts carry. The reference yaw acceleration
//! is always taken from the reference model's yaw dynamics row, never from
//! differencing samples.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{min_kdx, Gains};
use crate::formation::{FormationConfig, PairErrors};
use crate::vessel::VesselParams;

/// Errors from windowed-signal analysis.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("window of {t_window} s does not fit the sampled span of {span} s")]
    WindowTooLong { t_window: f64, span: f64 },
    #[error("signal series is empty")]
    EmptySeries,
    #[error("series lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

/// Persistency-of-excitation metrics of the reference yaw rate.
///
/// `mu` is the guaranteed energy of the yaw rate over any window of length
/// `t_window`; `omega_bar_d` bounds both the yaw rate and its derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PEMetrics {
    pub mu: f64,
    pub t_window: f64,
    pub omega_bar_d: f64,
}

/// Constants of the small-gain construction for the inner interconnection.
///
/// `alpha` is taken at its lower admissible value, which makes `gamma1` as
/// small as the construction permits. `above_rhs` and `limit_rhs` are the
/// two closed-form bounds on the gain product: the finite-`kx` expression
/// and its limit as `kx` tends to zero. The two displayed expressions are
/// kept exactly as printed even though one carries `(1+kx)^2` and the other
/// `(1+kx^2)`; both are reported. `lambda` is the interconnection weight of
/// the strict Lyapunov function, defined only when the product is below one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainConstants {
    pub kx: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub product: f64,
    pub above_rhs: f64,
    pub limit_rhs: f64,
    pub lambda: Option<f64>,
}

/// Boolean verdicts of the certification, consistent with the stored numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdicts {
    pub pe_ok: bool,
    pub bound_ok: bool,
    pub smallgain_ok: bool,
    pub kdx_ok: bool,
}

/// Full certification result for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub pe: PEMetrics,
    pub gains: GainConstants,
    /// Right-hand side of the feasibility bound on `omega_bar_d`.
    pub feasibility_bound_rhs: f64,
    /// Largest damping-injection requirement across agents.
    pub kdx_required: f64,
    /// Smallest configured `kdx` across agents.
    pub kdx_provided: f64,
    pub verdicts: Verdicts,
}

/// One row of the window-length sweep behind the reported PE pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuGridEntry {
    pub t_window: f64,
    pub mu: f64,
    pub feasibility_bound: f64,
    pub margin: f64,
}

/// Report plus the sweeps it was selected from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainCertificate {
    #[serde(flatten)]
    pub report: StabilityReport,
    pub mu_grid: Vec<MuGridEntry>,
    pub kx_grid: Vec<GainConstants>,
}

fn window_steps(t_window: f64, dt: f64) -> usize {
    (t_window / dt).round() as usize
}

/// Excitation level: the infimum over start times of the trapezoid-rule
/// integral of `omega^2` over windows of length `t_window`.
///
/// The window is snapped to the nearest whole number of samples. The span
/// must cover at least two windows.
pub fn pe_level(omega: &[f64], dt: f64, t_window: f64) -> Result<f64, StabilityError> {
    if omega.is_empty() {
        return Err(StabilityError::EmptySeries);
    }
    let span = (omega.len() - 1) as f64 * dt;
    if 2.0 * t_window > span {
        return Err(StabilityError::WindowTooLong { t_window, span });
    }
    let w = window_steps(t_window, dt).max(1);

    // Prefix sums of omega^2; the trapezoid integral over [i, i+w] is
    // dt * (sum - half the endpoints).
    let sq: Vec<f64> = omega.iter().map(|o| o * o).collect();
    let mut prefix = Vec::with_capacity(sq.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in &sq {
        acc += v;
        prefix.push(acc);
    }

    let mut min = f64::INFINITY;
    for i in 0..=(omega.len() - 1 - w) {
        let total = prefix[i + w + 1] - prefix[i];
        let integral = dt * (total - 0.5 * sq[i] - 0.5 * sq[i + w]);
        if integral < min {
            min = integral;
        }
    }
    Ok(min)
}

/// Joint bound on the yaw rate and its derivative: the larger of the two
/// sup-norms.
pub fn omega_bar(omega: &[f64], omega_dot: &[f64]) -> Result<f64, StabilityError> {
    if omega.is_empty() || omega_dot.is_empty() {
        return Err(StabilityError::EmptySeries);
    }
    if omega.len() != omega_dot.len() {
        return Err(StabilityError::LengthMismatch {
            left: omega.len(),
            right: omega_dot.len(),
        });
    }
    let sup = |s: &[f64]| s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(sup(omega).max(sup(omega_dot)))
}

/// Right-hand side of the feasibility bound on `omega_bar_d`:
/// `(d22/m11 * mu^2 / (4 mu T + T^2))^(1/3)`.
pub fn feasibility_bound(p: &VesselParams, pe: &PEMetrics) -> f64 {
    let t = pe.t_window;
    ((p.d22 / p.m11) * pe.mu * pe.mu / (4.0 * pe.mu * t + t * t)).cbrt()
}

/// L2-gain and Lyapunov-construction constants for one surge gain `kx`.
pub fn gain_constants(p: &VesselParams, pe: &PEMetrics, kx: f64) -> GainConstants {
    let wb = pe.omega_bar_d;
    let t = pe.t_window;
    let mu = pe.mu;

    let alpha = wb.max((2.0 * wb * wb / kx) * (1.0 + t / (4.0 * mu) * (1.0 + kx) * (1.0 + kx)));
    let beta = 1.0 + 2.0 * wb * wb * t + alpha + wb;
    let gamma1 = 2.0 * t * beta / mu;
    let gamma2 = p.m11 * kx * wb / p.d22;
    let product = gamma1 * gamma2;
    let above_rhs = (2.0 * t * p.m11 / (mu * p.d22))
        * kx
        * wb
        * (1.0
            + 2.0 * wb * wb * t
            + 2.0 * wb
            + (2.0 * wb * wb / kx) * (1.0 + t / (4.0 * mu) * (1.0 + kx * kx)));
    let limit_rhs = (4.0 * t * p.m11 * wb.powi(3) / (mu * p.d22)) * (1.0 + t / (4.0 * mu));
    let lambda = if product < 1.0 && gamma2 > 0.0 {
        // Geometric mean of the admissible interval (gamma1, 1/gamma2).
        Some((gamma1 / gamma2).sqrt())
    } else {
        None
    };

    GainConstants {
        kx,
        alpha,
        beta,
        gamma1,
        gamma2,
        product,
        above_rhs,
        limit_rhs,
        lambda,
    }
}

/// Excitation deficit function at time `t`:
/// `1 + 2 omega_bar^2 T - (2/T) * double integral of omega^2` over the
/// window `[t, t+T]`, evaluated with nested trapezoid rules.
pub fn upsilon(omega: &[f64], dt: f64, t: f64, pe: &PEMetrics) -> Result<f64, StabilityError> {
    if omega.is_empty() {
        return Err(StabilityError::EmptySeries);
    }
    let w = window_steps(pe.t_window, dt).max(1);
    let i = (t / dt).round() as usize;
    if i + w >= omega.len() {
        return Err(StabilityError::WindowTooLong {
            t_window: pe.t_window,
            span: (omega.len() - 1) as f64 * dt - t,
        });
    }

    // Inner integrals I(m) = int_t^m omega^2 ds for m on the sample grid,
    // then the outer trapezoid over m.
    let mut inner = 0.0;
    let mut outer = 0.0;
    let mut prev_sq = omega[i] * omega[i];
    for j in 1..=w {
        let sq = omega[i + j] * omega[i + j];
        let inner_next = inner + 0.5 * dt * (prev_sq + sq);
        // Trapezoid weight of the outer integral; inner(i) = 0.
        outer += 0.5 * dt * (inner + inner_next);
        inner = inner_next;
        prev_sq = sq;
    }

    let wb = pe.omega_bar_d;
    Ok(1.0 + 2.0 * wb * wb * pe.t_window - 2.0 / pe.t_window * outer)
}

/// Values of the Lyapunov/storage functions at one state and time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovValues {
    /// Strict Lyapunov function of the position-error subsystem.
    pub w1: f64,
    /// Scaled variant used in the gain construction: `(2T/mu) W1`.
    pub v1: f64,
    /// Storage function of the sway-command error subsystem.
    pub v2: f64,
    /// Strict Lyapunov function of the interconnection, `V1 + lambda^2 V2`;
    /// absent when the small-gain product is not below one.
    pub v_strict: Option<f64>,
    /// Kinetic-energy Lyapunov function of the velocity error.
    pub v_vel: f64,
    /// Forward-completeness functional `|e|^2 + |vtilde|^2 + vbar_y^2`.
    pub u_fc: f64,
}

/// Position-error Lyapunov function
/// `W1 = (Upsilon(t) + alpha)/2 |e_p|^2 - omega_d(t) ex ey`.
pub fn w1_value(e_p: [f64; 2], omega_d_t: f64, upsilon_t: f64, alpha: f64) -> f64 {
    0.5 * (upsilon_t + alpha) * (e_p[0] * e_p[0] + e_p[1] * e_p[1]) - omega_d_t * e_p[0] * e_p[1]
}

/// Evaluates all six Lyapunov/storage scalars at one snapshot, given the
/// reference yaw rate and excitation deficit at that instant.
pub fn lyapunov_suite(
    snap: &PairErrors,
    consts: &GainConstants,
    pe: &PEMetrics,
    p: &VesselParams,
    omega_d_t: f64,
    upsilon_t: f64,
) -> LyapunovValues {
    let e = &snap.error;
    let w1 = w1_value([e.ex, e.ey], omega_d_t, upsilon_t, consts.alpha);
    let v1 = 2.0 * pe.t_window / pe.mu * w1;
    let v2 = p.m22 / (2.0 * p.d22) * snap.vbar_y * snap.vbar_y;
    let v_strict = consts.lambda.map(|l| v1 + l * l * v2);
    let vt = snap.vtilde;
    let v_vel = 0.5 * (p.m11 * vt[0] * vt[0] + p.m22 * vt[1] * vt[1] + p.m33 * vt[2] * vt[2]);
    let u_fc = (e.ex * e.ex + e.ey * e.ey + e.etheta * e.etheta)
        + (vt[0] * vt[0] + vt[1] * vt[1] + vt[2] * vt[2])
        + snap.vbar_y * snap.vbar_y;
    LyapunovValues {
        w1,
        v1,
        v2,
        v_strict,
        v_vel,
        u_fc,
    }
}

/// Error-system state `(e_p, vbar_y, etheta)` of one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Xi {
    pub e_p: [f64; 2],
    pub vbar_y: f64,
    pub etheta: f64,
}

impl Xi {
    pub fn from_pair(pe: &PairErrors) -> Xi {
        Xi {
            e_p: [pe.error.ex, pe.error.ey],
            vbar_y: pe.vbar_y,
            etheta: pe.error.etheta,
        }
    }
}

/// Reference velocities entering the cascade fields at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeaderSignals {
    pub vxd: f64,
    pub vyd: f64,
    pub omega_d: f64,
}

/// The algebraic pieces of the cascade decomposition at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeFields {
    /// Linear position-error drift `A(t) e_p`.
    pub a_ep: [f64; 2],
    /// Heading-coupling perturbation on the position error.
    pub b1: [f64; 2],
    /// Heading-coupling perturbation on the sway-command error.
    pub b2: f64,
    /// Stacked nominal field `F(t, xi)` in `(ex, ey, vbar_y, etheta)` order.
    pub f: [f64; 4],
}

/// Evaluates the printed decomposition pieces `A(t) e_p`, `B1`, `B2` and the
/// stacked nominal field `F`. Used by decomposition-consistency checks and
/// diagnostics only; the simulator never integrates these.
pub fn cascade_fields(xi: &Xi, leader: &LeaderSignals, g: &Gains, p: &VesselParams) -> CascadeFields {
    let [ex, ey] = xi.e_p;
    let (s, c) = xi.etheta.sin_cos();
    let th = xi.etheta.tanh();
    let a_ep = [
        -g.kx * ex + leader.omega_d * ey,
        -leader.omega_d * ex,
    ];
    let b1 = [
        leader.vxd * (1.0 - c) - leader.vyd * s - g.ktheta * ey * th,
        leader.vxd * s + leader.vyd * (1.0 - c) + g.ktheta * ex * th,
    ];
    let b2 = (leader.vxd - g.kx * ex) * (p.m11 / p.m22) * g.ktheta * th;
    let f = [
        a_ep[0] + b1[0],
        a_ep[1] + xi.vbar_y + b1[1],
        -(p.d22 / p.m22) * xi.vbar_y + (p.m11 / p.m22) * g.kx * leader.omega_d * ex + b2,
        -g.ktheta * th,
    ];
    CascadeFields { a_ep, b1, b2, f }
}

/// Builds the certification report for a scenario from a sampled reference
/// trajectory.
///
/// `t_grid` lists candidate PE window lengths; each is snapped to a whole
/// number of samples. The reported pair is the one maximizing the
/// feasibility margin `bound - omega_bar_d`. `kx_grid` optionally tabulates
/// the gain constants over extra surge gains.
///
/// The feasibility bound uses the reference vessel's parameters; the gain
/// constants are evaluated per agent (model parameters and own `kx`) and
/// the worst product is reported. The damping-injection verdict checks
/// every agent against its own cap `ktheta + omega_bar_d`.
pub fn certify(
    fc: &FormationConfig,
    omega: &[f64],
    omega_dot: &[f64],
    dt: f64,
    t_grid: &[f64],
    kx_grid: &[f64],
) -> Result<GainCertificate, StabilityError> {
    let wb = omega_bar(omega, omega_dot)?;

    let mut mu_grid = Vec::new();
    for &t_raw in t_grid {
        let w = window_steps(t_raw, dt).max(1);
        let t_window = w as f64 * dt;
        if mu_grid
            .iter()
            .any(|e: &MuGridEntry| (e.t_window - t_window).abs() < 0.5 * dt)
        {
            continue;
        }
        let mu = pe_level(omega, dt, t_window)?;
        let pe = PEMetrics {
            mu,
            t_window,
            omega_bar_d: wb,
        };
        let bound = feasibility_bound(&fc.reference.params, &pe);
        mu_grid.push(MuGridEntry {
            t_window,
            mu,
            feasibility_bound: bound,
            margin: bound - wb,
        });
    }
    let best = mu_grid
        .iter()
        .max_by(|a, b| a.margin.total_cmp(&b.margin))
        .ok_or(StabilityError::EmptySeries)?;
    let pe = PEMetrics {
        mu: best.mu,
        t_window: best.t_window,
        omega_bar_d: wb,
    };
    let feasibility_bound_rhs = best.feasibility_bound;

    // Worst-case gain constants across agents.
    let gains = fc
        .agents
        .iter()
        .map(|a| gain_constants(&a.model, &pe, a.gains.kx))
        .max_by(|a, b| a.product.total_cmp(&b.product))
        .ok_or(StabilityError::EmptySeries)?;

    let kdx_required = fc
        .agents
        .iter()
        .map(|a| min_kdx(&a.model, a.gains.ktheta + wb))
        .fold(0.0f64, f64::max);
    let kdx_provided = fc
        .agents
        .iter()
        .map(|a| a.gains.kdx)
        .fold(f64::INFINITY, f64::min);
    let kdx_ok = fc
        .agents
        .iter()
        .all(|a| a.gains.kdx >= min_kdx(&a.model, a.gains.ktheta + wb));

    let report = StabilityReport {
        pe,
        gains,
        feasibility_bound_rhs,
        kdx_required,
        kdx_provided,
        verdicts: Verdicts {
            pe_ok: pe.mu > 0.0,
            bound_ok: wb <= feasibility_bound_rhs,
            smallgain_ok: gains.product < 1.0,
            kdx_ok,
        },
    };

    let kx_grid = kx_grid
        .iter()
        .map(|&kx| gain_constants(&fc.reference.params, &pe, kx))
        .collect();

    Ok(GainCertificate {
        report,
        mu_grid,
        kx_grid,
    })
}

/// Default PE window-length candidates for a reference profile: fractions
/// and small multiples of the yaw-torque period, so a full-period window is
/// always present.
pub fn default_t_grid(freq: f64, dt: f64) -> Vec<f64> {
    let period = std::f64::consts::TAU / freq;
    [0.25, 0.5, 0.75, 1.0, 1.25, 1.5]
        .iter()
        .map(|f| {
            let w = window_steps(f * period, dt).max(1);
            w as f64 * dt
        })
        .collect()
}

/// Snapshot of a single-pair run used when replaying diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagSample {
    pub t: f64,
    pub snap: PairErrors,
}

/// Convenience: evaluates the Lyapunov suite along recorded samples, pairing
/// each with the reference yaw-rate series (which must extend at least one
/// window beyond the last sample).
pub fn lyapunov_along(
    samples: &[DiagSample],
    consts: &GainConstants,
    pe: &PEMetrics,
    p: &VesselParams,
    omega: &[f64],
    dt: f64,
) -> Result<Vec<(f64, LyapunovValues)>, StabilityError> {
    let mut out = Vec::with_capacity(samples.len());
    for s in samples {
        let i = (s.t / dt).round() as usize;
        if i >= omega.len() {
            return Err(StabilityError::WindowTooLong {
                t_window: pe.t_window,
                span: (omega.len() - 1) as f64 * dt,
            });
        }
        let ups = upsilon(omega, dt, s.t, pe)?;
        out.push((
            s.t,
            lyapunov_suite(&s.snap, consts, pe, p, omega[i], ups),
        ));
    }
    Ok(out)
}
