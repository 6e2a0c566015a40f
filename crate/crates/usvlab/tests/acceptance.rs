//! Acceptance suite: one test per acceptance criterion, each printing a
//! single PASS/FAIL line (run with `--nocapture` to see the PASS lines).
//!
//! Criteria 1-3 certify the excitation metrics and gain formulas of the
//! bundled four-vessel scenario; 4-5 its convergence and the invariance of
//! the exact-formation manifold; 6-8 the velocity-tracking, Lyapunov and
//! cascade-decomposition properties; 9 the Monte Carlo robustness study;
//! 10 the integrator order and disturbance statistics.

use usvlab::config::{parse_config, ParsedConfig};
use usvlab::controller::{min_kdx, omega_cap, pd_plus_torque, vy_star_rate, Gains, VirtualControl};
use usvlab::formation::{
    formation_errors, g_matrix, h_matrix, xi_rates, FormationConfig, PairErrors, SwarmState,
    Topology,
};
use usvlab::sim::{
    monte_carlo, noise_stream, rk4_step, run_simulation, simulate_reference, Rk4, SimConfig,
    SimError,
};
use usvlab::stability::{
    cascade_fields, certify, default_t_grid, feasibility_bound, gain_constants, lyapunov_suite,
    omega_bar, pe_level, upsilon, LeaderSignals, PEMetrics, Xi,
};
use usvlab::vessel::{body_accel, BodyVelocity, Pose, VesselParams};

use nalgebra::Vector3;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const NOM: VesselParams = VesselParams::NOMINAL;
/// Reported excitation level, window length and yaw-rate bound of the
/// bundled scenario, as published with it.
const REPORTED_MU: f64 = 1.32;
const REPORTED_T: f64 = 20.94;
const REPORTED_OMEGA_BAR: f64 = 0.355;

fn verdict(n: u32, name: &str, failures: &[String], detail: String) {
    if failures.is_empty() {
        println!("ACCEPTANCE {n:02} PASS — {name}: {detail}");
    } else {
        println!(
            "ACCEPTANCE {n:02} FAIL — {name}: {detail}; problems: {}",
            failures.join("; ")
        );
        panic!("acceptance criterion {n} ({name}) failed: {}", failures.join("; "));
    }
}

fn bundled_config() -> ParsedConfig {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/paper_nominal.json");
    parse_config(path).expect("bundled scenario parses")
}

fn nominal_gains() -> Gains {
    Gains {
        kx: 0.2,
        ktheta: 0.2,
        kdx: 10.0,
        komega: 10.0,
    }
}

/// Criterion 1: the certification pipeline reproduces the scenario's
/// excitation numbers: omega_bar within 5% of 0.355 and mu within 10% of
/// 1.32 at the full-period window T = 20.94.
#[test]
fn criterion_01_pe_reproduction() {
    let cfg = bundled_config();
    let series = simulate_reference(&cfg.formation.reference, 1e-3, 300.0, 10).unwrap();
    let grid = default_t_grid(cfg.formation.reference.profile.freq, series.dt);
    let cert = certify(
        &cfg.formation,
        &series.omega,
        &series.omega_dot,
        series.dt,
        &grid,
        &[],
    )
    .unwrap();

    let wb = cert.report.pe.omega_bar_d;
    let mu = cert
        .mu_grid
        .iter()
        .find(|e| (e.t_window - REPORTED_T).abs() < 1e-9)
        .expect("grid holds the full-period window")
        .mu;

    let mut failures = Vec::new();
    if (wb - REPORTED_OMEGA_BAR).abs() > 0.05 * REPORTED_OMEGA_BAR {
        failures.push(format!("omega_bar_d {wb} outside 5% of {REPORTED_OMEGA_BAR}"));
    }
    if (mu - REPORTED_MU).abs() > 0.10 * REPORTED_MU {
        failures.push(format!("mu {mu} outside 10% of {REPORTED_MU}"));
    }
    if !cert.report.verdicts.pe_ok {
        failures.push("pe_ok verdict is false".into());
    }
    verdict(
        1,
        "PE reproduction",
        &failures,
        format!("omega_bar_d = {wb:.4} (target 0.355 +/- 5%), mu = {mu:.4} at T = 20.94 (target 1.32 +/- 10%)"),
    );
}

/// Criterion 2: the feasibility bound evaluates to 0.3905 +/- 1e-3 at the
/// reported (mu, T) and the scenario satisfies it.
#[test]
fn criterion_02_feasibility_bound() {
    let pe = PEMetrics {
        mu: REPORTED_MU,
        t_window: REPORTED_T,
        omega_bar_d: REPORTED_OMEGA_BAR,
    };
    let bound = feasibility_bound(&NOM, &pe);
    // Independent oracle: (d22/m11 * mu^2 / (4 mu T + T^2))^(1/3) evaluated
    // by hand at the reported values.
    let oracle = 0.390503;

    let cfg = bundled_config();
    let series = simulate_reference(&cfg.formation.reference, 1e-3, 300.0, 10).unwrap();
    let grid = default_t_grid(cfg.formation.reference.profile.freq, series.dt);
    let cert = certify(
        &cfg.formation,
        &series.omega,
        &series.omega_dot,
        series.dt,
        &grid,
        &[],
    )
    .unwrap();

    let mut failures = Vec::new();
    if (bound - 0.3905).abs() > 1e-3 {
        failures.push(format!("bound {bound} not within 1e-3 of 0.3905"));
    }
    if (bound - oracle).abs() > 1e-5 {
        failures.push(format!("bound {bound} disagrees with hand oracle {oracle}"));
    }
    if REPORTED_OMEGA_BAR > bound {
        failures.push("reported omega_bar does not satisfy the bound".into());
    }
    if !cert.report.verdicts.bound_ok {
        failures.push("measured bound_ok verdict is false".into());
    }
    verdict(
        2,
        "feasibility bound",
        &failures,
        format!(
            "bound = {bound:.6} (oracle {oracle}), bound_ok = {}",
            cert.report.verdicts.bound_ok
        ),
    );
}

/// Criterion 3: gain-formula oracles at the reported values; the finite-kx
/// expression is reported without any required agreement with 0.982.
#[test]
fn criterion_03_gain_formula_oracles() {
    let pe = PEMetrics {
        mu: REPORTED_MU,
        t_window: REPORTED_T,
        omega_bar_d: REPORTED_OMEGA_BAR,
    };
    let gc = gain_constants(&NOM, &pe, 0.2);

    // Independent formula evaluations (by hand):
    //   gamma2   = m11 kx wb / d22                    = 0.00378368
    //   limit    = (4 T m11 wb^3 / (mu d22)) (1 + T/(4 mu)) = 0.751281
    //   min_kdx  = m11^2 (ktheta + wb)^2 / (2 d22)    = 0.00830596
    let mut failures = Vec::new();
    if (gc.gamma2 - 0.0037837).abs() > 1e-6 {
        failures.push(format!("gamma2 {} not within 1e-6 of 0.0037837", gc.gamma2));
    }
    if (gc.limit_rhs - 0.751).abs() > 0.01 {
        failures.push(format!("limit_rhs {} not within 0.01 of 0.751", gc.limit_rhs));
    }
    let kdx_min = min_kdx(&NOM, omega_cap(&nominal_gains(), REPORTED_OMEGA_BAR));
    if (kdx_min - 0.008306).abs() > 1e-5 {
        failures.push(format!("min_kdx {kdx_min} not within 1e-5 of 0.008306"));
    }
    if nominal_gains().kdx < kdx_min {
        failures.push("bundled kdx = 10 fails its own bound".into());
    }
    if !(gc.above_rhs.is_finite() && gc.above_rhs > 0.0) {
        failures.push(format!("above_rhs {} is not a reportable value", gc.above_rhs));
    }
    verdict(
        3,
        "gain-formula oracles",
        &failures,
        format!(
            "gamma2 = {:.7}, limit_rhs = {:.4}, min_kdx = {:.7}, above_rhs at kx=0.2 = {:.4} (reported, 0.982 agreement not required)",
            gc.gamma2, gc.limit_rhs, kdx_min, gc.above_rhs
        ),
    );
}

/// Criterion 4: the bundled four-vessel run converges: every pair error
/// below 0.05 m / 0.01 rad at t_end and non-increasing window envelopes
/// over the final 30 s.
#[test]
fn criterion_04_nominal_convergence() {
    let cfg = bundled_config();
    assert_eq!(cfg.sim.dt, 1e-3);
    assert_eq!(cfg.sim.t_end, 150.0);
    assert_eq!(cfg.sim.noise_power, 0.0);
    let traj = run_simulation(&cfg.formation, &cfg.sim, 0).unwrap();

    let mut failures = Vec::new();
    let last = traj.len() - 1;
    let mut final_summary = Vec::new();
    for (k, f) in traj.followers.iter().enumerate() {
        let ep = f.errors[last].planar_norm();
        let eth = f.errors[last].etheta.abs();
        final_summary.push(format!("{ep:.1e}/{eth:.1e}"));
        if ep >= 0.05 {
            failures.push(format!("agent {}: |e_p|({}) = {ep}", k + 1, cfg.sim.t_end));
        }
        if eth >= 0.01 {
            failures.push(format!("agent {}: |e_theta|({}) = {eth}", k + 1, cfg.sim.t_end));
        }
        // Envelope over the final 30 s: maxima of two successive 15 s
        // windows must not increase.
        let window_max = |a: f64, b: f64| {
            traj.time
                .iter()
                .zip(&f.errors)
                .filter(|(&t, _)| t >= a && t < b)
                .map(|(_, e)| e.planar_norm())
                .fold(0.0, f64::max)
        };
        let w1 = window_max(cfg.sim.t_end - 30.0, cfg.sim.t_end - 15.0);
        let w2 = window_max(cfg.sim.t_end - 15.0, cfg.sim.t_end + 1.0);
        if w2 > w1 + 1e-12 {
            failures.push(format!(
                "agent {}: error envelope grew over the final 30 s ({w1:.2e} -> {w2:.2e})",
                k + 1
            ));
        }
    }
    verdict(
        4,
        "nominal convergence",
        &failures,
        format!("final |e_p|/|e_theta| per agent: [{}]", final_summary.join(", ")),
    );
}

/// Criterion 5: an exactly formed swarm stays on the manifold for 100 s up
/// to integrator roundoff.
#[test]
fn criterion_05_invariant_manifold() {
    let cfg = bundled_config();
    let mut fc = cfg.formation.clone();
    let on_manifold = SwarmState::exact_formation(
        &fc,
        fc.reference.initial_pose,
        fc.reference.initial_velocity,
    );
    for (k, f) in on_manifold.followers.iter().enumerate() {
        fc.agents[k].initial_pose = f.pose;
        fc.agents[k].initial_velocity = f.velocity;
    }
    let sc = SimConfig {
        t_end: 100.0,
        ..cfg.sim
    };
    let traj = run_simulation(&fc, &sc, 0).unwrap();
    let max_ep = traj.max_planar_error();
    let max_eth = traj
        .followers
        .iter()
        .flat_map(|f| f.errors.iter())
        .map(|e| e.etheta.abs())
        .fold(0.0, f64::max);

    let mut failures = Vec::new();
    if max_ep > 1e-6 || max_eth > 1e-6 {
        failures.push(format!("drift off the manifold: |e_p| {max_ep:.2e}, |e_theta| {max_eth:.2e}"));
    }
    verdict(
        5,
        "invariant manifold",
        &failures,
        format!("max |e_p| = {max_ep:.2e}, max |e_theta| = {max_eth:.2e} over 100 s"),
    );
}

/// Criterion 6: velocity tracking. Twenty random bounded yaw-command
/// profiles with the damping injection at its exact bound: the kinetic
/// Lyapunov function never increases and its log decays at least at the
/// guaranteed rate. Plus the closed-loop residual identity at 1000 states.
#[test]
fn criterion_06_velocity_tracking_suite() {
    let omega_m = omega_cap(&nominal_gains(), REPORTED_OMEGA_BAR);
    let kdx = min_kdx(&NOM, omega_m);
    let komega = 10.0;
    let mut rng = StdRng::seed_from_u64(0xACCE);
    let mut failures = Vec::new();
    let mut worst_slope = f64::NEG_INFINITY;

    for profile in 0..20 {
        // Smooth bounded commands; the product of sines keeps |omega*| at
        // or below omega_m.
        let (a1, b1) = (rng.gen_range(0.1..2.0), rng.gen_range(0.0..6.28));
        let (a2, b2) = (rng.gen_range(0.1..2.0), rng.gen_range(0.0..6.28));
        let (c1, c2) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let vstar = move |t: f64| {
            BodyVelocity::new(
                c1 * (a1 * t + b1).sin(),
                c2 * (a2 * t + b2).cos(),
                omega_m * (a1 * t + b1).sin() * (a2 * t + b2).sin(),
            )
        };
        let mut vt = [
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        ];
        let dt = 1e-3;
        let steps = 20_000;
        let mut rk = Rk4::new(3);
        let mut deriv = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), SimError> {
            let vs = vstar(t);
            let v = BodyVelocity::new(vs.vx + y[0], vs.vy + y[1], vs.omega + y[2]);
            // M vtilde_dot = -C(v) vtilde - (D + Kd) vtilde + Phi.
            let c = usvlab::vessel::coriolis_matrix(&v, &NOM);
            let vtv = Vector3::new(y[0], y[1], y[2]);
            let cv = c * vtv;
            dy[0] = (-cv[0] - (NOM.d11 + kdx) * y[0]) / NOM.m11;
            dy[1] = (-cv[1] - NOM.d22 * y[1] - NOM.m11 * y[0] * vs.omega) / NOM.m22;
            dy[2] = (-cv[2] - (NOM.d33 + komega) * y[2]) / NOM.m33;
            Ok(())
        };
        let v_of = |y: &[f64; 3]| {
            0.5 * (NOM.m11 * y[0] * y[0] + NOM.m22 * y[1] * y[1] + NOM.m33 * y[2] * y[2])
        };
        let mut log_points = Vec::new();
        let mut prev_v = v_of(&vt);
        log_points.push((0.0, prev_v.ln()));
        for s in 0..steps {
            let t = s as f64 * dt;
            let mut y = vt.to_vec();
            rk.step(&mut deriv, t, dt, &mut y).unwrap();
            vt = [y[0], y[1], y[2]];
            let v = v_of(&vt);
            if v > prev_v + 1e-8 {
                failures.push(format!(
                    "profile {profile}: V grew by {:.2e} at t = {:.3}",
                    v - prev_v,
                    t + dt
                ));
                break;
            }
            if v > 1e-25 {
                log_points.push((t + dt, v.ln()));
            }
            prev_v = v;
        }
        // Least-squares slope of log V.
        let n = log_points.len() as f64;
        let sx: f64 = log_points.iter().map(|(t, _)| t).sum();
        let sy: f64 = log_points.iter().map(|(_, l)| l).sum();
        let sxx: f64 = log_points.iter().map(|(t, _)| t * t).sum();
        let sxy: f64 = log_points.iter().map(|(t, l)| t * l).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        worst_slope = worst_slope.max(slope);
        // Guaranteed decay: at least min(d_ii) / max(m_ii) per second.
        let guaranteed = -(NOM.d11.min(NOM.d22).min(NOM.d33)) / NOM.m11.max(NOM.m22).max(NOM.m33);
        if slope >= guaranteed {
            failures.push(format!(
                "profile {profile}: log V slope {slope:.3} above the guaranteed {guaranteed:.3}"
            ));
        }
    }

    // Residual identity: closing the plant with the PD+ torque leaves
    // exactly the skew coupling term on the sway row.
    let g = Gains {
        kx: 0.2,
        ktheta: 0.2,
        kdx,
        komega,
    };
    let mut worst_residual = 0.0f64;
    for _ in 0..1000 {
        let v = BodyVelocity::new(
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-2.0..2.0),
        );
        let vx_star = rng.gen_range(-3.0..3.0);
        let vy_star = rng.gen_range(-3.0..3.0);
        let omega_star = rng.gen_range(-2.0..2.0);
        let vc = VirtualControl {
            vx_star,
            vy_star,
            omega_star,
            vx_star_dot: rng.gen_range(-1.0..1.0),
            vy_star_dot: vy_star_rate(vx_star, omega_star, vy_star, &NOM),
            omega_star_dot: rng.gen_range(-1.0..1.0),
        };
        let u = pd_plus_torque(&v, &vc, &g, &NOM);
        let a = body_accel(&v, &u, &Vector3::zeros(), &NOM);
        let vtilde = Vector3::new(
            v.vx - vc.vx_star,
            v.vy - vc.vy_star,
            v.omega - vc.omega_star,
        );
        let vtilde_dot = a - Vector3::new(vc.vx_star_dot, vc.vy_star_dot, vc.omega_star_dot);
        let c = usvlab::vessel::coriolis_matrix(&v, &NOM);
        let m = nalgebra::Matrix3::from_diagonal(&Vector3::new(NOM.m11, NOM.m22, NOM.m33));
        let dkd = nalgebra::Matrix3::from_diagonal(&Vector3::new(
            NOM.d11 + g.kdx,
            NOM.d22,
            NOM.d33 + g.komega,
        ));
        let residual = m * vtilde_dot + c * vtilde + dkd * vtilde
            - Vector3::new(0.0, -NOM.m11 * vtilde[0] * vc.omega_star, 0.0);
        worst_residual = worst_residual.max(residual.abs().max());
    }
    if worst_residual > 1e-10 {
        failures.push(format!("residual identity violated: {worst_residual:.2e}"));
    }

    verdict(
        6,
        "velocity-tracking suite",
        &failures,
        format!("worst log V slope = {worst_slope:.3}, worst row residual = {worst_residual:.2e}"),
    );
}

/// Criterion 7: Lyapunov diagnostics along a single-pair run in the regime
/// where the gain product is below one (kx = 0.02; the bundled kx = 0.2
/// puts the product above one, see the certification report).
#[test]
fn criterion_07_lyapunov_diagnostics() {
    let cfg = bundled_config();
    let mut fc = FormationConfig {
        reference: cfg.formation.reference.clone(),
        topology: Topology::chain(1),
        agents: vec![cfg.formation.agents[0].clone()],
    };
    fc.agents[0].gains.kx = 0.02;
    let sc = SimConfig {
        t_end: 150.0,
        ..cfg.sim
    };
    let traj = run_simulation(&fc, &sc, 0).unwrap();

    // Reference signals extending one excitation window past the horizon.
    let series = simulate_reference(&fc.reference, 1e-3, 180.0, 10).unwrap();
    let wb = omega_bar(&series.omega, &series.omega_dot).unwrap();
    let mu = pe_level(&series.omega, series.dt, REPORTED_T).unwrap();
    let pe = PEMetrics {
        mu,
        t_window: REPORTED_T,
        omega_bar_d: wb,
    };
    let consts = gain_constants(&NOM, &pe, 0.02);

    let mut failures = Vec::new();
    if consts.product >= 1.0 {
        failures.push(format!("diagnostic gain product {} >= 1", consts.product));
    }

    let f = &traj.followers[0];
    let mut prev_strict: Option<f64> = None;
    let mut prev_vvel: Option<f64> = None;
    let mut transient_cleared_at = None;
    let mut worst_strict_step = f64::NEG_INFINITY;
    for (i, &t) in traj.time.iter().enumerate() {
        let ups = upsilon(&series.omega, series.dt, t, &pe).unwrap();
        // Excitation deficit within its printed bounds at every instant.
        let (lo, hi) = (1.0 + wb * wb * REPORTED_T, 1.0 + 2.0 * wb * wb * REPORTED_T);
        if ups < lo - 1e-9 || ups > hi + 1e-9 {
            failures.push(format!("Upsilon({t}) = {ups} outside [{lo}, {hi}]"));
            break;
        }
        let snap = PairErrors {
            error: f.errors[i],
            vbar_y: f.vbar_y[i],
            vtilde: f.vtilde[i],
        };
        let omega_idx = (t / series.dt).round() as usize;
        let vals = lyapunov_suite(&snap, &consts, &pe, &NOM, series.omega[omega_idx], ups);

        // W1 sandwich at every recorded step.
        let n2 = snap.error.ex.powi(2) + snap.error.ey.powi(2);
        if vals.w1 < 0.5 * n2 - 1e-9 || vals.w1 > 0.5 * consts.beta * n2 + 1e-9 {
            failures.push(format!("W1 sandwich violated at t = {t}"));
            break;
        }

        // Kinetic Lyapunov function non-increasing over the whole run.
        if let Some(prev) = prev_vvel {
            if vals.v_vel > prev + 1e-8 {
                failures.push(format!("V_vel grew at t = {t}"));
                break;
            }
        }
        prev_vvel = Some(vals.v_vel);

        // Strict Lyapunov function non-increasing once the heading and
        // velocity transients fall below 1e-3.
        let transient = snap.error.etheta.abs().max(snap.vtilde_norm());
        if transient < 1e-3 {
            if transient_cleared_at.is_none() {
                transient_cleared_at = Some(t);
            }
            let strict = vals.v_strict.expect("product < 1");
            if let Some(prev) = prev_strict {
                worst_strict_step = worst_strict_step.max(strict - prev);
                if strict > prev + 1e-6 {
                    failures.push(format!("strict Lyapunov function grew at t = {t}"));
                    break;
                }
            }
            prev_strict = Some(strict);
        }
    }
    if transient_cleared_at.is_none() {
        failures.push("transients never fell below 1e-3".into());
    }
    verdict(
        7,
        "Lyapunov diagnostics",
        &failures,
        format!(
            "product = {:.3}, transients < 1e-3 from t = {:.1} s, worst strict step = {:.1e}",
            consts.product,
            transient_cleared_at.unwrap_or(f64::NAN),
            worst_strict_step
        ),
    );
}

fn random_swarm(rng: &mut StdRng, fc: &FormationConfig) -> SwarmState {
    let mut state = SwarmState::initial(fc);
    state.reference_pose = Pose::new(
        rng.gen_range(-5.0..5.0),
        rng.gen_range(-5.0..5.0),
        rng.gen_range(-3.0..3.0),
    );
    state.reference_velocity = BodyVelocity::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-0.5..0.5),
        rng.gen_range(-0.4..0.4),
    );
    for f in &mut state.followers {
        f.pose = Pose::new(
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-3.0..3.0),
        );
        f.velocity = BodyVelocity::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-1.0..1.0),
        );
        f.controller.vy_star = rng.gen_range(-1.0..1.0);
    }
    state
}

/// Criterion 8: the pipeline's error-coordinate rates decompose exactly as
/// nominal field + parent-deviation channel + velocity-error channel, and
/// reduce to the linear/scalar feedback pair on the zero-heading,
/// zero-velocity-error slice.
#[test]
fn criterion_08_decomposition_identity() {
    let cfg = bundled_config();
    // Three-vessel chain with distinct kinematic gains; one shared plant
    // model, as the decomposition requires.
    let mut fc = FormationConfig {
        reference: cfg.formation.reference.clone(),
        topology: Topology::chain(3),
        agents: cfg.formation.agents[..3].to_vec(),
    };
    fc.agents[1].gains.kx = 0.15;
    fc.agents[2].gains.ktheta = 0.3;

    let mut rng = StdRng::seed_from_u64(88);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let t = rng.gen_range(0.0..100.0);
        let state = random_swarm(&mut rng, &fc);
        let pipeline = xi_rates(t, &state, &fc).unwrap();
        let errs = formation_errors(&state, &fc);
        let vd = state.reference_velocity;
        let leader = LeaderSignals {
            vxd: vd.vx,
            vyd: vd.vy,
            omega_d: vd.omega,
        };
        for (k, pe) in errs.iter().enumerate() {
            let a = &fc.agents[k];
            let xi = Xi::from_pair(pe);
            let fields = cascade_fields(&xi, &leader, &a.gains, &a.model);
            let parent = fc.topology.parents[k];
            let vp = if parent == 0 {
                vd
            } else {
                state.followers[parent - 1].velocity
            };
            let dv = [vp.vx - vd.vx, vp.vy - vd.vy, vp.omega - vd.omega];
            let h = h_matrix(&pe.error, &a.gains, &a.model);
            let g = g_matrix(&pe.error);
            for row in 0..4 {
                let rhs = fields.f[row]
                    + h[row][0] * dv[0]
                    + h[row][1] * dv[1]
                    + h[row][2] * dv[2]
                    + g[row][0] * pe.vtilde[0]
                    + g[row][1] * pe.vtilde[1]
                    + g[row][2] * pe.vtilde[2];
                worst = worst.max((pipeline[k][row] - rhs).abs());
            }
        }
    }

    // Reduction: single pair on the {etheta = 0, vtilde = 0} slice matches
    // the linear position-error system driven by the sway-command error.
    let pair = FormationConfig {
        reference: cfg.formation.reference.clone(),
        topology: Topology::chain(1),
        agents: vec![cfg.formation.agents[0].clone()],
    };
    let g = pair.agents[0].gains;
    let mut worst_reduced = 0.0f64;
    for _ in 0..1000 {
        let t = rng.gen_range(0.0..100.0);
        let mut state = random_swarm(&mut rng, &pair);
        // Place the follower on the slice: matched heading, velocity equal
        // to the commanded one.
        let f = &mut state.followers[0];
        f.pose.theta = state.reference_pose.theta;
        let e = usvlab::controller::body_error(
            &f.pose,
            &state.reference_pose,
            pair.agents[0].offset,
        );
        let (vx_star, omega_star) =
            usvlab::controller::virtual_controls(&e, &state.reference_velocity, &g);
        f.velocity = BodyVelocity::new(vx_star, f.controller.vy_star, omega_star);

        let pipeline = xi_rates(t, &state, &pair).unwrap();
        let errs = formation_errors(&state, &pair);
        let pe = &errs[0];
        let vd = state.reference_velocity;
        // Sigma'' fields: e_p' = A(t) e_p + [0, vbar], vbar' =
        // -(d22/m22) vbar + (m11/m22) kx omega_d ex.
        let expect = [
            -g.kx * pe.error.ex + vd.omega * pe.error.ey,
            -vd.omega * pe.error.ex + pe.vbar_y,
            -(NOM.d22 / NOM.m22) * pe.vbar_y + (NOM.m11 / NOM.m22) * g.kx * vd.omega * pe.error.ex,
            0.0,
        ];
        for row in 0..4 {
            worst_reduced = worst_reduced.max((pipeline[0][row] - expect[row]).abs());
        }
    }

    let mut failures = Vec::new();
    if worst > 1e-10 {
        failures.push(format!("full decomposition residual {worst:.2e}"));
    }
    if worst_reduced > 1e-10 {
        failures.push(format!("reduced-slice residual {worst_reduced:.2e}"));
    }
    verdict(
        8,
        "decomposition identity",
        &failures,
        format!("worst residual {worst:.2e}, reduced slice {worst_reduced:.2e} over 1000 states each"),
    );
}

/// Criterion 9: Monte Carlo robustness: 100 perturbed, disturbed runs all
/// complete, and every run's planar error stays below the 1.0 m band over
/// the final 50 s.
///
/// KNOWN RED: with the per-parameter uncertainty draws this suite is built
/// on, the worst tail error across batches measures 0.91-1.30 m (median
/// 1.07 over 30 master seeds; 1.0585 for the bundled seed used here), so
/// the stated 1.0 m band fails by a few percent. A single ratio-preserving
/// factor per vessel would land at 0.85-1.0 m, which is evidently where the
/// band was calibrated. The per-parameter draws are kept because they are
/// what this suite pins elsewhere; the band is asserted as stated rather
/// than widened to fit.
#[test]
fn criterion_09_monte_carlo_robustness() {
    let cfg = bundled_config();
    let sc = cfg.sim_for_monte_carlo();
    assert_eq!(sc.noise_power, 0.1);
    assert_eq!(sc.noise_sample_time, 0.01);
    let mc = cfg.monte_carlo;
    assert_eq!(mc.n_runs, 100);

    let summary = monte_carlo(&cfg.formation, &sc, &mc).unwrap();
    assert!((summary.tail_start - 100.0).abs() < 1e-9);

    let mut failures = Vec::new();
    let diverged: Vec<usize> = summary
        .outcomes
        .iter()
        .filter(|o| o.diverged.is_some())
        .map(|o| o.run)
        .collect();
    if !diverged.is_empty() {
        failures.push(format!("diverged runs: {diverged:?}"));
    }
    let mut worst = 0.0f64;
    let mut worst_run = 0usize;
    for o in &summary.outcomes {
        for &v in &o.max_ep_tail {
            if v > worst {
                worst = v;
                worst_run = o.run;
            }
        }
    }
    if worst >= 1.0 {
        failures.push(format!(
            "run {worst_run}: sup |e_p| over [100, 150] = {worst:.4} >= 1.0"
        ));
    }
    verdict(
        9,
        "Monte Carlo robustness",
        &failures,
        format!(
            "100 runs, {} diverged, worst tail error = {worst:.4} m (band 1.0 m)",
            diverged.len()
        ),
    );
}

/// Criterion 10: integrator order via step halving on the bundled scenario
/// and disturbance statistics of the noise stream.
#[test]
fn criterion_10_integrator_and_noise() {
    let cfg = bundled_config();
    let horizon = 10.0;
    let final_state = |dt: f64| -> Vec<f64> {
        let sc = SimConfig {
            dt,
            t_end: horizon,
            record_stride: (horizon / dt).round() as usize,
            noise_power: 0.0,
            noise_sample_time: 0.01,
        };
        let traj = run_simulation(&cfg.formation, &sc, 0).unwrap();
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
    let reference_sol = final_state(5e-4);
    let e1 = norm(&final_state(8e-3), &reference_sol);
    let e2 = norm(&final_state(4e-3), &reference_sol);
    let ratio = e1 / e2;

    let mut failures = Vec::new();
    if !(8.0..=32.0).contains(&ratio) {
        failures.push(format!("step-halving ratio {ratio:.2} outside [8, 32]"));
    }

    // The public single-step entry point agrees with an exact exponential.
    let mut f = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), SimError> {
        dy[0] = -y[0];
        Ok(())
    };
    let next = rk4_step(&mut f, &[1.0], 0.0, 0.1).unwrap();
    if (next[0] - (-0.1f64).exp()).abs() > 1e-7 {
        failures.push("scalar exponential step error above 1e-7".into());
    }

    // Noise statistics over 1e5 holds: channel means within 4 sigma /
    // sqrt(N) of zero, variances within 5% of power / sample time.
    let sc = SimConfig {
        dt: 1e-3,
        t_end: 1000.0,
        noise_power: 0.1,
        noise_sample_time: 0.01,
        record_stride: 10,
    };
    let stream = noise_stream(&sc, 1, 424242);
    let n_holds = 100_000usize;
    let sigma2 = sc.noise_power / sc.noise_sample_time;
    for ch in 0..3 {
        let samples: Vec<f64> = (0..n_holds)
            .map(|k| stream.at(k as f64 * sc.noise_sample_time + 0.5 * sc.noise_sample_time, 0)[ch])
            .collect();
        let mean = samples.iter().sum::<f64>() / n_holds as f64;
        let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n_holds as f64;
        let mean_tol = 4.0 * sigma2.sqrt() / (n_holds as f64).sqrt();
        if mean.abs() > mean_tol {
            failures.push(format!("channel {ch} mean {mean:.4} beyond {mean_tol:.4}"));
        }
        if (var - sigma2).abs() > 0.05 * sigma2 {
            failures.push(format!("channel {ch} variance {var:.3} not within 5% of {sigma2}"));
        }
    }

    verdict(
        10,
        "integrator order and noise statistics",
        &failures,
        format!("step-halving ratio = {ratio:.2} (expect ~16)"),
    );
}
