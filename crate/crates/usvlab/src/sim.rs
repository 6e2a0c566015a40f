//! Deterministic fixed-step integration of the swarm ODE, seeded
//! band-limited white-noise disturbances, and the Monte Carlo robustness
//! study.
//!
//! The integrator is the classical fourth-order Runge-Kutta scheme at a
//! default step of 1 ms, which resolves the fastest closed-loop mode
//! (`d22/m22`, roughly 9.6 1/s) with two orders of magnitude to spare.
//! Everything is reproducible from `(config, seed)`: noise draws are
//! pregenerated from a ChaCha stream, Monte Carlo child seeds come from a
//! counter-based split of the master seed, and runs may therefore execute
//! in parallel without affecting any result.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::BodyError;
use crate::formation::{
    eval_flat, AgentDiag, FormationConfig, FormationError, ReferenceSetup, SwarmState,
};
use crate::vessel::{body_accel, pose_rate, reference_torque, BodyVelocity, ControlInput, Pose};

/// Integration and disturbance parameters of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Integration step (s).
    pub dt: f64,
    /// Horizon (s).
    pub t_end: f64,
    /// Disturbance power; zero disables the disturbance entirely.
    pub noise_power: f64,
    /// Zero-order-hold interval of the disturbance (s).
    pub noise_sample_time: f64,
    /// Output decimation: one record every this many steps.
    pub record_stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-3,
            t_end: 150.0,
            noise_power: 0.0,
            noise_sample_time: 0.01,
            record_stride: 10,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.dt > 0.0) {
            return Err(format!("dt must be > 0, got {}", self.dt));
        }
        if !(self.t_end > 0.0) {
            return Err(format!("t_end must be > 0, got {}", self.t_end));
        }
        if self.record_stride == 0 {
            return Err("record_stride must be >= 1".into());
        }
        if self.noise_power < 0.0 || !self.noise_power.is_finite() {
            return Err(format!("noise power must be >= 0, got {}", self.noise_power));
        }
        if self.noise_power > 0.0 {
            if self.dt > self.noise_sample_time {
                return Err(format!(
                    "dt = {} exceeds the noise sample time {}",
                    self.dt, self.noise_sample_time
                ));
            }
            let ratio = self.noise_sample_time / self.dt;
            if (ratio - ratio.round()).abs() > 1e-6 * ratio {
                return Err(format!(
                    "noise sample time {} must be an integer multiple of dt {}",
                    self.noise_sample_time, self.dt
                ));
            }
        }
        Ok(())
    }

    /// Number of integration steps (the horizon is snapped to a whole
    /// number of steps).
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Monte Carlo study parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub n_runs: usize,
    /// Multiplicative parameter-perturbation range applied to each plant
    /// constant independently.
    pub uncertainty_low: f64,
    pub uncertainty_high: f64,
    /// Standard deviation of the initial positions (m).
    pub init_pos_sigma: f64,
    /// Standard deviation of each initial body-velocity component.
    pub init_vel_sigma: f64,
    /// Uniform interval of the initial headings (rad).
    pub heading_min: f64,
    pub heading_max: f64,
    pub master_seed: u64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            n_runs: 100,
            uncertainty_low: 0.5,
            uncertainty_high: 1.5,
            init_pos_sigma: 5.0,
            init_vel_sigma: 5.0,
            heading_min: -std::f64::consts::PI,
            heading_max: std::f64::consts::PI,
            master_seed: 1,
        }
    }
}

impl MonteCarloConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.uncertainty_low > 0.0) || self.uncertainty_low > self.uncertainty_high {
            return Err(format!(
                "uncertainty range must satisfy 0 < low <= high, got [{}, {}]",
                self.uncertainty_low, self.uncertainty_high
            ));
        }
        if self.init_pos_sigma < 0.0 || self.init_vel_sigma < 0.0 {
            return Err("initial-state sigmas must be >= 0".into());
        }
        if self.heading_min > self.heading_max {
            return Err(format!(
                "heading interval is empty: [{}, {}]",
                self.heading_min, self.heading_max
            ));
        }
        Ok(())
    }
}

/// Simulation errors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("state diverged (non-finite) at t = {t}")]
    Diverged { t: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl From<FormationError> for SimError {
    fn from(e: FormationError) -> Self {
        match e {
            // The divergence time is attached where the step time is known.
            FormationError::NonFiniteState { .. } => SimError::Diverged { t: f64::NAN },
            other => SimError::InvalidConfig(other.to_string()),
        }
    }
}

/// One classical Runge-Kutta step of `state` under the derivative `f`.
///
/// `f(t, y, dy)` writes the derivative of `y` at time `t` into `dy` and may
/// fail (non-finite state); the failure is propagated.
pub fn rk4_step<F>(f: &mut F, state: &[f64], t: f64, dt: f64) -> Result<Vec<f64>, SimError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), SimError>,
{
    let mut rk = Rk4::new(state.len());
    let mut y = state.to_vec();
    rk.step(f, t, dt, &mut y)?;
    Ok(y)
}

/// Reusable Runge-Kutta workspace for allocation-free stepping.
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Rk4 {
        Rk4 {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `y` in place from `t` to `t + dt`.
    pub fn step<F>(&mut self, f: &mut F, t: f64, dt: f64, y: &mut [f64]) -> Result<(), SimError>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), SimError>,
    {
        let n = y.len();
        let half = 0.5 * dt;
        f(t, y, &mut self.k1)?;
        for i in 0..n {
            self.tmp[i] = y[i] + half * self.k1[i];
        }
        f(t + half, &self.tmp, &mut self.k2)?;
        for i in 0..n {
            self.tmp[i] = y[i] + half * self.k2[i];
        }
        f(t + half, &self.tmp, &mut self.k3)?;
        for i in 0..n {
            self.tmp[i] = y[i] + dt * self.k3[i];
        }
        f(t + dt, &self.tmp, &mut self.k4)?;
        let sixth = dt / 6.0;
        for i in 0..n {
            y[i] += sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        Ok(())
    }
}

/// Zero-order-hold Gaussian disturbance: on each interval
/// `[k Ts, (k+1) Ts)` every channel of every agent holds a fresh draw with
/// standard deviation `sqrt(power / Ts)`. Draws are pregenerated from the
/// seed, so equal seeds give bitwise-identical streams.
pub struct NoiseStream {
    sigma: f64,
    sample_time: f64,
    n_agents: usize,
    // Hold-major, then agent: draws[hold * n_agents + agent].
    draws: Vec<[f64; 3]>,
}

impl NoiseStream {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Disturbance on `agent` at time `t`.
    pub fn at(&self, t: f64, agent: usize) -> [f64; 3] {
        if self.sigma == 0.0 {
            return [0.0; 3];
        }
        // The tiny offset keeps times that are exact hold boundaries (up to
        // accumulated floating error) in the interval they open.
        let hold = ((t / self.sample_time) + 1e-9).floor() as usize;
        let hold = hold.min(self.draws.len() / self.n_agents - 1);
        self.draws[hold * self.n_agents + agent]
    }
}

/// Builds the disturbance stream for `n_agents` vessels over the horizon of
/// `cfg`, deterministically from `seed`.
pub fn noise_stream(cfg: &SimConfig, n_agents: usize, seed: u64) -> NoiseStream {
    let sigma = if cfg.noise_power > 0.0 {
        (cfg.noise_power / cfg.noise_sample_time).sqrt()
    } else {
        0.0
    };
    let draws = if sigma > 0.0 {
        let n_holds = (cfg.t_end / cfg.noise_sample_time).ceil() as usize + 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
        (0..n_holds * n_agents)
            .map(|_| {
                [
                    normal.sample(&mut rng),
                    normal.sample(&mut rng),
                    normal.sample(&mut rng),
                ]
            })
            .collect()
    } else {
        Vec::new()
    };
    NoiseStream {
        sigma,
        sample_time: cfg.noise_sample_time,
        n_agents,
        draws,
    }
}

/// Recorded history of one agent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AgentTrack {
    pub poses: Vec<Pose>,
    pub velocities: Vec<BodyVelocity>,
    pub errors: Vec<BodyError>,
    pub vbar_y: Vec<f64>,
    pub vtilde: Vec<[f64; 3]>,
    pub torques: Vec<ControlInput>,
}

impl AgentTrack {
    fn with_capacity(n: usize) -> AgentTrack {
        AgentTrack {
            poses: Vec::with_capacity(n),
            velocities: Vec::with_capacity(n),
            errors: Vec::with_capacity(n),
            vbar_y: Vec::with_capacity(n),
            vtilde: Vec::with_capacity(n),
            torques: Vec::with_capacity(n),
        }
    }

    pub fn vtilde_norm(&self, idx: usize) -> f64 {
        let v = self.vtilde[idx];
        (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
    }
}

/// Decimated history of a run: the reference (index 0 in outputs) plus one
/// track per follower. Error columns of the reference are identically zero;
/// its torque column carries the reference force profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub time: Vec<f64>,
    pub reference: AgentTrack,
    pub followers: Vec<AgentTrack>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// Largest planar error norm over all followers and records.
    pub fn max_planar_error(&self) -> f64 {
        self.followers
            .iter()
            .flat_map(|f| f.errors.iter())
            .map(|e| e.planar_norm())
            .fold(0.0, f64::max)
    }
}

/// Integrates the swarm from its configured initial state, recording every
/// `record_stride` steps. Deterministic per `(configs, seed)`.
pub fn run_simulation(
    fc: &FormationConfig,
    sc: &SimConfig,
    seed: u64,
) -> Result<Trajectory, SimError> {
    fc.validate().map_err(SimError::InvalidConfig)?;
    sc.validate().map_err(SimError::InvalidConfig)?;
    let noise = noise_stream(sc, fc.agent_count(), seed);
    integrate(fc, sc, &noise)
}

fn integrate(fc: &FormationConfig, sc: &SimConfig, noise: &NoiseStream) -> Result<Trajectory, SimError> {
    let n = fc.agent_count();
    let n_steps = sc.n_steps();
    let n_records = n_steps / sc.record_stride + 1;

    let mut y = SwarmState::initial(fc).to_flat();
    let mut rk = Rk4::new(y.len());
    let mut w = vec![[0.0; 3]; n];
    let mut accels = vec![[0.0; 3]; n + 1];
    let mut diag = vec![AgentDiag::default(); n];

    let mut traj = Trajectory {
        time: Vec::with_capacity(n_records),
        reference: AgentTrack::with_capacity(n_records),
        followers: vec![AgentTrack::with_capacity(n_records); n],
    };

    let record =
        |t: f64, y: &[f64], w: &mut [[f64; 3]], accels: &mut [[f64; 3]], diag: &mut [AgentDiag], traj: &mut Trajectory| -> Result<(), SimError> {
            for (k, wk) in w.iter_mut().enumerate() {
                *wk = noise.at(t, k);
            }
            let mut dy = vec![0.0; y.len()];
            eval_flat(t, y, fc, w, &mut dy, accels, Some(diag))
                .map_err(|e| attach_time(e, t))?;
            traj.time.push(t);
            traj.reference.poses.push(Pose::new(y[0], y[1], y[2]));
            traj.reference
                .velocities
                .push(BodyVelocity::new(y[3], y[4], y[5]));
            traj.reference.errors.push(BodyError::default());
            traj.reference.vbar_y.push(0.0);
            traj.reference.vtilde.push([0.0; 3]);
            traj.reference
                .torques
                .push(reference_torque(t, &fc.reference.profile));
            for k in 0..n {
                let b = 6 + 7 * k;
                let f = &mut traj.followers[k];
                f.poses.push(Pose::new(y[b], y[b + 1], y[b + 2]));
                f.velocities
                    .push(BodyVelocity::new(y[b + 3], y[b + 4], y[b + 5]));
                f.errors.push(diag[k].error);
                f.vbar_y.push(diag[k].vbar_y);
                f.vtilde.push(diag[k].vtilde);
                f.torques.push(diag[k].torque);
            }
            Ok(())
        };

    for step in 0..n_steps {
        let t = step as f64 * sc.dt;
        if step % sc.record_stride == 0 {
            record(t, &y, &mut w, &mut accels, &mut diag, &mut traj)?;
        }
        let mut deriv = |ts: f64, ys: &[f64], dys: &mut [f64]| -> Result<(), SimError> {
            for (k, wk) in w.iter_mut().enumerate() {
                *wk = noise.at(ts, k);
            }
            eval_flat(ts, ys, fc, &w, dys, &mut accels, None).map_err(|e| attach_time(e, ts))
        };
        rk.step(&mut deriv, t, sc.dt, &mut y)?;
    }
    if n_steps % sc.record_stride == 0 {
        let t = n_steps as f64 * sc.dt;
        record(t, &y, &mut w, &mut accels, &mut diag, &mut traj)?;
    }
    Ok(traj)
}

fn attach_time(e: FormationError, t: f64) -> SimError {
    match e {
        FormationError::NonFiniteState { .. } => SimError::Diverged { t },
        other => SimError::InvalidConfig(other.to_string()),
    }
}

/// Uniformly sampled reference trajectory signals, for excitation analysis.
///
/// The yaw acceleration comes from the reference model's yaw dynamics row,
/// not from differencing.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSeries {
    /// Sample spacing (s).
    pub dt: f64,
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    pub omega: Vec<f64>,
    pub omega_dot: Vec<f64>,
}

impl ReferenceSeries {
    pub fn span(&self) -> f64 {
        (self.omega.len().saturating_sub(1)) as f64 * self.dt
    }
}

/// Integrates the reference vessel alone over `[0, t_end]` at step `dt`,
/// sampling every `stride` steps.
pub fn simulate_reference(
    setup: &ReferenceSetup,
    dt: f64,
    t_end: f64,
    stride: usize,
) -> Result<ReferenceSeries, SimError> {
    if !(dt > 0.0) || !(t_end > 0.0) || stride == 0 {
        return Err(SimError::InvalidConfig(
            "reference integration needs dt > 0, t_end > 0, stride >= 1".into(),
        ));
    }
    let n_steps = (t_end / dt).round() as usize;
    let mut series = ReferenceSeries {
        dt: dt * stride as f64,
        vx: Vec::new(),
        vy: Vec::new(),
        omega: Vec::new(),
        omega_dot: Vec::new(),
    };
    let mut y = [
        setup.initial_pose.x,
        setup.initial_pose.y,
        setup.initial_pose.theta,
        setup.initial_velocity.vx,
        setup.initial_velocity.vy,
        setup.initial_velocity.omega,
    ];
    let mut rk = Rk4::new(6);
    let mut deriv = |t: f64, ys: &[f64], dys: &mut [f64]| -> Result<(), SimError> {
        let q = Pose::new(ys[0], ys[1], ys[2]);
        let v = BodyVelocity::new(ys[3], ys[4], ys[5]);
        let tau = reference_torque(t, &setup.profile);
        let qd = pose_rate(&q, &v);
        let a = body_accel(&v, &tau, &nalgebra::Vector3::zeros(), &setup.params);
        dys[0..3].copy_from_slice(qd.as_slice());
        dys[3..6].copy_from_slice(a.as_slice());
        Ok(())
    };
    let sample = |t: f64, y: &[f64; 6], series: &mut ReferenceSeries| {
        let v = BodyVelocity::new(y[3], y[4], y[5]);
        let tau = reference_torque(t, &setup.profile);
        let a = body_accel(&v, &tau, &nalgebra::Vector3::zeros(), &setup.params);
        series.vx.push(v.vx);
        series.vy.push(v.vy);
        series.omega.push(v.omega);
        series.omega_dot.push(a[2]);
    };
    for step in 0..n_steps {
        let t = step as f64 * dt;
        if step % stride == 0 {
            sample(t, &y, &mut series);
        }
        rk.step(&mut deriv, t, dt, &mut y)?;
    }
    if n_steps % stride == 0 {
        sample(n_steps as f64 * dt, &y, &mut series);
    }
    Ok(series)
}

/// Counter-based child-seed derivation (splitmix64 over master + index), so
/// Monte Carlo runs are independent and order-insensitive.
pub fn child_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(
        index
            .wrapping_add(1)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15),
    );
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Outcome of one Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutcome {
    pub run: usize,
    pub seed: u64,
    /// Divergence time, if the run blew up.
    pub diverged: Option<f64>,
    /// Final planar error norm per follower.
    pub final_ep: Vec<f64>,
    /// Peak planar error norm per follower over the final third of the
    /// horizon.
    pub max_ep_tail: Vec<f64>,
}

/// Pointwise envelope of the planar error norm of one follower across runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorEnvelope {
    pub min: Vec<f64>,
    pub median: Vec<f64>,
    pub max: Vec<f64>,
}

/// Aggregated Monte Carlo results.
#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub time: Vec<f64>,
    /// One envelope per follower, aggregated over completed runs.
    pub envelopes: Vec<ErrorEnvelope>,
    pub outcomes: Vec<RunOutcome>,
    /// Start of the tail window used for `max_ep_tail`.
    pub tail_start: f64,
}

/// One run's data before aggregation.
pub struct McRun {
    pub outcome: RunOutcome,
    /// Per-follower |e_p| curves; absent when the run diverged.
    pub ep_curves: Option<Vec<Vec<f64>>>,
}

/// Executes Monte Carlo run `index`: child seed, perturbed plant, random
/// initial states, disturbance on.
pub fn mc_run(
    fc: &FormationConfig,
    sc: &SimConfig,
    mc: &MonteCarloConfig,
    index: usize,
) -> McRun {
    mc_run_seeded(fc, sc, mc, index, child_seed(mc.master_seed, index as u64))
}

/// Same as [`mc_run`] with the child seed forced, which makes duplicate
/// runs testable.
pub fn mc_run_seeded(
    fc: &FormationConfig,
    sc: &SimConfig,
    mc: &MonteCarloConfig,
    index: usize,
    seed: u64,
) -> McRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut run_cfg = fc.clone();

    // Draw order is fixed: per agent, six plant factors, then the initial
    // state (x, y, theta, vx, vy, omega); finally the disturbance seed.
    for agent in &mut run_cfg.agents {
        let mut eta = [0.0; 6];
        for f in &mut eta {
            *f = rng.gen_range(mc.uncertainty_low..=mc.uncertainty_high);
        }
        agent.plant = agent.plant.scaled(eta);

        let pos = Normal::new(0.0, mc.init_pos_sigma).expect("sigma >= 0");
        let vel = Normal::new(0.0, mc.init_vel_sigma).expect("sigma >= 0");
        let x = pos.sample(&mut rng);
        let y = pos.sample(&mut rng);
        let theta = if mc.heading_max > mc.heading_min {
            rng.gen_range(mc.heading_min..mc.heading_max)
        } else {
            mc.heading_min
        };
        agent.initial_pose = Pose::new(x, y, theta);
        agent.initial_velocity = BodyVelocity::new(
            vel.sample(&mut rng),
            vel.sample(&mut rng),
            vel.sample(&mut rng),
        );
    }
    let noise_seed = rng.next_u64();

    let tail_start = sc.t_end * (2.0 / 3.0);
    match run_simulation(&run_cfg, sc, noise_seed) {
        Ok(traj) => {
            let curves: Vec<Vec<f64>> = traj
                .followers
                .iter()
                .map(|f| f.errors.iter().map(|e| e.planar_norm()).collect())
                .collect();
            let final_ep = curves.iter().map(|c| *c.last().unwrap()).collect();
            let max_ep_tail = curves
                .iter()
                .map(|c| {
                    c.iter()
                        .zip(&traj.time)
                        .filter(|(_, &t)| t >= tail_start)
                        .map(|(v, _)| *v)
                        .fold(0.0, f64::max)
                })
                .collect();
            McRun {
                outcome: RunOutcome {
                    run: index,
                    seed,
                    diverged: None,
                    final_ep,
                    max_ep_tail,
                },
                ep_curves: Some(curves),
            }
        }
        Err(SimError::Diverged { t }) => McRun {
            outcome: RunOutcome {
                run: index,
                seed,
                diverged: Some(t),
                final_ep: vec![f64::NAN; fc.agent_count()],
                max_ep_tail: vec![f64::NAN; fc.agent_count()],
            },
            ep_curves: None,
        },
        Err(SimError::InvalidConfig(msg)) => {
            // Perturbations keep parameters positive (factors are positive),
            // so this indicates a broken base config.
            panic!("Monte Carlo run {index} hit an invalid config: {msg}");
        }
    }
}

/// Runs the full study: `n_runs` perturbed, seeded runs (in parallel) and
/// pointwise min/median/max envelopes of every follower's planar error.
///
/// Diverged runs are reported in the outcomes and skipped by the envelopes;
/// they do not abort the batch.
pub fn monte_carlo(fc: &FormationConfig, sc: &SimConfig, mc: &MonteCarloConfig) -> Result<McSummary, SimError> {
    fc.validate().map_err(SimError::InvalidConfig)?;
    sc.validate().map_err(SimError::InvalidConfig)?;
    mc.validate().map_err(SimError::InvalidConfig)?;

    let runs: Vec<McRun> = (0..mc.n_runs)
        .into_par_iter()
        .map(|i| mc_run(fc, sc, mc, i))
        .collect();

    let n = fc.agent_count();
    let n_records = sc.n_steps() / sc.record_stride + 1;
    let time: Vec<f64> = (0..n_records)
        .map(|k| (k * sc.record_stride) as f64 * sc.dt)
        .collect();

    let mut envelopes = Vec::with_capacity(n);
    for agent in 0..n {
        let mut env = ErrorEnvelope {
            min: Vec::with_capacity(n_records),
            median: Vec::with_capacity(n_records),
            max: Vec::with_capacity(n_records),
        };
        let mut column = Vec::new();
        for j in 0..n_records {
            column.clear();
            for r in &runs {
                if let Some(curves) = &r.ep_curves {
                    column.push(curves[agent][j]);
                }
            }
            if column.is_empty() {
                env.min.push(f64::NAN);
                env.median.push(f64::NAN);
                env.max.push(f64::NAN);
            } else {
                column.sort_by(f64::total_cmp);
                env.min.push(column[0]);
                env.max.push(*column.last().unwrap());
                let m = column.len();
                let median = if m % 2 == 1 {
                    column[m / 2]
                } else {
                    0.5 * (column[m / 2 - 1] + column[m / 2])
                };
                env.median.push(median);
            }
        }
        envelopes.push(env);
    }

    Ok(McSummary {
        time,
        envelopes,
        outcomes: runs.into_iter().map(|r| r.outcome).collect(),
        tail_start: sc.t_end * (2.0 / 3.0),
    })
}
