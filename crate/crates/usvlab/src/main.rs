//! Thin command-line front end over the library: scenario simulation, the
//! Monte Carlo robustness study, gain certification, and replay analysis of
//! stored runs. All numerics live in the library; this file only parses
//! flags, resolves seeds, and maps errors onto exit codes.
//!
//! Exit codes: 0 success, 1 usage/validation failure, 2 divergence.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use usvlab::config::{parse_config, ParsedConfig};
use usvlab::output::{write_outputs, OutputKind, RunManifest};
use usvlab::sim::{monte_carlo, run_simulation, simulate_reference, SimError};
use usvlab::stability::{certify, default_t_grid, gain_constants, pe_level, upsilon, PEMetrics};
use usvlab::vessel::VesselParams;

const USAGE: &str = "usage:
  usvlab simulate   --config <file> --out <dir> [--seed <n>] [--dt <s>] [--t-end <s>]
  usvlab montecarlo --config <file> --out <dir> [--runs <n>] [--seed <n>]
  usvlab check-gains --config <file> [--kx-grid <lo:hi:n>] [--out <dir>]
  usvlab analyze    --trajectory <file> [--config <file>]

The master seed resolves as: --seed flag, then the USVLAB_SEED environment
variable, then the config's monte_carlo.master_seed.";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("{USAGE}");
            ExitCode::from(1)
        }
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Diverged(t)) => {
            eprintln!("error: simulation diverged at t = {t}");
            ExitCode::from(2)
        }
    }
}

enum CliError {
    Usage(String),
    Validation(String),
    Diverged(f64),
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Diverged { t } => CliError::Diverged(t),
            SimError::InvalidConfig(msg) => CliError::Validation(msg),
        }
    }
}

fn run(args: &[String]) -> Result<(), CliError> {
    let Some(cmd) = args.first() else {
        return Err(CliError::Usage("missing subcommand".into()));
    };
    let flags = Flags::parse(&args[1..])?;
    match cmd.as_str() {
        "simulate" => simulate(flags),
        "montecarlo" => montecarlo(flags),
        "check-gains" => check_gains(flags),
        "analyze" => analyze(flags),
        other => Err(CliError::Usage(format!("unknown subcommand `{other}`"))),
    }
}

/// Parsed `--flag value` pairs, consumed by each subcommand.
struct Flags {
    entries: Vec<(String, String)>,
}

impl Flags {
    fn parse(args: &[String]) -> Result<Flags, CliError> {
        let mut entries = Vec::new();
        let mut it = args.iter();
        while let Some(flag) = it.next() {
            let Some(name) = flag.strip_prefix("--") else {
                return Err(CliError::Usage(format!("unexpected argument `{flag}`")));
            };
            let Some(value) = it.next() else {
                return Err(CliError::Usage(format!("flag --{name} needs a value")));
            };
            entries.push((name.to_string(), value.clone()));
        }
        Ok(Flags { entries })
    }

    fn get(&self, name: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }

    fn require(&self, name: &str) -> Result<&str, CliError> {
        self.get(name)
            .ok_or_else(|| CliError::Usage(format!("--{name} is required")))
    }

    fn parse_num<T: std::str::FromStr>(&self, name: &str) -> Result<Option<T>, CliError> {
        match self.get(name) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("flag --{name}: cannot parse `{v}`"))),
        }
    }

    fn reject_unknown(&self, allowed: &[&str]) -> Result<(), CliError> {
        for (name, _) in &self.entries {
            if !allowed.contains(&name.as_str()) {
                return Err(CliError::Usage(format!("unknown flag --{name}")));
            }
        }
        Ok(())
    }
}

fn load_config(flags: &Flags) -> Result<ParsedConfig, CliError> {
    let path = flags.require("config")?;
    parse_config(path).map_err(|e| CliError::Validation(e.to_string()))
}

/// Master seed precedence: flag, environment, config.
fn resolve_seed(flags: &Flags, cfg: &ParsedConfig) -> Result<u64, CliError> {
    if let Some(seed) = flags.parse_num::<u64>("seed")? {
        return Ok(seed);
    }
    if let Ok(env) = std::env::var("USVLAB_SEED") {
        return env
            .parse::<u64>()
            .map_err(|_| CliError::Validation(format!("USVLAB_SEED: cannot parse `{env}`")));
    }
    Ok(cfg.monte_carlo.master_seed)
}

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn simulate(flags: Flags) -> Result<(), CliError> {
    flags.reject_unknown(&["config", "out", "seed", "dt", "t-end"])?;
    let cfg = load_config(&flags)?;
    let out_dir = PathBuf::from(flags.require("out")?);
    let seed = resolve_seed(&flags, &cfg)?;

    let mut sc = cfg.sim;
    if let Some(dt) = flags.parse_num::<f64>("dt")? {
        sc.dt = dt;
    }
    if let Some(t_end) = flags.parse_num::<f64>("t-end")? {
        sc.t_end = t_end;
    }

    let traj = run_simulation(&cfg.formation, &sc, seed)?;
    let canonical = cfg.canonical_json();
    let manifest = RunManifest::new(&canonical, seed, command_line());
    let written = write_outputs(OutputKind::Trajectory(&traj), &out_dir, &canonical, manifest)
        .map_err(|e| CliError::Validation(e.to_string()))?;

    let max_ep = traj.max_planar_error();
    let last = traj.len() - 1;
    let final_ep: Vec<String> = traj
        .followers
        .iter()
        .map(|f| format!("{:.3e}", f.errors[last].planar_norm()))
        .collect();
    println!(
        "simulate: {} agents, t_end = {} s, dt = {} s, seed = {seed}",
        cfg.formation.agent_count(),
        sc.t_end,
        sc.dt
    );
    println!(
        "  max |e_p| over run = {max_ep:.3e}; final |e_p| per agent = [{}]",
        final_ep.join(", ")
    );
    for path in written {
        println!("  wrote {}", path.display());
    }
    Ok(())
}

fn montecarlo(flags: Flags) -> Result<(), CliError> {
    flags.reject_unknown(&["config", "out", "runs", "seed"])?;
    let cfg = load_config(&flags)?;
    let out_dir = PathBuf::from(flags.require("out")?);

    let mut mc = cfg.monte_carlo;
    mc.master_seed = resolve_seed(&flags, &cfg)?;
    if let Some(runs) = flags.parse_num::<usize>("runs")? {
        mc.n_runs = runs;
    }
    let sc = cfg.sim_for_monte_carlo();

    let summary = monte_carlo(&cfg.formation, &sc, &mc)?;
    let canonical = cfg.canonical_json();
    let manifest = RunManifest::new(&canonical, mc.master_seed, command_line());
    let written = write_outputs(OutputKind::MonteCarlo(&summary), &out_dir, &canonical, manifest)
        .map_err(|e| CliError::Validation(e.to_string()))?;

    let diverged = summary
        .outcomes
        .iter()
        .filter(|o| o.diverged.is_some())
        .count();
    let worst_tail = summary
        .outcomes
        .iter()
        .flat_map(|o| o.max_ep_tail.iter())
        .fold(0.0f64, |m, &v| if v.is_nan() { m } else { m.max(v) });
    println!(
        "montecarlo: {} runs, seed = {}, diverged = {diverged}, worst |e_p| after t = {} s: {worst_tail:.4}",
        mc.n_runs, mc.master_seed, summary.tail_start
    );
    for path in written {
        println!("  wrote {}", path.display());
    }
    Ok(())
}

fn parse_kx_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || CliError::Usage(format!("flag --kx-grid: expected lo:hi:n, got `{spec}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if !(lo > 0.0) || hi < lo || n < 2 {
        return Err(bad());
    }
    Ok((0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect())
}

fn check_gains(flags: Flags) -> Result<(), CliError> {
    flags.reject_unknown(&["config", "kx-grid", "out"])?;
    let cfg = load_config(&flags)?;
    let kx_grid = match flags.get("kx-grid") {
        Some(spec) => parse_kx_grid(spec)?,
        None => Vec::new(),
    };

    // Excitation metrics come from the reference trajectory itself,
    // integrated well past several PE windows.
    let series = simulate_reference(&cfg.formation.reference, 1e-3, 300.0, 10)?;
    let t_grid = default_t_grid(cfg.formation.reference.profile.freq, series.dt);
    let cert = certify(
        &cfg.formation,
        &series.omega,
        &series.omega_dot,
        series.dt,
        &t_grid,
        &kx_grid,
    )
    .map_err(|e| CliError::Validation(e.to_string()))?;

    let json = serde_json::to_string_pretty(&cert).expect("report serializes");
    println!("{json}");

    if let Some(out) = flags.get("out") {
        let canonical = cfg.canonical_json();
        let manifest = RunManifest::new(&canonical, cfg.monte_carlo.master_seed, command_line());
        write_outputs(OutputKind::Report(&cert), Path::new(out), &canonical, manifest)
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }

    if !cert.report.verdicts.pe_ok || !cert.report.verdicts.bound_ok || !cert.report.verdicts.kdx_ok
    {
        return Err(CliError::Validation(
            "gain certification failed (see verdicts above)".into(),
        ));
    }
    Ok(())
}

fn analyze(flags: Flags) -> Result<(), CliError> {
    flags.reject_unknown(&["trajectory", "config"])?;
    let path = PathBuf::from(flags.require("trajectory")?);
    let stored = usvlab::output::read_trajectory_csv(&path).map_err(CliError::Validation)?;

    // Reference parameters and gains: from the config when given, otherwise
    // the nominal scenario values.
    let (params, gains) = match flags.get("config") {
        Some(cfg_path) => {
            let cfg = parse_config(cfg_path).map_err(|e| CliError::Validation(e.to_string()))?;
            (cfg.formation.reference.params, cfg.formation.agents[0].gains)
        }
        None => (
            VesselParams::NOMINAL,
            usvlab::controller::Gains {
                kx: 0.2,
                ktheta: 0.2,
                kdx: 10.0,
                komega: 10.0,
            },
        ),
    };

    if stored.time.len() < 3 {
        return Err(CliError::Validation(
            "trajectory too short to analyze".into(),
        ));
    }
    let dt = stored.time[1] - stored.time[0];
    let span = stored.time[stored.time.len() - 1] - stored.time[0];

    // Reference yaw rate from the stored agent-0 columns; its derivative
    // from the yaw dynamics row evaluated on the stored signals.
    let omega = &stored.omega[0];
    let omega_dot: Vec<f64> = (0..omega.len())
        .map(|i| {
            (stored.tau_omega[0][i]
                - (params.m22 - params.m11) * stored.vx[0][i] * stored.vy[0][i]
                - params.d33 * omega[i])
                / params.m33
        })
        .collect();
    let wb = usvlab::stability::omega_bar(omega, &omega_dot)
        .map_err(|e| CliError::Validation(e.to_string()))?;

    // Candidate PE windows that fit the stored span at least twice.
    let candidates: Vec<f64> = [span / 6.0, span / 4.0, span / 3.0]
        .iter()
        .map(|t| (t / dt).round() * dt)
        .filter(|&t| t > dt)
        .collect();
    let mut best: Option<(f64, f64)> = None;
    for &t in &candidates {
        if let Ok(mu) = pe_level(omega, dt, t) {
            let better = match best {
                None => true,
                Some((_, best_mu)) => mu > best_mu,
            };
            if better {
                best = Some((t, mu));
            }
        }
    }
    let Some((t_window, mu)) = best else {
        return Err(CliError::Validation(
            "stored span is too short for any excitation window".into(),
        ));
    };
    let pe = PEMetrics {
        mu,
        t_window,
        omega_bar_d: wb,
    };
    let consts = gain_constants(&params, &pe, gains.kx);
    let bound = usvlab::stability::feasibility_bound(&params, &pe);

    println!(
        "analyze: {} records over {span} s (dt = {dt} s), {} follower(s)",
        stored.time.len(),
        stored.n_agents() - 1
    );
    println!("  pe: mu = {mu:.5} at T = {t_window} s, omega_bar_d = {wb:.5}");
    println!(
        "  bound = {bound:.5} (ok = {}), gamma1*gamma2 = {:.4} at kx = {}",
        wb <= bound,
        consts.product,
        gains.kx
    );

    // Lyapunov diagnostics per follower over the instants whose excitation
    // window fits inside the stored span.
    for agent in 1..stored.n_agents() {
        let mut w1_violations = 0usize;
        let mut strict_increases = 0usize;
        let mut prev_strict: Option<f64> = None;
        let mut evaluated = 0usize;
        for (i, &t) in stored.time.iter().enumerate() {
            let Ok(ups) = upsilon(omega, dt, t - stored.time[0], &pe) else {
                break;
            };
            evaluated += 1;
            let e_p = [stored.ex[agent][i], stored.ey[agent][i]];
            let w1 = usvlab::stability::w1_value(e_p, omega[i], ups, consts.alpha);
            let n2 = e_p[0] * e_p[0] + e_p[1] * e_p[1];
            if w1 < 0.5 * n2 - 1e-9 || w1 > 0.5 * consts.beta * n2 + 1e-9 {
                w1_violations += 1;
            }
            if let Some(lambda) = consts.lambda {
                let v1 = 2.0 * pe.t_window / pe.mu * w1;
                let v2 = params.m22 / (2.0 * params.d22) * stored.vbar_y[agent][i].powi(2);
                let strict = v1 + lambda * lambda * v2;
                let transient = stored.etheta[agent][i].abs().max(stored.vtilde_norm[agent][i]);
                if transient < 1e-3 {
                    if let Some(prev) = prev_strict {
                        if strict > prev + 1e-6 {
                            strict_increases += 1;
                        }
                    }
                    prev_strict = Some(strict);
                }
            }
        }
        print!("  agent {agent}: W1 sandwich violations = {w1_violations}/{evaluated}");
        match consts.lambda {
            Some(_) => println!(", strict-Lyapunov increases after transient = {strict_increases}"),
            None => println!(", strict Lyapunov undefined (gain product >= 1)"),
        }
    }
    Ok(())
}
