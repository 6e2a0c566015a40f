//! Bit-stable file outputs: trajectory and envelope CSVs, the stability
//! report, plot-ready path data, and the run manifest.
//!
//! Every numeric cell is printed with nine significant digits in scientific
//! notation, so identical `(config, seed, version)` triples yield
//! byte-identical data files. The manifest additionally records a wall-clock
//! timestamp and is the one output that is not byte-reproducible.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::sim::{McSummary, Trajectory};
use crate::stability::GainCertificate;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn write_file(path: &Path, contents: &str) -> Result<(), OutputError> {
    std::fs::write(path, contents).map_err(|source| OutputError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Nine-significant-digit scientific notation, the fixed cell format of
/// every data file.
pub fn fmt_g9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Reproducibility metadata of one invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    /// SHA-256 of the stored canonical config copy.
    pub config_digest: String,
    pub tool_version: String,
    pub master_seed: u64,
    pub command_line: String,
    pub created_unix_s: u64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(canonical_config: &str, master_seed: u64, command_line: String) -> RunManifest {
        RunManifest {
            config_digest: digest_hex(canonical_config),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed,
            command_line,
            created_unix_s: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            outputs: Vec::new(),
        }
    }
}

/// Hex SHA-256 of a string, prefixed with the algorithm name.
pub fn digest_hex(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let out = hasher.finalize();
    let mut s = String::with_capacity(7 + 64);
    s.push_str("sha256:");
    for byte in out {
        let _ = write!(s, "{byte:02x}");
    }
    s
}

/// Renders `trajectory.csv`: header plus one row per (time, agent), agent 0
/// being the reference with zero error columns and the reference torque.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::new();
    out.push_str("t,agent,x,y,theta,vx,vy,omega,ex,ey,etheta,vbar_y,vtilde_norm,tau_x,tau_omega\n");
    for (i, &t) in traj.time.iter().enumerate() {
        let mut row = |agent: usize, track: &crate::sim::AgentTrack| {
            let q = track.poses[i];
            let v = track.velocities[i];
            let e = track.errors[i];
            let tau = track.torques[i];
            let _ = writeln!(
                out,
                "{},{agent},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                fmt_g9(t),
                fmt_g9(q.x),
                fmt_g9(q.y),
                fmt_g9(q.theta),
                fmt_g9(v.vx),
                fmt_g9(v.vy),
                fmt_g9(v.omega),
                fmt_g9(e.ex),
                fmt_g9(e.ey),
                fmt_g9(e.etheta),
                fmt_g9(track.vbar_y[i]),
                fmt_g9(track.vtilde_norm(i)),
                fmt_g9(tau.tau_x),
                fmt_g9(tau.tau_omega),
            );
        };
        row(0, &traj.reference);
        for (k, f) in traj.followers.iter().enumerate() {
            row(k + 1, f);
        }
    }
    out
}

/// Renders `envelopes.csv`: pointwise min/median/max of each follower's
/// planar error norm across Monte Carlo runs.
pub fn envelopes_csv(summary: &McSummary) -> String {
    let mut out = String::new();
    out.push_str("t,agent,emin,emedian,emax\n");
    for (i, &t) in summary.time.iter().enumerate() {
        for (k, env) in summary.envelopes.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt_g9(t),
                k + 1,
                fmt_g9(env.min[i]),
                fmt_g9(env.median[i]),
                fmt_g9(env.max[i]),
            );
        }
    }
    out
}

/// Renders `paths.dat`: blank-line separated x/y blocks per agent (agent 0
/// first), ready for block-indexed plotting.
pub fn paths_dat(traj: &Trajectory) -> String {
    let mut out = String::new();
    let mut block = |agent: usize, track: &crate::sim::AgentTrack| {
        let _ = writeln!(out, "# agent {agent}");
        for q in &track.poses {
            let _ = writeln!(out, "{} {}", fmt_g9(q.x), fmt_g9(q.y));
        }
        out.push('\n');
    };
    block(0, &traj.reference);
    for (k, f) in traj.followers.iter().enumerate() {
        block(k + 1, f);
    }
    out
}

/// What a run produced, for [`write_outputs`].
pub enum OutputKind<'a> {
    Trajectory(&'a Trajectory),
    MonteCarlo(&'a McSummary),
    Report(&'a GainCertificate),
}

/// Writes the output set of one run into `out_dir` (created if missing):
/// the data files for `kind`, the canonical config copy, and the manifest.
/// Returns the paths written.
pub fn write_outputs(
    kind: OutputKind,
    out_dir: &Path,
    canonical_config: &str,
    mut manifest: RunManifest,
) -> Result<Vec<PathBuf>, OutputError> {
    std::fs::create_dir_all(out_dir).map_err(|source| OutputError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let mut written = Vec::new();
    let emit = |name: &str, contents: &str, written: &mut Vec<PathBuf>| -> Result<(), OutputError> {
        let path = out_dir.join(name);
        write_file(&path, contents)?;
        written.push(path);
        Ok(())
    };

    match kind {
        OutputKind::Trajectory(traj) => {
            emit("trajectory.csv", &trajectory_csv(traj), &mut written)?;
            emit("paths.dat", &paths_dat(traj), &mut written)?;
        }
        OutputKind::MonteCarlo(summary) => {
            emit("envelopes.csv", &envelopes_csv(summary), &mut written)?;
            let runs = serde_json::to_string_pretty(&summary.outcomes).expect("serializable");
            emit("runs.json", &(runs + "\n"), &mut written)?;
        }
        OutputKind::Report(cert) => {
            let json = serde_json::to_string_pretty(cert).expect("serializable");
            emit("stability_report.json", &(json + "\n"), &mut written)?;
        }
    }

    emit("config.json", canonical_config, &mut written)?;
    manifest.outputs = written
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    let manifest_json = serde_json::to_string_pretty(&manifest).expect("serializable") + "\n";
    emit("manifest.json", &manifest_json, &mut written)?;
    Ok(written)
}

/// Minimal reader for `trajectory.csv`, used by the analyze flow.
pub struct StoredRun {
    pub time: Vec<f64>,
    /// Column-major per agent: `[agent][record]`.
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub vx: Vec<Vec<f64>>,
    pub vy: Vec<Vec<f64>>,
    pub omega: Vec<Vec<f64>>,
    pub ex: Vec<Vec<f64>>,
    pub ey: Vec<Vec<f64>>,
    pub etheta: Vec<Vec<f64>>,
    pub vbar_y: Vec<Vec<f64>>,
    pub vtilde_norm: Vec<Vec<f64>>,
    pub tau_x: Vec<Vec<f64>>,
    pub tau_omega: Vec<Vec<f64>>,
}

impl StoredRun {
    pub fn n_agents(&self) -> usize {
        self.x.len()
    }
}

/// Parses a `trajectory.csv` written by [`trajectory_csv`].
pub fn read_trajectory_csv(path: &Path) -> Result<StoredRun, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty trajectory file")?;
    let expected = "t,agent,x,y,theta,vx,vy,omega,ex,ey,etheta,vbar_y,vtilde_norm,tau_x,tau_omega";
    if header != expected {
        return Err(format!("unexpected header: {header}"));
    }
    let mut run = StoredRun {
        time: Vec::new(),
        x: Vec::new(),
        y: Vec::new(),
        theta: Vec::new(),
        vx: Vec::new(),
        vy: Vec::new(),
        omega: Vec::new(),
        ex: Vec::new(),
        ey: Vec::new(),
        etheta: Vec::new(),
        vbar_y: Vec::new(),
        vtilde_norm: Vec::new(),
        tau_x: Vec::new(),
        tau_omega: Vec::new(),
    };
    for (ln, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 15 {
            return Err(format!("line {}: expected 15 fields", ln + 2));
        }
        let num = |s: &str| -> Result<f64, String> {
            s.parse::<f64>().map_err(|e| format!("line {}: {e}", ln + 2))
        };
        let agent: usize = fields[1]
            .parse()
            .map_err(|e| format!("line {}: {e}", ln + 2))?;
        while run.x.len() <= agent {
            for col in [
                &mut run.x,
                &mut run.y,
                &mut run.theta,
                &mut run.vx,
                &mut run.vy,
                &mut run.omega,
                &mut run.ex,
                &mut run.ey,
                &mut run.etheta,
                &mut run.vbar_y,
                &mut run.vtilde_norm,
                &mut run.tau_x,
                &mut run.tau_omega,
            ] {
                col.push(Vec::new());
            }
        }
        if agent == 0 {
            run.time.push(num(fields[0])?);
        }
        let cols = [
            (&mut run.x, 2),
            (&mut run.y, 3),
            (&mut run.theta, 4),
            (&mut run.vx, 5),
            (&mut run.vy, 6),
            (&mut run.omega, 7),
            (&mut run.ex, 8),
            (&mut run.ey, 9),
            (&mut run.etheta, 10),
            (&mut run.vbar_y, 11),
            (&mut run.vtilde_norm, 12),
            (&mut run.tau_x, 13),
            (&mut run.tau_omega, 14),
        ];
        for (col, idx) in cols {
            col[agent].push(num(fields[idx])?);
        }
    }
    if run.time.is_empty() {
        return Err("trajectory file holds no records".into());
    }
    Ok(run)
}
