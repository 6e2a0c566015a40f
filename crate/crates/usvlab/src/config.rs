//! JSON configuration ingestion and validation.
//!
//! One file describes a whole scenario: the reference vessel, the agents
//! (topology, gains, offsets, initial states), the integration settings and
//! the Monte Carlo study. Optional blocks fall back to the bundled nominal
//! scenario's values; unknown keys are rejected everywhere. Omitting the
//! `sim.noise` block disables the disturbance entirely.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::Gains;
use crate::formation::{AgentSetup, FormationConfig, ReferenceSetup, Topology};
use crate::sim::{MonteCarloConfig, SimConfig};
use crate::vessel::{BodyVelocity, Pose, ReferenceProfile, VesselParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path} at line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid value for {field}: {constraint}")]
    Validation { field: String, constraint: String },
}

fn validation(field: &str, constraint: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        field: field.to_string(),
        constraint: constraint.into(),
    }
}

/// On-disk schema of a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub reference: ReferenceSection,
    pub agents: Vec<AgentSection>,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub monte_carlo: McSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    pub profile: ReferenceProfile,
    /// Defaults to the nominal laboratory vessel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<VesselParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_pose: Option<Pose>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_velocity: Option<BodyVelocity>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffsetSection {
    pub dx: f64,
    pub dy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    /// Parent agent number; 0 is the virtual leader.
    pub parent: usize,
    pub offset: OffsetSection,
    /// Defaults to the nominal laboratory vessel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<VesselParams>,
    pub gains: Gains,
    pub initial_pose: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_velocity: Option<BodyVelocity>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub power: f64,
    pub sample_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSection>,
}

fn default_dt() -> f64 {
    1e-3
}
fn default_t_end() -> f64 {
    150.0
}
fn default_stride() -> usize {
    10
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            dt: default_dt(),
            t_end: default_t_end(),
            record_stride: default_stride(),
            noise: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_unc_low")]
    pub uncertainty_low: f64,
    #[serde(default = "default_unc_high")]
    pub uncertainty_high: f64,
    #[serde(default = "default_sigma")]
    pub init_pos_sigma: f64,
    #[serde(default = "default_sigma")]
    pub init_vel_sigma: f64,
    #[serde(default = "default_heading_min")]
    pub heading_min: f64,
    #[serde(default = "default_heading_max")]
    pub heading_max: f64,
    #[serde(default = "default_master_seed")]
    pub master_seed: u64,
    /// Disturbance used by the Monte Carlo study, overriding `sim.noise`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSection>,
}

fn default_runs() -> usize {
    100
}
fn default_unc_low() -> f64 {
    0.5
}
fn default_unc_high() -> f64 {
    1.5
}
fn default_sigma() -> f64 {
    5.0
}
fn default_heading_min() -> f64 {
    -std::f64::consts::PI
}
fn default_heading_max() -> f64 {
    std::f64::consts::PI
}
fn default_master_seed() -> u64 {
    1
}

impl Default for McSection {
    fn default() -> Self {
        McSection {
            runs: default_runs(),
            uncertainty_low: default_unc_low(),
            uncertainty_high: default_unc_high(),
            init_pos_sigma: default_sigma(),
            init_vel_sigma: default_sigma(),
            heading_min: default_heading_min(),
            heading_max: default_heading_max(),
            master_seed: default_master_seed(),
            noise: None,
        }
    }
}

/// Fully validated configs plus the raw schema they came from (kept for
/// canonical re-serialization and digesting).
#[derive(Debug, Clone)]
pub struct ParsedConfig {
    pub formation: FormationConfig,
    pub sim: SimConfig,
    pub monte_carlo: MonteCarloConfig,
    /// Noise the Monte Carlo study should apply, overriding `sim`.
    pub mc_noise: Option<NoiseSection>,
    pub raw: ConfigFile,
}

impl ParsedConfig {
    /// Canonical serialization of the scenario; parsing it back yields an
    /// equal config.
    pub fn canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.raw).expect("schema serializes");
        s.push('\n');
        s
    }

    /// Simulation settings with the Monte Carlo noise override applied.
    pub fn sim_for_monte_carlo(&self) -> SimConfig {
        let mut sc = self.sim;
        if let Some(noise) = self.mc_noise {
            sc.noise_power = noise.power;
            sc.noise_sample_time = noise.sample_time;
        }
        sc
    }
}

/// Reads and validates a scenario file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ParsedConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text, &path.display().to_string())
}

/// Parses a scenario from a JSON string (`origin` names it in errors).
pub fn parse_config_str(text: &str, origin: &str) -> Result<ParsedConfig, ConfigError> {
    let raw: ConfigFile = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        path: origin.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    build(raw)
}

fn build(raw: ConfigFile) -> Result<ParsedConfig, ConfigError> {
    if raw.agents.is_empty() {
        return Err(validation("agents", "at least one agent is required"));
    }

    let reference = ReferenceSetup {
        profile: raw.reference.profile,
        params: raw.reference.params.unwrap_or(VesselParams::NOMINAL),
        initial_pose: raw.reference.initial_pose.unwrap_or_default(),
        initial_velocity: raw.reference.initial_velocity.unwrap_or_default(),
    };
    reference
        .profile
        .validate()
        .map_err(|c| validation("reference.profile", c))?;
    reference
        .params
        .validate()
        .map_err(|c| validation("reference.params", c))?;

    let topology = Topology {
        parents: raw.agents.iter().map(|a| a.parent).collect(),
    };
    crate::formation::validate_topology(&topology)
        .map_err(|e| validation("agents[*].parent", e.to_string()))?;

    let mut agents = Vec::with_capacity(raw.agents.len());
    for (k, a) in raw.agents.iter().enumerate() {
        let field = |name: &str| format!("agents[{k}].{name}");
        let params = a.params.unwrap_or(VesselParams::NOMINAL);
        params
            .validate()
            .map_err(|c| validation(&field("params"), c))?;
        a.gains
            .validate()
            .map_err(|c| validation(&field("gains"), c))?;
        agents.push(AgentSetup {
            plant: params,
            model: params,
            gains: a.gains,
            offset: (a.offset.dx, a.offset.dy),
            initial_pose: a.initial_pose,
            initial_velocity: a.initial_velocity.unwrap_or_default(),
        });
    }

    let formation = FormationConfig {
        reference,
        topology,
        agents,
    };
    formation
        .validate()
        .map_err(|c| validation("formation", c))?;

    let sim = SimConfig {
        dt: raw.sim.dt,
        t_end: raw.sim.t_end,
        noise_power: raw.sim.noise.map_or(0.0, |n| n.power),
        noise_sample_time: raw.sim.noise.map_or(0.01, |n| n.sample_time),
        record_stride: raw.sim.record_stride,
    };
    sim.validate().map_err(|c| validation("sim", c))?;

    let monte_carlo = MonteCarloConfig {
        n_runs: raw.monte_carlo.runs,
        uncertainty_low: raw.monte_carlo.uncertainty_low,
        uncertainty_high: raw.monte_carlo.uncertainty_high,
        init_pos_sigma: raw.monte_carlo.init_pos_sigma,
        init_vel_sigma: raw.monte_carlo.init_vel_sigma,
        heading_min: raw.monte_carlo.heading_min,
        heading_max: raw.monte_carlo.heading_max,
        master_seed: raw.monte_carlo.master_seed,
    };
    monte_carlo
        .validate()
        .map_err(|c| validation("monte_carlo", c))?;
    if let Some(noise) = raw.monte_carlo.noise {
        let mut sc = sim;
        sc.noise_power = noise.power;
        sc.noise_sample_time = noise.sample_time;
        sc.validate()
            .map_err(|c| validation("monte_carlo.noise", c))?;
    }

    Ok(ParsedConfig {
        formation,
        sim,
        monte_carlo,
        mc_noise: raw.monte_carlo.noise,
        raw,
    })
}
