//! Run configuration: scenario physics, agent hyperparameters, run plumbing.
//!
//! A run is described by one TOML file with `[scenario]`, `[agent]` and
//! `[run]` tables. Key names are canonical; unknown keys are a load error.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-slice traffic and QoS parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSpec {
    pub slice_id: u32,
    /// Mean packet arrival rate per UE (packets/step).
    pub arrival_rate_mean: f64,
    /// Mean number of new UEs per step (Poisson).
    pub ue_arrival_rate: f64,
    /// Mean UE session length in steps (geometric).
    pub ue_mean_lifetime: f64,
    /// Maximum tolerated network delay in ms.
    pub qos_latency: f64,
    /// Wireless bandwidth driving the per-UE transmission rate.
    pub bandwidth: f64,
    /// Per-UE transmit power in W.
    pub tx_power: f64,
}

/// Reporting split of CPU work between baseband stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpuSplit {
    pub coding: f64,
    pub modulation: f64,
    pub fft: f64,
}

/// All physical, queueing and cost parameters of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_cells: u32,
    pub num_cpus: u32,
    /// Capacity of one CPU in MOPTS.
    pub cpu_capacity: f64,
    pub max_vnfs: u32,
    /// MOPTS served by one VNF; drives the active VNF count.
    pub vnf_capacity: f64,
    /// MOPTS per log2-unit of spectral efficiency.
    pub theta: f64,
    /// Constant base processing load per UE in MOPTS.
    pub k0: f64,
    /// Mean cloud service rate per VNF (packets/step).
    pub mu_star: f64,
    /// Boot latency of one new VNF in ms.
    pub boot_latency: f64,
    /// Energy of one active VNF per step in J.
    pub vnf_energy: f64,
    /// CPU power coefficient in W per MOPTS^3.
    pub sigma_star: f64,
    /// Power amplifier efficiency, in (0, 1].
    pub amp_efficiency: f64,
    pub slices: Vec<SliceSpec>,
    /// Cost weights (computation, latency, energy).
    pub weights: (f64, f64, f64),
    pub cpu_split: CpuSplit,
    pub episode_length: u64,
    /// Latency emitted for saturated queues; also the observation bound, ms.
    pub latency_cap: f64,
    pub qos_penalty: f64,
    pub saturation_penalty: f64,
    /// Observation normalization bound for UE counts.
    pub max_ues: u32,
    /// Observation normalization bound for per-slice energy, J.
    pub energy_cap: f64,
    /// SINR draw range (linear), log-uniform.
    pub sinr_min: f64,
    pub sinr_max: f64,
}

impl ScenarioConfig {
    /// Total pooled CPU capacity in MOPTS.
    pub fn total_cpu_capacity(&self) -> f64 {
        f64::from(self.num_cpus) * self.cpu_capacity
    }

    pub fn num_slices(&self) -> usize {
        self.slices.len()
    }

    pub fn observation_dim(&self) -> usize {
        6 * self.slices.len()
    }

    pub fn action_dim(&self) -> usize {
        self.slices.len()
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: f64) -> Result<()> {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be strictly positive, got {v}")));
            }
            Ok(())
        }
        if self.num_cells == 0 {
            return Err(Error::Config("num_cells must be strictly positive".into()));
        }
        if self.num_cpus == 0 {
            return Err(Error::Config("num_cpus must be strictly positive".into()));
        }
        if self.max_vnfs == 0 {
            return Err(Error::Config("max_vnfs must be strictly positive".into()));
        }
        positive("cpu_capacity", self.cpu_capacity)?;
        positive("vnf_capacity", self.vnf_capacity)?;
        positive("theta", self.theta)?;
        positive("k0", self.k0)?;
        positive("mu_star", self.mu_star)?;
        positive("boot_latency", self.boot_latency)?;
        positive("vnf_energy", self.vnf_energy)?;
        positive("sigma_star", self.sigma_star)?;
        positive("latency_cap", self.latency_cap)?;
        positive("energy_cap", self.energy_cap)?;
        positive("sinr_min", self.sinr_min)?;
        positive("sinr_max", self.sinr_max)?;
        if self.sinr_max < self.sinr_min {
            return Err(Error::Config(format!(
                "sinr_max must be >= sinr_min, got {} < {}",
                self.sinr_max, self.sinr_min
            )));
        }
        if !(self.amp_efficiency > 0.0 && self.amp_efficiency <= 1.0) {
            return Err(Error::Config(format!(
                "amp_efficiency must lie in (0, 1], got {}",
                self.amp_efficiency
            )));
        }
        positive("weights.0", self.weights.0)?;
        positive("weights.1", self.weights.1)?;
        positive("weights.2", self.weights.2)?;
        let split_sum = self.cpu_split.coding + self.cpu_split.modulation + self.cpu_split.fft;
        if (split_sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "cpu_split must sum to 1, got {split_sum}"
            )));
        }
        if self.max_vnfs as f64 * self.vnf_capacity > self.total_cpu_capacity() * (1.0 + 1e-12) {
            return Err(Error::Config(
                "max_vnfs * vnf_capacity exceeds num_cpus * cpu_capacity".into(),
            ));
        }
        if self.episode_length == 0 {
            return Err(Error::Config("episode_length must be strictly positive".into()));
        }
        if self.qos_penalty < 0.0 || self.saturation_penalty < 0.0 {
            return Err(Error::Config(
                "qos_penalty and saturation_penalty must be non-negative".into(),
            ));
        }
        if self.max_ues == 0 {
            return Err(Error::Config("max_ues must be strictly positive".into()));
        }
        if self.slices.is_empty() {
            return Err(Error::Config("slices must not be empty".into()));
        }
        for (idx, s) in self.slices.iter().enumerate() {
            if s.slice_id as usize != idx {
                return Err(Error::Config(format!(
                    "slices[{idx}].slice_id must equal its position, got {}",
                    s.slice_id
                )));
            }
            if !(s.qos_latency > 0.0) {
                return Err(Error::Config(format!(
                    "slices[{idx}].qos_latency must be strictly positive"
                )));
            }
            for (name, v) in [
                ("arrival_rate_mean", s.arrival_rate_mean),
                ("ue_arrival_rate", s.ue_arrival_rate),
                ("tx_power", s.tx_power),
            ] {
                if v < 0.0 || !v.is_finite() {
                    return Err(Error::Config(format!(
                        "slices[{idx}].{name} must be non-negative and finite"
                    )));
                }
            }
            positive(&format!("slices[{idx}].bandwidth"), s.bandwidth)?;
            if s.ue_mean_lifetime < 1.0 {
                return Err(Error::Config(format!(
                    "slices[{idx}].ue_mean_lifetime must be >= 1 step"
                )));
            }
        }
        Ok(())
    }
}

/// Which training algorithm drives the updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Td3,
    Ddpg,
}

/// Optimizer family for every network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// Agent hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub discount: f64,
    pub tau: f64,
    pub policy_freq: u64,
    pub policy_noise: f64,
    pub noise_clip: f64,
    pub exploration_noise: f64,
    pub batch_size: usize,
    pub start_timesteps: u64,
    pub max_timesteps: u64,
    pub min_action: f64,
    pub max_action: f64,
    pub hidden_sizes: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub optimizer: OptimizerKind,
    pub replay_capacity: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Td3,
            discount: 0.99,
            tau: 0.005,
            policy_freq: 2,
            policy_noise: 0.2,
            noise_clip: 0.5,
            exploration_noise: 0.1,
            batch_size: 128,
            start_timesteps: 20_000,
            max_timesteps: 100_000,
            min_action: -1.0,
            max_action: 1.0,
            hidden_sizes: vec![64, 64],
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            optimizer: OptimizerKind::Adam,
            replay_capacity: 1_000_000,
        }
    }
}

impl AgentConfig {
    /// DDPG degenerates to one critic updated every step.
    pub fn effective_policy_freq(&self) -> u64 {
        match self.algorithm {
            Algorithm::Td3 => self.policy_freq,
            Algorithm::Ddpg => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::Config(format!("discount must lie in [0, 1], got {}", self.discount)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        if self.policy_freq == 0 {
            return Err(Error::Config("policy_freq must be >= 1".into()));
        }
        if self.noise_clip < 0.0 {
            return Err(Error::Config("noise_clip must be non-negative".into()));
        }
        if self.policy_noise < 0.0 || self.exploration_noise < 0.0 {
            return Err(Error::Config("noise deviations must be non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.replay_capacity < self.batch_size {
            return Err(Error::Config("replay_capacity must be >= batch_size".into()));
        }
        if self.min_action >= self.max_action {
            return Err(Error::Config("min_action must be < max_action".into()));
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.iter().any(|&h| h == 0) {
            return Err(Error::Config("hidden_sizes must be non-empty and positive".into()));
        }
        if self.max_timesteps == 0 {
            return Err(Error::Config("max_timesteps must be >= 1".into()));
        }
        if !(self.actor_lr > 0.0) || !(self.critic_lr > 0.0) {
            return Err(Error::Config("learning rates must be strictly positive".into()));
        }
        Ok(())
    }
}

/// Run plumbing: seeds, output layout, flush cadence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSettings {
    pub seeds: Vec<u64>,
    pub out_dir: String,
    /// Metrics rows buffered between file flushes.
    pub flush_interval: u64,
    /// Steps between periodic checkpoints.
    pub checkpoint_interval: u64,
    /// Default moving-average window for rendered curves.
    pub smoothing_window: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            seeds: vec![1],
            out_dir: "runs/out".into(),
            flush_interval: 1000,
            checkpoint_interval: 10_000,
            smoothing_window: 100,
        }
    }
}

impl RunSettings {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("run.seeds must contain at least one seed".into()));
        }
        if self.flush_interval == 0 || self.checkpoint_interval == 0 {
            return Err(Error::Config(
                "flush_interval and checkpoint_interval must be >= 1".into(),
            ));
        }
        if self.smoothing_window == 0 {
            return Err(Error::Config("smoothing_window must be >= 1".into()));
        }
        Ok(())
    }
}

/// Everything a run needs, straight from one TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default)]
    pub run: RunSettings,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml_str(&text)
    }

    /// Load with `key.path=value` overrides applied before validation.
    pub fn load_with_overrides(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut value: toml::Value =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{e}")))?;
        for ov in overrides {
            apply_override(&mut value, ov)?;
        }
        let cfg: RunConfig = value
            .try_into()
            .map_err(|e| Error::Config(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.agent.validate()?;
        self.run.validate()
    }
}

/// Applies one `dot.path=value` override onto a parsed TOML document.
fn apply_override(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{spec}' is not of the form key=value")))?;
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(Error::Config(format!("override path '{path}' has an empty segment")));
    }
    // Parse the value as TOML; fall back to a bare string.
    let parsed: toml::Value = match toml::from_str::<toml::Value>(&format!("v = {raw}")) {
        Ok(toml::Value::Table(t)) => t.get("v").cloned().unwrap(),
        _ => toml::Value::String(raw.to_string()),
    };
    let mut node = root;
    for seg in &segments[..segments.len() - 1] {
        node = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override path '{path}' crosses a non-table")))?
            .entry((*seg).to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| Error::Config(format!("override path '{path}' crosses a non-table")))?;
    table.insert(segments[segments.len() - 1].to_string(), parsed);
    Ok(())
}
