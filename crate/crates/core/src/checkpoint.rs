//! Versioned checkpoint files: architecture, parameters, optimizer moments
//! and random-stream positions, serialized as JSON with exact f64
//! round-tripping.
//!
//! The replay buffer is deliberately not persisted; a resumed run re-warms
//! its buffer, everything else continues bit-exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{AgentParams, Trainer};
use crate::config::{AgentConfig, ScenarioConfig};
use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::optim::Optimizer;
use crate::rng::RngStreamState;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub train_step: u64,
    pub update_count: u64,
    pub observation_dim: usize,
    pub action_dim: usize,
    pub agent_config: AgentConfig,
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub actor_target: Mlp,
    pub critic1_target: Mlp,
    pub critic2_target: Mlp,
    pub actor_opt: Optimizer,
    pub critic1_opt: Optimizer,
    pub critic2_opt: Optimizer,
    pub agent_rng: [RngStreamState; 4],
    pub env_rng: [RngStreamState; 3],
}

impl Checkpoint {
    pub fn from_trainer(trainer: &Trainer) -> Self {
        let p = &trainer.params;
        Self {
            version: CHECKPOINT_VERSION,
            train_step: trainer.timestep(),
            update_count: p.update_count,
            observation_dim: trainer.env.config().observation_dim(),
            action_dim: trainer.env.config().action_dim(),
            agent_config: trainer.cfg.clone(),
            actor: p.actor.clone(),
            critic1: p.critic1.clone(),
            critic2: p.critic2.clone(),
            actor_target: p.actor_target.clone(),
            critic1_target: p.critic1_target.clone(),
            critic2_target: p.critic2_target.clone(),
            actor_opt: p.actor_opt.clone(),
            critic1_opt: p.critic1_opt.clone(),
            critic2_opt: p.critic2_opt.clone(),
            agent_rng: trainer.rng_states(),
            env_rng: trainer.env.rng_states(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)
            .map_err(|e| Error::Checkpoint(format!("serialization failed: {e}")))?;
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ckpt.version
            )));
        }
        Ok(ckpt)
    }

    pub fn check_dims(&self, scenario: &ScenarioConfig) -> Result<()> {
        if self.observation_dim != scenario.observation_dim()
            || self.action_dim != scenario.action_dim()
        {
            return Err(Error::Checkpoint(format!(
                "checkpoint was trained on {}-dim observations / {}-dim actions, \
                 scenario expects {} / {}",
                self.observation_dim,
                self.action_dim,
                scenario.observation_dim(),
                scenario.action_dim()
            )));
        }
        Ok(())
    }

    pub fn into_params(self) -> AgentParams {
        AgentParams {
            actor: self.actor,
            critic1: self.critic1,
            critic2: self.critic2,
            actor_target: self.actor_target,
            critic1_target: self.critic1_target,
            critic2_target: self.critic2_target,
            actor_opt: self.actor_opt,
            critic1_opt: self.critic1_opt,
            critic2_opt: self.critic2_opt,
            update_count: self.update_count,
        }
    }
}

/// Rebuilds a trainer from a checkpoint. The replay buffer starts empty and
/// the episode restarts; parameters, optimizer moments and random streams
/// continue exactly.
pub fn resume_trainer(scenario: ScenarioConfig, ckpt: Checkpoint) -> Result<Trainer> {
    ckpt.check_dims(&scenario)?;
    let mut trainer = Trainer::new(scenario, ckpt.agent_config.clone(), 0)?;
    trainer.restore_rng_states(&ckpt.agent_rng);
    trainer.env.restore_rng_states(&ckpt.env_rng);
    trainer.env.reset_continue();
    trainer.set_timestep(ckpt.train_step);
    trainer.params = ckpt.into_params();
    Ok(trainer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{CpuSplit, SliceSpec};

    fn scenario() -> ScenarioConfig {
        ScenarioConfig {
            num_cells: 4,
            num_cpus: 2,
            cpu_capacity: 100.0,
            max_vnfs: 8,
            vnf_capacity: 25.0,
            theta: 1.0,
            k0: 0.5,
            mu_star: 2.0,
            boot_latency: 1.0,
            vnf_energy: 1.0,
            sigma_star: 1e-6,
            amp_efficiency: 0.5,
            slices: vec![SliceSpec {
                slice_id: 0,
                arrival_rate_mean: 0.5,
                ue_arrival_rate: 0.8,
                ue_mean_lifetime: 12.0,
                qos_latency: 20.0,
                bandwidth: 1.0,
                tx_power: 1.0,
            }],
            weights: (0.01, 0.1, 0.1),
            cpu_split: CpuSplit { coding: 0.5, modulation: 0.1, fft: 0.4 },
            episode_length: 25,
            latency_cap: 100.0,
            qos_penalty: 1.0,
            saturation_penalty: 1.0,
            max_ues: 30,
            energy_cap: 100.0,
            sinr_min: 1.0,
            sinr_max: 15.0,
        }
    }

    fn agent_cfg() -> AgentConfig {
        AgentConfig {
            hidden_sizes: vec![8, 8],
            batch_size: 8,
            start_timesteps: 16,
            max_timesteps: 100,
            replay_capacity: 256,
            ..AgentConfig::default()
        }
    }

    #[test]
    fn round_trip_resumes_bit_exactly() {
        let dir = std::env::temp_dir().join(format!("slicerl-ckpt-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("agent.json");

        let mut control = Trainer::new(scenario(), agent_cfg(), 7).unwrap();
        for _ in 0..60 {
            control.step().unwrap();
        }
        Checkpoint::from_trainer(&control).save(&path).unwrap();

        let loaded = Checkpoint::load(&path).unwrap();
        let mut resumed = resume_trainer(scenario(), loaded).unwrap();
        assert_eq!(resumed.timestep(), control.timestep());
        assert_eq!(resumed.params.actor, control.params.actor);
        assert_eq!(resumed.params.critic1_opt, control.params.critic1_opt);

        // the buffer is not persisted: trajectories are identical from
        // equal buffer states, so give the control a fresh buffer too
        control.buffer = crate::replay::ReplayBuffer::new(256, 6, 1);
        for _ in 0..40 {
            let a = control.step().unwrap();
            let b = resumed.step().unwrap();
            assert_eq!(a.reward.to_bits(), b.reward.to_bits());
        }
        assert_eq!(control.params.actor, resumed.params.actor);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn corrupted_checkpoint_is_an_error() {
        let dir = std::env::temp_dir().join(format!("slicerl-ckpt-bad-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("broken.json");
        std::fs::write(&path, "{ not json").unwrap();
        let err = Checkpoint::load(&path).unwrap_err();
        assert!(matches!(err, Error::Checkpoint(_)));
        assert_eq!(err.exit_code(), 4);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn dimension_mismatch_is_descriptive() {
        let trainer = Trainer::new(scenario(), agent_cfg(), 3).unwrap();
        let ckpt = Checkpoint::from_trainer(&trainer);
        let mut two_slices = scenario();
        two_slices.slices.push(SliceSpec {
            slice_id: 1,
            arrival_rate_mean: 0.5,
            ue_arrival_rate: 0.8,
            ue_mean_lifetime: 12.0,
            qos_latency: 40.0,
            bandwidth: 1.0,
            tx_power: 1.0,
        });
        let err = ckpt.check_dims(&two_slices).unwrap_err();
        assert!(err.to_string().contains("observations"), "{err}");
    }
}
