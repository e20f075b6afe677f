//! TD3 training logic, with DDPG as the degenerate single-critic,
//! every-step-policy configuration.

use crate::config::{AgentConfig, Algorithm, ScenarioConfig};
use crate::env::{SlicingEnv, StepInfo};
use crate::error::{Error, Result};
use crate::nn::{Activation, GradientSet, Mlp};
use crate::optim::{polyak_update, Optimizer};
use crate::replay::{Batch, ReplayBuffer, Transition};
use crate::rng::{RngStream, StreamId};

/// The six networks of the actor-critic family plus optimizer state.
#[derive(Debug, Clone)]
pub struct AgentParams {
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub actor_target: Mlp,
    pub critic1_target: Mlp,
    pub critic2_target: Mlp,
    pub actor_opt: Optimizer,
    pub critic1_opt: Optimizer,
    pub critic2_opt: Optimizer,
    /// Critic updates applied so far; gates the delayed policy update.
    pub update_count: u64,
}

fn actor_architecture(obs_dim: usize, action_dim: usize, hidden: &[usize]) -> (Vec<usize>, Vec<Activation>) {
    let mut sizes = vec![obs_dim];
    sizes.extend_from_slice(hidden);
    sizes.push(action_dim);
    let mut acts = vec![Activation::Relu; hidden.len()];
    acts.push(Activation::Tanh);
    (sizes, acts)
}

fn critic_architecture(obs_dim: usize, action_dim: usize, hidden: &[usize]) -> (Vec<usize>, Vec<Activation>) {
    let mut sizes = vec![obs_dim + action_dim];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    let mut acts = vec![Activation::Relu; hidden.len()];
    acts.push(Activation::Identity);
    (sizes, acts)
}

impl AgentParams {
    /// Fresh networks; targets start as exact copies of their online nets.
    pub fn init(obs_dim: usize, action_dim: usize, cfg: &AgentConfig, seed: u64) -> Result<Self> {
        let (a_sizes, a_acts) = actor_architecture(obs_dim, action_dim, &cfg.hidden_sizes);
        let (c_sizes, c_acts) = critic_architecture(obs_dim, action_dim, &cfg.hidden_sizes);
        let mut actor_rng = RngStream::new(seed, StreamId::ActorInit);
        let mut c1_rng = RngStream::new(seed, StreamId::Critic1Init);
        let mut c2_rng = RngStream::new(seed, StreamId::Critic2Init);
        let actor = Mlp::init(&a_sizes, &a_acts, 1e-2, &mut actor_rng)?;
        let critic1 = Mlp::init(&c_sizes, &c_acts, 1.0, &mut c1_rng)?;
        let critic2 = Mlp::init(&c_sizes, &c_acts, 1.0, &mut c2_rng)?;
        Ok(Self {
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor_opt: Optimizer::new(cfg.optimizer, &actor, cfg.actor_lr),
            critic1_opt: Optimizer::new(cfg.optimizer, &critic1, cfg.critic_lr),
            critic2_opt: Optimizer::new(cfg.optimizer, &critic2, cfg.critic_lr),
            actor,
            critic1,
            critic2,
            update_count: 0,
        })
    }
}

fn critic_input(state: &[f64], action: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(state.len() + action.len());
    x.extend_from_slice(state);
    x.extend_from_slice(action);
    x
}

fn clamp_action(action: &mut [f64], cfg: &AgentConfig) {
    for a in action {
        *a = a.clamp(cfg.min_action, cfg.max_action);
    }
}

/// Deterministic policy output, plus Gaussian exploration noise when asked.
pub fn select_action(
    state: &[f64],
    params: &AgentParams,
    cfg: &AgentConfig,
    rng: &mut RngStream,
    explore: bool,
) -> Result<Vec<f64>> {
    let mut action = params.actor.forward(state)?;
    if explore {
        let scale = cfg.exploration_noise * cfg.max_action;
        for a in &mut action {
            *a += rng.normal(scale);
        }
    }
    clamp_action(&mut action, cfg);
    Ok(action)
}

/// Uniform draw over the action box, used while the buffer warms up.
pub fn warmup_action(env: &SlicingEnv, rng: &mut RngStream) -> Vec<f64> {
    env.action_space().sample(rng)
}

/// Target action with clipped smoothing noise (TD3) or the raw target
/// policy output (DDPG).
pub fn smooth_target_action(
    next_state: &[f64],
    params: &AgentParams,
    cfg: &AgentConfig,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let mut action = params.actor_target.forward(next_state)?;
    if cfg.algorithm == Algorithm::Td3 {
        let scale = cfg.policy_noise * cfg.max_action;
        let clip = cfg.noise_clip * cfg.max_action;
        for a in &mut action {
            *a += rng.normal(scale).clamp(-clip, clip);
        }
    }
    clamp_action(&mut action, cfg);
    Ok(action)
}

/// Bootstrapped TD targets over a batch. Twin targets take the minimum of
/// both critic targets; terminal transitions propagate no bootstrap value.
pub fn td_target(
    batch: &Batch,
    params: &AgentParams,
    cfg: &AgentConfig,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let mut targets = Vec::with_capacity(batch.len());
    for i in 0..batch.len() {
        let next_action = smooth_target_action(&batch.next_states[i], params, cfg, rng)?;
        let x = critic_input(&batch.next_states[i], &next_action);
        let q1 = params.critic1_target.forward(&x)?[0];
        let q = match cfg.algorithm {
            Algorithm::Td3 => q1.min(params.critic2_target.forward(&x)?[0]),
            Algorithm::Ddpg => q1,
        };
        let mask = if batch.dones[i] { 0.0 } else { 1.0 };
        targets.push(batch.rewards[i] + cfg.discount * mask * q);
    }
    Ok(targets)
}

fn mse_descent(
    critic: &mut Mlp,
    opt: &mut Optimizer,
    batch: &Batch,
    targets: &[f64],
) -> Result<f64> {
    let n = batch.len() as f64;
    let mut grads = GradientSet::zeros_like(critic);
    let mut loss = 0.0;
    for i in 0..batch.len() {
        let x = critic_input(&batch.states[i], &batch.actions[i]);
        let (q, cache) = critic.forward_cached(&x)?;
        let err = q[0] - targets[i];
        loss += err * err;
        let (g, _) = critic.backward(&cache, &[2.0 * err / n])?;
        grads.accumulate(&g, 1.0);
    }
    opt.step(critic, &grads)?;
    Ok(loss / n)
}

/// One descent step on the critic loss against frozen targets. Returns the
/// summed MSE loss (both critics for TD3, one for DDPG).
pub fn critic_update(
    batch: &Batch,
    targets: &[f64],
    params: &mut AgentParams,
    cfg: &AgentConfig,
) -> Result<f64> {
    if targets.len() != batch.len() {
        return Err(Error::Contract("targets must match the batch length".into()));
    }
    let mut loss = mse_descent(&mut params.critic1, &mut params.critic1_opt, batch, targets)?;
    if cfg.algorithm == Algorithm::Td3 {
        loss += mse_descent(&mut params.critic2, &mut params.critic2_opt, batch, targets)?;
    }
    if !loss.is_finite() {
        return Err(Error::Divergence(format!("critic loss became {loss}")));
    }
    Ok(loss)
}

/// Gradient-ascent step on the policy: for each state the actor's output is
/// pushed along `action_grad(state, action)`, the gradient of the action
/// value at the policy's action. Exposed separately so analytic critics can
/// drive the same code path.
pub fn actor_ascent_step(
    actor: &mut Mlp,
    opt: &mut Optimizer,
    states: &[Vec<f64>],
    mut action_grad: impl FnMut(&[f64], &[f64]) -> Result<Vec<f64>>,
) -> Result<()> {
    let n = states.len() as f64;
    let mut grads = GradientSet::zeros_like(actor);
    for state in states {
        let (action, cache) = actor.forward_cached(state)?;
        let dq_da = action_grad(state, &action)?;
        let (g, _) = actor.backward(&cache, &dq_da)?;
        // ascent on Q == descent on -Q
        grads.accumulate(&g, -1.0 / n);
    }
    opt.step(actor, &grads)
}

/// Gradient of the first critic's value with respect to the action input.
pub fn critic_action_grad(critic: &Mlp, state: &[f64], action: &[f64]) -> Result<Vec<f64>> {
    let x = critic_input(state, action);
    let (_, cache) = critic.forward_cached(&x)?;
    let (_, input_grad) = critic.backward(&cache, &[1.0])?;
    Ok(input_grad[state.len()..].to_vec())
}

/// Delayed policy update: deterministic policy gradient through the first
/// critic, then Polyak averaging of every target network.
pub fn actor_update(batch: &Batch, params: &mut AgentParams, cfg: &AgentConfig) -> Result<()> {
    let AgentParams {
        actor,
        critic1,
        actor_opt,
        ..
    } = params;
    actor_ascent_step(actor, actor_opt, &batch.states, |state, action| {
        critic_action_grad(critic1, state, action)
    })?;
    polyak_update(&mut params.actor_target, &params.actor, cfg.tau)?;
    polyak_update(&mut params.critic1_target, &params.critic1, cfg.tau)?;
    if cfg.algorithm == Algorithm::Td3 {
        polyak_update(&mut params.critic2_target, &params.critic2, cfg.tau)?;
    }
    Ok(())
}

/// What one outer-loop iteration reports back to the harness.
#[derive(Debug, Clone)]
pub struct StepMetrics {
    pub t: u64,
    pub episode: u64,
    pub reward: f64,
    pub done: bool,
    pub warmup: bool,
    pub critic_loss: Option<f64>,
    pub actor_updated: bool,
    /// Total reward of the episode that just finished, if one did.
    pub episode_return: Option<f64>,
    pub info: StepInfo,
}

/// Owns one environment, buffer and parameter set, and runs the training
/// loop one step at a time.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub env: SlicingEnv,
    pub buffer: ReplayBuffer,
    pub params: AgentParams,
    pub cfg: AgentConfig,
    obs: Vec<f64>,
    t: u64,
    episode: u64,
    episode_return: f64,
    warmup_rng: RngStream,
    explore_rng: RngStream,
    smooth_rng: RngStream,
    replay_rng: RngStream,
}

impl Trainer {
    pub fn new(scenario: ScenarioConfig, cfg: AgentConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut env = SlicingEnv::new(scenario)?;
        let obs = env.reset(seed);
        let obs_dim = env.config().observation_dim();
        let action_dim = env.config().action_dim();
        let params = AgentParams::init(obs_dim, action_dim, &cfg, seed)?;
        Ok(Self {
            buffer: ReplayBuffer::new(cfg.replay_capacity, obs_dim, action_dim),
            params,
            obs,
            t: 0,
            episode: 0,
            episode_return: 0.0,
            warmup_rng: RngStream::new(seed, StreamId::Warmup),
            explore_rng: RngStream::new(seed, StreamId::Exploration),
            smooth_rng: RngStream::new(seed, StreamId::TargetSmoothing),
            replay_rng: RngStream::new(seed, StreamId::ReplaySampling),
            env,
            cfg,
        })
    }

    pub fn timestep(&self) -> u64 {
        self.t
    }

    pub fn episode_index(&self) -> u64 {
        self.episode
    }

    pub fn observation(&self) -> &[f64] {
        &self.obs
    }

    /// One iteration of the training loop: act (uniformly during warm-up),
    /// step the environment, store the transition, then update critics and
    /// (every `policy_freq`-th update) the actor.
    pub fn step(&mut self) -> Result<StepMetrics> {
        let warmup = self.t < self.cfg.start_timesteps;
        let action = if warmup {
            warmup_action(&self.env, &mut self.warmup_rng)
        } else {
            select_action(&self.obs, &self.params, &self.cfg, &mut self.explore_rng, true)?
        };

        let result = self.env.step(&action)?;
        self.buffer.push(&Transition {
            state: self.obs.clone(),
            action,
            reward: result.reward,
            next_state: result.observation.clone(),
            done: result.done,
        })?;

        let mut critic_loss = None;
        let mut actor_updated = false;
        if self.t >= self.cfg.start_timesteps && self.buffer.len() >= self.cfg.batch_size {
            let batch = self.buffer.sample(self.cfg.batch_size, &mut self.replay_rng)?;
            let targets = td_target(&batch, &self.params, &self.cfg, &mut self.smooth_rng)?;
            critic_loss = Some(critic_update(&batch, &targets, &mut self.params, &self.cfg)?);
            self.params.update_count += 1;
            if self.params.update_count % self.cfg.effective_policy_freq() == 0 {
                actor_update(&batch, &mut self.params, &self.cfg)?;
                actor_updated = true;
            }
        }

        self.episode_return += result.reward;
        let mut episode_return = None;
        if result.done {
            episode_return = Some(self.episode_return);
            self.episode_return = 0.0;
            self.episode += 1;
            self.obs = self.env.reset_continue();
        } else {
            self.obs = result.observation.clone();
        }

        let metrics = StepMetrics {
            t: self.t,
            episode: self.episode,
            reward: result.reward,
            done: result.done,
            warmup,
            critic_loss,
            actor_updated,
            episode_return,
            info: result.info,
        };
        self.t += 1;
        Ok(metrics)
    }

    /// Snapshot of every agent-side random stream, for checkpointing.
    pub fn rng_states(&self) -> [crate::rng::RngStreamState; 4] {
        [
            self.warmup_rng.state(),
            self.explore_rng.state(),
            self.smooth_rng.state(),
            self.replay_rng.state(),
        ]
    }

    pub fn restore_rng_states(&mut self, states: &[crate::rng::RngStreamState; 4]) {
        self.warmup_rng = RngStream::from_state(&states[0]);
        self.explore_rng = RngStream::from_state(&states[1]);
        self.smooth_rng = RngStream::from_state(&states[2]);
        self.replay_rng = RngStream::from_state(&states[3]);
    }

    pub fn set_timestep(&mut self, t: u64) {
        self.t = t;
    }
}
