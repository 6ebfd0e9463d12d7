//! Twin Delayed DDPG: actor, twin critics, their targets, replay buffer,
//! Ornstein-Uhlenbeck exploration noise, and the delayed update rule.
//!
//! Both critics regress on the pessimistic (min) bootstrap every update;
//! the actor and all three target networks move only every
//! `policy_delay`-th update.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::env::{ACTION_DIM, STATE_DIM};
use crate::error::{Error, Result};
use crate::nn::{adam_step, soft_update, AdamState, Activation, Gradients, Mlp};

/// Training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Td3Config {
    /// Actor learning rate.
    #[serde(default = "d_actor_lr")]
    pub actor_lr: f64,
    /// Critic learning rate.
    #[serde(default = "d_critic_lr")]
    pub critic_lr: f64,
    /// Discount factor.
    #[serde(default = "d_gamma")]
    pub gamma: f64,
    /// Soft target update fraction.
    #[serde(default = "d_tau")]
    pub tau: f64,
    /// Actor/target update period in critic updates.
    #[serde(default = "d_policy_delay")]
    pub policy_delay: u64,
    /// Replay capacity in transitions.
    #[serde(default = "d_buffer_capacity")]
    pub buffer_capacity: usize,
    #[serde(default = "d_batch_size")]
    pub batch_size: usize,
    /// Learning episodes per training run.
    #[serde(default = "d_episodes")]
    pub episodes: usize,
    /// Ornstein-Uhlenbeck mean.
    #[serde(default = "d_ou_mu")]
    pub ou_mu: f64,
    /// Ornstein-Uhlenbeck mean-reversion rate.
    #[serde(default = "d_ou_theta")]
    pub ou_theta: f64,
    /// Exploration scale at episode 0, in normalized action units.
    #[serde(default = "d_ou_sigma_start")]
    pub ou_sigma_start: f64,
    /// Exploration scale at the final episode (linear decay).
    #[serde(default = "d_ou_sigma_end")]
    pub ou_sigma_end: f64,
    /// Target policy smoothing noise scale; 0 disables smoothing.
    #[serde(default = "d_smoothing_sigma")]
    pub smoothing_sigma: f64,
    /// Clip bound for the smoothing noise.
    #[serde(default = "d_smoothing_clip")]
    pub smoothing_clip: f64,
    /// Random-action steps used to seed the buffer before learning.
    #[serde(default = "d_warmup_steps")]
    pub warmup_steps: usize,
    /// Rewards are divided by this inside the critic targets; a uniform
    /// rescaling of all cost factors that conditions the regression
    /// without changing the optimal policy.
    #[serde(default = "d_reward_scale")]
    pub reward_scale: f64,
    /// Hidden layer widths shared by actor and critics.
    #[serde(default = "d_hidden")]
    pub hidden: Vec<usize>,
}

fn d_actor_lr() -> f64 {
    1e-4
}
fn d_critic_lr() -> f64 {
    1e-3
}
fn d_gamma() -> f64 {
    0.99
}
fn d_tau() -> f64 {
    0.01
}
fn d_policy_delay() -> u64 {
    3
}
fn d_buffer_capacity() -> usize {
    4000
}
fn d_batch_size() -> usize {
    64
}
fn d_episodes() -> usize {
    200
}
fn d_ou_mu() -> f64 {
    0.0
}
fn d_ou_theta() -> f64 {
    0.15
}
fn d_ou_sigma_start() -> f64 {
    0.2
}
fn d_ou_sigma_end() -> f64 {
    0.05
}
fn d_smoothing_sigma() -> f64 {
    0.2
}
fn d_smoothing_clip() -> f64 {
    0.5
}
fn d_warmup_steps() -> usize {
    500
}
fn d_reward_scale() -> f64 {
    100.0
}
fn d_hidden() -> Vec<usize> {
    vec![128, 128]
}

impl Default for Td3Config {
    fn default() -> Self {
        Self {
            actor_lr: d_actor_lr(),
            critic_lr: d_critic_lr(),
            gamma: d_gamma(),
            tau: d_tau(),
            policy_delay: d_policy_delay(),
            buffer_capacity: d_buffer_capacity(),
            batch_size: d_batch_size(),
            episodes: d_episodes(),
            ou_mu: d_ou_mu(),
            ou_theta: d_ou_theta(),
            ou_sigma_start: d_ou_sigma_start(),
            ou_sigma_end: d_ou_sigma_end(),
            smoothing_sigma: d_smoothing_sigma(),
            smoothing_clip: d_smoothing_clip(),
            warmup_steps: d_warmup_steps(),
            reward_scale: d_reward_scale(),
            hidden: d_hidden(),
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &str, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(format!("td3.{field}"), msg))
            }
        };
        check(self.actor_lr > 0.0 && self.actor_lr.is_finite(), "actor_lr", "must be > 0")?;
        check(self.critic_lr > 0.0 && self.critic_lr.is_finite(), "critic_lr", "must be > 0")?;
        check(self.gamma > 0.0 && self.gamma <= 1.0, "gamma", "must be in (0, 1]")?;
        check(self.tau > 0.0 && self.tau <= 1.0, "tau", "must be in (0, 1]")?;
        check(self.policy_delay >= 1, "policy_delay", "must be >= 1")?;
        check(self.batch_size >= 1, "batch_size", "must be >= 1")?;
        check(
            self.buffer_capacity >= self.batch_size,
            "buffer_capacity",
            "must hold at least one batch",
        )?;
        check(self.ou_theta >= 0.0, "ou_theta", "must be >= 0")?;
        check(
            self.ou_sigma_start >= 0.0 && self.ou_sigma_end >= 0.0,
            "ou_sigma_start",
            "exploration scales must be >= 0",
        )?;
        check(self.smoothing_sigma >= 0.0, "smoothing_sigma", "must be >= 0")?;
        check(self.smoothing_clip >= 0.0, "smoothing_clip", "must be >= 0")?;
        check(self.reward_scale > 0.0, "reward_scale", "must be > 0")?;
        check(
            !self.hidden.is_empty() && self.hidden.iter().all(|&n| n >= 1),
            "hidden",
            "need at least one nonempty hidden layer",
        )
    }
}

/// One replay record; state and action are in normalized units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: [f64; STATE_DIM],
    pub action: [f64; ACTION_DIM],
    pub reward: f64,
    pub next_state: [f64; STATE_DIM],
    pub done: bool,
}

/// Fixed-capacity ring buffer; once full, the oldest record is
/// overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    data: Vec<Transition>,
    capacity: usize,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1);
        Self {
            data: Vec::with_capacity(capacity),
            capacity,
            cursor: 0,
        }
    }

    pub fn store(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Uniform sample with replacement; errors while underfilled.
    pub fn sample(&self, batch_size: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Transition>> {
        if self.data.len() < batch_size {
            return Err(Error::InputMismatch(format!(
                "replay buffer holds {} transitions, need {batch_size}",
                self.data.len()
            )));
        }
        Ok((0..batch_size)
            .map(|_| self.data[rng.random_range(0..self.data.len())])
            .collect())
    }
}

/// Ornstein-Uhlenbeck exploration noise with its own seeded stream.
#[derive(Debug, Clone)]
pub struct OuNoise {
    x: [f64; ACTION_DIM],
    pub mu: f64,
    pub theta: f64,
    pub sigma: f64,
    rng: ChaCha8Rng,
}

impl OuNoise {
    pub fn new(mu: f64, theta: f64, sigma: f64, seed: u64) -> Self {
        Self {
            x: [mu; ACTION_DIM],
            mu,
            theta,
            sigma,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Resets the process to its mean, e.g. at an episode boundary.
    pub fn reset(&mut self) {
        self.x = [self.mu; ACTION_DIM];
    }

    pub fn set_sigma(&mut self, sigma: f64) {
        self.sigma = sigma;
    }

    /// Advances `x <- x + theta*(mu - x) + sigma*xi` and returns it.
    pub fn step(&mut self) -> [f64; ACTION_DIM] {
        for x in &mut self.x {
            let xi: f64 = self.rng.sample(StandardNormal);
            *x += self.theta * (self.mu - *x) + self.sigma * xi;
        }
        self.x
    }
}

/// Per-update losses; `actor_loss` is present only on delayed updates.
#[derive(Debug, Clone, Copy)]
pub struct UpdateReport {
    pub critic1_loss: f64,
    pub critic2_loss: f64,
    pub actor_loss: Option<f64>,
}

/// The six networks plus optimizer state and the delayed-update counter.
pub struct Td3Agent {
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub target_actor: Mlp,
    pub target_critic1: Mlp,
    pub target_critic2: Mlp,
    adam_actor: AdamState,
    adam_critic1: AdamState,
    adam_critic2: AdamState,
    pub config: Td3Config,
    update_count: u64,
}

impl Td3Agent {
    /// Fresh agent; targets start as exact copies of the online nets.
    pub fn new(config: Td3Config, rng: &mut ChaCha8Rng) -> Self {
        let mut actor_sizes = vec![STATE_DIM];
        actor_sizes.extend(&config.hidden);
        actor_sizes.push(ACTION_DIM);
        let mut critic_sizes = vec![STATE_DIM + ACTION_DIM];
        critic_sizes.extend(&config.hidden);
        critic_sizes.push(1);

        // small final actor layer keeps early actions near mid-box
        let actor = Mlp::new(&actor_sizes, Activation::Relu, Activation::Tanh, rng, 1e-3);
        let critic1 = Mlp::new(&critic_sizes, Activation::Relu, Activation::Identity, rng, 1.0);
        let critic2 = Mlp::new(&critic_sizes, Activation::Relu, Activation::Identity, rng, 1.0);
        let adam_actor = AdamState::new(&actor, config.actor_lr);
        let adam_critic1 = AdamState::new(&critic1, config.critic_lr);
        let adam_critic2 = AdamState::new(&critic2, config.critic_lr);
        Self {
            target_actor: actor.clone(),
            target_critic1: critic1.clone(),
            target_critic2: critic2.clone(),
            actor,
            critic1,
            critic2,
            adam_actor,
            adam_critic1,
            adam_critic2,
            config,
            update_count: 0,
        }
    }

    /// Deterministic policy output in [-1, 1]^3.
    pub fn select_action(&self, features: &[f64; STATE_DIM]) -> [f64; ACTION_DIM] {
        let out = self.actor.forward(features);
        [out[0], out[1], out[2]]
    }

    /// Policy output plus one Ornstein-Uhlenbeck draw, clamped back into
    /// the normalized box.
    pub fn select_action_noisy(
        &self,
        features: &[f64; STATE_DIM],
        noise: &mut OuNoise,
    ) -> [f64; ACTION_DIM] {
        let mut a = self.select_action(features);
        let n = noise.step();
        for (ai, ni) in a.iter_mut().zip(n) {
            *ai = (*ai + ni).clamp(-1.0, 1.0);
        }
        a
    }

    /// Pessimistic bootstrap targets, one per transition:
    /// `y = r/scale + gamma * (1 - done) * min(Q1', Q2')(next, a~)` with
    /// the smoothed target action `a~`.
    pub fn critic_targets(&self, batch: &[Transition], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let cfg = &self.config;
        batch
            .iter()
            .map(|tr| {
                let mut a = self.target_actor.forward(&tr.next_state);
                for ai in a.iter_mut() {
                    let xi: f64 = rng.sample(StandardNormal);
                    let noise =
                        (cfg.smoothing_sigma * xi).clamp(-cfg.smoothing_clip, cfg.smoothing_clip);
                    *ai = (*ai + noise).clamp(-1.0, 1.0);
                }
                let input = concat_state_action(&tr.next_state, &[a[0], a[1], a[2]]);
                let q1 = self.target_critic1.forward(&input)[0];
                let q2 = self.target_critic2.forward(&input)[0];
                let not_done = if tr.done { 0.0 } else { 1.0 };
                tr.reward / cfg.reward_scale + cfg.gamma * not_done * q1.min(q2)
            })
            .collect()
    }

    /// One TD3 update on a sampled batch. Critics move every call; the
    /// actor and the targets move when the internal counter is a
    /// multiple of `policy_delay`.
    pub fn update(&mut self, batch: &[Transition], rng: &mut ChaCha8Rng) -> Result<UpdateReport> {
        assert!(!batch.is_empty(), "empty batch");
        let targets = self.critic_targets(batch, rng);
        let critic1_loss = regress_critic(
            &mut self.critic1,
            &mut self.adam_critic1,
            batch,
            &targets,
        );
        let critic2_loss = regress_critic(
            &mut self.critic2,
            &mut self.adam_critic2,
            batch,
            &targets,
        );
        if !critic1_loss.is_finite() || !critic2_loss.is_finite() {
            return Err(Error::Numerical(format!(
                "critic loss diverged: {critic1_loss}, {critic2_loss}"
            )));
        }

        self.update_count += 1;
        let mut actor_loss = None;
        if self.update_count.is_multiple_of(self.config.policy_delay) {
            let loss = self.update_actor(batch);
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("actor loss diverged: {loss}")));
            }
            actor_loss = Some(loss);
            soft_update(&mut self.target_actor, &self.actor, self.config.tau);
            soft_update(&mut self.target_critic1, &self.critic1, self.config.tau);
            soft_update(&mut self.target_critic2, &self.critic2, self.config.tau);
        }
        Ok(UpdateReport {
            critic1_loss,
            critic2_loss,
            actor_loss,
        })
    }

    /// Gradient ascent on Q1(s, pi(s)); returns the (negated) objective.
    fn update_actor(&mut self, batch: &[Transition]) -> f64 {
        let n = batch.len() as f64;
        let mut acc = Gradients::zeros_like(&self.actor);
        let mut q_sum = 0.0;
        for tr in batch {
            let a = self.actor.forward(&tr.state);
            let input = concat_state_action(&tr.state, &[a[0], a[1], a[2]]);
            q_sum += self.critic1.forward(&input)[0];
            // dQ/d(action) through the critic, then through the actor;
            // the critic's own parameters are left untouched
            let critic_grads = self.critic1.backward(&input, &[-1.0 / n]);
            let d_action = &critic_grads.d_input[STATE_DIM..];
            let actor_grads = self.actor.backward(&tr.state, d_action);
            acc.accumulate(&actor_grads);
        }
        adam_step(&mut self.actor, &acc, &mut self.adam_actor);
        -q_sum / n
    }

    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    /// Serializes the manifest and all six networks.
    pub fn write_checkpoint(
        &self,
        system: &SystemConfig,
        master_seed: u64,
        episodes: usize,
    ) -> String {
        let mut out = String::from("td3 v1\n");
        out.push_str(&format!("master_seed {master_seed}\n"));
        out.push_str(&format!("episodes {episodes}\n"));
        let config_text = system.to_toml_string();
        let n_lines = config_text.lines().count();
        out.push_str(&format!("config_lines {n_lines}\n"));
        for line in config_text.lines() {
            out.push_str(line);
            out.push('\n');
        }
        for (name, net) in self.networks() {
            out.push_str(&format!("network {name}\n"));
            net.write_checkpoint(&mut out);
        }
        out
    }

    fn networks(&self) -> [(&'static str, &Mlp); 6] {
        [
            ("actor", &self.actor),
            ("critic1", &self.critic1),
            ("critic2", &self.critic2),
            ("target_actor", &self.target_actor),
            ("target_critic1", &self.target_critic1),
            ("target_critic2", &self.target_critic2),
        ]
    }

    /// Restores an agent (with fresh optimizer state) and its manifest.
    pub fn read_checkpoint(text: &str) -> Result<AgentCheckpoint> {
        let bad = |msg: &str| Error::config("checkpoint", msg.to_string());
        let mut lines = text.lines();
        let magic = lines.next().ok_or_else(|| bad("empty checkpoint"))?;
        if magic.trim() != "td3 v1" {
            return Err(bad(&format!("expected `td3 v1`, got `{magic}`")));
        }
        let master_seed: u64 = read_kv(lines.next(), "master_seed")?;
        let episodes: usize = read_kv(lines.next(), "episodes")?;
        let config_lines: usize = read_kv(lines.next(), "config_lines")?;
        let mut config_text = String::new();
        for _ in 0..config_lines {
            let line = lines.next().ok_or_else(|| bad("truncated config echo"))?;
            config_text.push_str(line);
            config_text.push('\n');
        }
        let config = SystemConfig::from_toml_str(&config_text)?;
        let mut nets = Vec::with_capacity(6);
        for expected in [
            "actor",
            "critic1",
            "critic2",
            "target_actor",
            "target_critic1",
            "target_critic2",
        ] {
            let header = lines.next().ok_or_else(|| bad("missing network section"))?;
            if header.trim() != format!("network {expected}") {
                return Err(bad(&format!("expected `network {expected}`, got `{header}`")));
            }
            nets.push(Mlp::read_checkpoint(&mut lines)?);
        }
        let actor = nets.remove(0);
        if actor.input_dim() != STATE_DIM || actor.output_dim() != ACTION_DIM {
            return Err(Error::InputMismatch(format!(
                "actor dimensions {:?} do not match the {STATE_DIM}-state / {ACTION_DIM}-action environment",
                actor.layer_sizes
            )));
        }
        let critic1 = nets.remove(0);
        if critic1.input_dim() != STATE_DIM + ACTION_DIM || critic1.output_dim() != 1 {
            return Err(Error::InputMismatch(format!(
                "critic dimensions {:?} do not match the environment",
                critic1.layer_sizes
            )));
        }
        let adam_actor = AdamState::new(&actor, config.td3.actor_lr);
        let adam_critic1 = AdamState::new(&critic1, config.td3.critic_lr);
        let critic2 = nets.remove(0);
        let adam_critic2 = AdamState::new(&critic2, config.td3.critic_lr);
        let agent = Td3Agent {
            actor,
            critic1,
            critic2,
            target_actor: nets.remove(0),
            target_critic1: nets.remove(0),
            target_critic2: nets.remove(0),
            adam_actor,
            adam_critic1,
            adam_critic2,
            config: config.td3.clone(),
            update_count: 0,
        };
        Ok(AgentCheckpoint {
            agent,
            config,
            master_seed,
            episodes,
        })
    }
}

/// A restored checkpoint: the agent plus its manifest.
pub struct AgentCheckpoint {
    pub agent: Td3Agent,
    pub config: SystemConfig,
    pub master_seed: u64,
    pub episodes: usize,
}

fn read_kv<T: std::str::FromStr>(line: Option<&str>, key: &str) -> Result<T> {
    line.and_then(|l| l.strip_prefix(key))
        .map(str::trim)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::config("checkpoint", format!("missing or bad `{key}`")))
}

fn concat_state_action(
    state: &[f64; STATE_DIM],
    action: &[f64; ACTION_DIM],
) -> [f64; STATE_DIM + ACTION_DIM] {
    let mut input = [0.0; STATE_DIM + ACTION_DIM];
    input[..STATE_DIM].copy_from_slice(state);
    input[STATE_DIM..].copy_from_slice(action);
    input
}

/// Mean-squared-error regression of one critic onto `targets`.
fn regress_critic(
    critic: &mut Mlp,
    adam: &mut AdamState,
    batch: &[Transition],
    targets: &[f64],
) -> f64 {
    let n = batch.len() as f64;
    let mut acc = Gradients::zeros_like(critic);
    let mut loss = 0.0;
    for (tr, y) in batch.iter().zip(targets) {
        let input = concat_state_action(&tr.state, &tr.action);
        let q = critic.forward(&input)[0];
        let err = q - y;
        loss += err * err;
        let grads = critic.backward(&input, &[2.0 * err / n]);
        acc.accumulate(&grads);
    }
    adam_step(critic, &acc, adam);
    loss / n
}
