//! Training orchestration: warm-up buffer seeding, per-episode scenario
//! draws, rollouts with decaying exploration noise, per-step updates,
//! logging and checkpoint snapshots.

use std::time::Instant;

use rand::Rng;

use crate::config::SystemConfig;
use crate::env::{self, ActionKw, Env, EnvState, StepOutcome};
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::scenario::{perturb, Scenario, UncertaintyTier};
use crate::td3::{OuNoise, ReplayBuffer, Td3Agent, Transition};

// stream ids of the independent rng streams of one training run
const STREAM_INIT: u64 = 0;
const STREAM_WARMUP_SCENARIO: u64 = 1;
const STREAM_WARMUP_ACTION: u64 = 2;
const STREAM_EPISODE_SCENARIO: u64 = 3;
const STREAM_OU: u64 = 4;
const STREAM_REPLAY: u64 = 5;
const STREAM_SMOOTHING: u64 = 6;

/// Per-episode training record.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeLog {
    pub episode: usize,
    pub cum_reward: f64,
    /// Rolling mean of the cumulative reward over the last five episodes.
    pub mean5: f64,
    pub c_s: f64,
    pub delta_p: f64,
    /// Wall-clock duration of the episode; diagnostic only, excluded
    /// from the deterministic CSV.
    pub seconds: f64,
}

/// The full training curve.
#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub episodes: Vec<EpisodeLog>,
}

impl TrainLog {
    /// Deterministic result columns; timings go to [`TrainLog::timings_csv`].
    pub fn to_csv(&self) -> String {
        let mut out = String::from("episode,cum_reward,mean5,c_s,delta_p\n");
        for e in &self.episodes {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.episode, e.cum_reward, e.mean5, e.c_s, e.delta_p
            ));
        }
        out
    }

    /// Wall-clock sidecar, one row per episode.
    pub fn timings_csv(&self) -> String {
        let mut out = String::from("episode,seconds\n");
        for e in &self.episodes {
            out.push_str(&format!("{},{:.3}\n", e.episode, e.seconds));
        }
        out
    }
}

/// A complete episode: per-step outcomes plus the replay-ready views.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub outcomes: Vec<StepOutcome>,
    pub states: Vec<EnvState>,
    pub actions_norm: Vec<[f64; env::ACTION_DIM]>,
}

impl Trajectory {
    pub fn cum_reward(&self) -> f64 {
        self.outcomes.iter().map(|o| o.reward).sum()
    }
}

/// Rolls one episode with the given actor; `noise` adds exploration.
pub fn rollout(
    actor: &Td3Agent,
    scenario: &Scenario,
    config: &SystemConfig,
    weights: crate::env::RewardWeights,
    mut noise: Option<&mut OuNoise>,
) -> Result<Trajectory> {
    let mut environment = Env::new(scenario, config, weights);
    let mut state = environment.reset()?;
    let mut outcomes = Vec::with_capacity(config.horizon);
    let mut states = vec![state];
    let mut actions_norm = Vec::with_capacity(config.horizon);
    for _ in 0..config.horizon {
        let features = env::normalize_state(&state, config);
        let a_norm = match noise.as_deref_mut() {
            Some(n) => actor.select_action_noisy(&features, n),
            None => actor.select_action(&features),
        };
        let out = environment.step(&state, ActionKw::from_normalized(a_norm, config));
        actions_norm.push(a_norm);
        state = out.next_state;
        states.push(state);
        outcomes.push(out);
    }
    Ok(Trajectory {
        outcomes,
        states,
        actions_norm,
    })
}

/// One finished training run.
pub struct TrainOutput {
    pub agent: Td3Agent,
    pub log: TrainLog,
}

/// Trains an agent from scratch; fully deterministic in `master_seed`.
pub fn train(config: &SystemConfig, master_seed: u64) -> Result<TrainOutput> {
    train_with_snapshots(config, master_seed, |_, _| Ok(()))
}

/// [`train`] with a callback invoked every 25 episodes and at completion,
/// e.g. to write checkpoint files.
pub fn train_with_snapshots(
    config: &SystemConfig,
    master_seed: u64,
    mut on_snapshot: impl FnMut(usize, &Td3Agent) -> Result<()>,
) -> Result<TrainOutput> {
    config.validate()?;
    let td3 = &config.td3;
    let mut init_rng = stream_rng(master_seed, STREAM_INIT);
    let mut agent = Td3Agent::new(td3.clone(), &mut init_rng);
    let mut log = TrainLog::default();
    if td3.episodes == 0 {
        return Ok(TrainOutput { agent, log });
    }

    let mut buffer = ReplayBuffer::new(td3.buffer_capacity);
    let band = UncertaintyTier::training_band();

    // warm-up: uniform random actions seed the buffer, no learning
    let mut warmup_action_rng = stream_rng(master_seed, STREAM_WARMUP_ACTION);
    let mut warmup_scenario = 0u64;
    let mut steps_done = 0usize;
    'warmup: loop {
        if steps_done >= td3.warmup_steps {
            break 'warmup;
        }
        let seed = crate::rng::seed_stream(master_seed, STREAM_WARMUP_SCENARIO) ^ warmup_scenario;
        warmup_scenario += 1;
        let scenario = perturb(&config.profile, band, seed);
        let mut environment = Env::new(&scenario, config, config.weights);
        let mut state = environment.reset()?;
        for _ in 0..config.horizon {
            if steps_done >= td3.warmup_steps {
                break 'warmup;
            }
            let a_norm = [
                warmup_action_rng.random_range(-1.0..=1.0),
                warmup_action_rng.random_range(-1.0..=1.0),
                warmup_action_rng.random_range(-1.0..=1.0),
            ];
            let features = env::normalize_state(&state, config);
            let out = environment.step(&state, ActionKw::from_normalized(a_norm, config));
            buffer.store(Transition {
                state: features,
                action: a_norm,
                reward: out.reward,
                next_state: env::normalize_state(&out.next_state, config),
                done: out.done,
            });
            state = out.next_state;
            steps_done += 1;
            if out.done {
                break;
            }
        }
    }

    let mut noise = OuNoise::new(
        td3.ou_mu,
        td3.ou_theta,
        td3.ou_sigma_start,
        crate::rng::seed_stream(master_seed, STREAM_OU),
    );
    let mut replay_rng = stream_rng(master_seed, STREAM_REPLAY);
    let mut smoothing_rng = stream_rng(master_seed, STREAM_SMOOTHING);

    for episode in 0..td3.episodes {
        let started = Instant::now();
        // linear exploration decay across the training run
        let frac = if td3.episodes > 1 {
            episode as f64 / (td3.episodes - 1) as f64
        } else {
            0.0
        };
        noise.set_sigma(td3.ou_sigma_start + frac * (td3.ou_sigma_end - td3.ou_sigma_start));
        noise.reset();

        let seed = crate::rng::seed_stream(master_seed, STREAM_EPISODE_SCENARIO) ^ episode as u64;
        let scenario = perturb(&config.profile, band, seed);
        let mut environment = Env::new(&scenario, config, config.weights);
        let mut state = environment.reset()?;
        let mut outcomes = Vec::with_capacity(config.horizon);
        for step in 0..config.horizon {
            let features = env::normalize_state(&state, config);
            let a_norm = agent.select_action_noisy(&features, &mut noise);
            let out = environment.step(&state, ActionKw::from_normalized(a_norm, config));
            if !out.reward.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite reward at episode {episode} step {step}: \
                     state {state:?}, action {a_norm:?}"
                )));
            }
            buffer.store(Transition {
                state: features,
                action: a_norm,
                reward: out.reward,
                next_state: env::normalize_state(&out.next_state, config),
                done: out.done,
            });
            state = out.next_state;
            outcomes.push(out);

            if buffer.len() >= td3.batch_size {
                let batch = buffer.sample(td3.batch_size, &mut replay_rng)?;
                agent.update(&batch, &mut smoothing_rng).map_err(|e| {
                    Error::Numerical(format!("episode {episode} step {step}: {e}"))
                })?;
            }
        }

        let cum_reward: f64 = outcomes.iter().map(|o| o.reward).sum();
        let cost = env::episode_cost(&outcomes)?;
        let window_start = episode.saturating_sub(4);
        let window_sum: f64 = log.episodes[window_start..]
            .iter()
            .map(|e| e.cum_reward)
            .sum::<f64>()
            + cum_reward;
        let mean5 = window_sum / (episode - window_start + 1) as f64;
        log.episodes.push(EpisodeLog {
            episode,
            cum_reward,
            mean5,
            c_s: cost.c_s,
            delta_p: cost.delta_p_total,
            seconds: started.elapsed().as_secs_f64(),
        });

        let completed = episode + 1;
        if completed % 25 == 0 && completed != td3.episodes {
            on_snapshot(completed, &agent)?;
        }
    }
    on_snapshot(td3.episodes, &agent)?;
    Ok(TrainOutput { agent, log })
}
