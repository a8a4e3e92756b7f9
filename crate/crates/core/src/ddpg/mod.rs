//! Deep deterministic policy gradient on the altitude environments.
//!
//! The actor maps an observation to `u_max · tanh(·)`. The critic scores
//! observation/action pairs. Both have Polyak-averaged target copies, and
//! training draws minibatches from a replay buffer after every environment
//! step once enough transitions are stored.

mod adam;
mod io;
pub mod mlp;
mod noise;
mod replay;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use adam::Adam;
pub use io::{decode_agent, encode_agent, load_agent, save_agent};
pub use mlp::{polyak_update, Activation, Critic, Dense, Mlp, Params};
pub use noise::OuNoise;
pub use replay::{ReplayBuffer, Transition};

use crate::env::{Environment, Observation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub polyak: f64,
    pub discount: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub ou_theta: f64,
    pub ou_sigma: f64,
    /// OU time increment, in agent steps.
    pub ou_dt: f64,
    pub episodes: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_state_hidden: Vec<usize>,
    pub critic_action_hidden: Vec<usize>,
    pub critic_trunk_hidden: Vec<usize>,
}

impl HyperParams {
    /// Defaults with exploration noise scaled to the actuator range.
    pub fn for_action_scale(u_max: f64) -> Self {
        HyperParams {
            polyak: 0.005,
            discount: 0.99,
            lr_actor: 0.001,
            lr_critic: 0.002,
            buffer_capacity: 50_000,
            batch_size: 1024,
            ou_theta: 0.15,
            ou_sigma: 0.2 * u_max,
            ou_dt: 1.0,
            episodes: 200,
            actor_hidden: vec![256, 256],
            critic_state_hidden: vec![16, 32],
            critic_action_hidden: vec![32],
            critic_trunk_hidden: vec![256, 256],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.polyak > 0.0 && self.polyak < 1.0) {
            return Err(Error::invalid("polyak", format!("must lie in (0, 1), got {}", self.polyak)));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::invalid("discount", format!("must lie in (0, 1], got {}", self.discount)));
        }
        if self.buffer_capacity == 0 || self.batch_size == 0 {
            return Err(Error::invalid("buffer_capacity, batch_size", "must be positive"));
        }
        if self.batch_size > self.buffer_capacity {
            return Err(Error::invalid("batch_size", "exceeds buffer capacity"));
        }
        for (name, v) in [("lr_actor", self.lr_actor), ("lr_critic", self.lr_critic), ("ou_dt", self.ou_dt)] {
            crate::lti::positive(name, v)?;
        }
        crate::lti::non_negative("ou_theta", self.ou_theta)?;
        crate::lti::non_negative("ou_sigma", self.ou_sigma)?;
        if self.critic_state_hidden.is_empty() || self.critic_action_hidden.is_empty() {
            return Err(Error::invalid("critic branches", "need at least one layer each"));
        }
        Ok(())
    }
}

impl Default for HyperParams {
    fn default() -> Self {
        Self::for_action_scale(crate::lti::PlantParams::nominal().u_max)
    }
}

/// Everything needed to act, keep training, or persist an agent.
#[derive(Debug, Clone)]
pub struct AgentBundle {
    pub obs_width: usize,
    /// Actuator limit the tanh output is scaled by.
    pub action_scale: f64,
    pub actor: Mlp,
    pub critic: Critic,
    pub actor_target: Mlp,
    pub critic_target: Critic,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
    pub noise: OuNoise,
    pub seed: u64,
    pub hyper: HyperParams,
    pub rng: ChaCha8Rng,
}

/// Deterministic initialisation from `seed`; targets start as exact copies.
pub fn init_agent(obs_width: usize, action_scale: f64, hyper: HyperParams, seed: u64) -> Result<AgentBundle> {
    if obs_width == 0 {
        return Err(Error::invalid("obs_width", "must be positive"));
    }
    crate::lti::positive("action_scale", action_scale)?;
    hyper.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let actor = Mlp::init(
        obs_width,
        &hyper.actor_hidden,
        1,
        Activation::Relu,
        Activation::Tanh,
        Some(3e-3),
        &mut rng,
    );
    let critic = Critic::init(
        obs_width,
        &hyper.critic_state_hidden,
        &hyper.critic_action_hidden,
        &hyper.critic_trunk_hidden,
        &mut rng,
    );
    Ok(AgentBundle {
        obs_width,
        action_scale,
        actor_target: actor.clone(),
        critic_target: critic.clone(),
        actor_opt: Adam::new(&actor, hyper.lr_actor),
        critic_opt: Adam::new(&critic, hyper.lr_critic),
        actor,
        critic,
        noise: OuNoise::new(hyper.ou_theta, hyper.ou_sigma, hyper.ou_dt),
        seed,
        hyper,
        rng,
    })
}

/// Minibatch laid out row-major for the networks.
#[derive(Debug, Clone, Default)]
pub struct Batch {
    pub size: usize,
    pub obs: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_obs: Vec<f64>,
    pub done: Vec<f64>,
}

impl Batch {
    pub fn gather<'a>(items: impl IntoIterator<Item = &'a Transition>) -> Self {
        let mut b = Batch::default();
        for t in items {
            b.size += 1;
            b.obs.extend_from_slice(&t.obs);
            b.actions.push(t.action);
            b.rewards.push(t.reward);
            b.next_obs.extend_from_slice(&t.next_obs);
            b.done.push(if t.done { 1.0 } else { 0.0 });
        }
        b
    }
}

/// Mean squared Bellman error against fixed `targets`, and its gradient.
pub fn critic_loss_grad(critic: &Critic, obs: &[f64], actions: &[f64], targets: &[f64]) -> (f64, Critic) {
    let batch = targets.len();
    let tape = critic.forward_tape(obs, actions, batch);
    let q = tape.q();
    let n = batch as f64;
    let loss = q.iter().zip(targets).map(|(q, y)| (q - y).powi(2)).sum::<f64>() / n;
    let d_q: Vec<f64> = q.iter().zip(targets).map(|(q, y)| 2.0 * (q - y) / n).collect();
    let mut grads = critic.zeros_like();
    critic.backward(&tape, &d_q, Some(&mut grads), false);
    (loss, grads)
}

/// Mean `Q(s, u_max·actor(s))` and its gradient w.r.t. the actor parameters.
pub fn actor_objective_grad(actor: &Mlp, critic: &Critic, obs: &[f64], action_scale: f64) -> (f64, Mlp) {
    let batch = obs.len() / actor.inputs();
    let actor_tape = actor.forward_tape(obs, batch);
    let actions: Vec<f64> = actor_tape.output().iter().map(|a| a * action_scale).collect();
    let critic_tape = critic.forward_tape(obs, &actions, batch);
    let n = batch as f64;
    let objective = critic_tape.q().iter().sum::<f64>() / n;
    let d_q = vec![1.0 / n; batch];
    let d_action = critic
        .backward(&critic_tape, &d_q, None, true)
        .expect("action gradient requested");
    let d_tanh: Vec<f64> = d_action.iter().map(|g| g * action_scale).collect();
    let mut grads = actor.zeros_like();
    actor.backward(&actor_tape, &d_tanh, Some(&mut grads), false);
    (objective, grads)
}

fn negate<P: Params>(p: &mut P) {
    for t in p.tensors_mut() {
        t.iter_mut().for_each(|v| *v = -*v);
    }
}

impl AgentBundle {
    /// Deterministic action `u_max · actor(obs)`.
    pub fn policy(&self, obs: &[f64]) -> Result<f64> {
        if obs.len() != self.obs_width {
            return Err(Error::WidthMismatch {
                expected: self.obs_width,
                actual: obs.len(),
            });
        }
        Ok(self.action_scale * self.actor.forward(obs, 1)[0])
    }

    /// Policy action, plus OU noise when exploring.
    pub fn select_action(&mut self, obs: &[f64], explore: bool) -> Result<f64> {
        let a = self.policy(obs)?;
        Ok(if explore { a + self.noise.sample(&mut self.rng) } else { a })
    }

    /// One critic step, one actor step, then Polyak averaging of both targets.
    /// Returns `(critic_loss, actor_objective)`.
    pub fn update(&mut self, buffer: &ReplayBuffer) -> Result<(f64, f64)> {
        let idx = buffer.sample_indices(self.hyper.batch_size, &mut self.rng)?;
        let batch = Batch::gather(idx.iter().map(|&i| buffer.get(i)));
        if batch.obs.len() != batch.size * self.obs_width {
            return Err(Error::WidthMismatch {
                expected: self.obs_width,
                actual: batch.obs.len() / batch.size.max(1),
            });
        }
        let n = batch.size;

        let next_actions: Vec<f64> = self
            .actor_target
            .forward(&batch.next_obs, n)
            .iter()
            .map(|a| a * self.action_scale)
            .collect();
        let next_q = self.critic_target.forward(&batch.next_obs, &next_actions, n);
        let gamma = self.hyper.discount;
        let targets: Vec<f64> = (0..n)
            .map(|i| batch.rewards[i] + gamma * (1.0 - batch.done[i]) * next_q[i])
            .collect();

        let (critic_loss, critic_grads) = critic_loss_grad(&self.critic, &batch.obs, &batch.actions, &targets);
        self.critic_opt.apply(&mut self.critic, &critic_grads);

        let (objective, mut actor_grads) =
            actor_objective_grad(&self.actor, &self.critic, &batch.obs, self.action_scale);
        negate(&mut actor_grads);
        self.actor_opt.apply(&mut self.actor, &actor_grads);

        let rho = self.hyper.polyak;
        polyak_update(&mut self.actor_target, &self.actor, rho);
        polyak_update(&mut self.critic_target, &self.critic, rho);
        Ok((critic_loss, objective))
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    pub episode_return: f64,
    pub critic_loss_mean: f64,
    pub actor_objective_mean: f64,
    pub updates: usize,
    pub wall_time: f64,
}

impl EpisodeLog {
    pub const CSV_HEADER: &'static str = "episode,return,critic_loss_mean,actor_objective_mean,wall_time";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:?},{:?},{:?},{:.3}",
            self.episode, self.episode_return, self.critic_loss_mean, self.actor_objective_mean, self.wall_time
        )
    }

    /// Equality ignoring wall-clock time.
    pub fn same_outcome(&self, other: &EpisodeLog) -> bool {
        self.episode == other.episode
            && self.episode_return.to_bits() == other.episode_return.to_bits()
            && self.critic_loss_mean.to_bits() == other.critic_loss_mean.to_bits()
            && self.actor_objective_mean.to_bits() == other.actor_objective_mean.to_bits()
            && self.updates == other.updates
    }
}

/// Trains for `episodes` episodes, reporting each finished episode to
/// `on_episode`.
pub fn train_with<F>(
    agent: &mut AgentBundle,
    env: &mut Environment,
    buffer: &mut ReplayBuffer,
    episodes: usize,
    mut on_episode: F,
) -> Result<Vec<EpisodeLog>>
where
    F: FnMut(&EpisodeLog),
{
    if env.obs_width() != agent.obs_width {
        return Err(Error::WidthMismatch {
            expected: agent.obs_width,
            actual: env.obs_width(),
        });
    }
    let start = Instant::now();
    let mut log = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        let mut obs: Observation = env.reset()?;
        agent.noise.reset();
        let (mut ret, mut loss_sum, mut obj_sum, mut updates) = (0.0, 0.0, 0.0, 0usize);
        loop {
            let action = agent.select_action(&obs, true)?;
            let step = env.step(action)?;
            ret += step.reward;
            buffer.push(Transition {
                obs,
                action: env.u_prev(),
                reward: step.reward,
                next_obs: step.observation.clone(),
                done: step.done,
            });
            if buffer.len() >= agent.hyper.batch_size {
                let (l, o) = agent.update(buffer)?;
                loss_sum += l;
                obj_sum += o;
                updates += 1;
            }
            obs = step.observation;
            if step.done {
                break;
            }
        }
        let denom = updates.max(1) as f64;
        let entry = EpisodeLog {
            episode,
            episode_return: ret,
            critic_loss_mean: if updates > 0 { loss_sum / denom } else { f64::NAN },
            actor_objective_mean: if updates > 0 { obj_sum / denom } else { f64::NAN },
            updates,
            wall_time: start.elapsed().as_secs_f64(),
        };
        on_episode(&entry);
        log.push(entry);
    }
    Ok(log)
}

/// Trains with a fresh replay buffer sized from the agent's hyperparameters.
pub fn train(agent: &mut AgentBundle, env: &mut Environment, episodes: usize) -> Result<Vec<EpisodeLog>> {
    let mut buffer = ReplayBuffer::new(agent.hyper.buffer_capacity);
    train_with(agent, env, &mut buffer, episodes, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_env, CaseId, EnvConfig};
    use rand::Rng;

    fn small_hyper() -> HyperParams {
        HyperParams {
            batch_size: 16,
            buffer_capacity: 500,
            actor_hidden: vec![8, 8],
            critic_state_hidden: vec![4, 8],
            critic_action_hidden: vec![8],
            critic_trunk_hidden: vec![8, 8],
            ..HyperParams::default()
        }
    }

    #[test]
    fn init_is_seeded_and_targets_copy_online() {
        let a = init_agent(4, 6.57, HyperParams::default(), 11).unwrap();
        let b = init_agent(4, 6.57, HyperParams::default(), 11).unwrap();
        assert_eq!(a.actor, b.actor);
        assert_eq!(a.critic, b.critic);
        assert_eq!(a.actor, a.actor_target);
        assert_eq!(a.critic, a.critic_target);
        let c = init_agent(4, 6.57, HyperParams::default(), 12).unwrap();
        assert_ne!(a.actor, c.actor);
    }

    #[test]
    fn deterministic_action_within_limit() {
        let agent = init_agent(3, 6.57, small_hyper(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let obs: Vec<f64> = (0..3).map(|_| rng.random_range(-100.0..100.0)).collect();
            assert!(agent.policy(&obs).unwrap().abs() <= 6.57);
        }
        assert!(agent.policy(&[0.0; 4]).is_err());
    }

    #[test]
    fn zero_actor_gives_zero_action() {
        let mut agent = init_agent(3, 6.57, small_hyper(), 1).unwrap();
        agent.actor = agent.actor.zeros_like();
        assert_eq!(agent.select_action(&[0.3, 1.0, -2.0], false).unwrap(), 0.0);
    }

    #[test]
    fn update_needs_full_batch() {
        let mut agent = init_agent(3, 6.57, small_hyper(), 1).unwrap();
        let buffer = ReplayBuffer::new(100);
        assert!(matches!(agent.update(&buffer), Err(Error::InsufficientBuffer { .. })));
    }

    #[test]
    fn zero_episodes_leave_agent_unchanged() {
        let mut agent = init_agent(4, 6.57, small_hyper(), 3).unwrap();
        let before = agent.clone();
        let mut env = make_env(EnvConfig::for_case(CaseId::CaseIII)).unwrap();
        assert!(train(&mut agent, &mut env, 0).unwrap().is_empty());
        assert_eq!(agent.actor, before.actor);
        assert_eq!(agent.critic_target, before.critic_target);
    }

    #[test]
    fn width_mismatch_rejected() {
        let mut agent = init_agent(3, 6.57, small_hyper(), 3).unwrap();
        let mut env = make_env(EnvConfig::for_case(CaseId::CaseIII)).unwrap();
        assert!(matches!(train(&mut agent, &mut env, 1), Err(Error::WidthMismatch { .. })));
    }
}
