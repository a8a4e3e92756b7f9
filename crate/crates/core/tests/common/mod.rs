//! Helpers shared by the integration suites.
#![allow(dead_code)]

use delayrl::ddpg::{
    actor_objective_grad, critic_loss_grad, init_agent, AgentBundle, Critic, HyperParams, Mlp, Params,
    ReplayBuffer, Transition,
};
use delayrl::env::Observation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_RTOL: f64 = 1e-4;
/// Absolute floor for gradients that are zero up to finite-difference noise.
pub const FD_ATOL: f64 = 1e-8;

pub fn tiny_hyper(rng: &mut impl Rng) -> HyperParams {
    let mut w = || rng.random_range(2..=8usize);
    HyperParams {
        batch_size: 10,
        buffer_capacity: 64,
        actor_hidden: vec![w(), w()],
        critic_state_hidden: vec![w(), w()],
        critic_action_hidden: vec![w()],
        critic_trunk_hidden: vec![w(), w()],
        ..HyperParams::default()
    }
}

fn set_param<P: Params>(p: &mut P, tensor: usize, index: usize, value: f64) {
    p.tensors_mut()[tensor][index] = value;
}

fn get_param<P: Params>(p: &P, tensor: usize, index: usize) -> f64 {
    p.tensors()[tensor][index]
}

/// Compares analytic and central-difference gradients entry by entry.
/// Returns the worst `|a − n| / max(|a|, |n|)` over entries above the
/// absolute floor, and the number of entries that violate the tolerance.
pub fn check_gradients<P, F>(params: &P, analytic: &P, mut f: F) -> (f64, usize)
where
    P: Params + Clone,
    F: FnMut(&P) -> f64,
{
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut probe = params.clone();
    let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    for (ti, &len) in shapes.iter().enumerate() {
        for i in 0..len {
            let base = get_param(params, ti, i);
            set_param(&mut probe, ti, i, base + FD_STEP);
            let plus = f(&probe);
            set_param(&mut probe, ti, i, base - FD_STEP);
            let minus = f(&probe);
            set_param(&mut probe, ti, i, base);
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let a = get_param(analytic, ti, i);
            let diff = (a - numeric).abs();
            let scale = a.abs().max(numeric.abs());
            // Cancellation error of the central difference itself.
            let noise = 16.0 * f64::EPSILON * plus.abs().max(minus.abs()) / FD_STEP;
            if diff <= FD_ATOL.max(noise) {
                continue;
            }
            let rel = diff / scale;
            worst = worst.max(rel);
            if rel > FD_RTOL {
                eprintln!("tensor {ti}[{i}]: analytic {a:e}, numeric {numeric:e}, f {plus:e}");
                failures += 1;
            }
        }
    }
    (worst, failures)
}

pub struct ToyBatch {
    pub obs: Vec<f64>,
    pub actions: Vec<f64>,
    pub targets: Vec<f64>,
}

pub fn toy_batch(width: usize, size: usize, rng: &mut impl Rng) -> ToyBatch {
    ToyBatch {
        obs: (0..width * size).map(|_| rng.random_range(-2.0..2.0)).collect(),
        actions: (0..size).map(|_| rng.random_range(-6.57..6.57)).collect(),
        targets: (0..size).map(|_| rng.random_range(-50.0..0.0)).collect(),
    }
}

/// Worst relative error and violation counts for critic and actor gradients
/// over `trials` random toy networks and batches of 10 transitions.
pub fn gradient_check_trials(trials: usize, seed: u64) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst, mut failures) = (0.0f64, 0);
    for trial in 0..trials {
        let width = if trial % 2 == 0 { 3 } else { 4 };
        let hyper = tiny_hyper(&mut rng);
        let agent = init_agent(width, 6.57, hyper, rng.random()).unwrap();
        // Move the actor output layer off its tiny initial scale so the
        // chain through the critic carries a meaningful signal.
        let mut actor = agent.actor.clone();
        for t in actor.tensors_mut() {
            t.iter_mut().for_each(|v| *v = rng.random_range(-0.8..0.8));
        }
        let batch = toy_batch(width, 10, &mut rng);

        let (_, g_critic) = critic_loss_grad(&agent.critic, &batch.obs, &batch.actions, &batch.targets);
        let (w, f) = check_gradients(&agent.critic, &g_critic, |c: &Critic| {
            critic_loss_grad(c, &batch.obs, &batch.actions, &batch.targets).0
        });
        worst = worst.max(w);
        failures += f;

        let (_, g_actor) = actor_objective_grad(&actor, &agent.critic, &batch.obs, 6.57);
        let (w, f) = check_gradients(&actor, &g_actor, |a: &Mlp| {
            actor_objective_grad(a, &agent.critic, &batch.obs, 6.57).0
        });
        worst = worst.max(w);
        failures += f;
    }
    (worst, failures)
}

/// Runs `steps` updates on a buffer holding one terminal transition and
/// returns the critic losses and the final `Q(s, a)`.
pub fn bellman_fixed_point(steps: usize, reward: f64) -> (Vec<f64>, f64) {
    let hyper = HyperParams {
        batch_size: 1,
        buffer_capacity: 1,
        actor_hidden: vec![8, 8],
        critic_state_hidden: vec![8, 8],
        critic_action_hidden: vec![8],
        critic_trunk_hidden: vec![8, 8],
        ..HyperParams::default()
    };
    let mut agent: AgentBundle = init_agent(4, 6.57, hyper, 5).unwrap();
    let obs = Observation(vec![0.3, -0.2, 0.5, 1.0]);
    let mut buffer = ReplayBuffer::new(1);
    buffer.push(Transition {
        obs: obs.clone(),
        action: 2.0,
        reward,
        next_obs: Observation(vec![0.31, -0.1, 0.4, 2.0]),
        done: true,
    });
    let losses: Vec<f64> = (0..steps).map(|_| agent.update(&buffer).unwrap().0).collect();
    let q = agent.critic.forward(&obs, &[2.0], 1)[0];
    (losses, q)
}

pub fn param_distance<P: Params>(a: &P, b: &P) -> f64 {
    a.tensors()
        .iter()
        .zip(b.tensors())
        .flat_map(|(x, y)| x.iter().zip(y.iter()).map(|(p, q)| (p - q).powi(2)))
        .sum::<f64>()
        .sqrt()
}
