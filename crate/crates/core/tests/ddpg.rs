mod common;

use common::*;
use delayrl::ddpg::{
    decode_agent, encode_agent, init_agent, load_agent, polyak_update, save_agent, train_with, HyperParams, Mlp,
    ReplayBuffer, Transition,
};
use delayrl::env::{make_env, CaseId, EnvConfig, Observation};
use delayrl::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn gradients_match_finite_differences() {
    let (worst, failures) = gradient_check_trials(50, 2024);
    assert_eq!(failures, 0, "worst relative error {worst:e}");
}

#[test]
fn terminal_transition_drives_q_to_reward() {
    let (losses, q) = bellman_fixed_point(500, -7.5);
    // Adam's momentum overshoots near the fixed point, so monotonicity is
    // checked on the envelope: the peak loss of each 100-update window.
    let peaks: Vec<f64> = losses.chunks(100).map(|w| w.iter().cloned().fold(0.0, f64::max)).collect();
    assert!(peaks.windows(2).all(|w| w[1] < w[0]), "loss envelope not decreasing: {peaks:?}");
    assert!(losses[..100].windows(2).all(|w| w[1] < w[0]), "initial descent not monotone");
    assert!((q + 7.5).abs() < 1e-6, "Q = {q}");
}

#[test]
fn polyak_contracts_toward_frozen_online() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = init_agent(3, 6.57, tiny_hyper(&mut rng), 1).unwrap();
    let online = a.actor.clone();
    let mut target = online.clone();
    for t in delayrl::ddpg::Params::tensors_mut(&mut target) {
        t.iter_mut().for_each(|v| *v += rng.random_range(-1.0..1.0));
    }
    let mut last = param_distance(&target, &online);
    for _ in 0..200 {
        polyak_update(&mut target, &online, 0.005);
        let d = param_distance(&target, &online);
        assert!(d < last);
        last = d;
    }
}

fn small_run(seed: u64) -> (Vec<delayrl::ddpg::EpisodeLog>, delayrl::ddpg::AgentBundle) {
    let hyper = HyperParams {
        batch_size: 32,
        buffer_capacity: 1000,
        actor_hidden: vec![16, 16],
        critic_state_hidden: vec![8, 8],
        critic_action_hidden: vec![8],
        critic_trunk_hidden: vec![16, 16],
        ..HyperParams::default()
    };
    let mut agent = init_agent(4, 6.57, hyper, seed).unwrap();
    let mut env = make_env(EnvConfig::for_case(CaseId::CaseIV)).unwrap();
    let mut buffer = ReplayBuffer::new(1000);
    let log = train_with(&mut agent, &mut env, &mut buffer, 2, |_| {}).unwrap();
    (log, agent)
}

#[test]
fn seeded_training_is_reproducible() {
    let (log_a, agent_a) = small_run(17);
    let (log_b, agent_b) = small_run(17);
    assert_eq!(log_a.len(), 2);
    assert!(log_a[1].updates > 0);
    for (a, b) in log_a.iter().zip(&log_b) {
        assert!(a.same_outcome(b), "{a:?} vs {b:?}");
    }
    assert_eq!(encode_agent(&agent_a), encode_agent(&agent_b));
    let (log_c, _) = small_run(18);
    assert!(!log_a[1].same_outcome(&log_c[1]));
}

#[test]
fn resumed_training_matches_uninterrupted() {
    let hyper = HyperParams {
        batch_size: 16,
        buffer_capacity: 1000,
        actor_hidden: vec![8],
        critic_state_hidden: vec![4],
        critic_action_hidden: vec![4],
        critic_trunk_hidden: vec![8],
        ..HyperParams::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.agent");
    let mut agent = init_agent(4, 6.57, hyper, 3).unwrap();
    let mut env = make_env(EnvConfig::for_case(CaseId::CaseIII)).unwrap();
    let mut buffer = ReplayBuffer::new(1000);
    train_with(&mut agent, &mut env, &mut buffer, 1, |_| {}).unwrap();
    save_agent(&agent, &path).unwrap();
    let mut reloaded = load_agent(&path).unwrap();
    let mut buffer2 = buffer.clone();
    let a = train_with(&mut agent, &mut env, &mut buffer, 1, |_| {}).unwrap();
    let b = train_with(&mut reloaded, &mut env, &mut buffer2, 1, |_| {}).unwrap();
    assert!(a[0].same_outcome(&b[0]));
    assert_eq!(encode_agent(&agent), encode_agent(&reloaded));
}

#[test]
fn save_load_save_identical_bytes() {
    let (_, agent) = small_run(4);
    let dir = tempfile::tempdir().unwrap();
    let p1 = dir.path().join("one.agent");
    let p2 = dir.path().join("two.agent");
    save_agent(&agent, &p1).unwrap();
    let back = load_agent(&p1).unwrap();
    save_agent(&back, &p2).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    assert_eq!(back.hyper, agent.hyper);
    assert_eq!(back.seed, 4);
}

#[test]
fn width_three_agent_rejected_by_width_four_env() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut agent = init_agent(3, 6.57, tiny_hyper(&mut rng), 0).unwrap();
    let mut env = make_env(EnvConfig::for_case(CaseId::CaseIV)).unwrap();
    let mut buffer = ReplayBuffer::new(64);
    let err = train_with(&mut agent, &mut env, &mut buffer, 1, |_| {}).unwrap_err();
    assert!(matches!(err, Error::WidthMismatch { expected: 3, actual: 4 }));
    assert!(agent.policy(&[0.0; 4]).is_err());
}

#[test]
fn missing_agent_file_reports_io_error() {
    let err = load_agent(std::path::Path::new("/nonexistent/agent.txt")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
}

#[test]
fn truncated_file_names_the_array() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let agent = init_agent(3, 6.57, tiny_hyper(&mut rng), 0).unwrap();
    let text = encode_agent(&agent);
    let cut = text.find("array critic_opt.v.").unwrap();
    let err = decode_agent(&text[..cut + 40], std::path::Path::new("t")).unwrap_err();
    match err {
        Error::Format { field, .. } => assert!(field.starts_with("critic_opt.v."), "{field}"),
        other => panic!("{other}"),
    }
}

fn tr(i: usize) -> Transition {
    Transition {
        obs: Observation(vec![i as f64; 3]),
        action: 0.0,
        reward: i as f64,
        next_obs: Observation(vec![0.0; 3]),
        done: false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn replay_keeps_newest(capacity in 1usize..40, extra in 0usize..40) {
        let mut buffer = ReplayBuffer::new(capacity);
        for i in 0..capacity + extra {
            buffer.push(tr(i));
        }
        prop_assert_eq!(buffer.len(), capacity);
        let mut rewards: Vec<usize> = buffer.iter().map(|t| t.reward as usize).collect();
        rewards.sort_unstable();
        prop_assert_eq!(rewards, (extra..capacity + extra).collect::<Vec<_>>());
    }

    #[test]
    fn batch_indices_unique(len in 1usize..200, seed in any::<u64>()) {
        let mut buffer = ReplayBuffer::new(200);
        for i in 0..len {
            buffer.push(tr(i));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let batch = rng.random_range(1..=len);
        let mut idx = buffer.sample_indices(batch, &mut rng).unwrap();
        idx.sort_unstable();
        idx.dedup();
        prop_assert_eq!(idx.len(), batch);
        prop_assert!(idx.iter().all(|&i| i < len));
    }

    #[test]
    fn actor_output_bounded(seed in any::<u64>(), scale in 0.1f64..1e3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let agent = init_agent(4, 6.57, tiny_hyper(&mut rng), seed).unwrap();
        let obs: Vec<f64> = (0..4).map(|_| rng.random_range(-scale..scale)).collect();
        prop_assert!(agent.policy(&obs).unwrap().abs() <= 6.57);
    }
}

#[test]
fn zero_weight_actor_acts_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut agent = init_agent(3, 6.57, tiny_hyper(&mut rng), 1).unwrap();
    agent.actor = Mlp::zeros_like(&agent.actor);
    assert_eq!(agent.policy(&[1.0, 2.0, 3.0]).unwrap(), 0.0);
}
