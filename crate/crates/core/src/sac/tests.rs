use super::*;
use crate::numerics::squash_with_noise;
use crate::envs::{Env, EnvConfig};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn tiny_config() -> SacConfig {
    SacConfig {
        buffer_size: 50,
        batch_size: 4,
        tau: 0.5,
        gamma: 0.9,
        learning_rate: 1e-3,
        min_fill: 5,
        target_entropy: None,
    }
}

fn tiny_agent(seed: u64) -> SacAgent {
    SacAgent::with_hidden(7, 3, 8, tiny_config(), &mut RngStream::new(seed)).unwrap()
}

fn item(buf: &mut ReplayBuffer, tag: f64, done: bool) {
    buf.store(Transition {
        observation: &[tag],
        action: &[tag],
        reward: tag,
        next_observation: &[tag + 0.5],
        done,
    })
    .unwrap();
}

fn random_batch(n: usize, obs_dim: usize, act_dim: usize, rng: &mut RngStream) -> SacBatch {
    SacBatch {
        indices: (0..n).collect(),
        observations: (0..n * obs_dim).map(|_| rng.normal()).collect(),
        actions: (0..n * act_dim).map(|_| rng.uniform(-0.9, 0.9)).collect(),
        rewards: (0..n).map(|_| rng.normal()).collect(),
        next_observations: (0..n * obs_dim).map(|_| rng.normal()).collect(),
        dones: (0..n).map(|i| i % 3 == 0).collect(),
    }
}

fn noise(n: usize, rng: &mut RngStream) -> Vec<f64> {
    (0..n).map(|_| rng.normal()).collect()
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

fn fd_max_rel_error(net: &Mlp, grads: &[f64], loss: impl Fn(&Mlp) -> f64) -> f64 {
    let h = 1e-6;
    let mut worst = 0.0f64;
    for i in 0..net.param_count() {
        let mut plus = net.clone();
        plus.params_mut()[i] += h;
        let mut minus = net.clone();
        minus.params_mut()[i] -= h;
        worst = worst.max(rel_err(grads[i], (loss(&plus) - loss(&minus)) / (2.0 * h)));
    }
    worst
}

#[test]
fn ring_overwrites_oldest() {
    let mut buf = ReplayBuffer::new(3, 1, 1);
    for t in [1.0, 2.0, 3.0, 4.0] {
        item(&mut buf, t, false);
    }
    assert_eq!(buf.len(), 3);
    let rewards: Vec<f64> = buf.iter().map(|t| t.reward).collect();
    assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
}

#[test]
fn single_element_batch_repeats_it() {
    let mut buf = ReplayBuffer::new(10, 1, 1);
    item(&mut buf, 7.0, true);
    let b = buf.sample_batch(5, &mut RngStream::new(1));
    assert_eq!(b.rewards, vec![7.0; 5]);
    assert_eq!(b.next_observations, vec![7.5; 5]);
}

#[test]
fn sampling_is_uniform() {
    let k = 10;
    let mut buf = ReplayBuffer::new(k, 1, 1);
    for t in 0..k {
        item(&mut buf, t as f64, false);
    }
    let draws = 1_000_000;
    let mut counts = vec![0u64; k];
    for i in buf.sample_indices(draws, &mut RngStream::new(42)) {
        counts[i] += 1;
    }
    let expect = draws as f64 / k as f64;
    let sigma = (draws as f64 * (1.0 / k as f64) * (1.0 - 1.0 / k as f64)).sqrt();
    for &c in &counts {
        assert!((c as f64 - expect).abs() < 3.0 * sigma, "count {c}");
    }
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
    let critical = ChiSquared::new((k - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(chi2 < critical, "chi2 {chi2} >= {critical}");
}

#[test]
fn table_values() {
    let c = SacConfig::crawler();
    assert_eq!((c.buffer_size, c.batch_size, c.tau), (500_000, 512, 0.0721));
    let r = SacConfig::reach();
    assert_eq!((r.buffer_size, r.batch_size, r.tau), (10_000, 512, 0.0877));
    assert_eq!(c.target_entropy_for(8), -8.0);
    assert!(SacConfig { batch_size: 600_000, ..c.clone() }.validate().is_err());
    assert!(SacConfig { tau: 0.0, ..c }.validate().is_err());
}

#[test]
fn terminal_and_undiscounted_targets_equal_rewards() {
    let agent = tiny_agent(1);
    let mut rng = RngStream::new(2);
    let mut batch = random_batch(6, 7, 3, &mut rng);
    batch.dones = vec![true; 6];
    let eps = noise(18, &mut rng);
    let y = critic_targets(&agent.policy, &agent.q1_target, &agent.q2_target, 0.3, 0.9, &batch, &eps).unwrap();
    assert_eq!(y, batch.rewards);
    batch.dones = vec![false; 6];
    let y = critic_targets(&agent.policy, &agent.q1_target, &agent.q2_target, 0.3, 0.0, &batch, &eps).unwrap();
    assert_eq!(y, batch.rewards);
}

#[test]
fn twin_swap_leaves_targets_unchanged() {
    let agent = tiny_agent(3);
    let mut rng = RngStream::new(4);
    let batch = random_batch(8, 7, 3, &mut rng);
    let eps = noise(24, &mut rng);
    let a = critic_targets(&agent.policy, &agent.q1_target, &agent.q2_target, 0.2, 0.9, &batch, &eps).unwrap();
    let b = critic_targets(&agent.policy, &agent.q2_target, &agent.q1_target, 0.2, 0.9, &batch, &eps).unwrap();
    assert_eq!(a, b);
}

#[test]
fn critic_gradient_matches_finite_differences() {
    let agent = tiny_agent(5);
    let mut rng = RngStream::new(6);
    let batch = random_batch(4, 7, 3, &mut rng);
    let y: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
    let (_, g) = critic_loss_and_grad(&agent.q1, &batch.observations, &batch.actions, &y).unwrap();
    let err = fd_max_rel_error(&agent.q1, &g, |q| {
        critic_loss_and_grad(q, &batch.observations, &batch.actions, &y).unwrap().0
    });
    assert!(err < 1e-5, "relative error {err}");
}

#[test]
fn actor_gradient_matches_finite_differences() {
    let agent = tiny_agent(7);
    let mut rng = RngStream::new(8);
    let batch = random_batch(4, 7, 3, &mut rng);
    let eps = noise(12, &mut rng);
    let out = actor_loss_and_grad(&agent.policy, &agent.q1, &agent.q2, 0.4, &batch.observations, &eps).unwrap();
    let err = fd_max_rel_error(&agent.policy, &out.grads, |p| {
        actor_loss_and_grad(p, &agent.q1, &agent.q2, 0.4, &batch.observations, &eps).unwrap().loss
    });
    assert!(err < 1e-5, "relative error {err}");
}

#[test]
fn temperature_gradient_matches_finite_differences() {
    let lp = [-1.3, 0.4, -2.2];
    let (_, g) = temperature_loss_and_grad(0.3, &lp, -3.0);
    let h = 1e-6;
    let numeric = (temperature_loss_and_grad(0.3 + h, &lp, -3.0).0 - temperature_loss_and_grad(0.3 - h, &lp, -3.0).0) / (2.0 * h);
    assert!(rel_err(g, numeric) < 1e-5);
}

#[test]
fn zero_alpha_actor_is_pure_q_ascent() {
    let agent = tiny_agent(9);
    let mut rng = RngStream::new(10);
    let batch = random_batch(5, 7, 3, &mut rng);
    let eps = noise(15, &mut rng);
    let out = actor_loss_and_grad(&agent.policy, &agent.q1, &agent.q2, 0.0, &batch.observations, &eps).unwrap();
    let pol = agent.policy.forward_batch(&batch.observations, 5).unwrap();
    let mut minq = 0.0;
    for i in 0..5 {
        let row = &pol.output()[i * 6..(i + 1) * 6];
        let s = squash_with_noise(&row[..3], &row[3..], eps[i * 3..(i + 1) * 3].to_vec());
        let mut x = batch.observations[i * 7..(i + 1) * 7].to_vec();
        x.extend(&s.action);
        minq += agent.q1.forward(&x).unwrap()[0].min(agent.q2.forward(&x).unwrap()[0]);
    }
    assert!((out.loss + minq / 5.0).abs() < 1e-12);
}

#[test]
fn temperature_gradient_signs() {
    // log π = -target for every sample: constraint satisfied
    assert_eq!(temperature_loss_and_grad(0.7, &[3.0, 3.0], -3.0).1, 0.0);
    // entropy below target (log π large) → negative gradient, α grows
    let (_, g) = temperature_loss_and_grad(0.0, &[5.0, 4.0], -3.0);
    assert!(g < 0.0);
    let (_, g) = temperature_loss_and_grad(0.0, &[-5.0, -4.0], -3.0);
    assert!(g > 0.0);
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let mut agent = tiny_agent(11);
    agent.config.learning_rate = 0.0;
    let before = agent.clone();
    let mut buf = ReplayBuffer::new(50, 7, 3);
    let mut d = EpisodeDriver::new(Env::new(EnvConfig::reach_arm()).unwrap(), RngStream::new(1));
    for _ in 0..10 {
        sac_step(&mut agent, &mut d, &mut buf, &mut RngStream::new(2), &mut RngStream::new(3)).unwrap();
    }
    assert_eq!(agent.policy, before.policy);
    assert_eq!(agent.log_alpha, before.log_alpha);
    // with tau < 1 the targets converge toward the unchanged online nets, which they equal already
    assert_eq!(agent.q1_target, before.q1_target);
    assert_eq!(agent.update_rounds, 6);
}

#[test]
fn warm_up_and_update_count() {
    let mut agent = tiny_agent(12);
    let before = agent.clone();
    let mut buf = ReplayBuffer::new(50, 7, 3);
    let mut d = EpisodeDriver::new(Env::new(EnvConfig::reach_arm()).unwrap(), RngStream::new(1));
    let (mut act, mut upd) = (RngStream::new(2), RngStream::new(3));
    for n in 1..=4 {
        sac_step(&mut agent, &mut d, &mut buf, &mut act, &mut upd).unwrap();
        assert_eq!(buf.len(), n);
        assert_eq!(agent.policy, before.policy);
        assert_eq!(agent.q1, before.q1);
    }
    for n in 5..=20u64 {
        sac_step(&mut agent, &mut d, &mut buf, &mut act, &mut upd).unwrap();
        assert_eq!(agent.update_rounds, n - 5 + 1);
    }
    assert_ne!(agent.policy, before.policy);
}

#[test]
fn single_transition_critic_reaches_fixed_point() {
    // s' = s, a is the (near-deterministic) policy action and α ≈ 0, so the
    // Bellman target converges to the fixed point of q ← r + γq.
    let (r, gamma) = (1.0, 0.5);
    let mut fixed = 0.0;
    for _ in 0..200 {
        fixed = r + gamma * fixed;
    }
    let cfg = SacConfig {
        buffer_size: 1,
        batch_size: 1,
        tau: 1.0,
        gamma,
        learning_rate: 0.0,
        min_fill: 1,
        target_entropy: None,
    };
    let mut agent = SacAgent::with_hidden(2, 1, 8, cfg, &mut RngStream::new(13)).unwrap();
    agent.log_alpha = -60.0;
    // policy: mean from the net, log std pinned to the floor via a large negative bias
    let (w, _) = agent.policy.layer(2);
    let (wlen, blen) = (w.len(), 2);
    let nparams = agent.policy.param_count();
    let params = agent.policy.params_mut();
    for p in &mut params[nparams - wlen - blen..nparams - blen] {
        *p = 0.0;
    }
    params[nparams - 2] = 0.3;
    params[nparams - 1] = -40.0;
    let s = [0.2, -0.1];
    let a = agent.mean_action(&s).unwrap();
    let mut buf = ReplayBuffer::new(1, 2, 1);
    buf.store(Transition {
        observation: &s,
        action: &a,
        reward: r,
        next_observation: &s,
        done: false,
    })
    .unwrap();
    let mut rng = RngStream::new(14);
    let mut x = s.to_vec();
    x.extend(&a);
    for round in 0..6000 {
        let lr = if round < 4000 { 1e-2 } else { 1e-3 };
        let batch = buf.sample_batch(1, &mut rng);
        let eps = noise(1, &mut rng);
        let y = critic_targets(&agent.policy, &agent.q1_target, &agent.q2_target, agent.alpha(), gamma, &batch, &eps).unwrap();
        for (q, opt) in [(&mut agent.q1, &mut agent.q1_opt), (&mut agent.q2, &mut agent.q2_opt)] {
            let (_, g) = critic_loss_and_grad(q, &batch.observations, &batch.actions, &y).unwrap();
            opt.step(q.params_mut(), &g, lr).unwrap();
        }
        agent.q1_target = agent.q1.clone();
        agent.q2_target = agent.q2.clone();
    }
    let q = agent.q1.forward(&x).unwrap()[0];
    assert!((q - fixed).abs() < 1e-3, "q {q} vs {fixed}");
}

#[test]
fn alpha_stays_positive() {
    let mut agent = tiny_agent(15);
    for _ in 0..1000 {
        let (_, g) = temperature_loss_and_grad(agent.log_alpha, &[-50.0], -3.0);
        let mut la = [agent.log_alpha];
        agent.alpha_opt.step(&mut la, &[g], 1.0).unwrap();
        agent.log_alpha = la[0];
    }
    assert!(agent.alpha() > 0.0);
}

#[test]
fn full_runs_are_deterministic() {
    let run = || {
        let mut agent = tiny_agent(16);
        let mut buf = ReplayBuffer::new(50, 7, 3);
        let mut d = EpisodeDriver::new(Env::new(EnvConfig::reach_arm()).unwrap(), RngStream::new(1));
        let (mut act, mut upd) = (RngStream::new(2), RngStream::new(3));
        for _ in 0..80 {
            sac_step(&mut agent, &mut d, &mut buf, &mut act, &mut upd).unwrap();
        }
        (agent, buf)
    };
    assert_eq!(run(), run());
}

proptest! {
    #[test]
    fn ring_keeps_most_recent(capacity in 1usize..20, n in 0usize..60) {
        let mut buf = ReplayBuffer::new(capacity, 1, 1);
        for t in 0..n {
            item(&mut buf, t as f64, false);
        }
        let got: Vec<f64> = buf.iter().map(|t| t.reward).collect();
        let want: Vec<f64> = (n.saturating_sub(capacity)..n).map(|t| t as f64).collect();
        prop_assert_eq!(got, want);
        prop_assert!(buf.len() <= capacity);
    }
}
