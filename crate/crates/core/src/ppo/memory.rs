use crate::error::check_len;
use crate::Result;

/// PPO's on-policy memory: a fixed-capacity, append-only batch of
/// transitions that is emptied after every update.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutMemory {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    pub(crate) observations: Vec<f64>,
    pub(crate) actions: Vec<f64>,
    pub(crate) rewards: Vec<f64>,
    pub(crate) dones: Vec<bool>,
    pub(crate) values: Vec<f64>,
    pub(crate) log_probs: Vec<f64>,
    /// Value estimate of the state following the last stored transition.
    pub(crate) bootstrap_value: f64,
}

/// Borrowed view of one stored transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionRef<'a> {
    pub observation: &'a [f64],
    pub action: &'a [f64],
    pub reward: f64,
    pub done: bool,
    pub value: f64,
    pub log_prob: f64,
}

impl RolloutMemory {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> Self {
        Self {
            capacity,
            obs_dim,
            act_dim,
            observations: Vec::with_capacity(capacity * obs_dim),
            actions: Vec::with_capacity(capacity * act_dim),
            rewards: Vec::with_capacity(capacity),
            dones: Vec::with_capacity(capacity),
            values: Vec::with_capacity(capacity),
            log_probs: Vec::with_capacity(capacity),
            bootstrap_value: 0.0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.len() >= self.capacity
    }

    pub fn bootstrap_value(&self) -> f64 {
        self.bootstrap_value
    }

    pub fn set_bootstrap_value(&mut self, v: f64) {
        self.bootstrap_value = v;
    }

    pub fn push(&mut self, t: TransitionRef<'_>) -> Result<()> {
        check_len("RolloutMemory obs", self.obs_dim, t.observation.len())?;
        check_len("RolloutMemory action", self.act_dim, t.action.len())?;
        if self.is_full() {
            return Err(crate::Error::Config("rollout memory is full".into()));
        }
        self.observations.extend_from_slice(t.observation);
        self.actions.extend_from_slice(t.action);
        self.rewards.push(t.reward);
        self.dones.push(t.done);
        self.values.push(t.value);
        self.log_probs.push(t.log_prob);
        Ok(())
    }

    pub fn get(&self, i: usize) -> TransitionRef<'_> {
        TransitionRef {
            observation: &self.observations[i * self.obs_dim..(i + 1) * self.obs_dim],
            action: &self.actions[i * self.act_dim..(i + 1) * self.act_dim],
            reward: self.rewards[i],
            done: self.dones[i],
            value: self.values[i],
            log_prob: self.log_probs[i],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = TransitionRef<'_>> {
        (0..self.len()).map(move |i| self.get(i))
    }

    pub fn clear(&mut self) {
        self.observations.clear();
        self.actions.clear();
        self.rewards.clear();
        self.dones.clear();
        self.values.clear();
        self.log_probs.clear();
        self.bootstrap_value = 0.0;
    }
}

/// Generalized advantage estimation, backwards in time.
///
/// `dones[t]` marks that the episode ended after transition `t`; the value
/// following the final transition is `bootstrap`. Returns raw (unnormalized)
/// advantages and the value targets `advantages + values`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    debug_assert!(values.len() == n && dones.len() == n);
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 == n { bootstrap } else { values[t + 1] };
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        running = delta + gamma * lambda * live * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Shifts and scales to mean 0, standard deviation 1 (population std).
pub fn normalize(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt() + 1e-8;
    xs.iter_mut().for_each(|x| *x = (*x - mean) / std);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use proptest::prelude::*;

    /// Discounted-sum oracle for lambda = 1: advantage = (discounted return to
    /// episode end or bootstrap) - value.
    fn mc_oracle(rewards: &[f64], values: &[f64], dones: &[bool], bootstrap: f64, gamma: f64) -> Vec<f64> {
        (0..rewards.len())
            .map(|t| {
                let mut g = 0.0;
                let mut discount = 1.0;
                let mut k = t;
                loop {
                    g += discount * rewards[k];
                    if dones[k] {
                        break;
                    }
                    discount *= gamma;
                    if k + 1 == rewards.len() {
                        g += discount * bootstrap;
                        break;
                    }
                    k += 1;
                }
                g - values[t]
            })
            .collect()
    }

    #[test]
    fn lambda_one_gamma_one_hand_case() {
        let (adv, _) = compute_gae(&[1.0; 3], &[0.0; 3], &[false, false, true], 0.0, 1.0, 1.0);
        assert_eq!(adv, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn lambda_zero_is_td_residual() {
        let r = [0.5, -1.0, 2.0, 0.25];
        let v = [0.1, 0.2, -0.3, 0.4];
        let d = [false, true, false, false];
        let (adv, _) = compute_gae(&r, &v, &d, 0.7, 0.9, 0.0);
        let next = [v[1], 0.0, v[3], 0.7];
        let live = [1.0, 0.0, 1.0, 1.0];
        for t in 0..4 {
            assert_eq!(adv[t], r[t] + 0.9 * next[t] * live[t] - v[t]);
        }
    }

    #[test]
    fn normalized_has_zero_mean_unit_std() {
        let mut rng = RngStream::new(1);
        let mut xs: Vec<f64> = (0..100).map(|_| 3.0 + 2.0 * rng.normal()).collect();
        normalize(&mut xs);
        let mean = xs.iter().sum::<f64>() / 100.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 100.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-6);
    }

    #[test]
    fn memory_capacity_and_clear() {
        let mut m = RolloutMemory::new(2, 1, 1);
        let t = TransitionRef { observation: &[0.0], action: &[0.0], reward: 1.0, done: false, value: 0.0, log_prob: 0.0 };
        m.push(t).unwrap();
        m.push(t).unwrap();
        assert!(m.is_full());
        assert!(m.push(t).is_err());
        m.clear();
        assert!(m.is_empty());
    }

    proptest! {
        #[test]
        fn gae_identities(data in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, proptest::bool::weighted(0.2)), 1..40),
                          bootstrap in -5.0f64..5.0, gamma in 0.0f64..1.0, lambda in 0.0f64..1.0) {
            let r: Vec<f64> = data.iter().map(|d| d.0).collect();
            let v: Vec<f64> = data.iter().map(|d| d.1).collect();
            let d: Vec<bool> = data.iter().map(|d| d.2).collect();
            let (adv, ret) = compute_gae(&r, &v, &d, bootstrap, gamma, lambda);
            for t in 0..r.len() {
                prop_assert!(((ret[t] - adv[t]) - v[t]).abs() < 1e-12);
            }
            let (adv1, _) = compute_gae(&r, &v, &d, bootstrap, gamma, 1.0);
            let oracle = mc_oracle(&r, &v, &d, bootstrap, gamma);
            for t in 0..r.len() {
                prop_assert!((adv1[t] - oracle[t]).abs() < 1e-9);
            }
        }
    }
}
