use crate::error::check_len;
use crate::numerics::RngStream;
use crate::Result;

/// Fixed-capacity ring of transitions; the oldest entry is overwritten once full.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    /// Slot the next transition is written to.
    cursor: usize,
    len: usize,
    pub(crate) observations: Vec<f64>,
    pub(crate) actions: Vec<f64>,
    pub(crate) rewards: Vec<f64>,
    pub(crate) next_observations: Vec<f64>,
    pub(crate) dones: Vec<bool>,
}

/// Borrowed view of one stored transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition<'a> {
    pub observation: &'a [f64],
    pub action: &'a [f64],
    pub reward: f64,
    pub next_observation: &'a [f64],
    pub done: bool,
}

/// Row-major batch gathered from a buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct SacBatch {
    pub indices: Vec<usize>,
    pub observations: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_observations: Vec<f64>,
    pub dones: Vec<bool>,
}

impl SacBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            obs_dim,
            act_dim,
            cursor: 0,
            len: 0,
            observations: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_observations: Vec::new(),
            dones: Vec::new(),
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
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn store(&mut self, t: Transition<'_>) -> Result<()> {
        check_len("ReplayBuffer observation", self.obs_dim, t.observation.len())?;
        check_len("ReplayBuffer next observation", self.obs_dim, t.next_observation.len())?;
        check_len("ReplayBuffer action", self.act_dim, t.action.len())?;
        if self.rewards.len() < self.capacity {
            // Storage grows lazily until the ring closes.
            self.observations.extend_from_slice(t.observation);
            self.actions.extend_from_slice(t.action);
            self.rewards.push(t.reward);
            self.next_observations.extend_from_slice(t.next_observation);
            self.dones.push(t.done);
        } else {
            let (o, a) = (self.cursor * self.obs_dim, self.cursor * self.act_dim);
            self.observations[o..o + self.obs_dim].copy_from_slice(t.observation);
            self.actions[a..a + self.act_dim].copy_from_slice(t.action);
            self.rewards[self.cursor] = t.reward;
            self.next_observations[o..o + self.obs_dim].copy_from_slice(t.next_observation);
            self.dones[self.cursor] = t.done;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        self.len = (self.len + 1).min(self.capacity);
        Ok(())
    }

    /// Transition in physical slot `slot`.
    pub fn slot(&self, slot: usize) -> Transition<'_> {
        let (o, a) = (slot * self.obs_dim, slot * self.act_dim);
        Transition {
            observation: &self.observations[o..o + self.obs_dim],
            action: &self.actions[a..a + self.act_dim],
            reward: self.rewards[slot],
            next_observation: &self.next_observations[o..o + self.obs_dim],
            done: self.dones[slot],
        }
    }

    /// Transitions from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = Transition<'_>> {
        let start = if self.len < self.capacity { 0 } else { self.cursor };
        (0..self.len).map(move |i| self.slot((start + i) % self.capacity))
    }

    pub fn sample_indices(&self, batch: usize, rng: &mut RngStream) -> Vec<usize> {
        (0..batch).map(|_| rng.below(self.len)).collect()
    }

    /// Uniform draw with replacement over the stored transitions.
    pub fn sample_batch(&self, batch: usize, rng: &mut RngStream) -> SacBatch {
        assert!(self.len > 0, "sampling from an empty replay buffer");
        self.gather(self.sample_indices(batch, rng))
    }

    pub fn gather(&self, indices: Vec<usize>) -> SacBatch {
        let n = indices.len();
        let mut b = SacBatch {
            observations: Vec::with_capacity(n * self.obs_dim),
            actions: Vec::with_capacity(n * self.act_dim),
            rewards: Vec::with_capacity(n),
            next_observations: Vec::with_capacity(n * self.obs_dim),
            dones: Vec::with_capacity(n),
            indices: Vec::new(),
        };
        for &i in &indices {
            let t = self.slot(i);
            b.observations.extend_from_slice(t.observation);
            b.actions.extend_from_slice(t.action);
            b.rewards.push(t.reward);
            b.next_observations.extend_from_slice(t.next_observation);
            b.dones.push(t.done);
        }
        b.indices = indices;
        b
    }

    /// Rebuilds a buffer from its physical slots and cursor.
    pub(crate) fn from_parts(
        capacity: usize,
        obs_dim: usize,
        act_dim: usize,
        cursor: usize,
        slots: Vec<(Vec<f64>, Vec<f64>, f64, Vec<f64>, bool)>,
    ) -> Result<Self> {
        if slots.len() > capacity || cursor >= capacity || (slots.len() < capacity && cursor != slots.len() % capacity) {
            return Err(crate::Error::Checkpoint("inconsistent replay buffer layout".into()));
        }
        let mut buf = Self::new(capacity, obs_dim, act_dim);
        for (o, a, r, n, d) in &slots {
            buf.store(Transition {
                observation: o,
                action: a,
                reward: *r,
                next_observation: n,
                done: *d,
            })?;
        }
        buf.cursor = cursor;
        Ok(buf)
    }
}
