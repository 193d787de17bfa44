use ndarray::{Array1, Array2};
use rand::Rng;

use crate::env::Transition;
use crate::error::{check_len, Error, Result};

/// Fixed-capacity FIFO transition store.
///
/// Transitions live in flat row-major arrays; once full, each push overwrites
/// the oldest slot. A compensated running sum keeps [`mean_reward`] equal to
/// the mean of the stored rewards to rounding.
///
/// [`mean_reward`]: ReplayBuffer::mean_reward
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    next_states: Vec<f64>,
    rewards: Vec<f64>,
    dones: Vec<bool>,
    head: usize,
    len: usize,
    reward_sum: f64,
    reward_comp: f64,
}

/// Column-stacked minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    pub dones: Vec<bool>,
}

impl Batch {
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
            states: Vec::new(),
            actions: Vec::new(),
            next_states: Vec::new(),
            rewards: Vec::new(),
            dones: Vec::new(),
            head: 0,
            len: 0,
            reward_sum: 0.0,
            reward_comp: 0.0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    // Neumaier summation
    fn accumulate(&mut self, x: f64) {
        let t = self.reward_sum + x;
        if self.reward_sum.abs() >= x.abs() {
            self.reward_comp += (self.reward_sum - t) + x;
        } else {
            self.reward_comp += (x - t) + self.reward_sum;
        }
        self.reward_sum = t;
    }

    pub fn push(&mut self, t: &Transition) -> Result<()> {
        check_len("transition state", self.obs_dim, t.state.len())?;
        check_len("transition next state", self.obs_dim, t.next_state.len())?;
        check_len("transition action", self.act_dim, t.action.len())?;
        if !t.reward.is_finite() {
            return Err(Error::NonFinite("transition reward".into()));
        }
        if self.len < self.capacity {
            self.states.extend_from_slice(&t.state);
            self.actions.extend_from_slice(&t.action);
            self.next_states.extend_from_slice(&t.next_state);
            self.rewards.push(t.reward);
            self.dones.push(t.done);
            self.len += 1;
        } else {
            let slot = self.head;
            let (o, a) = (slot * self.obs_dim, slot * self.act_dim);
            self.states[o..o + self.obs_dim].copy_from_slice(&t.state);
            self.next_states[o..o + self.obs_dim].copy_from_slice(&t.next_state);
            self.actions[a..a + self.act_dim].copy_from_slice(&t.action);
            let evicted = self.rewards[slot];
            self.accumulate(-evicted);
            self.rewards[slot] = t.reward;
            self.dones[slot] = t.done;
        }
        self.accumulate(t.reward);
        self.head = (self.head + 1) % self.capacity;
        Ok(())
    }

    pub fn extend<'a>(&mut self, transitions: impl IntoIterator<Item = &'a Transition>) -> Result<()> {
        transitions.into_iter().try_for_each(|t| self.push(t))
    }

    /// Mean of the stored rewards, `None` when empty.
    pub fn mean_reward(&self) -> Option<f64> {
        (self.len > 0).then(|| (self.reward_sum + self.reward_comp) / self.len as f64)
    }

    /// Stored rewards, oldest first.
    pub fn rewards_in_order(&self) -> Vec<f64> {
        if self.len < self.capacity {
            self.rewards.clone()
        } else {
            let mut out = self.rewards[self.head..].to_vec();
            out.extend_from_slice(&self.rewards[..self.head]);
            out
        }
    }

    /// Stored transition `i` counted from the oldest.
    pub fn get(&self, i: usize) -> Option<Transition> {
        (i < self.len).then(|| {
            let slot = if self.len < self.capacity { i } else { (self.head + i) % self.capacity };
            self.slot(slot)
        })
    }

    fn slot(&self, slot: usize) -> Transition {
        let (o, a) = (slot * self.obs_dim, slot * self.act_dim);
        Transition {
            state: self.states[o..o + self.obs_dim].to_vec(),
            action: self.actions[a..a + self.act_dim].to_vec(),
            reward: self.rewards[slot],
            next_state: self.next_states[o..o + self.obs_dim].to_vec(),
            done: self.dones[slot],
        }
    }

    /// Uniform sampling with replacement over the stored transitions.
    pub fn sample_slots<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.len == 0 {
            return Err(Error::InsufficientData {
                available: 0,
                requested: batch_size,
            });
        }
        Ok((0..batch_size).map(|_| rng.random_range(0..self.len)).collect())
    }

    pub fn sample_batch<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Batch> {
        let slots = self.sample_slots(batch_size, rng)?;
        let (od, ad) = (self.obs_dim, self.act_dim);
        let mut states = Array2::zeros((batch_size, od));
        let mut next_states = Array2::zeros((batch_size, od));
        let mut actions = Array2::zeros((batch_size, ad));
        for (row, &s) in slots.iter().enumerate() {
            states
                .row_mut(row)
                .as_slice_mut()
                .unwrap()
                .copy_from_slice(&self.states[s * od..(s + 1) * od]);
            next_states
                .row_mut(row)
                .as_slice_mut()
                .unwrap()
                .copy_from_slice(&self.next_states[s * od..(s + 1) * od]);
            actions
                .row_mut(row)
                .as_slice_mut()
                .unwrap()
                .copy_from_slice(&self.actions[s * ad..(s + 1) * ad]);
        }
        Ok(Batch {
            states,
            actions,
            rewards: slots.iter().map(|&s| self.rewards[s]).collect(),
            next_states,
            dones: slots.iter().map(|&s| self.dones[s]).collect(),
        })
    }
}
