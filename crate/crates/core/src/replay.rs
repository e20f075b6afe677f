//! Fixed-capacity uniform experience replay over flat, once-allocated
//! storage.

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// One (s, a, r, s', done) record.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// A sampled minibatch.
#[derive(Debug, Clone)]
pub struct Batch {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<Vec<f64>>,
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

/// Ring buffer with FIFO overwrite; storage is `capacity x transition size`
/// allocated once at construction.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_states: Vec<f64>,
    dones: Vec<bool>,
    cursor: usize,
    size: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize) -> Self {
        Self {
            capacity,
            state_dim,
            action_dim,
            states: vec![0.0; capacity * state_dim],
            actions: vec![0.0; capacity * action_dim],
            rewards: vec![0.0; capacity],
            next_states: vec![0.0; capacity * state_dim],
            dones: vec![false; capacity],
            cursor: 0,
            size: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: &Transition) -> Result<()> {
        if t.state.len() != self.state_dim || t.next_state.len() != self.state_dim {
            return Err(Error::Contract(format!(
                "transition state dim {} does not match buffer dim {}",
                t.state.len(),
                self.state_dim
            )));
        }
        if t.action.len() != self.action_dim {
            return Err(Error::Contract(format!(
                "transition action dim {} does not match buffer dim {}",
                t.action.len(),
                self.action_dim
            )));
        }
        let s = self.cursor * self.state_dim;
        self.states[s..s + self.state_dim].copy_from_slice(&t.state);
        self.next_states[s..s + self.state_dim].copy_from_slice(&t.next_state);
        let a = self.cursor * self.action_dim;
        self.actions[a..a + self.action_dim].copy_from_slice(&t.action);
        self.rewards[self.cursor] = t.reward;
        self.dones[self.cursor] = t.done;
        self.cursor = (self.cursor + 1) % self.capacity;
        self.size = (self.size + 1).min(self.capacity);
        Ok(())
    }

    pub fn get(&self, index: usize) -> Transition {
        assert!(index < self.size, "index {index} out of {}", self.size);
        let s = index * self.state_dim;
        let a = index * self.action_dim;
        Transition {
            state: self.states[s..s + self.state_dim].to_vec(),
            action: self.actions[a..a + self.action_dim].to_vec(),
            reward: self.rewards[index],
            next_state: self.next_states[s..s + self.state_dim].to_vec(),
            done: self.dones[index],
        }
    }

    /// Uniform sample with replacement over the filled region.
    pub fn sample(&self, batch_size: usize, rng: &mut RngStream) -> Result<Batch> {
        if batch_size == 0 {
            return Err(Error::Contract("batch_size must be >= 1".into()));
        }
        if self.size < batch_size {
            return Err(Error::Contract(format!(
                "buffer holds {} transitions, batch of {batch_size} not ready",
                self.size
            )));
        }
        let mut batch = Batch {
            states: Vec::with_capacity(batch_size),
            actions: Vec::with_capacity(batch_size),
            rewards: Vec::with_capacity(batch_size),
            next_states: Vec::with_capacity(batch_size),
            dones: Vec::with_capacity(batch_size),
        };
        for _ in 0..batch_size {
            let t = self.get(rng.index(self.size));
            batch.states.push(t.state);
            batch.actions.push(t.action);
            batch.rewards.push(t.reward);
            batch.next_states.push(t.next_state);
            batch.dones.push(t.done);
        }
        Ok(batch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamId;

    fn tr(tag: f64) -> Transition {
        Transition {
            state: vec![tag, tag + 0.5],
            action: vec![-tag],
            reward: tag * 10.0,
            next_state: vec![tag + 1.0, tag + 1.5],
            done: tag as u64 % 2 == 0,
        }
    }

    #[test]
    fn ring_overwrites_oldest_first() {
        let mut buf = ReplayBuffer::new(2, 2, 1);
        for i in 1..=3 {
            buf.push(&tr(i as f64)).unwrap();
        }
        assert_eq!(buf.len(), 2);
        // slot 0 was overwritten by item 3, slot 1 still holds item 2
        assert_eq!(buf.get(0).reward, 30.0);
        assert_eq!(buf.get(1).reward, 20.0);
    }

    #[test]
    fn size_tracks_pushes_until_capacity() {
        let mut buf = ReplayBuffer::new(10, 2, 1);
        for i in 0..7 {
            buf.push(&tr(i as f64)).unwrap();
            assert_eq!(buf.len(), i + 1);
        }
        for i in 0..20 {
            buf.push(&tr(i as f64)).unwrap();
        }
        assert_eq!(buf.len(), 10);
    }

    #[test]
    fn push_get_round_trip_is_bit_exact() {
        let mut buf = ReplayBuffer::new(4, 2, 1);
        let t = Transition {
            state: vec![0.1 + 0.2, -1e-300],
            action: vec![std::f64::consts::PI],
            reward: 1.0 / 3.0,
            next_state: vec![f64::MIN_POSITIVE, 1e300],
            done: true,
        };
        buf.push(&t).unwrap();
        assert_eq!(buf.get(0), t);
        let mut rng = RngStream::new(0, StreamId::ReplaySampling);
        let batch = buf.sample(1, &mut rng).unwrap();
        assert_eq!(batch.states[0], t.state);
        assert_eq!(batch.rewards[0].to_bits(), t.reward.to_bits());
    }

    #[test]
    fn shape_mismatch_is_contract_error() {
        let mut buf = ReplayBuffer::new(4, 2, 1);
        let mut bad = tr(1.0);
        bad.state = vec![0.0; 3];
        assert!(matches!(buf.push(&bad), Err(Error::Contract(_))));
        let mut bad = tr(1.0);
        bad.action = vec![0.0, 0.0];
        assert!(matches!(buf.push(&bad), Err(Error::Contract(_))));
    }

    #[test]
    fn undersized_buffer_is_not_ready() {
        let mut buf = ReplayBuffer::new(8, 2, 1);
        buf.push(&tr(1.0)).unwrap();
        let mut rng = RngStream::new(0, StreamId::ReplaySampling);
        assert!(buf.sample(2, &mut rng).is_err());
        let batch = buf.sample(1, &mut rng).unwrap();
        assert_eq!(batch.len(), 1);
        assert_eq!(batch.rewards[0], 10.0);
    }

    #[test]
    fn sampling_is_deterministic_per_stream() {
        let mut buf = ReplayBuffer::new(100, 2, 1);
        for i in 0..100 {
            buf.push(&tr(i as f64)).unwrap();
        }
        let draw = |seed| {
            let mut rng = RngStream::new(seed, StreamId::ReplaySampling);
            buf.sample(32, &mut rng).unwrap().rewards
        };
        assert_eq!(draw(5), draw(5));
        assert_ne!(draw(5), draw(6));
    }

    #[test]
    fn fifo_order_provable_by_insertion_tags() {
        let capacity = 5;
        let mut buf = ReplayBuffer::new(capacity, 2, 1);
        for i in 0..12 {
            buf.push(&tr(i as f64)).unwrap();
        }
        // after 12 pushes into 5 slots, slot k holds tag 10+k for k<2, else 5+k
        let tags: Vec<f64> = (0..capacity).map(|k| buf.get(k).reward / 10.0).collect();
        assert_eq!(tags, vec![10.0, 11.0, 7.0, 8.0, 9.0]);
    }
}
