use rand::Rng;

use crate::env::Observation;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Observation,
    pub action: f64,
    pub reward: f64,
    pub next_obs: Observation,
    pub done: bool,
}

/// Fixed-capacity FIFO of transitions; the oldest entry is overwritten once full.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
            inserted: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        self.inserted += 1;
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Distinct indices drawn uniformly.
    pub fn sample_indices<R: Rng>(&self, batch: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.len() < batch {
            return Err(Error::InsufficientBuffer {
                len: self.len(),
                batch,
            });
        }
        Ok(rand::seq::index::sample(rng, self.len(), batch).into_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn tr(i: usize) -> Transition {
        Transition {
            obs: Observation(vec![i as f64]),
            action: 0.0,
            reward: i as f64,
            next_obs: Observation(vec![0.0]),
            done: false,
        }
    }

    #[test]
    fn overwrites_oldest() {
        let mut buf = ReplayBuffer::new(10);
        for i in 0..13 {
            buf.push(tr(i));
        }
        assert_eq!(buf.len(), 10);
        let rewards: HashSet<i64> = buf.iter().map(|t| t.reward as i64).collect();
        assert!((0..3).all(|i| !rewards.contains(&i)));
        assert!((3..13).all(|i| rewards.contains(&i)));
    }

    #[test]
    fn sampled_indices_unique() {
        let mut buf = ReplayBuffer::new(64);
        for i in 0..64 {
            buf.push(tr(i));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let idx = buf.sample_indices(32, &mut rng).unwrap();
            assert_eq!(idx.iter().collect::<HashSet<_>>().len(), 32);
        }
        assert!(matches!(
            buf.sample_indices(65, &mut rng),
            Err(Error::InsufficientBuffer { len: 64, batch: 65 })
        ));
    }
}
