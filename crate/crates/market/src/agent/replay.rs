//! Prioritized replay memory: ring buffer plus two binary indexed trees over
//! the slots, one summing priority^alpha for proportional sampling and one
//! tracking the max raw priority for the new-item rule.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub terminal: bool,
}

/// Indices sampled proportionally to priority^alpha, with their normalized
/// importance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    leaf_count: usize,
    len: usize,
    next_slot: usize,
    items: Vec<Option<Transition>>,
    raw_priority: Vec<f64>,
    /// Heap-layout tree over `leaf_count` leaves; node 1 is the root,
    /// leaf i lives at `leaf_count + i`. Stores priority^alpha.
    sum_tree: Vec<f64>,
    /// Same layout, max-reduced over raw priorities.
    max_tree: Vec<f64>,
    alpha: f64,
}

impl ReplayMemory {
    pub fn new(capacity: usize, alpha: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::Config(format!("alpha must be nonnegative, got {alpha}")));
        }
        let leaf_count = capacity.next_power_of_two();
        Ok(Self {
            capacity,
            leaf_count,
            len: 0,
            next_slot: 0,
            items: vec![None; capacity],
            raw_priority: vec![0.0; capacity],
            sum_tree: vec![0.0; 2 * leaf_count],
            max_tree: vec![0.0; 2 * leaf_count],
            alpha,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Max raw priority currently stored; 1 when empty (the new-item default).
    pub fn max_priority(&self) -> f64 {
        if self.len == 0 {
            1.0
        } else {
            self.max_tree[1]
        }
    }

    /// Inserts with the current max priority (1 for an empty memory),
    /// evicting the oldest item once full.
    pub fn push(&mut self, t: Transition) {
        let priority = self.max_priority();
        let slot = self.next_slot;
        self.items[slot] = Some(t);
        self.next_slot = (self.next_slot + 1) % self.capacity;
        if self.len < self.capacity {
            self.len += 1;
        }
        self.set_priority(slot, priority);
    }

    pub fn get(&self, idx: usize) -> &Transition {
        self.items[idx].as_ref().expect("index points at a filled slot")
    }

    /// Sets the raw priority of a slot; must be strictly positive and finite.
    pub fn update_priority(&mut self, idx: usize, priority: f64) -> Result<()> {
        if idx >= self.len {
            return Err(Error::Domain(format!("replay index {idx} out of range (len {})", self.len)));
        }
        if !(priority > 0.0) || !priority.is_finite() {
            return Err(Error::Domain(format!("priority must be positive and finite, got {priority}")));
        }
        self.set_priority(idx, priority);
        Ok(())
    }

    fn set_priority(&mut self, idx: usize, priority: f64) {
        self.raw_priority[idx] = priority;
        let mut node = self.leaf_count + idx;
        self.sum_tree[node] = priority.powf(self.alpha);
        self.max_tree[node] = priority;
        node /= 2;
        while node >= 1 {
            self.sum_tree[node] = self.sum_tree[2 * node] + self.sum_tree[2 * node + 1];
            self.max_tree[node] = self.max_tree[2 * node].max(self.max_tree[2 * node + 1]);
            node /= 2;
        }
    }

    /// Probability that one draw returns `idx`: priority^alpha / total.
    pub fn probability(&self, idx: usize) -> f64 {
        let total = self.sum_tree[1];
        if total <= 0.0 {
            return 0.0;
        }
        self.sum_tree[self.leaf_count + idx] / total
    }

    fn retrieve(&self, mut mass: f64) -> usize {
        let mut node = 1;
        while node < self.leaf_count {
            let left = 2 * node;
            if mass < self.sum_tree[left] {
                node = left;
            } else {
                mass -= self.sum_tree[left];
                node = left + 1;
            }
        }
        (node - self.leaf_count).min(self.len.saturating_sub(1))
    }

    /// Draws `batch` independent proportional samples. Importance weight of a
    /// draw is `(P(i) * len)^(-beta)`, normalized by the largest weight in the
    /// batch.
    pub fn sample(&self, batch: usize, beta: f64, rng: &mut impl Rng) -> Result<SampleBatch> {
        if self.len == 0 {
            return Err(Error::Domain("cannot sample from an empty replay memory".into()));
        }
        if batch == 0 {
            return Err(Error::Domain("batch size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Domain(format!("beta must lie in [0, 1], got {beta}")));
        }
        let total = self.sum_tree[1];
        if !(total > 0.0) {
            return Err(Error::Domain("total priority mass is zero".into()));
        }
        let mut indices = Vec::with_capacity(batch);
        let mut weights = Vec::with_capacity(batch);
        for _ in 0..batch {
            let u: f64 = rng.gen_range(0.0..total);
            let idx = self.retrieve(u);
            let p = self.probability(idx);
            indices.push(idx);
            weights.push((p * self.len as f64).powf(-beta));
        }
        let max_w = weights.iter().cloned().fold(f64::MIN, f64::max);
        for w in &mut weights {
            *w /= max_w;
        }
        Ok(SampleBatch { indices, weights })
    }
}
