//! Double Q-learning agent with prioritized replay. Each agent owns one menu
//! bundle: a small value network scores the nine adjustment actions, a target
//! copy stabilizes bootstrapping, and replay is sampled by TD-error priority.

mod net;
mod replay;

pub use net::{
    finite_difference_gradient, gradient_relative_error, random_smooth_instance, Gradient, Layer,
    ValueNet,
};
pub use replay::{ReplayMemory, SampleBatch, Transition};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::argmax_lowest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentHyperparams {
    /// Hidden layer widths of the value network.
    pub hidden: Vec<usize>,
    /// SGD learning rate.
    pub lr: f64,
    /// Bootstrap discount.
    pub discount: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Priority exponent for proportional sampling.
    pub per_alpha: f64,
    /// Importance-weight exponent schedule endpoints.
    pub per_beta_start: f64,
    pub per_beta_end: f64,
    /// Floor added to |TD| when refreshing priorities.
    pub per_epsilon: f64,
    /// Exploration schedule endpoints and the fraction of total steps it spans.
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_decay_fraction: f64,
    /// Learner steps between bit-exact target refreshes.
    pub target_sync_every: usize,
}

impl Default for AgentHyperparams {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            lr: 1e-3,
            discount: 0.9,
            batch_size: 16,
            replay_capacity: 4096,
            per_alpha: 0.6,
            per_beta_start: 0.4,
            per_beta_end: 1.0,
            per_epsilon: 1e-3,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay_fraction: 0.6,
            target_sync_every: 500,
        }
    }
}

impl AgentHyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::Config(format!("discount must lie in [0, 1), got {}", self.discount)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.replay_capacity < self.batch_size {
            return Err(Error::Config("replay capacity must hold at least one batch".into()));
        }
        if !(self.per_alpha >= 0.0) {
            return Err(Error::Config("per_alpha must be nonnegative".into()));
        }
        for (name, v) in [("per_beta_start", self.per_beta_start), ("per_beta_end", self.per_beta_end)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.per_epsilon > 0.0) {
            return Err(Error::Config("per_epsilon must be positive".into()));
        }
        for (name, v) in [("eps_start", self.eps_start), ("eps_end", self.eps_end)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.eps_end > self.eps_start {
            return Err(Error::Config("eps_end must not exceed eps_start".into()));
        }
        if !(self.eps_decay_fraction > 0.0 && self.eps_decay_fraction <= 1.0) {
            return Err(Error::Config("eps_decay_fraction must lie in (0, 1]".into()));
        }
        if self.target_sync_every == 0 {
            return Err(Error::Config("target_sync_every must be positive".into()));
        }
        Ok(())
    }

    pub fn dims_for(&self, obs_dim: usize) -> Vec<usize> {
        let mut dims = vec![obs_dim];
        dims.extend_from_slice(&self.hidden);
        dims.push(crate::env::BundleAction::COUNT);
        dims
    }

    /// Linear exploration schedule over `total_steps` driven by a global step counter.
    pub fn epsilon_at(&self, step: usize, total_steps: usize) -> f64 {
        let horizon = (self.eps_decay_fraction * total_steps as f64).max(1.0);
        let frac = (step as f64 / horizon).min(1.0);
        self.eps_start + frac * (self.eps_end - self.eps_start)
    }

    /// Linear importance-weight anneal over the full run.
    pub fn beta_at(&self, step: usize, total_steps: usize) -> f64 {
        let frac = (step as f64 / (total_steps.max(1)) as f64).min(1.0);
        self.per_beta_start + frac * (self.per_beta_end - self.per_beta_start)
    }
}

/// Outcome of one learner step.
#[derive(Debug, Clone)]
pub struct LearnReport {
    pub mean_loss: f64,
    pub td_errors: Vec<f64>,
}

pub struct PddqlAgent {
    online: ValueNet,
    target: ValueNet,
    replay: ReplayMemory,
    hp: AgentHyperparams,
    act_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    learn_steps: usize,
}

impl PddqlAgent {
    pub fn new(
        obs_dim: usize,
        hp: AgentHyperparams,
        init_seed: u64,
        act_seed: u64,
        replay_seed: u64,
    ) -> Result<Self> {
        hp.validate()?;
        let mut init_rng = ChaCha8Rng::seed_from_u64(init_seed);
        let online = ValueNet::new(&hp.dims_for(obs_dim), &mut init_rng)?;
        Self::from_net(online, hp, act_seed, replay_seed)
    }

    /// Builds an agent around an existing online network (checkpoint restore,
    /// tests). The target starts as a bit-exact copy.
    pub fn from_net(online: ValueNet, hp: AgentHyperparams, act_seed: u64, replay_seed: u64) -> Result<Self> {
        hp.validate()?;
        if online.output_dim() != crate::env::BundleAction::COUNT {
            return Err(Error::DimensionMismatch {
                expected: crate::env::BundleAction::COUNT,
                actual: online.output_dim(),
            });
        }
        let replay = ReplayMemory::new(hp.replay_capacity, hp.per_alpha)?;
        Ok(Self {
            target: online.clone(),
            online,
            replay,
            hp,
            act_rng: ChaCha8Rng::seed_from_u64(act_seed),
            replay_rng: ChaCha8Rng::seed_from_u64(replay_seed),
            learn_steps: 0,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.online.input_dim()
    }

    pub fn online(&self) -> &ValueNet {
        &self.online
    }

    pub fn target(&self) -> &ValueNet {
        &self.target
    }

    pub fn replay(&self) -> &ReplayMemory {
        &self.replay
    }

    pub fn hyperparams(&self) -> &AgentHyperparams {
        &self.hp
    }

    pub fn learn_steps(&self) -> usize {
        self.learn_steps
    }

    /// Greedy action under the online network; exact ties take the lowest index.
    pub fn greedy(&self, obs: &[f64]) -> usize {
        argmax_lowest(&self.online.forward(obs)).expect("output layer is nonempty")
    }

    /// Epsilon-greedy action. Exactly one uniform draw decides exploration;
    /// a second draw picks the random action only on the explore branch.
    pub fn act(&mut self, obs: &[f64], epsilon: f64) -> usize {
        let coin: f64 = self.act_rng.gen();
        if coin < epsilon {
            self.act_rng.gen_range(0..crate::env::BundleAction::COUNT)
        } else {
            self.greedy(obs)
        }
    }

    pub fn store(&mut self, t: Transition) {
        debug_assert_eq!(t.obs.len(), self.obs_dim());
        debug_assert_eq!(t.next_obs.len(), self.obs_dim());
        self.replay.push(t);
    }

    pub fn can_learn(&self) -> bool {
        self.replay.len() >= self.hp.batch_size
    }

    /// Double-Q bootstrap target: the online net picks the successor action,
    /// the target net evaluates it. Terminal transitions use the bare reward.
    pub fn double_q_target(&self, t: &Transition) -> f64 {
        if t.terminal {
            return t.reward;
        }
        let next_q_online = self.online.forward(&t.next_obs);
        let best = argmax_lowest(&next_q_online).expect("nonempty outputs");
        let next_q_target = self.target.forward(&t.next_obs);
        t.reward + self.hp.discount * next_q_target[best]
    }

    /// One prioritized, importance-weighted SGD step on the squared TD error.
    /// Returns `None` until the replay holds one full batch.
    pub fn learn(&mut self, beta: f64) -> Result<Option<LearnReport>> {
        if !self.can_learn() {
            return Ok(None);
        }
        let batch = self.replay.sample(self.hp.batch_size, beta, &mut self.replay_rng)?;
        let mut grad = Gradient::zeros_like(&self.online);
        let mut td_errors = Vec::with_capacity(batch.indices.len());
        let mut loss_acc = 0.0;
        for (&idx, &weight) in batch.indices.iter().zip(&batch.weights) {
            let t = self.replay.get(idx);
            let y = self.double_q_target(t);
            let cache = self.online.forward_cached(&t.obs);
            let td = cache.output()[t.action] - y;
            loss_acc += weight * td * td;
            self.online.backward_into(&cache, t.action, y, weight, &mut grad);
            td_errors.push(td);
        }
        let inv_batch = 1.0 / batch.indices.len() as f64;
        grad.scale(inv_batch);
        self.online.apply_gradient(&grad, self.hp.lr);
        for (&idx, &td) in batch.indices.iter().zip(&td_errors) {
            self.replay.update_priority(idx, td.abs() + self.hp.per_epsilon)?;
        }
        self.learn_steps += 1;
        if self.learn_steps % self.hp.target_sync_every == 0 {
            self.sync_target();
        }
        Ok(Some(LearnReport { mean_loss: loss_acc * inv_batch, td_errors }))
    }

    /// Bit-exact copy of the online parameters into the target.
    pub fn sync_target(&mut self) {
        self.target = self.online.clone();
    }

    /// Replaces the online network (checkpoint restore) and resyncs the target.
    pub fn load_net(&mut self, net: ValueNet) -> Result<()> {
        if net.input_dim() != self.online.input_dim() || net.output_dim() != self.online.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.online.input_dim(),
                actual: net.input_dim(),
            });
        }
        self.online = net;
        self.sync_target();
        Ok(())
    }
}
