//! Menu-adjustment environment. One learning agent owns each menu bundle; all
//! agents act simultaneously, the provider recomputes the violation bits, and
//! everyone receives one shared reward blending realized revenue with the
//! change in violation counts.

use rand::distributions::{Distribution, Uniform};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layer::{LayerModel, Menu};
use crate::market::POSITIVE_FLOOR;

/// Direction of one multiplicative adjustment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdjustDir {
    Increase,
    Decrease,
    Keep,
}

impl AdjustDir {
    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Self::Increase),
            1 => Ok(Self::Decrease),
            2 => Ok(Self::Keep),
            _ => Err(Error::Domain(format!("direction index must be 0..3, got {i}"))),
        }
    }

    pub fn index(self) -> usize {
        match self {
            Self::Increase => 0,
            Self::Decrease => 1,
            Self::Keep => 2,
        }
    }
}

/// One agent's joint move: adjust the bundle's quality knob and its price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleAction {
    pub quality: AdjustDir,
    pub price: AdjustDir,
}

impl BundleAction {
    /// Size of the flat action space (3 quality moves x 3 price moves).
    pub const COUNT: usize = 9;

    pub fn keep() -> Self {
        Self { quality: AdjustDir::Keep, price: AdjustDir::Keep }
    }

    /// Flat index `quality_dir * 3 + price_dir`.
    pub fn index(self) -> usize {
        self.quality.index() * 3 + self.price.index()
    }

    pub fn from_index(a: usize) -> Result<Self> {
        if a >= Self::COUNT {
            return Err(Error::Domain(format!("action index must be 0..{}, got {a}", Self::COUNT)));
        }
        Ok(Self { quality: AdjustDir::from_index(a / 3)?, price: AdjustDir::from_index(a % 3)? })
    }
}

/// What each agent observes: the full joint state or only its own slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObsMode {
    Augmented,
    Naive,
}

impl std::fmt::Display for ObsMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ObsMode::Augmented => write!(f, "augmented"),
            ObsMode::Naive => write!(f, "naive"),
        }
    }
}

/// Legal multiplicative step magnitudes.
pub const STEP_MAGNITUDES: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub mode: ObsMode,
    /// Half-width of the clamp box around each base value, as a fraction.
    pub range: f64,
    /// Multiplicative step magnitude applied on increase/decrease.
    pub step: f64,
    /// Per-bundle reference prices; clamp boxes are centered here.
    pub base_prices: Vec<f64>,
    /// Per-bundle reference quality coordinates, flat with the layer's stride.
    pub base_qualities: Vec<f64>,
    /// Reward blend: revenue term, participation-violation delta, incentive-violation delta.
    pub weights: [f64; 3],
}

impl EnvConfig {
    pub fn validate(&self, bundle_count: usize, quality_dim: usize) -> Result<()> {
        if !(self.range >= 0.0 && self.range <= 1.0) || !self.range.is_finite() {
            return Err(Error::Config(format!("range must lie in [0, 1], got {}", self.range)));
        }
        if !STEP_MAGNITUDES.iter().any(|&m| (self.step - m).abs() < 1e-12) {
            return Err(Error::Config(format!(
                "step must be one of {STEP_MAGNITUDES:?}, got {}",
                self.step
            )));
        }
        // range = 0 pins the menu to the base point (used by frozen-menu runs);
        // otherwise the step must fit inside the box.
        if self.range > 0.0 && self.step > self.range + 1e-12 {
            return Err(Error::Config(format!(
                "step {} exceeds range {}",
                self.step, self.range
            )));
        }
        if self.base_prices.len() != bundle_count {
            return Err(Error::DimensionMismatch { expected: bundle_count, actual: self.base_prices.len() });
        }
        if self.base_qualities.len() != bundle_count * quality_dim {
            return Err(Error::DimensionMismatch {
                expected: bundle_count * quality_dim,
                actual: self.base_qualities.len(),
            });
        }
        for &v in self.base_prices.iter().chain(&self.base_qualities) {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(format!("base values must be positive, got {v}")));
            }
        }
        let mut sum = 0.0;
        for &w in &self.weights {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Config(format!("weights must be nonnegative, got {w}")));
            }
            sum += w;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("weights must sum to 1, got {sum}")));
        }
        Ok(())
    }
}

/// Joint market state: last joint action, the menu in force, and the violation bits.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketState {
    pub prev_actions: Vec<BundleAction>,
    pub menu: Menu,
    pub ir: Vec<u8>,
    pub ic: Vec<u8>,
    pub step_index: usize,
}

impl MarketState {
    pub fn ir_count(&self) -> usize {
        self.ir.iter().map(|&b| b as usize).sum()
    }

    pub fn ic_count(&self) -> usize {
        self.ic.iter().map(|&b| b as usize).sum()
    }

    pub fn violation_count(&self) -> usize {
        self.ir_count() + self.ic_count()
    }
}

/// Multiplicative update clamped to the base-centered box, floored at a
/// strictly positive epsilon.
pub fn apply_dir(value: f64, dir: AdjustDir, base: f64, range: f64, step: f64) -> f64 {
    let moved = match dir {
        AdjustDir::Increase => value * (1.0 + step),
        AdjustDir::Decrease => value * (1.0 - step),
        AdjustDir::Keep => value,
    };
    let lo = base * (1.0 - range);
    let hi = base * (1.0 + range);
    moved.clamp(lo, hi).max(POSITIVE_FLOOR)
}

pub struct MarketEnv {
    model: LayerModel,
    config: EnvConfig,
    counts: Vec<u32>,
    state: MarketState,
}

impl MarketEnv {
    /// Environment positioned at the base menu.
    pub fn new(model: LayerModel, config: EnvConfig, counts: Vec<u32>) -> Result<Self> {
        config.validate(model.bundle_count(), model.quality_dim())?;
        if counts.len() != model.bundle_count() {
            return Err(Error::DimensionMismatch { expected: model.bundle_count(), actual: counts.len() });
        }
        let menu = Menu::new(
            model.quality_dim(),
            config.base_qualities.clone(),
            config.base_prices.clone(),
        )?;
        let state = Self::state_from_menu(&model, menu, vec![BundleAction::keep(); model.bundle_count()])?;
        Ok(Self { model, config, counts, state })
    }

    /// Environment positioned at an explicit menu (must fit the clamp boxes).
    pub fn with_menu(model: LayerModel, config: EnvConfig, counts: Vec<u32>, menu: Menu) -> Result<Self> {
        let mut env = Self::new(model, config, counts)?;
        env.check_in_box(&menu)?;
        env.state = Self::state_from_menu(&env.model, menu, env.state.prev_actions.clone())?;
        Ok(env)
    }

    fn check_in_box(&self, menu: &Menu) -> Result<()> {
        if menu.quality_dim != self.model.quality_dim() || menu.len() != self.model.bundle_count() {
            return Err(Error::DimensionMismatch {
                expected: self.model.bundle_count(),
                actual: menu.len(),
            });
        }
        let r = self.config.range;
        let in_box = |v: f64, base: f64| v >= base * (1.0 - r) - 1e-12 && v <= base * (1.0 + r) + 1e-12;
        for k in 0..menu.len() {
            if !in_box(menu.prices[k], self.config.base_prices[k]) {
                return Err(Error::Config(format!("price {} outside clamp box for bundle {k}", menu.prices[k])));
            }
        }
        for (i, &q) in menu.qualities.iter().enumerate() {
            if !in_box(q, self.config.base_qualities[i]) {
                return Err(Error::Config(format!("quality {q} outside clamp box at slot {i}")));
            }
        }
        Ok(())
    }

    fn state_from_menu(model: &LayerModel, menu: Menu, prev: Vec<BundleAction>) -> Result<MarketState> {
        let report = model.feasibility(&menu)?;
        Ok(MarketState { prev_actions: prev, menu, ir: report.ir, ic: report.ic, step_index: 0 })
    }

    /// Draws a fresh menu uniformly inside the clamp boxes. Draw order is
    /// fixed (per bundle: price, then quality coordinates) so a seed fully
    /// determines the state.
    pub fn reset(&mut self, seed: u64) -> &MarketState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = self.model.bundle_count();
        let dim = self.model.quality_dim();
        let r = self.config.range;
        let mut prices = Vec::with_capacity(k);
        let mut qualities = Vec::with_capacity(k * dim);
        for bundle in 0..k {
            let base_p = self.config.base_prices[bundle];
            prices.push(draw_in_box(&mut rng, base_p, r));
            for d in 0..dim {
                let base_q = self.config.base_qualities[bundle * dim + d];
                qualities.push(draw_in_box(&mut rng, base_q, r));
            }
        }
        let menu = Menu::new(dim, qualities, prices).expect("shapes fixed by construction");
        self.state = Self::state_from_menu(&self.model, menu, vec![BundleAction::keep(); k])
            .expect("menu built in-box");
        &self.state
    }

    /// Applies one action per bundle simultaneously. Returns the shared reward:
    /// the revenue term is evaluated on the menu in force when the actions were
    /// chosen; the violation terms reward reductions across the transition.
    pub fn step(&mut self, actions: &[BundleAction]) -> Result<f64> {
        let k = self.model.bundle_count();
        if actions.len() != k {
            return Err(Error::DimensionMismatch { expected: k, actual: actions.len() });
        }
        let dim = self.model.quality_dim();
        let pre_objective = self.model.realized_total(&self.state.menu, &self.counts)?;
        let pre_ir = self.state.ir_count() as f64;
        let pre_ic = self.state.ic_count() as f64;

        let mut prices = Vec::with_capacity(k);
        let mut qualities = Vec::with_capacity(k * dim);
        for (bundle, action) in actions.iter().enumerate() {
            prices.push(apply_dir(
                self.state.menu.prices[bundle],
                action.price,
                self.config.base_prices[bundle],
                self.config.range,
                self.config.step,
            ));
            for d in 0..dim {
                let idx = bundle * dim + d;
                qualities.push(apply_dir(
                    self.state.menu.qualities[idx],
                    action.quality,
                    self.config.base_qualities[idx],
                    self.config.range,
                    self.config.step,
                ));
            }
        }
        let menu = Menu::new(dim, qualities, prices)?;
        let report = self.model.feasibility(&menu)?;
        let post_ir: f64 = report.ir.iter().map(|&b| b as f64).sum();
        let post_ic: f64 = report.ic.iter().map(|&b| b as f64).sum();

        let [w1, w2, w3] = self.config.weights;
        let reward = w1 * pre_objective + w2 * (pre_ir - post_ir) + w3 * (pre_ic - post_ic);

        self.state = MarketState {
            prev_actions: actions.to_vec(),
            menu,
            ir: report.ir,
            ic: report.ic,
            step_index: self.state.step_index + 1,
        };
        Ok(reward)
    }

    /// Same transition fed as (bundle, action) pairs in any order; each bundle
    /// must appear exactly once.
    pub fn step_pairs(&mut self, pairs: &[(usize, BundleAction)]) -> Result<f64> {
        let k = self.model.bundle_count();
        if pairs.len() != k {
            return Err(Error::DimensionMismatch { expected: k, actual: pairs.len() });
        }
        let mut actions = vec![None; k];
        for &(bundle, action) in pairs {
            if bundle >= k {
                return Err(Error::Domain(format!("bundle index {bundle} out of range")));
            }
            if actions[bundle].replace(action).is_some() {
                return Err(Error::Domain(format!("bundle index {bundle} appears twice")));
            }
        }
        let actions: Vec<BundleAction> = actions.into_iter().map(|a| a.unwrap()).collect();
        self.step(&actions)
    }

    /// Observation for one agent. Augmented mode returns the full flattened
    /// state prefixed with a normalized agent tag; naive mode returns only the
    /// agent's own slice.
    pub fn observe(&self, agent: usize) -> Vec<f64> {
        let k = self.model.bundle_count();
        assert!(agent < k, "agent index out of range");
        let s = &self.state;
        match self.config.mode {
            ObsMode::Augmented => {
                let mut obs = Vec::with_capacity(self.observation_len());
                obs.push(agent as f64 / k as f64);
                for a in &s.prev_actions {
                    obs.push(a.quality.index() as f64);
                    obs.push(a.price.index() as f64);
                }
                obs.extend_from_slice(&s.menu.prices);
                obs.extend_from_slice(&s.menu.qualities);
                obs.extend(s.ir.iter().map(|&b| b as f64));
                obs.extend(s.ic.iter().map(|&b| b as f64));
                obs
            }
            ObsMode::Naive => {
                let mut obs = Vec::with_capacity(self.observation_len());
                let a = s.prev_actions[agent];
                obs.push(a.quality.index() as f64);
                obs.push(a.price.index() as f64);
                obs.push(s.menu.prices[agent]);
                obs.extend_from_slice(s.menu.quality(agent));
                obs.push(s.ir[agent] as f64);
                obs.push(s.ic[agent] as f64);
                obs
            }
        }
    }

    pub fn observation_len(&self) -> usize {
        let k = self.model.bundle_count();
        let dim = self.model.quality_dim();
        match self.config.mode {
            ObsMode::Augmented => 1 + k * (2 + 1 + dim + 2),
            ObsMode::Naive => 2 + 1 + dim + 2,
        }
    }

    /// True when the current menu satisfies every participation and incentive constraint.
    pub fn is_feasible(&self) -> bool {
        self.state.violation_count() == 0
    }

    pub fn realized_objective(&self) -> f64 {
        self.model
            .realized_total(&self.state.menu, &self.counts)
            .expect("state menu always fits the model")
    }

    pub fn state(&self) -> &MarketState {
        &self.state
    }

    pub fn model(&self) -> &LayerModel {
        &self.model
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }
}

fn draw_in_box(rng: &mut ChaCha8Rng, base: f64, range: f64) -> f64 {
    let lo = base * (1.0 - range);
    let hi = base * (1.0 + range);
    let v = if hi > lo { Uniform::new_inclusive(lo, hi).sample(rng) } else { base };
    v.max(POSITIVE_FLOOR)
}
