//! TOML run configuration. Every section is optional; an empty document gives
//! the reference defaults (700 episodes of 200 steps on a 27-type upstream
//! market with range 0.9 and equal reward weights). Unknown keys are rejected
//! and all numeric invariants are re-validated when the plan is built.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::AgentHyperparams;
use crate::env::{EnvConfig, ObsMode};
use crate::error::{Error, Result};
use crate::layer::{Layer, LayerModel};
use crate::market::{EconomicParams, TypeGrid, UserGrid};
use crate::oracle::GridSpec;
use crate::orchestrator::{ConvergenceSpec, ExperimentPlan};

/// Refresh rates below this floor would make staleness unbounded.
pub const GAMMA_MIN: f64 = 1e-3;

fn thirds() -> Vec<f64> {
    vec![1.0 / 3.0, 2.0 / 3.0, 1.0]
}

/// Scalar values broadcast across bundles; lists are taken verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Broadcast {
    Scalar(f64),
    List(Vec<f64>),
}

impl Broadcast {
    fn resolve(&self, len: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            Broadcast::Scalar(v) => Ok(vec![*v; len]),
            Broadcast::List(vs) => {
                if vs.len() != len {
                    return Err(Error::Config(format!(
                        "{what}: expected {len} entries, got {}",
                        vs.len()
                    )));
                }
                Ok(vs.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarketSection {
    /// Upstream type axes: transmission efficiency, refresh rate, semantic skill.
    pub lambda_set: Vec<f64>,
    pub gamma_set: Vec<f64>,
    pub psi_set: Vec<f64>,
    /// Downstream type axes: resolution taste, refresh taste.
    pub tau_set: Vec<f64>,
    pub phi_set: Vec<f64>,
    /// Joint pmf over the active layer's cells; uniform when omitted.
    pub pmf: Option<Vec<f64>>,
    pub participants: usize,
    pub sigma: f64,
    pub alpha: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub k_aoi: f64,
    pub mu: f64,
    pub fixed_cost_up: f64,
    pub c_tx: f64,
    pub c_sem: f64,
    pub fixed_cost_down: f64,
    pub c_res: f64,
    pub c_fps: f64,
}

impl Default for MarketSection {
    fn default() -> Self {
        let e = EconomicParams::default();
        Self {
            lambda_set: thirds(),
            gamma_set: thirds(),
            psi_set: thirds(),
            tau_set: thirds(),
            phi_set: thirds(),
            pmf: None,
            participants: 30,
            sigma: e.sigma,
            alpha: e.alpha,
            alpha1: e.alpha1,
            alpha2: e.alpha2,
            k_aoi: e.k_aoi,
            mu: e.mu,
            fixed_cost_up: e.fixed_cost_up,
            c_tx: e.c_tx,
            c_sem: e.c_sem,
            fixed_cost_down: e.fixed_cost_down,
            c_res: e.c_res,
            c_fps: e.c_fps,
        }
    }
}

impl MarketSection {
    pub fn econ(&self) -> EconomicParams {
        EconomicParams {
            sigma: self.sigma,
            alpha: self.alpha,
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            k_aoi: self.k_aoi,
            mu: self.mu,
            fixed_cost_up: self.fixed_cost_up,
            c_tx: self.c_tx,
            c_sem: self.c_sem,
            fixed_cost_down: self.fixed_cost_down,
            c_res: self.c_res,
            c_fps: self.c_fps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerChoice {
    Upstream,
    Downstream,
}

impl From<LayerChoice> for Layer {
    fn from(c: LayerChoice) -> Layer {
        match c {
            LayerChoice::Upstream => Layer::Upstream,
            LayerChoice::Downstream => Layer::Downstream,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeChoice {
    Augmented,
    Naive,
}

impl From<ModeChoice> for ObsMode {
    fn from(c: ModeChoice) -> ObsMode {
        match c {
            ModeChoice::Augmented => ObsMode::Augmented,
            ModeChoice::Naive => ObsMode::Naive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    pub layer: LayerChoice,
    pub mode: ModeChoice,
    pub range: f64,
    pub step: f64,
    pub base_price: Broadcast,
    pub base_quality: Broadcast,
    pub weights: [f64; 3],
    /// Steps per episode.
    pub horizon: usize,
}

impl Default for EnvSection {
    fn default() -> Self {
        Self {
            layer: LayerChoice::Upstream,
            mode: ModeChoice::Augmented,
            range: 0.9,
            step: 0.1,
            base_price: Broadcast::Scalar(1.0),
            base_quality: Broadcast::Scalar(1.0),
            weights: [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            horizon: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentSection {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub discount: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub per_alpha: f64,
    pub per_beta_start: f64,
    pub per_beta_end: f64,
    pub per_epsilon: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_decay_fraction: f64,
    pub target_sync_every: usize,
}

impl Default for AgentSection {
    fn default() -> Self {
        let h = AgentHyperparams::default();
        Self {
            hidden: h.hidden,
            lr: h.lr,
            discount: h.discount,
            batch_size: h.batch_size,
            replay_capacity: h.replay_capacity,
            per_alpha: h.per_alpha,
            per_beta_start: h.per_beta_start,
            per_beta_end: h.per_beta_end,
            per_epsilon: h.per_epsilon,
            eps_start: h.eps_start,
            eps_end: h.eps_end,
            eps_decay_fraction: h.eps_decay_fraction,
            target_sync_every: h.target_sync_every,
        }
    }
}

impl AgentSection {
    pub fn hyperparams(&self) -> AgentHyperparams {
        AgentHyperparams {
            hidden: self.hidden.clone(),
            lr: self.lr,
            discount: self.discount,
            batch_size: self.batch_size,
            replay_capacity: self.replay_capacity,
            per_alpha: self.per_alpha,
            per_beta_start: self.per_beta_start,
            per_beta_end: self.per_beta_end,
            per_epsilon: self.per_epsilon,
            eps_start: self.eps_start,
            eps_end: self.eps_end,
            eps_decay_fraction: self.eps_decay_fraction,
            target_sync_every: self.target_sync_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub convergence_window: usize,
    pub convergence_rel_tol: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self { episodes: 700, seeds: vec![1, 2, 3, 4, 5], convergence_window: 50, convergence_rel_tol: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub quality_min: f64,
    pub quality_max: f64,
    pub quality_points: usize,
    pub price_min: f64,
    pub price_max: f64,
    pub price_points: usize,
    pub max_evaluations: u64,
}

impl Default for OracleSection {
    fn default() -> Self {
        // matches the environment's reachable box for base 1.0, range 0.9
        Self {
            quality_min: 0.1,
            quality_max: 1.9,
            quality_points: 5,
            price_min: 0.1,
            price_max: 1.9,
            price_points: 5,
            max_evaluations: crate::oracle::DEFAULT_MAX_EVALUATIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "runs".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub market: MarketSection,
    pub env: EnvSection,
    pub agent: AgentSection,
    pub train: TrainSection,
    pub oracle: OracleSection,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text)
    }

    /// Builds the plan once to surface every invariant violation at load time.
    pub fn validate(&self) -> Result<()> {
        self.build_plan()?;
        self.grid_spec()?;
        Ok(())
    }

    pub fn build_model(&self) -> Result<LayerModel> {
        let econ = self.market.econ();
        match self.env.layer {
            LayerChoice::Upstream => {
                for &g in &self.market.gamma_set {
                    if g < GAMMA_MIN {
                        return Err(Error::Config(format!(
                            "refresh rate {g} below the minimum {GAMMA_MIN}"
                        )));
                    }
                }
                let grid = match &self.market.pmf {
                    None => TypeGrid::uniform(
                        self.market.lambda_set.clone(),
                        self.market.gamma_set.clone(),
                        self.market.psi_set.clone(),
                    )?,
                    Some(pmf) => TypeGrid::new(
                        self.market.lambda_set.clone(),
                        self.market.gamma_set.clone(),
                        self.market.psi_set.clone(),
                        pmf.clone(),
                    )?,
                };
                LayerModel::upstream(grid, econ)
            }
            LayerChoice::Downstream => {
                let grid = match &self.market.pmf {
                    None => UserGrid::uniform(self.market.tau_set.clone(), self.market.phi_set.clone())?,
                    Some(pmf) => UserGrid::new(
                        self.market.tau_set.clone(),
                        self.market.phi_set.clone(),
                        pmf.clone(),
                    )?,
                };
                LayerModel::downstream(grid, econ)
            }
        }
    }

    pub fn build_env_config(&self, model: &LayerModel) -> Result<EnvConfig> {
        let bundles = model.bundle_count();
        let dim = model.quality_dim();
        // Configured weights are relative; rescale so round triples like
        // (0.33, 0.33, 0.33) mean exact shares rather than a validation error.
        let sum: f64 = self.env.weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::Config(format!(
                "env.weights must have a positive sum, got {sum}"
            )));
        }
        let weights = [
            self.env.weights[0] / sum,
            self.env.weights[1] / sum,
            self.env.weights[2] / sum,
        ];
        let cfg = EnvConfig {
            mode: self.env.mode.into(),
            range: self.env.range,
            step: self.env.step,
            base_prices: self.env.base_price.resolve(bundles, "env.base_price")?,
            base_qualities: self.env.base_quality.resolve(bundles * dim, "env.base_quality")?,
            weights,
        };
        cfg.validate(bundles, dim)?;
        Ok(cfg)
    }

    pub fn build_plan(&self) -> Result<ExperimentPlan> {
        let model = self.build_model()?;
        let env = self.build_env_config(&model)?;
        let plan = ExperimentPlan {
            model,
            env,
            participants: self.market.participants,
            episodes: self.train.episodes,
            steps_per_episode: self.env.horizon,
            hp: self.agent.hyperparams(),
            seeds: self.train.seeds.clone(),
            convergence: ConvergenceSpec {
                window: self.train.convergence_window,
                rel_tol: self.train.convergence_rel_tol,
            },
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Candidate grids for the exhaustive search, one axis per quality
    /// dimension of the configured layer.
    pub fn grid_spec(&self) -> Result<GridSpec> {
        let dim = match self.env.layer {
            LayerChoice::Upstream => 1,
            LayerChoice::Downstream => 2,
        };
        let mut spec = GridSpec::linear(
            &vec![(self.oracle.quality_min, self.oracle.quality_max); dim],
            self.oracle.quality_points,
            (self.oracle.price_min, self.oracle.price_max),
            self.oracle.price_points,
        )?;
        spec.max_evaluations = self.oracle.max_evaluations;
        spec.validate()?;
        Ok(spec)
    }
}
