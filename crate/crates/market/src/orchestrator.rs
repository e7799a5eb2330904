//! Training loop wiring agents to the market environment.
//!
//! Every iteration follows the same two-phase shape: all agents pick actions
//! against the pre-step state, the environment applies them in one step, and
//! only then does each agent store its transition and run one learner update,
//! in agent-index order. Exploration and importance-weight schedules advance
//! on a global step counter spanning all episodes.

use std::time::Instant;

use crate::agent::{AgentHyperparams, PddqlAgent, Transition};
use crate::env::{BundleAction, EnvConfig, MarketEnv, ObsMode};
use crate::error::{Error, Result};
use crate::layer::{sample_counts, LayerModel, Menu};
use crate::metrics::MetricsRow;
use crate::parallel::maybe_par_map;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSpec {
    /// Sliding window length in episodes.
    pub window: usize,
    /// Relative tolerance on the change of windowed mean final-step revenue.
    pub rel_tol: f64,
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        Self { window: 50, rel_tol: 0.01 }
    }
}

impl ConvergenceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Config("convergence window must be positive".into()));
        }
        if !(self.rel_tol > 0.0) || !self.rel_tol.is_finite() {
            return Err(Error::Config(format!(
                "convergence tolerance must be positive, got {}",
                self.rel_tol
            )));
        }
        Ok(())
    }
}

/// Complete description of one training experiment.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub model: LayerModel,
    pub env: EnvConfig,
    /// Participants drawn from the type distribution once per run.
    pub participants: usize,
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub hp: AgentHyperparams,
    pub seeds: Vec<u64>,
    pub convergence: ConvergenceSpec,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be at least 1".into()));
        }
        if self.steps_per_episode == 0 {
            return Err(Error::Config("steps per episode must be at least 1".into()));
        }
        if self.participants == 0 {
            return Err(Error::Config("participant count must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed required".into()));
        }
        self.env.validate(self.model.bundle_count(), self.model.quality_dim())?;
        self.hp.validate()?;
        self.convergence.validate()
    }

    /// Same plan with the observation mode swapped (paired-mode comparisons).
    pub fn with_mode(&self, mode: ObsMode) -> Self {
        let mut plan = self.clone();
        plan.env.mode = mode;
        plan
    }

    pub fn total_steps(&self) -> usize {
        self.episodes * self.steps_per_episode
    }
}

/// Menu with the best constraint/revenue record seen at any episode end.
#[derive(Debug, Clone)]
pub struct BestMenu {
    pub menu: Menu,
    /// 1-based episode whose end state produced this menu.
    pub episode: u64,
    pub violations: usize,
    pub revenue: f64,
}

pub struct RunResult {
    pub seed: u64,
    pub metrics: Vec<MetricsRow>,
    /// Lowest violation count first, then highest realized revenue; earlier
    /// episodes win exact ties.
    pub best: BestMenu,
    /// 1-based episode at which the convergence rule first held, if ever.
    pub converged_at: Option<u64>,
    pub final_menu: Menu,
    /// Realized per-cell participant counts used throughout the run.
    pub counts: Vec<u32>,
    pub agents: Vec<PddqlAgent>,
}

/// One joint environment step plus the per-agent store/learn pass.
pub struct IterationOutcome {
    pub reward: f64,
    pub actions: Vec<BundleAction>,
}

pub fn run_iteration(
    env: &mut MarketEnv,
    agents: &mut [PddqlAgent],
    epsilon: f64,
    beta: f64,
) -> Result<IterationOutcome> {
    let bundles = env.model().bundle_count();
    if agents.len() != bundles {
        return Err(Error::DimensionMismatch { expected: bundles, actual: agents.len() });
    }
    // phase 1: everyone observes the same pre-step state and commits an action
    let pre: Vec<Vec<f64>> = (0..bundles).map(|i| env.observe(i)).collect();
    let actions: Vec<BundleAction> = agents
        .iter_mut()
        .enumerate()
        .map(|(i, a)| BundleAction::from_index(a.act(&pre[i], epsilon)).expect("action index in range"))
        .collect();
    // phase 2: one joint step, then store + learn in agent-index order
    let reward = env.step(&actions)?;
    for (i, agent) in agents.iter_mut().enumerate() {
        agent.store(Transition {
            obs: pre[i].clone(),
            action: actions[i].index(),
            reward,
            next_obs: env.observe(i),
            terminal: false,
        });
        agent.learn(beta)?;
    }
    Ok(IterationOutcome { reward, actions })
}

/// First 1-based episode at which both convergence conditions hold: the
/// windowed mean of final-step revenue moved by at most `rel_tol` relative to
/// the previous window, and the windowed mean violation count did not grow.
pub fn convergence_episode(revenues: &[f64], violations: &[f64], spec: &ConvergenceSpec) -> Option<u64> {
    let w = spec.window;
    if revenues.len() != violations.len() {
        return None;
    }
    for e in (2 * w - 1)..revenues.len() {
        let recent_rev = mean(&revenues[e + 1 - w..=e]);
        let prev_rev = mean(&revenues[e + 1 - 2 * w..=e - w]);
        let scale = prev_rev.abs().max(1e-9);
        let revenue_settled = (recent_rev - prev_rev).abs() <= spec.rel_tol * scale;
        let recent_v = mean(&violations[e + 1 - w..=e]);
        let prev_v = mean(&violations[e + 1 - 2 * w..=e - w]);
        if revenue_settled && recent_v <= prev_v {
            return Some((e + 1) as u64);
        }
    }
    None
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn train_run(plan: &ExperimentPlan, master_seed: u64) -> Result<RunResult> {
    Ok(run_inner(plan, master_seed, false)?.0)
}

/// Like `train_run` but also returns the flat per-step reward trace
/// (episode-major), for conservation cross-checks.
pub fn train_run_traced(plan: &ExperimentPlan, master_seed: u64) -> Result<(RunResult, Vec<f64>)> {
    let (result, trace) = run_inner(plan, master_seed, true)?;
    Ok((result, trace.expect("trace requested")))
}

fn run_inner(
    plan: &ExperimentPlan,
    master_seed: u64,
    trace: bool,
) -> Result<(RunResult, Option<Vec<f64>>)> {
    plan.validate()?;
    let mut participants_rng = rng::rng_from(master_seed, rng::STREAM_PARTICIPANTS);
    let counts = sample_counts(plan.model.pmf(), plan.participants, &mut participants_rng);
    let mut env = MarketEnv::new(plan.model.clone(), plan.env.clone(), counts.clone())?;
    let obs_dim = env.observation_len();
    let bundles = plan.model.bundle_count();
    let mut agents = Vec::with_capacity(bundles);
    for i in 0..bundles {
        agents.push(PddqlAgent::new(
            obs_dim,
            plan.hp.clone(),
            rng::derive_seed(master_seed, rng::agent_init_stream(i)),
            rng::derive_seed(master_seed, rng::agent_act_stream(i)),
            rng::derive_seed(master_seed, rng::agent_replay_stream(i)),
        )?);
    }

    let total_steps = plan.total_steps();
    let mut metrics = Vec::with_capacity(plan.episodes);
    let mut step_trace = trace.then(|| Vec::with_capacity(total_steps));
    let mut best: Option<BestMenu> = None;
    let mut global_step = 0usize;

    for episode in 0..plan.episodes {
        let started = Instant::now();
        env.reset(rng::episode_seed(master_seed, episode));
        let mut reward_total = 0.0;
        let mut reward_final = 0.0;
        for _ in 0..plan.steps_per_episode {
            let epsilon = plan.hp.epsilon_at(global_step, total_steps);
            let beta = plan.hp.beta_at(global_step, total_steps);
            let outcome = run_iteration(&mut env, &mut agents, epsilon, beta)?;
            reward_total += outcome.reward;
            reward_final = outcome.reward;
            if let Some(t) = step_trace.as_mut() {
                t.push(outcome.reward);
            }
            global_step += 1;
        }
        let state = env.state();
        let revenue = env.realized_objective();
        let profile = plan.model.utility_profile(&state.menu)?;
        let violations = state.violation_count();
        let candidate_better = match &best {
            None => true,
            Some(b) => violations < b.violations || (violations == b.violations && revenue > b.revenue),
        };
        if candidate_better {
            best = Some(BestMenu {
                menu: state.menu.clone(),
                episode: (episode + 1) as u64,
                violations,
                revenue,
            });
        }
        metrics.push(MetricsRow {
            episode: (episode + 1) as u64,
            reward_final,
            reward_total,
            ir_violations: state.ir_count() as u64,
            ic_violations: state.ic_count() as u64,
            vsp_revenue: revenue,
            util_designated: profile.mean_designated(&counts),
            util_best_response: profile.mean_best_response(&counts),
            feasible: env.is_feasible(),
            seconds: started.elapsed().as_secs_f64(),
        });
    }

    let violations: Vec<f64> = metrics
        .iter()
        .map(|r| (r.ir_violations + r.ic_violations) as f64)
        .collect();
    let revenue_col: Vec<f64> = metrics.iter().map(|r| r.vsp_revenue).collect();
    let converged_at = convergence_episode(&revenue_col, &violations, &plan.convergence);

    let final_menu = env.state().menu.clone();
    Ok((
        RunResult {
            seed: master_seed,
            metrics,
            best: best.expect("episodes >= 1"),
            converged_at,
            final_menu,
            counts,
            agents,
        },
        step_trace,
    ))
}

/// Trains every seed in the plan, in parallel when the feature allows, with
/// results in seed order regardless.
pub fn train(plan: &ExperimentPlan) -> Result<Vec<RunResult>> {
    plan.validate()?;
    let results = maybe_par_map(&plan.seeds, |&seed| train_run(plan, seed));
    results.into_iter().collect()
}

/// Full constraint/utility/revenue record for an arbitrary menu.
#[derive(Debug, Clone)]
pub struct MenuEvaluation {
    pub ir: Vec<u8>,
    pub ic: Vec<u8>,
    pub feasible: bool,
    pub expected_revenue: f64,
    pub realized_revenue: f64,
    pub designated_utilities: Vec<f64>,
    pub best_response_utilities: Vec<f64>,
}

pub fn evaluate_menu(
    model: &LayerModel,
    menu: &Menu,
    counts: &[u32],
    participants: f64,
) -> Result<MenuEvaluation> {
    let report = model.feasibility(menu)?;
    let profile = model.utility_profile(menu)?;
    Ok(MenuEvaluation {
        feasible: report.is_feasible(),
        ir: report.ir,
        ic: report.ic,
        expected_revenue: model.expected_total(menu, participants)?,
        realized_revenue: model.realized_total(menu, counts)?,
        designated_utilities: profile.designated,
        best_response_utilities: profile.best_response,
    })
}

/// Paired augmented/naive training on identical seeds.
pub struct ModeComparison {
    pub seed: u64,
    pub augmented: RunResult,
    pub naive: RunResult,
}

pub fn compare_modes(plan: &ExperimentPlan) -> Result<Vec<ModeComparison>> {
    let aug_plan = plan.with_mode(ObsMode::Augmented);
    let naive_plan = plan.with_mode(ObsMode::Naive);
    aug_plan.validate()?;
    let results = maybe_par_map(&plan.seeds, |&seed| -> Result<ModeComparison> {
        Ok(ModeComparison {
            seed,
            augmented: train_run(&aug_plan, seed)?,
            naive: train_run(&naive_plan, seed)?,
        })
    });
    results.into_iter().collect()
}

/// Replays trained agents greedily (no exploration, no updates) against a
/// market whose participants are drawn from `eval_pmf`. Episode resets and the
/// participant draw depend only on `eval_seed`, so evaluations under different
/// distributions share identical menu trajectories seed for seed.
pub fn distribution_shift_eval(
    model: &LayerModel,
    env_cfg: &EnvConfig,
    agents: &[PddqlAgent],
    eval_pmf: Vec<f64>,
    participants: usize,
    episodes: usize,
    steps_per_episode: usize,
    eval_seed: u64,
) -> Result<Vec<MetricsRow>> {
    if episodes == 0 || steps_per_episode == 0 {
        return Err(Error::Config("shift evaluation needs at least one episode and step".into()));
    }
    if participants == 0 {
        return Err(Error::Config("participant count must be at least 1".into()));
    }
    let shifted = model.with_pmf(eval_pmf)?;
    let mut pick_rng = rng::rng_from(eval_seed, rng::STREAM_SHIFT_EVAL);
    let counts = sample_counts(shifted.pmf(), participants, &mut pick_rng);
    let mut env = MarketEnv::new(shifted.clone(), env_cfg.clone(), counts.clone())?;
    if agents.len() != shifted.bundle_count() {
        return Err(Error::DimensionMismatch {
            expected: shifted.bundle_count(),
            actual: agents.len(),
        });
    }
    for a in agents {
        if a.obs_dim() != env.observation_len() {
            return Err(Error::DimensionMismatch {
                expected: env.observation_len(),
                actual: a.obs_dim(),
            });
        }
    }
    let mut metrics = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        let started = Instant::now();
        env.reset(rng::episode_seed(eval_seed, episode));
        let mut reward_total = 0.0;
        let mut reward_final = 0.0;
        for _ in 0..steps_per_episode {
            let actions: Vec<BundleAction> = agents
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    BundleAction::from_index(a.greedy(&env.observe(i))).expect("action index in range")
                })
                .collect();
            let reward = env.step(&actions)?;
            reward_total += reward;
            reward_final = reward;
        }
        let state = env.state();
        let profile = shifted.utility_profile(&state.menu)?;
        metrics.push(MetricsRow {
            episode: (episode + 1) as u64,
            reward_final,
            reward_total,
            ir_violations: state.ir_count() as u64,
            ic_violations: state.ic_count() as u64,
            vsp_revenue: env.realized_objective(),
            util_designated: profile.mean_designated(&counts),
            util_best_response: profile.mean_best_response(&counts),
            feasible: env.is_feasible(),
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok(metrics)
}
