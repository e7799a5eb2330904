use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use contract_market::agent::PddqlAgent;
use contract_market::checkpoint::{load_net_from_path, save_net_to_path};
use contract_market::config::{LayerChoice, RunConfig};
use contract_market::layer::pmf_from_axis_weights;
use contract_market::metrics::{read_metrics_from_path, write_metrics_to_path, MetricsRow};
use contract_market::oracle::brute_force_optimal;
use contract_market::orchestrator::{compare_modes, distribution_shift_eval, train, RunResult};
use contract_market::rng;
use contract_market::Error as MarketError;

use crate::artifacts::{percentile, MenuArtifact, OracleArtifact};
use crate::{OutputArgs, RunArgs, ShiftArgs};

pub const OUT_ENV_VAR: &str = "CONTRACT_MARKET_OUT";

/// Output root precedence: --out flag, then the environment variable, then
/// the config's output section.
fn resolve_out(flag: &Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os(OUT_ENV_VAR).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir))
}

fn load_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => RunConfig::default(),
    };
    if !args.seeds.is_empty() {
        cfg.train.seeds = args.seeds.clone();
    }
    if let Some(mode) = args.mode {
        cfg.env.mode = mode.into();
    }
    if let Some(layer) = args.layer {
        cfg.env.layer = layer.into();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn metrics_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("metrics_seed{seed}.csv"))
}

fn write_run_artifacts(dir: &Path, cfg: &RunConfig, result: &RunResult) -> Result<()> {
    let model = cfg.build_model()?;
    write_metrics_to_path(&result.metrics, metrics_path(dir, result.seed))?;
    let artifact = MenuArtifact::build(
        &model,
        &result.best.menu,
        &result.counts,
        cfg.market.participants as f64,
        result.seed,
        result.best.episode,
    )?;
    artifact.write(dir.join(format!("menu_seed{}.json", result.seed)))?;
    let ckpt_dir = dir.join(format!("checkpoints_seed{}", result.seed));
    for (i, agent) in result.agents.iter().enumerate() {
        save_net_to_path(agent.online(), ckpt_dir.join(format!("agent_{i:02}.ckpt")))?;
    }
    Ok(())
}

fn final_window_mean(rows: &[MetricsRow], window: usize, f: impl Fn(&MetricsRow) -> f64) -> f64 {
    let w = window.min(rows.len()).max(1);
    let tail = &rows[rows.len() - w..];
    tail.iter().map(&f).sum::<f64>() / tail.len() as f64
}

pub fn cmd_train(args: &RunArgs, out: &OutputArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let plan = cfg.build_plan()?;
    let dir = resolve_out(&out.out, &cfg);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let results = train(&plan)?;
    for result in &results {
        write_run_artifacts(&dir, &cfg, result)?;
        let converged = result
            .converged_at
            .map(|e| format!("episode {e}"))
            .unwrap_or_else(|| "never".into());
        println!(
            "seed {seed}: best menu at episode {ep} ({viol} violations, revenue {rev}), converged {converged}",
            seed = result.seed,
            ep = result.best.episode,
            viol = result.best.violations,
            rev = result.best.revenue,
        );
    }
    println!("wrote {} run(s) to {}", results.len(), dir.display());
    Ok(())
}

pub fn cmd_compare(args: &RunArgs, out: &OutputArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let plan = cfg.build_plan()?;
    let dir = resolve_out(&out.out, &cfg);
    fs::create_dir_all(&dir)?;
    let pairs = compare_modes(&plan)?;
    let window = plan.convergence.window;
    let mut summary = String::from(
        "seed,aug_final_ir,aug_final_ic,aug_final_revenue,naive_final_ir,naive_final_ic,naive_final_revenue,ic_delta\n",
    );
    for pair in &pairs {
        write_metrics_to_path(
            &pair.augmented.metrics,
            dir.join(format!("metrics_seed{}_augmented.csv", pair.seed)),
        )?;
        write_metrics_to_path(
            &pair.naive.metrics,
            dir.join(format!("metrics_seed{}_naive.csv", pair.seed)),
        )?;
        let aug_ir = final_window_mean(&pair.augmented.metrics, window, |r| r.ir_violations as f64);
        let aug_ic = final_window_mean(&pair.augmented.metrics, window, |r| r.ic_violations as f64);
        let aug_rev = final_window_mean(&pair.augmented.metrics, window, |r| r.vsp_revenue);
        let n_ir = final_window_mean(&pair.naive.metrics, window, |r| r.ir_violations as f64);
        let n_ic = final_window_mean(&pair.naive.metrics, window, |r| r.ic_violations as f64);
        let n_rev = final_window_mean(&pair.naive.metrics, window, |r| r.vsp_revenue);
        summary += &format!(
            "{},{},{},{},{},{},{},{}\n",
            pair.seed,
            aug_ir,
            aug_ic,
            aug_rev,
            n_ir,
            n_ic,
            n_rev,
            n_ic - aug_ic
        );
        println!(
            "seed {}: final-window IC augmented {aug_ic} vs naive {n_ic}",
            pair.seed
        );
    }
    fs::write(dir.join("compare_summary.csv"), summary)?;
    println!("wrote {} paired run(s) to {}", pairs.len(), dir.display());
    Ok(())
}

pub fn cmd_oracle(args: &RunArgs, out: &OutputArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let model = cfg.build_model()?;
    let spec = cfg.grid_spec()?;
    let dir = resolve_out(&out.out, &cfg);
    fs::create_dir_all(&dir)?;
    let participants = cfg.market.participants as f64;
    match brute_force_optimal(&model, &spec, participants) {
        Ok(Some(sol)) => {
            let artifact =
                OracleArtifact::build(&model, Some(&sol.menu), sol.objective, sol.nodes_visited, participants)?;
            artifact.write(dir.join("oracle_solution.json"))?;
            println!(
                "optimal objective {} over {} nodes; menu written to {}",
                sol.objective,
                sol.nodes_visited,
                dir.join("oracle_solution.json").display()
            );
            Ok(())
        }
        Ok(None) => {
            let artifact = OracleArtifact::infeasible(&model);
            artifact.write(dir.join("oracle_solution.json"))?;
            println!("no menu on the candidate grids satisfies every constraint");
            Ok(())
        }
        Err(MarketError::EnumerationCap(msg)) => {
            bail!("refusing to enumerate: {msg}")
        }
        Err(e) => Err(e.into()),
    }
}

const REPORT_METRICS: [(&str, fn(&MetricsRow) -> f64); 7] = [
    ("reward_final", |r| r.reward_final),
    ("reward_total", |r| r.reward_total),
    ("ir_violations", |r| r.ir_violations as f64),
    ("ic_violations", |r| r.ic_violations as f64),
    ("vsp_revenue", |r| r.vsp_revenue),
    ("util_designated", |r| r.util_designated),
    ("util_best_response", |r| r.util_best_response),
];

/// Seeds with a plain `metrics_seed<seed>.csv` in the directory, ascending.
fn discover_seeds(dir: &Path) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if let Some(mid) = name.strip_prefix("metrics_seed").and_then(|s| s.strip_suffix(".csv")) {
            if let Ok(seed) = mid.parse::<u64>() {
                seeds.push(seed);
            }
        }
    }
    seeds.sort_unstable();
    if seeds.is_empty() {
        bail!("no metrics_seed<seed>.csv files in {}", dir.display());
    }
    Ok(seeds)
}

pub fn cmd_report(run_dir: &Path) -> Result<()> {
    let seeds = discover_seeds(run_dir)?;
    let mut series = String::from("seed,episode,metric,value\n");
    let mut summary = String::from("seed,metric,median,p25,p75\n");
    let mut feasibility =
        String::from("seed,window_start,ir_rate_under_10pct,ic_rate_under_10pct,both_under_10pct\n");
    for &seed in &seeds {
        let rows = read_metrics_from_path(metrics_path(run_dir, seed))?;
        let bundles = MenuArtifact::read(run_dir.join(format!("menu_seed{seed}.json")))
            .map(|m| m.entries.len())
            .with_context(|| format!("menu artifact for seed {seed} (needed for violation rates)"))?;
        for row in &rows {
            for (name, get) in REPORT_METRICS {
                series += &format!("{seed},{},{name},{}\n", row.episode, get(row));
            }
        }
        // final-epoch window: episodes from the midpoint on (350..=700 for 700)
        let total = rows.len() as u64;
        let window_start = total / 2;
        let window: Vec<&MetricsRow> = rows.iter().filter(|r| r.episode >= window_start).collect();
        if window.is_empty() {
            bail!("seed {seed}: empty metrics file");
        }
        for (name, get) in REPORT_METRICS {
            let vals: Vec<f64> = window.iter().map(|r| get(r)).collect();
            summary += &format!(
                "{seed},{name},{},{},{}\n",
                percentile(&vals, 0.5),
                percentile(&vals, 0.25),
                percentile(&vals, 0.75)
            );
        }
        let under = |get: fn(&MetricsRow) -> f64| {
            window.iter().filter(|r| get(r) / (bundles as f64) < 0.1).count() as f64 / window.len() as f64
        };
        let ir_rate = under(|r| r.ir_violations as f64);
        let ic_rate = under(|r| r.ic_violations as f64);
        let both = window
            .iter()
            .filter(|r| {
                (r.ir_violations as f64) / (bundles as f64) < 0.1
                    && (r.ic_violations as f64) / (bundles as f64) < 0.1
            })
            .count() as f64
            / window.len() as f64;
        feasibility += &format!("{seed},{window_start},{ir_rate},{ic_rate},{both}\n");
        println!(
            "seed {seed}: {} episodes, window from {window_start}, IR under 10% in {:.0}% of window episodes",
            rows.len(),
            ir_rate * 100.0
        );
    }
    fs::write(run_dir.join("report_series.csv"), series)?;
    fs::write(run_dir.join("report_summary.csv"), summary)?;
    fs::write(run_dir.join("report_feasibility.csv"), feasibility)?;
    println!("wrote report_series.csv, report_summary.csv, report_feasibility.csv to {}", run_dir.display());
    Ok(())
}

/// Per-axis weights for the three evaluation scenarios. Low-weighted favors
/// the smallest type on every axis, high-weighted the largest.
fn scenario_pmf(axis_lens: &[usize], scenario: &str) -> Result<Vec<f64>> {
    let weights: Vec<Vec<f64>> = axis_lens
        .iter()
        .map(|&n| {
            (0..n)
                .map(|i| match scenario {
                    "uniform" => 1.0,
                    "low" => (n - i) as f64,
                    "high" => (i + 1) as f64,
                    _ => unreachable!(),
                })
                .collect()
        })
        .collect();
    Ok(pmf_from_axis_weights(&weights)?)
}

fn load_agents(cfg: &RunConfig, dir: &Path, seed: u64, bundles: usize) -> Result<Vec<PddqlAgent>> {
    let ckpt_dir = dir.join(format!("checkpoints_seed{seed}"));
    let hp = cfg.agent.hyperparams();
    let mut agents = Vec::with_capacity(bundles);
    for i in 0..bundles {
        let path = ckpt_dir.join(format!("agent_{i:02}.ckpt"));
        let net = load_net_from_path(&path)
            .map_err(|e| anyhow!("loading checkpoint {}: {e}", path.display()))?;
        agents.push(PddqlAgent::from_net(
            net,
            hp.clone(),
            rng::derive_seed(seed, rng::agent_act_stream(i)),
            rng::derive_seed(seed, rng::agent_replay_stream(i)),
        )?);
    }
    Ok(agents)
}

pub fn cmd_shift(args: &ShiftArgs) -> Result<()> {
    let run_args = RunArgs {
        config: args.config.clone(),
        seeds: Vec::new(),
        mode: args.mode,
        layer: args.layer,
    };
    let cfg = load_config(&run_args)?;
    let model = cfg.build_model()?;
    let env_cfg = cfg.build_env_config(&model)?;
    let axis_lens: Vec<usize> = match cfg.env.layer {
        LayerChoice::Upstream => vec![
            cfg.market.lambda_set.len(),
            cfg.market.gamma_set.len(),
            cfg.market.psi_set.len(),
        ],
        LayerChoice::Downstream => vec![cfg.market.tau_set.len(), cfg.market.phi_set.len()],
    };
    let dir = &args.run_dir;
    let mut seeds: Vec<u64> = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if let Some(s) = name.strip_prefix("checkpoints_seed") {
            if let Ok(seed) = s.parse::<u64>() {
                seeds.push(seed);
            }
        }
    }
    seeds.sort_unstable();
    if !args.seeds.is_empty() {
        seeds.retain(|s| args.seeds.contains(s));
    }
    if seeds.is_empty() {
        bail!("no checkpoints_seed<seed> directories to evaluate in {}", dir.display());
    }
    let mut summary =
        String::from("seed,scenario,mean_ir_violations,mean_ic_violations,mean_revenue,mean_util_designated\n");
    for &seed in &seeds {
        let agents = load_agents(&cfg, dir, seed, model.bundle_count())?;
        for scenario in ["uniform", "low", "high"] {
            let pmf = scenario_pmf(&axis_lens, scenario)?;
            let rows = distribution_shift_eval(
                &model,
                &env_cfg,
                &agents,
                pmf,
                cfg.market.participants,
                args.episodes,
                cfg.env.horizon,
                seed,
            )?;
            write_metrics_to_path(&rows, dir.join(format!("shift_metrics_seed{seed}_{scenario}.csv")))?;
            let n = rows.len() as f64;
            let mean = |f: fn(&MetricsRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
            summary += &format!(
                "{seed},{scenario},{},{},{},{}\n",
                mean(|r| r.ir_violations as f64),
                mean(|r| r.ic_violations as f64),
                mean(|r| r.vsp_revenue),
                mean(|r| r.util_designated)
            );
            println!(
                "seed {seed} {scenario}: mean violations {}",
                mean(|r| (r.ir_violations + r.ic_violations) as f64)
            );
        }
    }
    let mut f = fs::File::create(dir.join("shift_summary.csv"))?;
    f.write_all(summary.as_bytes())?;
    println!("wrote shift_summary.csv to {}", dir.display());
    Ok(())
}
