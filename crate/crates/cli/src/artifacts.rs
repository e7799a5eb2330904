//! Output file formats beyond the metrics CSV: the per-type menu artifact,
//! run summaries, and the percentile helpers behind the report tables.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use contract_market::layer::{LayerModel, Menu};
use contract_market::orchestrator::evaluate_menu;

/// One menu line: the type it targets, what it offers, and how that type
/// reacts. Everything needed to audit the contract by hand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MenuEntry {
    pub type_coords: Vec<f64>,
    pub quality: Vec<f64>,
    pub price: f64,
    pub ir_violated: u8,
    pub ic_violated: u8,
    pub designated_utility: f64,
    pub best_response_utility: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MenuArtifact {
    pub seed: u64,
    pub layer: String,
    /// 1-based episode whose end state produced this menu; 0 for menus that
    /// did not come from training (oracle output).
    pub episode: u64,
    pub feasible: bool,
    pub ir_violations: usize,
    pub ic_violations: usize,
    pub expected_revenue: f64,
    pub realized_revenue: f64,
    pub entries: Vec<MenuEntry>,
}

impl MenuArtifact {
    pub fn build(
        model: &LayerModel,
        menu: &Menu,
        counts: &[u32],
        participants: f64,
        seed: u64,
        episode: u64,
    ) -> Result<Self> {
        let eval = evaluate_menu(model, menu, counts, participants)
            .context("evaluating menu for artifact")?;
        let entries = (0..menu.len())
            .map(|i| MenuEntry {
                type_coords: model.cell_coords(i),
                quality: menu.quality(i).to_vec(),
                price: menu.prices[i],
                ir_violated: eval.ir[i],
                ic_violated: eval.ic[i],
                designated_utility: eval.designated_utilities[i],
                best_response_utility: eval.best_response_utilities[i],
            })
            .collect();
        Ok(Self {
            seed,
            layer: model.layer().to_string(),
            episode,
            feasible: eval.feasible,
            ir_violations: eval.ir.iter().map(|&b| b as usize).sum(),
            ic_violations: eval.ic.iter().map(|&b| b as usize).sum(),
            expected_revenue: eval.expected_revenue,
            realized_revenue: eval.realized_revenue,
            entries,
        })
    }

    pub fn write<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path.as_ref(), text + "\n")
            .with_context(|| format!("writing {}", path.as_ref().display()))?;
        Ok(())
    }

    pub fn read<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .with_context(|| format!("reading {}", path.as_ref().display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Result of the exhaustive grid search, feasible or not. Realized quantities
/// are omitted on purpose: the search optimizes the expected objective.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleArtifact {
    pub layer: String,
    pub feasible: bool,
    pub objective: Option<f64>,
    pub nodes_visited: u64,
    pub entries: Vec<MenuEntry>,
}

impl OracleArtifact {
    pub fn build(
        model: &LayerModel,
        menu: Option<&Menu>,
        objective: f64,
        nodes_visited: u64,
        participants: f64,
    ) -> Result<Self> {
        let menu = menu.expect("feasible artifact needs a menu");
        let zero_counts = vec![0u32; menu.len()];
        let eval = evaluate_menu(model, menu, &zero_counts, participants)?;
        let entries = (0..menu.len())
            .map(|i| MenuEntry {
                type_coords: model.cell_coords(i),
                quality: menu.quality(i).to_vec(),
                price: menu.prices[i],
                ir_violated: eval.ir[i],
                ic_violated: eval.ic[i],
                designated_utility: eval.designated_utilities[i],
                best_response_utility: eval.best_response_utilities[i],
            })
            .collect();
        Ok(Self {
            layer: model.layer().to_string(),
            feasible: eval.feasible,
            objective: Some(objective),
            nodes_visited,
            entries,
        })
    }

    pub fn infeasible(model: &LayerModel) -> Self {
        Self {
            layer: model.layer().to_string(),
            feasible: false,
            objective: None,
            nodes_visited: 0,
            entries: Vec::new(),
        }
    }

    pub fn write<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path.as_ref(), text + "\n")
            .with_context(|| format!("writing {}", path.as_ref().display()))?;
        Ok(())
    }

}

/// Linear-interpolation percentile (the convention box-plot tooling uses).
/// `q` in [0, 1]; the input need not be sorted.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of empty slice");
    assert!((0.0..=1.0).contains(&q));
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in metric series"));
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}
