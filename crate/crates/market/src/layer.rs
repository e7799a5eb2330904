//! A uniform view over the two market layers so the environment, oracle, and
//! orchestrator can treat "a menu" identically whether bundles carry one
//! quality knob (upstream data size) or two (downstream resolution, refresh).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{
    self, DownstreamBundle, EconomicParams, FeasibilityReport, TypeGrid, UpstreamBundle, UserGrid,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Upstream,
    Downstream,
}

impl std::fmt::Display for Layer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Layer::Upstream => write!(f, "upstream"),
            Layer::Downstream => write!(f, "downstream"),
        }
    }
}

/// Menu under adjustment: per-bundle quality coordinates (flat, `quality_dim`
/// values per bundle) and prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Menu {
    pub quality_dim: usize,
    pub qualities: Vec<f64>,
    pub prices: Vec<f64>,
}

impl Menu {
    pub fn new(quality_dim: usize, qualities: Vec<f64>, prices: Vec<f64>) -> Result<Self> {
        if quality_dim == 0 || qualities.len() != prices.len() * quality_dim {
            return Err(Error::DimensionMismatch {
                expected: prices.len() * quality_dim.max(1),
                actual: qualities.len(),
            });
        }
        Ok(Self { quality_dim, qualities, prices })
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn quality(&self, bundle: usize) -> &[f64] {
        &self.qualities[bundle * self.quality_dim..(bundle + 1) * self.quality_dim]
    }
}

/// One market layer's economics bound to its type grid. Construction validates
/// everything the per-call paths rely on, so evaluation methods are infallible.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerModel {
    Upstream { grid: TypeGrid, econ: EconomicParams },
    Downstream { grid: UserGrid, econ: EconomicParams },
}

impl LayerModel {
    pub fn upstream(grid: TypeGrid, econ: EconomicParams) -> Result<Self> {
        econ.validate_for_grid(&grid)?;
        Ok(Self::Upstream { grid, econ })
    }

    pub fn downstream(grid: UserGrid, econ: EconomicParams) -> Result<Self> {
        econ.validate()?;
        Ok(Self::Downstream { grid, econ })
    }

    pub fn layer(&self) -> Layer {
        match self {
            Self::Upstream { .. } => Layer::Upstream,
            Self::Downstream { .. } => Layer::Downstream,
        }
    }

    pub fn bundle_count(&self) -> usize {
        match self {
            Self::Upstream { grid, .. } => grid.len(),
            Self::Downstream { grid, .. } => grid.len(),
        }
    }

    pub fn quality_dim(&self) -> usize {
        match self {
            Self::Upstream { .. } => 1,
            Self::Downstream { .. } => 2,
        }
    }

    pub fn pmf(&self) -> &[f64] {
        match self {
            Self::Upstream { grid, .. } => grid.pmf(),
            Self::Downstream { grid, .. } => grid.pmf(),
        }
    }

    pub fn econ(&self) -> &EconomicParams {
        match self {
            Self::Upstream { econ, .. } => econ,
            Self::Downstream { econ, .. } => econ,
        }
    }

    /// Swaps the joint pmf over types, keeping axes and economics.
    pub fn with_pmf(&self, pmf: Vec<f64>) -> Result<Self> {
        match self {
            Self::Upstream { grid, econ } => {
                Ok(Self::Upstream { grid: grid.with_pmf(pmf)?, econ: *econ })
            }
            Self::Downstream { grid, econ } => {
                Ok(Self::Downstream { grid: grid.with_pmf(pmf)?, econ: *econ })
            }
        }
    }

    /// Type coordinates of a cell, for artifacts and labels.
    pub fn cell_coords(&self, cell: usize) -> Vec<f64> {
        match self {
            Self::Upstream { grid, .. } => {
                let t = grid.cell(cell);
                vec![t.lambda, t.gamma, t.psi]
            }
            Self::Downstream { grid, .. } => {
                let u = grid.cell(cell);
                vec![u.tau, u.phi]
            }
        }
    }

    fn upstream_bundle(quality: &[f64], price: f64) -> UpstreamBundle {
        UpstreamBundle { size: quality[0], price }
    }

    fn downstream_bundle(quality: &[f64], price: f64) -> DownstreamBundle {
        DownstreamBundle { resolution: quality[0], refresh: quality[1], price }
    }

    /// Utility of the type in `cell` when accepting the given bundle.
    pub fn participant_utility(&self, cell: usize, quality: &[f64], price: f64) -> f64 {
        match self {
            Self::Upstream { grid, econ } => {
                market::device_utility(&Self::upstream_bundle(quality, price), &grid.cell(cell), econ)
                    .expect("validated upstream inputs")
            }
            Self::Downstream { grid, econ } => {
                market::user_utility(&grid.cell(cell), &Self::downstream_bundle(quality, price), econ)
                    .expect("validated downstream inputs")
            }
        }
    }

    /// Provider surplus from the type in `cell` accepting the given bundle.
    pub fn vsp_surplus(&self, cell: usize, quality: &[f64], price: f64) -> f64 {
        match self {
            Self::Upstream { grid, econ } => {
                market::vsp_device_surplus(&Self::upstream_bundle(quality, price), &grid.cell(cell), econ)
                    .expect("validated upstream inputs")
            }
            Self::Downstream { econ, .. } => {
                market::vsp_dt_surplus(&Self::downstream_bundle(quality, price), econ)
                    .expect("validated downstream inputs")
            }
        }
    }

    pub fn feasibility(&self, menu: &Menu) -> Result<FeasibilityReport> {
        if menu.quality_dim != self.quality_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.quality_dim(),
                actual: menu.quality_dim,
            });
        }
        if menu.len() != self.bundle_count() {
            return Err(Error::DimensionMismatch { expected: self.bundle_count(), actual: menu.len() });
        }
        let cells: Vec<usize> = (0..menu.len()).collect();
        let bundles: Vec<usize> = (0..menu.len()).collect();
        market::feasibility_report(&bundles, &cells, |&t, &b| {
            self.participant_utility(t, menu.quality(b), menu.prices[b])
        })
    }

    /// Expected objective with `participants * pmf` weights per cell.
    pub fn expected_total(&self, menu: &Menu, participants: f64) -> Result<f64> {
        self.check_menu(menu)?;
        let mut total = 0.0;
        for (cell, &p) in self.pmf().iter().enumerate() {
            total += participants * p * self.vsp_surplus(cell, menu.quality(cell), menu.prices[cell]);
        }
        Ok(total)
    }

    /// Realized objective with observed per-cell counts.
    pub fn realized_total(&self, menu: &Menu, counts: &[u32]) -> Result<f64> {
        self.check_menu(menu)?;
        if counts.len() != menu.len() {
            return Err(Error::DimensionMismatch { expected: menu.len(), actual: counts.len() });
        }
        let mut total = 0.0;
        for (cell, &n) in counts.iter().enumerate() {
            if n > 0 {
                total += n as f64 * self.vsp_surplus(cell, menu.quality(cell), menu.prices[cell]);
            }
        }
        Ok(total)
    }

    /// Per-cell utilities at designated bundles and at each type's best response.
    pub fn utility_profile(&self, menu: &Menu) -> Result<UtilityProfile> {
        self.check_menu(menu)?;
        let k = menu.len();
        let mut designated = Vec::with_capacity(k);
        let mut best_response = Vec::with_capacity(k);
        let mut best_index = Vec::with_capacity(k);
        for cell in 0..k {
            let own = self.participant_utility(cell, menu.quality(cell), menu.prices[cell]);
            designated.push(own);
            let values: Vec<f64> = (0..k)
                .map(|b| self.participant_utility(cell, menu.quality(b), menu.prices[b]))
                .collect();
            let idx = market::argmax_lowest(&values)?;
            best_index.push(idx);
            best_response.push(values[idx]);
        }
        Ok(UtilityProfile { designated, best_response, best_index })
    }

    fn check_menu(&self, menu: &Menu) -> Result<()> {
        if menu.quality_dim != self.quality_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.quality_dim(),
                actual: menu.quality_dim,
            });
        }
        if menu.len() != self.bundle_count() {
            return Err(Error::DimensionMismatch { expected: self.bundle_count(), actual: menu.len() });
        }
        Ok(())
    }
}

/// Utilities per type at its designated bundle and at its best response.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityProfile {
    pub designated: Vec<f64>,
    pub best_response: Vec<f64>,
    pub best_index: Vec<usize>,
}

impl UtilityProfile {
    /// Count-weighted mean of designated utilities; 0 when no participants.
    pub fn mean_designated(&self, counts: &[u32]) -> f64 {
        weighted_mean(&self.designated, counts)
    }

    pub fn mean_best_response(&self, counts: &[u32]) -> f64 {
        weighted_mean(&self.best_response, counts)
    }
}

fn weighted_mean(values: &[f64], counts: &[u32]) -> f64 {
    let total: u32 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    values
        .iter()
        .zip(counts)
        .map(|(&v, &n)| v * n as f64)
        .sum::<f64>()
        / total as f64
}

/// Draws `n` participants from the joint pmf and returns per-cell counts.
pub fn sample_counts(pmf: &[f64], n: usize, rng: &mut impl Rng) -> Vec<u32> {
    let mut counts = vec![0u32; pmf.len()];
    for _ in 0..n {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = pmf.len() - 1;
        for (i, &p) in pmf.iter().enumerate() {
            acc += p;
            if u < acc {
                chosen = i;
                break;
            }
        }
        counts[chosen] += 1;
    }
    counts
}

/// Joint pmf from per-axis weight profiles (outer product, normalized).
pub fn pmf_from_axis_weights(axis_weights: &[Vec<f64>]) -> Result<Vec<f64>> {
    if axis_weights.is_empty() {
        return Err(Error::Config("no axes given".into()));
    }
    for w in axis_weights {
        if w.is_empty() || w.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::Config("axis weights must be nonnegative and finite".into()));
        }
        if w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config("axis weights must not all be zero".into()));
        }
    }
    let mut pmf = vec![1.0];
    for w in axis_weights {
        let mut next = Vec::with_capacity(pmf.len() * w.len());
        for &a in &pmf {
            for &b in w {
                next.push(a * b);
            }
        }
        pmf = next;
    }
    let sum: f64 = pmf.iter().sum();
    for p in &mut pmf {
        *p /= sum;
    }
    Ok(pmf)
}
