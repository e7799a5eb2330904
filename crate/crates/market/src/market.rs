//! Market primitives for the two-layer contract problem: participant types,
//! menu bundles, the provider's economics on both layers, and the
//! rationality / incentive feasibility report for a menu.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values clamped below this are considered degenerate; quantities stay strictly positive.
pub const POSITIVE_FLOOR: f64 = 1e-6;

const PMF_TOL: f64 = 1e-9;

/// Sensing device type: semantic accuracy, data freshness (update rate), compression ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceType {
    pub lambda: f64,
    pub gamma: f64,
    pub psi: f64,
}

/// Digital twin consumer type: resolution preference and refresh-rate preference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserType {
    pub tau: f64,
    pub phi: f64,
}

/// Upstream menu item: requested semantic data size and offered payment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpstreamBundle {
    pub size: f64,
    pub price: f64,
}

/// Downstream menu item: delivered resolution, refresh rate, and asked price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DownstreamBundle {
    pub resolution: f64,
    pub refresh: f64,
    pub price: f64,
}

/// Finite joint type grid for devices, with one menu cell per (lambda, gamma, psi).
///
/// Cell index layout is row-major: `idx = (b * |gamma| + c) * |psi| + e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeGrid {
    lambda_set: Vec<f64>,
    gamma_set: Vec<f64>,
    psi_set: Vec<f64>,
    joint_pmf: Vec<f64>,
}

fn check_axis(name: &str, set: &[f64]) -> Result<()> {
    if set.is_empty() {
        return Err(Error::Config(format!("{name} set is empty")));
    }
    for &v in set {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::Config(format!("{name} values must be finite and positive, got {v}")));
        }
    }
    if set.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("{name} set must be strictly ascending")));
    }
    Ok(())
}

fn check_pmf(pmf: &[f64], cells: usize) -> Result<()> {
    if pmf.len() != cells {
        return Err(Error::DimensionMismatch { expected: cells, actual: pmf.len() });
    }
    let mut sum = 0.0;
    for &p in pmf {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::Config(format!("pmf entries must be finite and nonnegative, got {p}")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > PMF_TOL {
        return Err(Error::Config(format!("pmf must sum to 1 (got {sum})")));
    }
    Ok(())
}

impl TypeGrid {
    pub fn new(lambda_set: Vec<f64>, gamma_set: Vec<f64>, psi_set: Vec<f64>, joint_pmf: Vec<f64>) -> Result<Self> {
        check_axis("lambda", &lambda_set)?;
        check_axis("gamma", &gamma_set)?;
        check_axis("psi", &psi_set)?;
        check_pmf(&joint_pmf, lambda_set.len() * gamma_set.len() * psi_set.len())?;
        Ok(Self { lambda_set, gamma_set, psi_set, joint_pmf })
    }

    pub fn uniform(lambda_set: Vec<f64>, gamma_set: Vec<f64>, psi_set: Vec<f64>) -> Result<Self> {
        let cells = lambda_set.len() * gamma_set.len() * psi_set.len();
        if cells == 0 {
            return Err(Error::Config("type grid has no cells".into()));
        }
        let pmf = vec![1.0 / cells as f64; cells];
        Self::new(lambda_set, gamma_set, psi_set, pmf)
    }

    pub fn len(&self) -> usize {
        self.lambda_set.len() * self.gamma_set.len() * self.psi_set.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty axes
    }

    pub fn lambda_set(&self) -> &[f64] {
        &self.lambda_set
    }

    pub fn gamma_set(&self) -> &[f64] {
        &self.gamma_set
    }

    pub fn psi_set(&self) -> &[f64] {
        &self.psi_set
    }

    pub fn pmf(&self) -> &[f64] {
        &self.joint_pmf
    }

    pub fn index(&self, b: usize, c: usize, e: usize) -> usize {
        (b * self.gamma_set.len() + c) * self.psi_set.len() + e
    }

    pub fn cell(&self, idx: usize) -> DeviceType {
        let ne = self.psi_set.len();
        let nc = self.gamma_set.len();
        DeviceType {
            lambda: self.lambda_set[idx / (nc * ne)],
            gamma: self.gamma_set[(idx / ne) % nc],
            psi: self.psi_set[idx % ne],
        }
    }

    pub fn cells(&self) -> Vec<DeviceType> {
        (0..self.len()).map(|i| self.cell(i)).collect()
    }

    /// Replaces the joint pmf, keeping the axes.
    pub fn with_pmf(&self, joint_pmf: Vec<f64>) -> Result<Self> {
        check_pmf(&joint_pmf, self.len())?;
        Ok(Self { joint_pmf, ..self.clone() })
    }
}

/// Finite joint type grid for users; cell index layout `idx = t * |phi| + f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserGrid {
    tau_set: Vec<f64>,
    phi_set: Vec<f64>,
    joint_pmf: Vec<f64>,
}

impl UserGrid {
    pub fn new(tau_set: Vec<f64>, phi_set: Vec<f64>, joint_pmf: Vec<f64>) -> Result<Self> {
        check_axis("tau", &tau_set)?;
        check_axis("phi", &phi_set)?;
        check_pmf(&joint_pmf, tau_set.len() * phi_set.len())?;
        Ok(Self { tau_set, phi_set, joint_pmf })
    }

    pub fn uniform(tau_set: Vec<f64>, phi_set: Vec<f64>) -> Result<Self> {
        let cells = tau_set.len() * phi_set.len();
        if cells == 0 {
            return Err(Error::Config("user grid has no cells".into()));
        }
        let pmf = vec![1.0 / cells as f64; cells];
        Self::new(tau_set, phi_set, pmf)
    }

    pub fn len(&self) -> usize {
        self.tau_set.len() * self.phi_set.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tau_set(&self) -> &[f64] {
        &self.tau_set
    }

    pub fn phi_set(&self) -> &[f64] {
        &self.phi_set
    }

    pub fn pmf(&self) -> &[f64] {
        &self.joint_pmf
    }

    pub fn cell(&self, idx: usize) -> UserType {
        let nf = self.phi_set.len();
        UserType { tau: self.tau_set[idx / nf], phi: self.phi_set[idx % nf] }
    }

    pub fn cells(&self) -> Vec<UserType> {
        (0..self.len()).map(|i| self.cell(i)).collect()
    }

    pub fn with_pmf(&self, joint_pmf: Vec<f64>) -> Result<Self> {
        check_pmf(&joint_pmf, self.len())?;
        Ok(Self { joint_pmf, ..self.clone() })
    }
}

/// Economic constants shared by both market layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EconomicParams {
    /// Provider's valuation scale for semantic data.
    pub sigma: f64,
    /// Fairness exponent for the upstream valuation, in (0, 1).
    pub alpha: f64,
    /// Fairness exponent for resolution in the user valuation, in (0, 1).
    pub alpha1: f64,
    /// Fairness exponent for refresh rate in the user valuation, in (0, 1).
    pub alpha2: f64,
    /// Freshness budget; must dominate the age of information of every device type.
    pub k_aoi: f64,
    /// Service rate of the provider's update queue.
    pub mu: f64,
    pub fixed_cost_up: f64,
    pub c_tx: f64,
    pub c_sem: f64,
    pub fixed_cost_down: f64,
    pub c_res: f64,
    pub c_fps: f64,
}

impl Default for EconomicParams {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            alpha: 0.5,
            alpha1: 0.5,
            alpha2: 0.5,
            k_aoi: 5.0,
            mu: 1.0,
            fixed_cost_up: 0.05,
            c_tx: 0.25,
            c_sem: 0.25,
            fixed_cost_down: 0.05,
            c_res: 0.25,
            c_fps: 0.25,
        }
    }
}

impl EconomicParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("sigma", self.sigma),
            ("alpha", self.alpha),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("k_aoi", self.k_aoi),
            ("mu", self.mu),
            ("fixed_cost_up", self.fixed_cost_up),
            ("c_tx", self.c_tx),
            ("c_sem", self.c_sem),
            ("fixed_cost_down", self.fixed_cost_down),
            ("c_res", self.c_res),
            ("c_fps", self.c_fps),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        for (name, v) in [("alpha", self.alpha), ("alpha1", self.alpha1), ("alpha2", self.alpha2)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if self.sigma < 0.0 {
            return Err(Error::Config("sigma must be nonnegative".into()));
        }
        if self.mu <= 0.0 {
            return Err(Error::Config("mu must be positive".into()));
        }
        for (name, v) in [
            ("k_aoi", self.k_aoi),
            ("fixed_cost_up", self.fixed_cost_up),
            ("c_tx", self.c_tx),
            ("c_sem", self.c_sem),
            ("fixed_cost_down", self.fixed_cost_down),
            ("c_res", self.c_res),
            ("c_fps", self.c_fps),
        ] {
            if v < 0.0 {
                return Err(Error::Config(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    /// The freshness budget must cover the age of information of every update rate
    /// in the grid, so the per-device freshness term k_aoi - aoi stays nonnegative.
    pub fn validate_for_grid(&self, grid: &TypeGrid) -> Result<()> {
        self.validate()?;
        for &gamma in grid.gamma_set() {
            let age = aoi(gamma, self.mu)?;
            if self.k_aoi < age {
                return Err(Error::Config(format!(
                    "k_aoi = {} is below the age of information {age} at gamma = {gamma}",
                    self.k_aoi
                )));
            }
        }
        Ok(())
    }
}

/// Average age of information of updates arriving at rate `gamma` served at rate `mu`.
pub fn aoi(gamma: f64, mu: f64) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Domain(format!("update rate must be positive, got {gamma}")));
    }
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::Domain(format!("service rate must be positive, got {mu}")));
    }
    Ok(1.0 / gamma + 1.0 / mu)
}

/// Concave fairness valuation `x^(1 - alpha) / (1 - alpha)` with `alpha` in (0, 1).
pub fn alpha_fairness(x: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("fairness exponent must lie in (0, 1), got {alpha}")));
    }
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("fairness argument must be nonnegative, got {x}")));
    }
    Ok(x.powf(1.0 - alpha) / (1.0 - alpha))
}

fn check_device_type(t: &DeviceType) -> Result<()> {
    for (name, v) in [("lambda", t.lambda), ("gamma", t.gamma), ("psi", t.psi)] {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(())
}

/// Device's cost of fulfilling a bundle: fixed cost plus transmission and semantic
/// extraction effort, `fixed + c_tx * size * gamma / lambda + c_sem * size / psi`.
pub fn device_cost(bundle: &UpstreamBundle, dtype: &DeviceType, econ: &EconomicParams) -> Result<f64> {
    check_device_type(dtype)?;
    if !(bundle.size >= 0.0) || !bundle.size.is_finite() {
        return Err(Error::Domain(format!("bundle size must be nonnegative, got {}", bundle.size)));
    }
    Ok(econ.fixed_cost_up
        + econ.c_tx * bundle.size * dtype.gamma / dtype.lambda
        + econ.c_sem * bundle.size / dtype.psi)
}

/// Device's payoff from accepting a bundle: payment minus its own cost.
pub fn device_utility(bundle: &UpstreamBundle, dtype: &DeviceType, econ: &EconomicParams) -> Result<f64> {
    Ok(bundle.price - device_cost(bundle, dtype, econ)?)
}

/// Provider's per-device surplus on the upstream layer:
/// data value minus payment plus the freshness margin `k_aoi - aoi(gamma)`.
pub fn vsp_device_surplus(bundle: &UpstreamBundle, dtype: &DeviceType, econ: &EconomicParams) -> Result<f64> {
    check_device_type(dtype)?;
    let value = econ.sigma * alpha_fairness(bundle.size, econ.alpha)?;
    let freshness = econ.k_aoi - aoi(dtype.gamma, econ.mu)?;
    Ok(value - bundle.price + freshness)
}

fn check_menu_len(menu_len: usize, cells: usize) -> Result<()> {
    if menu_len != cells {
        return Err(Error::DimensionMismatch { expected: cells, actual: menu_len });
    }
    if menu_len == 0 {
        return Err(Error::EmptyMenu);
    }
    Ok(())
}

/// Expected upstream objective: surplus summed over cells weighted by `n_devices * pmf`.
pub fn vsp_total_upstream(
    menu: &[UpstreamBundle],
    grid: &TypeGrid,
    n_devices: f64,
    econ: &EconomicParams,
) -> Result<f64> {
    check_menu_len(menu.len(), grid.len())?;
    let mut total = 0.0;
    for (idx, bundle) in menu.iter().enumerate() {
        let weight = n_devices * grid.pmf()[idx];
        total += weight * vsp_device_surplus(bundle, &grid.cell(idx), econ)?;
    }
    Ok(total)
}

/// Realized upstream objective: surplus weighted by observed per-cell participant counts.
pub fn vsp_total_upstream_realized(
    menu: &[UpstreamBundle],
    grid: &TypeGrid,
    counts: &[u32],
    econ: &EconomicParams,
) -> Result<f64> {
    check_menu_len(menu.len(), grid.len())?;
    if counts.len() != menu.len() {
        return Err(Error::DimensionMismatch { expected: menu.len(), actual: counts.len() });
    }
    let mut total = 0.0;
    for (idx, bundle) in menu.iter().enumerate() {
        if counts[idx] == 0 {
            continue;
        }
        total += counts[idx] as f64 * vsp_device_surplus(bundle, &grid.cell(idx), econ)?;
    }
    Ok(total)
}

fn check_user_type(t: &UserType) -> Result<()> {
    for (name, v) in [("tau", t.tau), ("phi", t.phi)] {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(())
}

/// User's valuation of a twin rendering: `tau * g1(resolution) + phi * g2(refresh)`.
pub fn user_valuation(utype: &UserType, bundle: &DownstreamBundle, econ: &EconomicParams) -> Result<f64> {
    check_user_type(utype)?;
    Ok(utype.tau * alpha_fairness(bundle.resolution, econ.alpha1)?
        + utype.phi * alpha_fairness(bundle.refresh, econ.alpha2)?)
}

/// User's payoff from accepting a bundle: valuation minus price.
pub fn user_utility(utype: &UserType, bundle: &DownstreamBundle, econ: &EconomicParams) -> Result<f64> {
    Ok(user_valuation(utype, bundle, econ)? - bundle.price)
}

/// Provider's cost of rendering and delivering a bundle, linear in resolution and refresh.
pub fn delivery_cost(bundle: &DownstreamBundle, econ: &EconomicParams) -> Result<f64> {
    for (name, v) in [("resolution", bundle.resolution), ("refresh", bundle.refresh)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!("{name} must be nonnegative, got {v}")));
        }
    }
    Ok(econ.fixed_cost_down + econ.c_res * bundle.resolution + econ.c_fps * bundle.refresh)
}

/// Provider's per-user surplus on the downstream layer: price minus delivery cost.
pub fn vsp_dt_surplus(bundle: &DownstreamBundle, econ: &EconomicParams) -> Result<f64> {
    Ok(bundle.price - delivery_cost(bundle, econ)?)
}

/// Expected downstream objective: surplus summed over cells weighted by `m_users * pmf`.
pub fn vsp_total_downstream(
    menu: &[DownstreamBundle],
    grid: &UserGrid,
    m_users: f64,
    econ: &EconomicParams,
) -> Result<f64> {
    check_menu_len(menu.len(), grid.len())?;
    let mut total = 0.0;
    for (idx, bundle) in menu.iter().enumerate() {
        total += m_users * grid.pmf()[idx] * vsp_dt_surplus(bundle, econ)?;
    }
    Ok(total)
}

/// Realized downstream objective with observed per-cell user counts.
pub fn vsp_total_downstream_realized(
    menu: &[DownstreamBundle],
    grid: &UserGrid,
    counts: &[u32],
    econ: &EconomicParams,
) -> Result<f64> {
    check_menu_len(menu.len(), grid.len())?;
    if counts.len() != menu.len() {
        return Err(Error::DimensionMismatch { expected: menu.len(), actual: counts.len() });
    }
    let mut total = 0.0;
    for (idx, bundle) in menu.iter().enumerate() {
        if counts[idx] == 0 {
            continue;
        }
        total += counts[idx] as f64 * vsp_dt_surplus(bundle, econ)?;
    }
    Ok(total)
}

/// Index of the maximum value; exact ties resolve to the lowest index.
pub fn argmax_lowest(values: &[f64]) -> Result<usize> {
    if values.is_empty() {
        return Err(Error::EmptyMenu);
    }
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Bundle a participant of type `t` would pick from the menu under `utility`.
pub fn best_response<T, B>(t: &T, menu: &[B], utility: impl Fn(&T, &B) -> f64) -> Result<usize> {
    if menu.is_empty() {
        return Err(Error::EmptyMenu);
    }
    let values: Vec<f64> = menu.iter().map(|b| utility(t, b)).collect();
    argmax_lowest(&values)
}

/// Per-type rationality (`ir`) and incentive (`ic`) violation bits for a menu.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// `ir[i] = 1` iff type i's designated bundle gives it strictly negative utility.
    pub ir: Vec<u8>,
    /// `ic[i] = 1` iff some other bundle gives type i strictly higher utility than its own.
    pub ic: Vec<u8>,
}

impl FeasibilityReport {
    pub fn ir_count(&self) -> usize {
        self.ir.iter().map(|&b| b as usize).sum()
    }

    pub fn ic_count(&self) -> usize {
        self.ic.iter().map(|&b| b as usize).sum()
    }

    pub fn total(&self) -> usize {
        self.ir_count() + self.ic_count()
    }

    pub fn is_feasible(&self) -> bool {
        self.total() == 0
    }
}

/// Evaluates both violation bits for every type against its designated bundle
/// (types and menu are index-aligned).
pub fn feasibility_report<T, B>(
    menu: &[B],
    types: &[T],
    utility: impl Fn(&T, &B) -> f64,
) -> Result<FeasibilityReport> {
    check_menu_len(menu.len(), types.len())?;
    let mut ir = vec![0u8; types.len()];
    let mut ic = vec![0u8; types.len()];
    for (i, t) in types.iter().enumerate() {
        let own = utility(t, &menu[i]);
        if own < 0.0 {
            ir[i] = 1;
        }
        for (j, b) in menu.iter().enumerate() {
            if j != i && utility(t, b) > own {
                ic[i] = 1;
                break;
            }
        }
    }
    Ok(FeasibilityReport { ir, ic })
}

/// Upstream feasibility of a menu against the grid's type cells.
pub fn upstream_feasibility(
    menu: &[UpstreamBundle],
    grid: &TypeGrid,
    econ: &EconomicParams,
) -> Result<FeasibilityReport> {
    check_menu_len(menu.len(), grid.len())?;
    let cells = grid.cells();
    for t in &cells {
        check_device_type(t)?;
    }
    feasibility_report(menu, &cells, |t, b| {
        b.price - (econ.fixed_cost_up + econ.c_tx * b.size * t.gamma / t.lambda + econ.c_sem * b.size / t.psi)
    })
}

/// Downstream feasibility of a menu against the grid's user cells.
pub fn downstream_feasibility(
    menu: &[DownstreamBundle],
    grid: &UserGrid,
    econ: &EconomicParams,
) -> Result<FeasibilityReport> {
    check_menu_len(menu.len(), grid.len())?;
    let cells = grid.cells();
    for t in &cells {
        check_user_type(t)?;
    }
    let g1 = |x: f64| x.powf(1.0 - econ.alpha1) / (1.0 - econ.alpha1);
    let g2 = |x: f64| x.powf(1.0 - econ.alpha2) / (1.0 - econ.alpha2);
    feasibility_report(menu, &cells, |t, b| t.tau * g1(b.resolution) + t.phi * g2(b.refresh) - b.price)
}
