//! Exhaustive menu optimization over finite candidate grids.
//!
//! The search assigns each participant type one bundle drawn from the cartesian
//! product of per-dimension quality candidates and price candidates, and keeps
//! the menu maximizing the expected platform objective subject to every
//! participation and self-selection constraint. Depth-first search walks type
//! cells in index order with candidates in (quality, price) lexicographic
//! order; branches die on pairwise self-selection conflicts or when an
//! optimistic completion bound (per-cell best surplus, constraints between
//! remaining cells ignored) cannot strictly beat the incumbent. The first menu
//! attaining the maximum therefore wins ties, which pins the result to the
//! lexicographically smallest optimizer.
//!
//! With the `parallel` feature the search shards on the first cell's candidate
//! and folds shard results in candidate order with the same strict-improvement
//! rule, so the answer is identical to the sequential walk.

use crate::error::{Error, Result};
use crate::layer::{LayerModel, Menu};
use crate::market::POSITIVE_FLOOR;
use crate::parallel::maybe_par_map;

/// Candidate grids for the exhaustive search. One strictly ascending positive
/// list per quality dimension plus one for prices.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub quality_candidates: Vec<Vec<f64>>,
    pub price_candidates: Vec<f64>,
    /// Safety valve on search-tree nodes (candidate placements). The search
    /// aborts with an error once a walk exceeds this budget.
    pub max_evaluations: u64,
}

pub const DEFAULT_MAX_EVALUATIONS: u64 = 100_000_000;

impl GridSpec {
    pub fn new(quality_candidates: Vec<Vec<f64>>, price_candidates: Vec<f64>) -> Result<Self> {
        let spec = Self { quality_candidates, price_candidates, max_evaluations: DEFAULT_MAX_EVALUATIONS };
        spec.validate()?;
        Ok(spec)
    }

    /// Evenly spaced candidates: `points` values covering each inclusive range.
    pub fn linear(quality_ranges: &[(f64, f64)], quality_points: usize, price_range: (f64, f64), price_points: usize) -> Result<Self> {
        let quality_candidates = quality_ranges.iter().map(|&r| linspace(r, quality_points)).collect();
        Self::new(quality_candidates, linspace(price_range, price_points))
    }

    pub fn validate(&self) -> Result<()> {
        if self.quality_candidates.is_empty() {
            return Err(Error::Config("at least one quality dimension required".into()));
        }
        for (d, list) in self.quality_candidates.iter().enumerate() {
            validate_axis(list, &format!("quality dimension {d}"))?;
        }
        validate_axis(&self.price_candidates, "price")?;
        if self.max_evaluations == 0 {
            return Err(Error::Config("max_evaluations must be positive".into()));
        }
        Ok(())
    }

    /// Number of distinct bundles a single cell can receive.
    pub fn candidates_per_cell(&self) -> usize {
        self.quality_candidates.iter().map(Vec::len).product::<usize>() * self.price_candidates.len()
    }

    /// All bundles in (quality, price) lexicographic order: earlier quality
    /// dimensions vary slowest, price varies fastest.
    fn enumerate_candidates(&self) -> Vec<(Vec<f64>, f64)> {
        let mut out = Vec::with_capacity(self.candidates_per_cell());
        let dims = self.quality_candidates.len();
        let mut idx = vec![0usize; dims];
        loop {
            let quality: Vec<f64> = idx.iter().enumerate().map(|(d, &i)| self.quality_candidates[d][i]).collect();
            for &p in &self.price_candidates {
                out.push((quality.clone(), p));
            }
            // odometer increment, last dimension fastest
            let mut d = dims;
            loop {
                if d == 0 {
                    return out;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < self.quality_candidates[d].len() {
                    break;
                }
                idx[d] = 0;
            }
        }
    }
}

fn linspace((lo, hi): (f64, f64), points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
}

fn validate_axis(list: &[f64], name: &str) -> Result<()> {
    if list.is_empty() {
        return Err(Error::Config(format!("{name} candidates must be nonempty")));
    }
    for w in list.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Config(format!("{name} candidates must be strictly ascending")));
        }
    }
    if list.iter().any(|&v| !v.is_finite() || v < POSITIVE_FLOOR) {
        return Err(Error::Config(format!("{name} candidates must be finite and at least {POSITIVE_FLOOR}")));
    }
    Ok(())
}

/// Optimal menu together with the objective it attains.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub menu: Menu,
    /// Expected platform objective for the requested participant count.
    pub objective: f64,
    /// Search-tree nodes visited (all shards combined).
    pub nodes_visited: u64,
}

/// Constraint certificate for an arbitrary menu.
#[derive(Debug, Clone, PartialEq)]
pub struct MenuCertificate {
    pub ir_violations: usize,
    pub ic_violations: usize,
    pub feasible: bool,
    pub objective: f64,
}

/// Recomputes feasibility and the expected objective from scratch.
pub fn verify_menu(model: &LayerModel, menu: &Menu, participants: f64) -> Result<MenuCertificate> {
    let report = model.feasibility(menu)?;
    Ok(MenuCertificate {
        ir_violations: report.ir_count(),
        ic_violations: report.ic_count(),
        feasible: report.is_feasible(),
        objective: model.expected_total(menu, participants)?,
    })
}

struct SearchTables {
    /// Objective scale so partial sums accumulate exactly like the public
    /// expected-total routine: participants * pmf * surplus per cell in order.
    participants: f64,
    pmf: Vec<f64>,
    /// surplus[cell][cand]: platform surplus from giving `cand` to `cell`.
    surplus: Vec<Vec<f64>>,
    /// utility[cell][cand]: participant utility of `cell` consuming `cand`.
    utility: Vec<Vec<f64>>,
    /// Ascending candidate indices passing the participation pre-filter per cell.
    admissible: Vec<Vec<usize>>,
    /// suffix_best[d] = sum over cells i >= d of pmf_i * best admissible surplus_i.
    suffix_best: Vec<f64>,
}

fn build_tables(model: &LayerModel, candidates: &[(Vec<f64>, f64)], participants: f64) -> Option<SearchTables> {
    let cells = model.bundle_count();
    let pmf = model.pmf().to_vec();
    let mut surplus = Vec::with_capacity(cells);
    let mut utility = Vec::with_capacity(cells);
    let mut admissible = Vec::with_capacity(cells);
    for cell in 0..cells {
        let mut s_row = Vec::with_capacity(candidates.len());
        let mut u_row = Vec::with_capacity(candidates.len());
        let mut ok = Vec::new();
        for (ci, (q, p)) in candidates.iter().enumerate() {
            let u = model.participant_utility(cell, q, *p);
            let s = model.vsp_surplus(cell, q, *p);
            if u >= 0.0 {
                ok.push(ci);
            }
            s_row.push(s);
            u_row.push(u);
        }
        if ok.is_empty() {
            // this cell can never participate, so no feasible menu exists
            return None;
        }
        surplus.push(s_row);
        utility.push(u_row);
        admissible.push(ok);
    }
    let mut suffix_best = vec![0.0; cells + 1];
    for cell in (0..cells).rev() {
        let best = admissible[cell]
            .iter()
            .map(|&ci| surplus[cell][ci])
            .fold(f64::NEG_INFINITY, f64::max);
        suffix_best[cell] = suffix_best[cell + 1] + participants * pmf[cell] * best;
    }
    Some(SearchTables { participants, pmf, surplus, utility, admissible, suffix_best })
}

/// Absolute slack added to the optimistic bound so float rounding can never
/// prune a branch whose true completion strictly beats the incumbent.
const BOUND_SLACK: f64 = 1e-9;

struct Walk<'a> {
    t: &'a SearchTables,
    cap: u64,
    visited: u64,
    best: Option<(f64, Vec<usize>)>,
}

impl Walk<'_> {
    fn dfs(&mut self, depth: usize, chosen: &mut Vec<usize>, partial: f64) -> Result<()> {
        let cells = self.t.pmf.len();
        if depth == cells {
            let better = match &self.best {
                None => true,
                Some((obj, _)) => partial > *obj,
            };
            if better {
                self.best = Some((partial, chosen.clone()));
            }
            return Ok(());
        }
        if let Some((obj, _)) = &self.best {
            if partial + (self.t.suffix_best[depth] - self.t.suffix_best[cells]) + BOUND_SLACK <= *obj {
                return Ok(());
            }
        }
        for &cand in &self.t.admissible[depth] {
            self.visited += 1;
            if self.visited > self.cap {
                return Err(Error::EnumerationCap(format!(
                    "search exceeded {} node visits; shrink the candidate grids",
                    self.cap
                )));
            }
            if !self.selection_consistent(depth, cand, chosen) {
                continue;
            }
            chosen.push(cand);
            let r = self.dfs(depth + 1, chosen, partial + self.t.participants * self.t.pmf[depth] * self.t.surplus[depth][cand]);
            chosen.pop();
            r?;
        }
        Ok(())
    }

    /// Pairwise self-selection between the new cell and every placed cell:
    /// neither side may strictly prefer the other's bundle.
    fn selection_consistent(&self, depth: usize, cand: usize, chosen: &[usize]) -> bool {
        let u = &self.t.utility;
        for (j, &cj) in chosen.iter().enumerate() {
            if u[depth][cj] > u[depth][cand] {
                return false;
            }
            if u[j][cand] > u[j][cj] {
                return false;
            }
        }
        true
    }
}

fn menu_from_chosen(model: &LayerModel, candidates: &[(Vec<f64>, f64)], chosen: &[usize]) -> Result<Menu> {
    let dim = model.quality_dim();
    let mut qualities = Vec::with_capacity(chosen.len() * dim);
    let mut prices = Vec::with_capacity(chosen.len());
    for &ci in chosen {
        qualities.extend_from_slice(&candidates[ci].0);
        prices.push(candidates[ci].1);
    }
    Menu::new(dim, qualities, prices)
}

fn solve_with(
    model: &LayerModel,
    spec: &GridSpec,
    participants: f64,
    sharded: bool,
) -> Result<Option<OracleSolution>> {
    spec.validate()?;
    if spec.quality_candidates.len() != model.quality_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.quality_dim(),
            actual: spec.quality_candidates.len(),
        });
    }
    if !(participants > 0.0) || !participants.is_finite() {
        return Err(Error::Domain(format!("participants must be positive and finite, got {participants}")));
    }
    let candidates = spec.enumerate_candidates();
    let Some(tables) = build_tables(model, &candidates, participants) else {
        return Ok(None);
    };
    let cells = model.bundle_count();

    let (best, visited) = if sharded && cells > 1 {
        // one shard per admissible first-cell candidate; each walks cells 1..
        let firsts = tables.admissible[0].clone();
        let shard_results = maybe_par_map(&firsts, |&first| {
            let mut walk = Walk { t: &tables, cap: spec.max_evaluations, visited: 1, best: None };
            let mut chosen = vec![first];
            let partial = tables.participants * tables.pmf[0] * tables.surplus[0][first];
            walk.dfs(1, &mut chosen, partial).map(|()| (walk.best, walk.visited))
        });
        // fold in first-candidate order with strict improvement, mirroring the
        // sequential walk's tie-breaking exactly
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut visited = 0u64;
        for r in shard_results {
            let (shard_best, shard_visited) = r?;
            visited = visited.saturating_add(shard_visited);
            if let Some((obj, chosen)) = shard_best {
                let better = match &best {
                    None => true,
                    Some((b, _)) => obj > *b,
                };
                if better {
                    best = Some((obj, chosen));
                }
            }
        }
        if visited > spec.max_evaluations {
            return Err(Error::EnumerationCap(format!(
                "search exceeded {} node visits across shards; shrink the candidate grids",
                spec.max_evaluations
            )));
        }
        (best, visited)
    } else {
        let mut walk = Walk { t: &tables, cap: spec.max_evaluations, visited: 0, best: None };
        let mut chosen = Vec::with_capacity(cells);
        walk.dfs(0, &mut chosen, 0.0)?;
        (walk.best, walk.visited)
    };

    match best {
        None => Ok(None),
        Some((_, chosen)) => {
            let menu = menu_from_chosen(model, &candidates, &chosen)?;
            let objective = model.expected_total(&menu, participants)?;
            Ok(Some(OracleSolution { menu, objective, nodes_visited: visited }))
        }
    }
}

/// Exhaustive optimum over the grids, sharded across first-cell candidates
/// when the `parallel` feature is enabled. Returns `None` when no menu can
/// satisfy every constraint.
pub fn brute_force_optimal(model: &LayerModel, spec: &GridSpec, participants: f64) -> Result<Option<OracleSolution>> {
    solve_with(model, spec, participants, crate::parallel::parallel_enabled())
}

/// Single-walk variant, always compiled, for cross-checking the sharded path.
pub fn brute_force_optimal_sequential(model: &LayerModel, spec: &GridSpec, participants: f64) -> Result<Option<OracleSolution>> {
    solve_with(model, spec, participants, false)
}

/// Closed-form optimum for a degenerate single-type data-purchase market: with
/// one participant type, the price binds participation exactly and the size
/// maximizes concave valuation minus linear cost, giving
/// `size = (sigma / unit_cost)^(1/alpha)` and `price = cost(size)`.
pub fn single_type_continuous_optimum(model: &LayerModel) -> Result<(f64, f64)> {
    let LayerModel::Upstream { grid, econ } = model else {
        return Err(Error::Domain("closed form applies to the data-purchase layer only".into()));
    };
    if grid.len() != 1 {
        return Err(Error::Domain(format!("closed form needs exactly one type, got {}", grid.len())));
    }
    if !(econ.sigma > 0.0) {
        return Err(Error::Domain("closed form needs a positive valuation scale".into()));
    }
    let ty = grid.cell(0);
    let unit_cost = econ.c_tx * ty.gamma / ty.lambda + econ.c_sem / ty.psi;
    if !(unit_cost > 0.0) {
        return Err(Error::Domain("closed form needs a positive unit cost".into()));
    }
    let size = (econ.sigma / unit_cost).powf(1.0 / econ.alpha);
    let probe = crate::market::UpstreamBundle { size, price: 0.0 };
    let price = crate::market::device_cost(&probe, &ty, econ)?;
    Ok((size, price))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{EconomicParams, FeasibilityReport, TypeGrid, UserGrid};
    use approx::assert_relative_eq;

    fn upstream_model(lambdas: Vec<f64>, econ: EconomicParams) -> LayerModel {
        let grid = TypeGrid::uniform(lambdas, vec![1.0], vec![1.0]).unwrap();
        LayerModel::upstream(grid, econ).unwrap()
    }

    fn single_type_econ() -> EconomicParams {
        EconomicParams {
            sigma: 1.0,
            alpha: 0.5,
            k_aoi: 3.0,
            mu: 1.0,
            fixed_cost_up: 0.1,
            c_tx: 0.5,
            c_sem: 0.5,
            ..EconomicParams::default()
        }
    }

    /// Full cartesian enumeration with the public feasibility and objective
    /// routines: an independent route to the same optimum.
    fn enumerate_best(model: &LayerModel, spec: &GridSpec, participants: f64) -> Option<(Menu, f64)> {
        let cands = spec.enumerate_candidates();
        let cells = model.bundle_count();
        let total = cands.len().pow(cells as u32);
        let mut best: Option<(Menu, f64)> = None;
        for code in 0..total {
            let mut c = code;
            let mut qualities = Vec::new();
            let mut prices = Vec::new();
            for _ in 0..cells {
                let (q, p) = &cands[c % cands.len()];
                qualities.extend_from_slice(q);
                prices.push(*p);
                c /= cands.len();
            }
            let menu = Menu::new(model.quality_dim(), qualities, prices).unwrap();
            let report: FeasibilityReport = model.feasibility(&menu).unwrap();
            if !report.is_feasible() {
                continue;
            }
            let obj = model.expected_total(&menu, participants).unwrap();
            let better = match &best {
                None => true,
                Some((_, b)) => obj > *b,
            };
            if better {
                best = Some((menu, obj));
            }
        }
        best
    }

    /// Enumeration order above is cell-0-fastest, so lexicographic tie-breaks
    /// differ from the search; this wrapper re-enumerates in search order.
    fn enumerate_best_lex(model: &LayerModel, spec: &GridSpec, participants: f64) -> Option<(Menu, f64)> {
        let cands = spec.enumerate_candidates();
        let cells = model.bundle_count();
        let mut idx = vec![0usize; cells];
        let mut best: Option<(Menu, f64)> = None;
        loop {
            let mut qualities = Vec::new();
            let mut prices = Vec::new();
            for &ci in &idx {
                qualities.extend_from_slice(&cands[ci].0);
                prices.push(cands[ci].1);
            }
            let menu = Menu::new(model.quality_dim(), qualities, prices).unwrap();
            if model.feasibility(&menu).unwrap().is_feasible() {
                let obj = model.expected_total(&menu, participants).unwrap();
                let better = match &best {
                    None => true,
                    Some((_, b)) => obj > *b,
                };
                if better {
                    best = Some((menu, obj));
                }
            }
            // odometer, last cell fastest: earlier cells vary slowest, matching
            // the depth-first visit order
            let mut d = cells;
            loop {
                if d == 0 {
                    return best;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < cands.len() {
                    break;
                }
                idx[d] = 0;
            }
        }
    }

    #[test]
    fn grid_spec_validation() {
        assert!(GridSpec::new(vec![vec![1.0, 2.0]], vec![0.5, 1.0]).is_ok());
        assert!(GridSpec::new(vec![], vec![1.0]).is_err());
        assert!(GridSpec::new(vec![vec![2.0, 1.0]], vec![1.0]).is_err());
        assert!(GridSpec::new(vec![vec![1.0, 1.0]], vec![1.0]).is_err());
        assert!(GridSpec::new(vec![vec![1.0]], vec![0.0, 1.0]).is_err());
        assert!(GridSpec::new(vec![vec![1.0]], vec![]).is_err());
    }

    #[test]
    fn linear_builder_spaces_candidates_evenly() {
        let spec = GridSpec::linear(&[(0.5, 2.0)], 4, (1.0, 3.0), 3).unwrap();
        assert_eq!(spec.quality_candidates[0], vec![0.5, 1.0, 1.5, 2.0]);
        assert_eq!(spec.price_candidates, vec![1.0, 2.0, 3.0]);
        assert_eq!(spec.candidates_per_cell(), 12);
        let single = GridSpec::linear(&[(1.0, 1.0)], 1, (2.0, 2.0), 1).unwrap();
        assert_eq!(single.quality_candidates[0], vec![1.0]);
    }

    #[test]
    fn candidate_enumeration_is_quality_major_lexicographic() {
        let spec = GridSpec::new(vec![vec![1.0, 2.0], vec![10.0, 20.0]], vec![0.5, 0.7]).unwrap();
        let c = spec.enumerate_candidates();
        assert_eq!(c.len(), 8);
        assert_eq!(c[0], (vec![1.0, 10.0], 0.5));
        assert_eq!(c[1], (vec![1.0, 10.0], 0.7));
        assert_eq!(c[2], (vec![1.0, 20.0], 0.5));
        assert_eq!(c[5], (vec![2.0, 10.0], 0.7));
        assert_eq!(c[7], (vec![2.0, 20.0], 0.7));
    }

    #[test]
    fn single_type_grid_optimum_matches_closed_form_point() {
        // unit cost = 0.5*1/1 + 0.5/1 = 1, so the continuous optimum sits at
        // size (1/1)^2 = 1 with price = 0.1 + 1 = 1.1; both appear in the grid
        let model = upstream_model(vec![1.0], single_type_econ());
        let (s_star, p_star) = single_type_continuous_optimum(&model).unwrap();
        assert_relative_eq!(s_star, 1.0, max_relative = 1e-12);
        assert_relative_eq!(p_star, 1.1, max_relative = 1e-12);

        let spec = GridSpec::new(vec![vec![0.5, 1.0, 1.5]], vec![0.9, 1.1, 1.6]).unwrap();
        let sol = brute_force_optimal(&model, &spec, 7.0).unwrap().unwrap();
        assert_eq!(sol.menu.qualities, vec![1.0]);
        assert_eq!(sol.menu.prices, vec![1.1]);
        // per-device objective: 2*sqrt(1) - 1.1 + (3 - 2) = 1.9, times 7 devices
        assert_relative_eq!(sol.objective, 1.9 * 7.0, max_relative = 1e-12);
    }

    #[test]
    fn closed_form_rejects_multi_type_and_downstream() {
        let model = upstream_model(vec![0.5, 1.0], single_type_econ());
        assert!(single_type_continuous_optimum(&model).is_err());
        let down = LayerModel::downstream(
            UserGrid::uniform(vec![1.0], vec![1.0]).unwrap(),
            EconomicParams::default(),
        )
        .unwrap();
        assert!(single_type_continuous_optimum(&down).is_err());
    }

    #[test]
    fn ties_resolve_to_lexicographically_smallest_menu() {
        // candidates (size 1, price 1) and (size 4, price 3) both yield
        // surplus 2*sqrt(s) - p + 3 = 4; participation kills (4, 1) because
        // cost(4) = 0.05 + 0.3*4 = 1.25 > 1. The earlier candidate must win.
        let econ = EconomicParams {
            sigma: 1.0,
            alpha: 0.5,
            k_aoi: 5.0,
            mu: 1.0,
            fixed_cost_up: 0.05,
            c_tx: 0.15,
            c_sem: 0.15,
            ..EconomicParams::default()
        };
        let model = upstream_model(vec![1.0], econ);
        let spec = GridSpec::new(vec![vec![1.0, 4.0]], vec![1.0, 3.0]).unwrap();
        let sol = brute_force_optimal(&model, &spec, 1.0).unwrap().unwrap();
        assert_eq!(sol.menu.qualities, vec![1.0]);
        assert_eq!(sol.menu.prices, vec![1.0]);
        assert_relative_eq!(sol.objective, 4.0, max_relative = 1e-12);
        // double-check the tie really exists
        let alt = Menu::new(1, vec![4.0], vec![3.0]).unwrap();
        assert_relative_eq!(model.expected_total(&alt, 1.0).unwrap(), 4.0, max_relative = 1e-12);
        assert!(model.feasibility(&alt).unwrap().is_feasible());
    }

    #[test]
    fn two_type_search_matches_independent_enumeration_exactly() {
        // default costs give unit costs 0.75 and 0.5 for the two efficiencies
        let model = upstream_model(vec![0.5, 1.0], EconomicParams::default());
        let spec = GridSpec::new(vec![vec![0.5, 1.0, 2.0]], vec![0.5, 1.0, 1.5]).unwrap();
        let sol = brute_force_optimal(&model, &spec, 10.0).unwrap().unwrap();
        let (menu, obj) = enumerate_best_lex(&model, &spec, 10.0).unwrap();
        assert_eq!(sol.menu.qualities, menu.qualities);
        assert_eq!(sol.menu.prices, menu.prices);
        assert_eq!(sol.objective.to_bits(), obj.to_bits());
        // the cell-0-fastest enumeration must agree on the objective value too
        let (_, obj2) = enumerate_best(&model, &spec, 10.0).unwrap();
        assert_relative_eq!(sol.objective, obj2, max_relative = 1e-12);
        // and the winner is certified feasible from scratch
        let cert = verify_menu(&model, &sol.menu, 10.0).unwrap();
        assert!(cert.feasible);
        assert_eq!(cert.objective.to_bits(), sol.objective.to_bits());
    }

    #[test]
    fn downstream_two_dim_search_matches_enumeration() {
        let grid = UserGrid::uniform(vec![0.5, 1.0], vec![1.0]).unwrap();
        let model = LayerModel::downstream(grid, EconomicParams::default()).unwrap();
        let spec = GridSpec::new(vec![vec![0.5, 1.5], vec![0.5, 1.5]], vec![0.4, 0.9, 1.4]).unwrap();
        let sol = brute_force_optimal(&model, &spec, 6.0).unwrap().unwrap();
        let (menu, obj) = enumerate_best_lex(&model, &spec, 6.0).unwrap();
        assert_eq!(sol.menu.qualities, menu.qualities);
        assert_eq!(sol.menu.prices, menu.prices);
        assert_eq!(sol.objective.to_bits(), obj.to_bits());
    }

    #[test]
    fn parallel_and_sequential_walks_agree_bit_for_bit() {
        let model = upstream_model(vec![0.4, 0.7, 1.0], EconomicParams::default());
        let spec = GridSpec::linear(&[(0.2, 2.0)], 5, (0.2, 1.8), 5).unwrap();
        let a = brute_force_optimal(&model, &spec, 12.0).unwrap().unwrap();
        let b = brute_force_optimal_sequential(&model, &spec, 12.0).unwrap().unwrap();
        assert_eq!(a.menu.qualities, b.menu.qualities);
        assert_eq!(a.menu.prices, b.menu.prices);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }

    #[test]
    fn infeasible_grid_returns_none() {
        // prices far below cost: no candidate clears participation
        let econ = EconomicParams { fixed_cost_up: 5.0, ..EconomicParams::default() };
        let model = upstream_model(vec![1.0], econ);
        let spec = GridSpec::new(vec![vec![1.0]], vec![0.5, 1.0]).unwrap();
        assert!(brute_force_optimal(&model, &spec, 3.0).unwrap().is_none());
    }

    #[test]
    fn evaluation_cap_aborts_search() {
        let model = upstream_model(vec![0.5, 1.0], EconomicParams::default());
        let mut spec = GridSpec::new(vec![vec![0.5, 1.0, 2.0]], vec![0.5, 1.0, 1.5]).unwrap();
        spec.max_evaluations = 3;
        let err = brute_force_optimal_sequential(&model, &spec, 1.0).unwrap_err();
        assert!(matches!(err, Error::EnumerationCap(_)), "got {err:?}");
    }

    #[test]
    fn grid_refinement_never_lowers_the_objective() {
        let model = upstream_model(vec![0.5, 1.0], EconomicParams::default());
        let coarse = GridSpec::new(vec![vec![1.0, 2.0]], vec![0.8, 1.6]).unwrap();
        let fine = GridSpec::new(vec![vec![0.5, 1.0, 1.5, 2.0]], vec![0.4, 0.8, 1.2, 1.6]).unwrap();
        let a = brute_force_optimal(&model, &coarse, 5.0).unwrap().unwrap();
        let b = brute_force_optimal(&model, &fine, 5.0).unwrap().unwrap();
        assert!(b.objective >= a.objective, "refined {} < coarse {}", b.objective, a.objective);
    }

    #[test]
    fn mismatched_quality_dims_error() {
        let model = upstream_model(vec![1.0], EconomicParams::default());
        let spec = GridSpec::new(vec![vec![1.0], vec![1.0]], vec![1.0]).unwrap();
        assert!(matches!(
            brute_force_optimal(&model, &spec, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
