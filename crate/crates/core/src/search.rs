//! Minimum-copy search over protocol × block size × depth × budget.
//!
//! For each candidate `(protocol, r, k)` the quality trace is computed first;
//! candidates whose output misses `w0` are dropped before any budget search.
//! Survivors get the smallest `n0` with all-in success `≥ p_th`, found by
//! doubling from `r^k` and then bisecting, which is valid because success is
//! non-decreasing in `n0`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocols::{Family, ProtocolRegistry, PurificationMap};
use crate::schedule::{all_in_success, evolve_trace, ScheduleConfig, ScheduleTrace};
use crate::werner::{boundary_w0, raw_werner, PathSpec, WernerParameter};

pub const DEFAULT_K_MAX: usize = 14;
pub const DEFAULT_N0_MAX: usize = 5000;
const TARGET_SCAN_STEP: f64 = 1e-3;
const TARGET_RESIDUAL: f64 = 1e-9;
/// Float slack on `w_out ≥ w0`, so a self-consistent target counts as reached.
const FIDELITY_SLACK: f64 = 1e-12;

/// Block sizes searched for a family when no explicit set is given.
pub fn default_block_sizes(family: Family) -> Option<BTreeSet<usize>> {
    match family {
        Family::Bbpssw => Some([2].into()),
        Family::Jansen => Some((3..=7).collect()),
        Family::Custom => None,
    }
}

#[derive(Debug, Clone)]
pub struct SearchSpace {
    pub registry: ProtocolRegistry,
    /// Restrict to these families; `None` searches every family present.
    pub families: Option<Vec<Family>>,
    /// Explicit block sizes; `None` uses [`default_block_sizes`].
    pub block_sizes: Option<BTreeSet<usize>>,
    pub k_max: usize,
    pub n0_max: usize,
}

impl SearchSpace {
    pub fn new(registry: ProtocolRegistry) -> Self {
        SearchSpace {
            registry,
            families: None,
            block_sizes: None,
            k_max: DEFAULT_K_MAX,
            n0_max: DEFAULT_N0_MAX,
        }
    }

    pub fn with_limits(mut self, k_max: usize, n0_max: usize) -> Self {
        self.k_max = k_max;
        self.n0_max = n0_max;
        self
    }

    pub fn only(&self, family: Family) -> Self {
        SearchSpace {
            families: Some(vec![family]),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_max == 0 {
            return Err(Error::domain("k_max", 0.0, 1.0, f64::INFINITY));
        }
        let largest = self.candidates().map(|(_, m)| m.block_size()).max().unwrap_or(2);
        if self.n0_max < largest {
            return Err(Error::domain("n0_max", self.n0_max as f64, largest as f64, f64::INFINITY));
        }
        Ok(())
    }

    fn allows(&self, map: &PurificationMap) -> bool {
        if let Some(fams) = &self.families {
            if !fams.contains(&map.family()) {
                return false;
            }
        }
        match &self.block_sizes {
            Some(set) => set.contains(&map.block_size()),
            None => default_block_sizes(map.family()).is_none_or(|s| s.contains(&map.block_size())),
        }
    }

    /// Candidate maps with their registry index, in registry order.
    pub fn candidates(&self) -> impl Iterator<Item = (usize, &PurificationMap)> {
        self.registry.iter().enumerate().filter(|(_, m)| self.allows(m))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub protocol: String,
    pub family: Family,
    pub r: usize,
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchStatus {
    Feasible,
    FidelityInfeasible,
    BudgetExceeded,
}

impl SearchStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SearchStatus::Feasible => "feasible",
            SearchStatus::FidelityInfeasible => "fidelity-infeasible",
            SearchStatus::BudgetExceeded => "budget-exceeded",
        }
    }
}

impl fmt::Display for SearchStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub feasible: bool,
    pub status: SearchStatus,
    pub n0_min: Option<usize>,
    pub selected: Option<Selection>,
    pub trace: Option<ScheduleTrace>,
    pub p_succ_at_min: Option<f64>,
    pub reason: Option<String>,
}

impl SearchResult {
    fn infeasible(status: SearchStatus, reason: String) -> Self {
        SearchResult {
            feasible: false,
            status,
            n0_min: None,
            selected: None,
            trace: None,
            p_succ_at_min: None,
            reason: Some(reason),
        }
    }
}

/// A candidate that reached the threshold, with its position in the registry.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub selection: Selection,
    pub registry_index: usize,
    pub n0_min: usize,
    pub p_succ: f64,
    pub trace: ScheduleTrace,
}

impl Candidate {
    fn key(&self) -> (usize, usize, usize, usize) {
        (self.n0_min, self.selection.k, self.selection.r, self.registry_index)
    }

    fn into_result(self) -> SearchResult {
        SearchResult {
            feasible: true,
            status: SearchStatus::Feasible,
            n0_min: Some(self.n0_min),
            selected: Some(self.selection),
            trace: Some(self.trace),
            p_succ_at_min: Some(self.p_succ),
            reason: None,
        }
    }
}

/// Smallest budget wins; ties go to smaller `k`, then smaller `r`, then
/// earlier registry position.
pub fn tie_break(candidates: &[Candidate]) -> Option<&Candidate> {
    candidates.iter().min_by_key(|c| c.key())
}

fn keep_better(best: &mut Option<Candidate>, challenger: Candidate) {
    if best.as_ref().is_none_or(|b| challenger.key() < b.key()) {
        *best = Some(challenger);
    }
}

/// Smallest `n0 ≤ cap` whose all-in success reaches `p_th`, with that
/// success probability.
pub fn minimal_budget(block_size: usize, p_levels: &[f64], p_th: f64, cap: usize) -> Option<(usize, f64)> {
    let success = |n0: usize| all_in_success(ScheduleConfig::new(block_size, n0), p_levels);
    let depth = u32::try_from(p_levels.len()).ok()?;
    let floor = block_size.checked_pow(depth)?;
    if floor > cap || success(cap) < p_th {
        return None;
    }
    let p_floor = success(floor);
    if p_floor >= p_th {
        return Some((floor, p_floor));
    }
    // success(fail) < p_th <= success(hi)
    let mut fail = floor;
    let mut hi = floor.saturating_mul(2).min(cap);
    let mut p_hi = success(hi);
    while p_hi < p_th {
        fail = hi;
        hi = hi.saturating_mul(2).min(cap);
        p_hi = success(hi);
    }
    while hi - fail > 1 {
        let mid = fail + (hi - fail) / 2;
        let p_mid = success(mid);
        if p_mid >= p_th {
            hi = mid;
            p_hi = p_mid;
        } else {
            fail = mid;
        }
    }
    Some((hi, p_hi))
}

fn check_threshold(p_th: f64) -> Result<()> {
    if p_th > 0.0 && p_th <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain("success threshold", p_th, 0.0, 1.0))
    }
}

/// Minimum raw-copy budget that recovers `w_out ≥ w0` with probability at
/// least `p_th` over an `ℓ`-link path.
pub fn min_copy_search(w0: WernerParameter, path: PathSpec, p_th: f64, space: &SearchSpace) -> Result<SearchResult> {
    check_threshold(p_th)?;
    let raw = raw_werner(w0, path);
    if !raw.is_entangled() || w0 <= boundary_w0(path) {
        return Ok(SearchResult::infeasible(
            SearchStatus::FidelityInfeasible,
            format!("raw Werner parameter {:.4} ≤ 1/3", raw.value()),
        ));
    }

    let mut best: Option<Candidate> = None;
    let mut fidelity_reachable = false;
    for (index, map) in space.candidates() {
        let r = map.block_size();
        for k in 1..=space.k_max {
            // Domain exits and vanishing probabilities persist at larger depth.
            let Ok(trace) = evolve_trace(map, raw, k) else { break };
            if trace.w_out() + FIDELITY_SLACK < w0.value() {
                continue;
            }
            fidelity_reachable = true;
            let floor = u32::try_from(k).ok().and_then(|k| r.checked_pow(k));
            if floor.is_none_or(|f| f > space.n0_max) {
                break;
            }
            // A candidate can only matter if it matches or beats the incumbent.
            let cap = best.as_ref().map_or(space.n0_max, |b| b.n0_min.min(space.n0_max));
            if let Some((n0_min, p_succ)) = minimal_budget(r, &trace.p_levels, p_th, cap) {
                let challenger = Candidate {
                    selection: Selection {
                        protocol: map.name().to_string(),
                        family: map.family(),
                        r,
                        k,
                    },
                    registry_index: index,
                    n0_min,
                    p_succ,
                    trace,
                };
                keep_better(&mut best, challenger);
            }
        }
    }

    Ok(match best {
        Some(c) => c.into_result(),
        None if fidelity_reachable => SearchResult::infeasible(
            SearchStatus::BudgetExceeded,
            format!("no candidate reaches P_succ ≥ {p_th} within n0 ≤ {}", space.n0_max),
        ),
        None => SearchResult::infeasible(
            SearchStatus::FidelityInfeasible,
            format!("no candidate with k ≤ {} restores w_out ≥ {}", space.k_max, w0),
        ),
    })
}

/// Self-consistent target `w*` with `f^(k)(w*^ℓ) = w*` and `w* ≤ w_th`.
/// Returns the largest such root found by scanning `[3^(-1/ℓ), w_th]`.
pub fn fixed_target(map: &PurificationMap, path: PathSpec, depth: usize, w_th: WernerParameter) -> Option<WernerParameter> {
    let lo = boundary_w0(path).value();
    let hi = w_th.value();
    if hi < lo {
        return None;
    }
    let residual = |w: f64| -> Option<f64> {
        let input = raw_werner(WernerParameter::new(w).ok()?, path);
        let trace = evolve_trace(map, input, depth).ok()?;
        Some(trace.w_out() - w)
    };

    let steps = ((hi - lo) / TARGET_SCAN_STEP).ceil() as usize;
    let mut grid: Vec<f64> = (0..steps).map(|i| lo + i as f64 * TARGET_SCAN_STEP).collect();
    grid.push(hi);

    let mut upper: Option<(f64, f64)> = None;
    for &x in grid.iter().rev() {
        let Some(hx) = residual(x) else {
            upper = None;
            continue;
        };
        if hx.abs() <= 1e-12 {
            return WernerParameter::new(x).ok();
        }
        if let Some((xu, hu)) = upper {
            if hx.signum() != hu.signum() {
                if let Some(root) = bisect(&residual, x, hx, xu) {
                    return WernerParameter::new(root).ok();
                }
            }
        }
        upper = Some((x, hx));
    }
    None
}

fn bisect(h: &impl Fn(f64) -> Option<f64>, mut a: f64, mut ha: f64, mut b: f64) -> Option<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let hm = h(mid)?;
        if hm == 0.0 {
            return Some(mid);
        }
        if hm.signum() == ha.signum() {
            a = mid;
            ha = hm;
        } else {
            b = mid;
        }
    }
    let root = 0.5 * (a + b);
    (h(root)?.abs() <= TARGET_RESIDUAL).then_some(root)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedTargetResult {
    pub target: Option<f64>,
    #[serde(flatten)]
    pub result: SearchResult,
}

/// Copy budget at the self-consistent target: for each protocol the first
/// depth admitting a fixed target is used, and candidates are compared by
/// [`tie_break`].
pub fn fixed_target_budget(w_th: WernerParameter, path: PathSpec, p_th: f64, space: &SearchSpace) -> Result<FixedTargetResult> {
    check_threshold(p_th)?;
    let mut best: Option<(Candidate, f64)> = None;
    let mut any_target = false;
    for (index, map) in space.candidates() {
        let r = map.block_size();
        for k in 1..=space.k_max {
            let Some(target) = fixed_target(map, path, k, w_th) else { continue };
            any_target = true;
            let trace = evolve_trace(map, raw_werner(target, path), k)?;
            if let Some((n0_min, p_succ)) = minimal_budget(r, &trace.p_levels, p_th, space.n0_max) {
                let challenger = Candidate {
                    selection: Selection {
                        protocol: map.name().to_string(),
                        family: map.family(),
                        r,
                        k,
                    },
                    registry_index: index,
                    n0_min,
                    p_succ,
                    trace,
                };
                if best.as_ref().is_none_or(|(b, _)| challenger.key() < b.key()) {
                    best = Some((challenger, target.value()));
                }
            }
            break;
        }
    }
    Ok(match best {
        Some((c, target)) => FixedTargetResult {
            target: Some(target),
            result: c.into_result(),
        },
        None if any_target => FixedTargetResult {
            target: None,
            result: SearchResult::infeasible(
                SearchStatus::BudgetExceeded,
                format!("no fixed-target candidate reaches P_succ ≥ {p_th} within n0 ≤ {}", space.n0_max),
            ),
        },
        None => FixedTargetResult {
            target: None,
            result: SearchResult::infeasible(
                SearchStatus::FidelityInfeasible,
                format!("no fixed target w* ≤ {w_th} exists above the entanglement boundary"),
            ),
        },
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    fn w(x: f64) -> WernerParameter {
        WernerParameter::new(x).unwrap()
    }

    fn path(l: u32) -> PathSpec {
        PathSpec::new(l).unwrap()
    }

    fn candidate(name: &str, r: usize, k: usize, n0: usize, index: usize) -> Candidate {
        Candidate {
            selection: Selection {
                protocol: name.into(),
                family: Family::Jansen,
                r,
                k,
            },
            registry_index: index,
            n0_min: n0,
            p_succ: 0.9,
            trace: ScheduleTrace {
                w_levels: vec![0.5; k + 1],
                p_levels: vec![0.5; k],
            },
        }
    }

    #[test]
    fn tie_break_rules() {
        let single = [candidate("A", 4, 1, 20, 1)];
        assert_eq!(tie_break(&single).unwrap().selection.protocol, "A");

        let by_depth = [candidate("A", 4, 2, 30, 1), candidate("B", 5, 1, 30, 2)];
        assert_eq!(tie_break(&by_depth).unwrap().selection.protocol, "B");

        let by_size = [candidate("A", 3, 1, 30, 1), candidate("B", 5, 1, 30, 2)];
        assert_eq!(tie_break(&by_size).unwrap().selection.protocol, "A");

        let by_order = [candidate("B", 4, 1, 30, 3), candidate("A", 4, 1, 30, 2)];
        assert_eq!(tie_break(&by_order).unwrap().selection.protocol, "A");

        let by_budget = [candidate("A", 3, 1, 31, 1), candidate("B", 7, 3, 30, 2)];
        assert_eq!(tie_break(&by_budget).unwrap().selection.protocol, "B");

        assert!(tie_break(&[]).is_none());
    }

    #[test]
    fn minimal_budget_is_tight() {
        let p = [0.2318, 0.4188];
        let (n0, ps) = minimal_budget(4, &p, 0.75, 5000).unwrap();
        assert_eq!(n0, 216);
        assert!(ps >= 0.75);
        assert!(all_in_success(ScheduleConfig::new(4, 215), &p) < 0.75);
        assert!(minimal_budget(4, &p, 0.75, 215).is_none());
        assert_eq!(minimal_budget(4, &p, 0.75, 216).unwrap().0, 216);
    }

    #[test]
    fn minimal_budget_at_floor() {
        assert_eq!(minimal_budget(2, &[1.0], 0.99, 100), Some((2, 1.0)));
        assert_eq!(minimal_budget(3, &[1.0, 1.0], 0.99, 100), Some((9, 1.0)));
        assert_eq!(minimal_budget(3, &[1.0, 1.0], 0.99, 8), None);
    }

    #[test]
    fn perfect_links_need_one_block() {
        let space = SearchSpace::new(ProtocolRegistry::builtin());
        let res = min_copy_search(WernerParameter::PERFECT, path(5), 0.99, &space).unwrap();
        assert!(res.feasible);
        assert_eq!(res.n0_min, Some(2));
        let sel = res.selected.unwrap();
        assert_eq!((sel.r, sel.k), (2, 1));
        let trace = res.trace.unwrap();
        assert_eq!(trace.w_out(), 1.0);
        assert_eq!(trace.p_levels, vec![1.0]);
    }

    #[test]
    fn separable_raw_state_is_infeasible() {
        let space = SearchSpace::new(ProtocolRegistry::builtin());
        for p_th in [0.1, 0.5, 0.99] {
            let res = min_copy_search(w(0.85), path(9), p_th, &space).unwrap();
            assert!(!res.feasible);
            assert_eq!(res.status, SearchStatus::FidelityInfeasible);
            assert!(res.reason.unwrap().contains("0.2316"));
        }
    }

    #[test]
    fn threshold_must_be_probability() {
        let space = SearchSpace::new(ProtocolRegistry::builtin());
        assert!(min_copy_search(w(0.9), path(2), 0.0, &space).is_err());
        assert!(min_copy_search(w(0.9), path(2), 1.5, &space).is_err());
    }

    #[test]
    fn small_budget_cap_reports_budget_exceeded() {
        let space = SearchSpace::new(ProtocolRegistry::builtin()).with_limits(14, 4);
        let res = min_copy_search(w(0.95), path(4), 0.99, &space).unwrap();
        assert_eq!(res.status, SearchStatus::BudgetExceeded);
    }

    #[test]
    fn bbpssw_result_satisfies_both_conditions() {
        let space = SearchSpace::new(ProtocolRegistry::builtin());
        let res = min_copy_search(w(0.95), path(3), 0.7, &space).unwrap();
        assert!(res.feasible, "{res:?}");
        let sel = res.selected.unwrap();
        let trace = evolve_trace(&PurificationMap::bbpssw(), raw_werner(w(0.95), path(3)), sel.k).unwrap();
        assert!(trace.w_out() >= 0.95);
        let n0 = res.n0_min.unwrap();
        assert!(all_in_success(ScheduleConfig::new(2, n0), &trace.p_levels) >= 0.7);
        assert!(all_in_success(ScheduleConfig::new(2, n0 - 1), &trace.p_levels) < 0.7);
    }

    #[test]
    fn bbpssw_fixed_point_at_boundary() {
        let target = fixed_target(&PurificationMap::bbpssw(), path(1), 1, w(1.0 / 3.0 + 1e-4)).unwrap();
        assert_abs_diff_eq!(target.value(), 1.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn no_fixed_target_far_below_boundary() {
        assert!(fixed_target(&PurificationMap::bbpssw(), path(20), 1, w(0.6)).is_none());
        let space = SearchSpace::new(ProtocolRegistry::builtin());
        let res = fixed_target_budget(w(0.6), path(20), 0.5, &space).unwrap();
        assert!(!res.result.feasible);
        assert_eq!(res.result.status, SearchStatus::FidelityInfeasible);
    }

    #[test]
    fn fixed_target_residual_is_small() {
        let map = PurificationMap::bbpssw();
        for (l, k) in [(2, 2), (3, 4), (4, 6)] {
            if let Some(t) = fixed_target(&map, path(l), k, w(0.95)) {
                let trace = evolve_trace(&map, raw_werner(t, path(l)), k).unwrap();
                assert!((trace.w_out() - t.value()).abs() <= 1e-9);
                assert!(t.value() <= 0.95);
            }
        }
    }

    #[test]
    fn fixed_target_budget_perfect_single_link() {
        let space = SearchSpace::new(ProtocolRegistry::builtin());
        let res = fixed_target_budget(WernerParameter::PERFECT, path(1), 0.99, &space).unwrap();
        assert!(res.result.feasible, "{res:?}");
        assert_eq!(res.target, Some(1.0));
        assert_eq!(res.result.selected.unwrap().k, 1);
        assert_eq!(res.result.n0_min, Some(2));
    }

    #[test]
    fn fixed_target_below_boundary_is_infeasible() {
        let space = SearchSpace::new(ProtocolRegistry::builtin());
        let res = fixed_target_budget(w(0.5), path(3), 0.5, &space).unwrap();
        assert_eq!(res.result.status, SearchStatus::FidelityInfeasible);
    }
}
