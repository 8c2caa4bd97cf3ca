//! All-in recursive purification schedule.
//!
//! At every level all available copies are cut into `⌊n/r⌋` blocks, each
//! block is purified independently, and the successes are pooled for the next
//! level. Leftover copies are dropped. Conditioned on success the Werner
//! parameter follows a deterministic trace; the number of survivors follows a
//! chain of binomial transitions that is propagated exactly here.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocols::PurificationMap;
use crate::werner::WernerParameter;

/// Probability mass below this is dropped after each level.
const MASS_FLOOR: f64 = 1e-15;
/// Binomial terms below this are not generated.
const PMF_FLOOR: f64 = 1e-18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub block_size: usize,
    pub n0: usize,
}

impl ScheduleConfig {
    pub fn new(block_size: usize, n0: usize) -> Self {
        assert!(block_size >= 2, "block size must be at least 2");
        ScheduleConfig { block_size, n0 }
    }
}

/// Per-level Werner parameters `w(0..=k)` and block success probabilities
/// `p(1..=k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleTrace {
    pub w_levels: Vec<f64>,
    pub p_levels: Vec<f64>,
}

impl ScheduleTrace {
    pub fn depth(&self) -> usize {
        self.p_levels.len()
    }

    pub fn w_raw(&self) -> f64 {
        self.w_levels[0]
    }

    pub fn w_out(&self) -> f64 {
        *self.w_levels.last().expect("trace has at least the raw level")
    }
}

/// Runs the quality recursion `w(j) = f(w(j-1))`, `p(j) = g(w(j-1))`.
pub fn evolve_trace(map: &PurificationMap, w_raw: WernerParameter, depth: usize) -> Result<ScheduleTrace> {
    let mut w_levels = Vec::with_capacity(depth + 1);
    let mut p_levels = Vec::with_capacity(depth);
    let mut w = w_raw;
    w_levels.push(w.value());
    for level in 1..=depth {
        if !map.in_domain(w.value()) {
            let (lo, hi) = map.domain();
            return Err(Error::DomainExit {
                protocol: map.name().to_string(),
                level,
                value: w.value(),
                lo,
                hi,
            });
        }
        let (next, p) = map.apply(w)?;
        if p <= 0.0 {
            return Err(Error::ZeroProbability {
                protocol: map.name().to_string(),
                level,
            });
        }
        w = next;
        w_levels.push(w.value());
        p_levels.push(p);
    }
    Ok(ScheduleTrace { w_levels, p_levels })
}

pub fn blocks(n: usize, block_size: usize) -> usize {
    n / block_size
}

/// Distribution of the number of available copies after some level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopyDistribution {
    level: usize,
    mass: Vec<f64>,
}

impl CopyDistribution {
    pub fn point(n: usize) -> Self {
        let mut mass = vec![0.0; n + 1];
        mass[n] = 1.0;
        CopyDistribution { level: 0, mass }
    }

    /// Builds a distribution from raw masses; `None` unless they are
    /// non-negative and sum to one.
    pub fn from_masses(level: usize, mass: Vec<f64>) -> Option<Self> {
        let total: f64 = mass.iter().sum();
        (mass.iter().all(|&q| q >= 0.0) && (total - 1.0).abs() < 1e-10)
            .then_some(CopyDistribution { level, mass })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn prob(&self, m: usize) -> f64 {
        self.mass.get(m).copied().unwrap_or(0.0)
    }

    /// Largest copy count with nonzero mass.
    pub fn max_support(&self) -> usize {
        self.mass.iter().rposition(|&q| q > 0.0).unwrap_or(0)
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.mass.iter().enumerate().map(|(m, q)| m as f64 * q).sum()
    }

    /// Probability that at least one copy is available.
    pub fn at_least_one(&self) -> f64 {
        1.0 - self.prob(0)
    }
}

thread_local! {
    static LN_FACTORIAL: RefCell<Vec<f64>> = RefCell::new(vec![0.0]);
}

fn ln_choose(n: usize, k: usize) -> f64 {
    LN_FACTORIAL.with(|cell| {
        let mut table = cell.borrow_mut();
        while table.len() <= n {
            let i = table.len();
            let next = table[i - 1] + (i as f64).ln();
            table.push(next);
        }
        table[n] - table[k] - table[n - k]
    })
}

/// Mass of `Binomial(trials, p)` as `(offset, values)`, where `values[i]` is
/// the probability of `offset + i` successes. Terms below `PMF_FLOOR` are
/// omitted. The mode is anchored in log space and the remaining terms follow
/// from the multiplicative ratio `pmf(m+1)/pmf(m) = (n-m)/(m+1) · p/(1-p)`,
/// after which the window is renormalised.
pub(crate) fn binomial_pmf(trials: usize, p: f64) -> (usize, Vec<f64>) {
    if trials == 0 || p <= 0.0 {
        return (0, vec![1.0]);
    }
    if p >= 1.0 {
        return (trials, vec![1.0]);
    }
    let n = trials as f64;
    let odds = p / (1.0 - p);
    let mode = (((n + 1.0) * p).floor() as usize).min(trials);
    let anchor = (ln_choose(trials, mode) + mode as f64 * p.ln() + (n - mode as f64) * (-p).ln_1p()).exp();

    let mut below = Vec::new();
    let mut v = anchor;
    let mut m = mode;
    while m > 0 {
        // pmf(m-1) = pmf(m) · m / (n-m+1) · (1-p)/p
        v *= m as f64 / (n - m as f64 + 1.0) / odds;
        if v < PMF_FLOOR {
            break;
        }
        m -= 1;
        below.push(v);
    }
    let offset = mode - below.len();
    below.reverse();
    let mut values = below;
    values.push(anchor);
    let mut v = anchor;
    let mut m = mode;
    while m < trials {
        v *= (n - m as f64) / (m as f64 + 1.0) * odds;
        if v < PMF_FLOOR {
            break;
        }
        m += 1;
        values.push(v);
    }
    // The ratios are exact to rounding; normalising removes the anchor's
    // accumulated log-factorial error.
    let total: f64 = values.iter().sum();
    values.iter_mut().for_each(|v| *v /= total);
    (offset, values)
}

/// One level of the all-in transition:
/// `q'(m) = Σ_n q(n) · C(⌊n/r⌋, m) p^m (1-p)^(⌊n/r⌋-m)`.
pub fn dp_step(prev: &CopyDistribution, p: f64, block_size: usize) -> CopyDistribution {
    // Copy counts with the same number of blocks share one binomial.
    let max_blocks = blocks(prev.max_support(), block_size);
    let mut by_blocks = vec![0.0; max_blocks + 1];
    for (n, &q) in prev.mass.iter().enumerate() {
        if q > 0.0 {
            by_blocks[blocks(n, block_size)] += q;
        }
    }
    let mut next = vec![0.0; max_blocks + 1];
    for (b, &q) in by_blocks.iter().enumerate() {
        if q == 0.0 {
            continue;
        }
        let (offset, pmf) = binomial_pmf(b, p);
        for (i, v) in pmf.iter().enumerate() {
            next[offset + i] += q * v;
        }
    }
    let mut total = 0.0;
    for q in next.iter_mut() {
        if *q < MASS_FLOOR {
            *q = 0.0;
        }
        total += *q;
    }
    if total > 0.0 {
        next.iter_mut().for_each(|q| *q /= total);
    }
    let keep = next.iter().rposition(|&q| q > 0.0).map_or(1, |i| i + 1);
    next.truncate(keep);
    CopyDistribution {
        level: prev.level + 1,
        mass: next,
    }
}

/// Terminal distribution of surviving copies after all levels in `p_levels`.
pub fn survivor_distribution(config: ScheduleConfig, p_levels: &[f64]) -> CopyDistribution {
    p_levels
        .iter()
        .fold(CopyDistribution::point(config.n0), |q, &p| dp_step(&q, p, config.block_size))
}

/// Probability that the all-in schedule ends with at least one copy.
pub fn all_in_success(config: ScheduleConfig, p_levels: &[f64]) -> f64 {
    survivor_distribution(config, p_levels).at_least_one()
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;
    use crate::protocols::bbpssw_step;
    use crate::werner::werner_from_fidelity;

    fn binomial_exact(n: usize, p: f64) -> Vec<f64> {
        (0..=n)
            .map(|m| {
                let c = (0..m).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
                c * p.powi(m as i32) * (1.0 - p).powi((n - m) as i32)
            })
            .collect()
    }

    #[test]
    fn blocks_examples() {
        assert_eq!(blocks(216, 4), 54);
        assert_eq!(blocks(215, 4), 53);
        assert_eq!(blocks(3, 4), 0);
    }

    #[test]
    fn pmf_matches_direct_formula() {
        for &(n, p) in &[(1, 0.3), (7, 0.5), (20, 0.05), (54, 0.2318), (60, 0.97)] {
            let exact = binomial_exact(n, p);
            let (off, vals) = binomial_pmf(n, p);
            for m in 0..=n {
                let got = if m >= off && m - off < vals.len() { vals[m - off] } else { 0.0 };
                assert_abs_diff_eq!(got, exact[m], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn pmf_large_trials_is_normalised() {
        for &p in &[1e-4, 0.01, 0.5, 0.9, 0.9999] {
            let (off, vals) = binomial_pmf(50_000, p);
            let total: f64 = vals.iter().sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
            let mean: f64 = vals.iter().enumerate().map(|(i, v)| (off + i) as f64 * v).sum();
            assert_abs_diff_eq!(mean, 50_000.0 * p, epsilon = 1e-6 * 50_000.0);
        }
    }

    #[test]
    fn pmf_boundaries() {
        assert_eq!(binomial_pmf(10, 0.0), (0, vec![1.0]));
        assert_eq!(binomial_pmf(10, 1.0), (10, vec![1.0]));
        assert_eq!(binomial_pmf(0, 0.4), (0, vec![1.0]));
    }

    #[test]
    fn single_block() {
        let q = dp_step(&CopyDistribution::point(3), 0.3, 3);
        assert_abs_diff_eq!(q.prob(0), 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(q.prob(1), 0.3, epsilon = 1e-15);
        assert_eq!(q.level(), 1);
    }

    #[test]
    fn two_blocks_binomial() {
        let p = 0.37;
        let q = dp_step(&CopyDistribution::point(4), p, 2);
        let exact = binomial_exact(2, p);
        for m in 0..=2 {
            assert_abs_diff_eq!(q.prob(m), exact[m], epsilon = 1e-15);
        }
    }

    #[test]
    fn worked_example_first_level_mean() {
        let q = dp_step(&CopyDistribution::point(216), 0.2318, 4);
        assert_abs_diff_eq!(q.mean(), 54.0 * 0.2318, epsilon = 1e-9);
        assert_abs_diff_eq!(q.mean(), 12.5172, epsilon = 1e-9);
        let exact = binomial_exact(54, 0.2318);
        for m in 0..=54 {
            assert_abs_diff_eq!(q.prob(m), exact[m], epsilon = 1e-14);
        }
    }

    #[test]
    fn leftovers_are_discarded() {
        let p = 0.61;
        for r in 2..=5 {
            let q = survivor_distribution(ScheduleConfig::new(r, 2 * r - 1), &[p]);
            assert_abs_diff_eq!(q.prob(0), 1.0 - p, epsilon = 1e-15);
            assert_abs_diff_eq!(q.prob(1), p, epsilon = 1e-15);
        }
    }

    #[test]
    fn four_copies_two_levels() {
        let (p1, p2) = (0.6, 0.7);
        let s = all_in_success(ScheduleConfig::new(2, 4), &[p1, p2]);
        assert_abs_diff_eq!(s, p1 * p1 * p2, epsilon = 1e-15);
    }

    #[test]
    fn worked_example_success() {
        let p = [0.2318, 0.4188];
        assert_abs_diff_eq!(all_in_success(ScheduleConfig::new(4, 216), &p), 0.7527, epsilon = 5e-4);
        assert_abs_diff_eq!(all_in_success(ScheduleConfig::new(4, 215), &p), 0.7452, epsilon = 5e-4);
    }

    #[test]
    fn trace_perfect_input() {
        let t = evolve_trace(&PurificationMap::bbpssw(), WernerParameter::PERFECT, 3).unwrap();
        assert_eq!(t.w_levels, vec![1.0; 4]);
        assert_eq!(t.p_levels, vec![1.0; 3]);
        assert_eq!(t.depth(), 3);
    }

    #[test]
    fn trace_bbpssw_one_level() {
        let w_raw = werner_from_fidelity(0.8).unwrap();
        let t = evolve_trace(&PurificationMap::bbpssw(), w_raw, 1).unwrap();
        let (f_out, p) = bbpssw_step(0.8).unwrap();
        assert_abs_diff_eq!(t.w_out(), f_out.werner().value(), epsilon = 1e-15);
        assert_abs_diff_eq!(t.w_out(), werner_from_fidelity(0.83815).unwrap().value(), epsilon = 1e-5);
        assert_eq!(t.p_levels[0], p);
        assert_abs_diff_eq!(p, 0.76889, epsilon = 5e-6);
    }

    #[test]
    fn trace_rejects_separable_input() {
        let err = evolve_trace(&PurificationMap::bbpssw(), WernerParameter::new(0.2).unwrap(), 2).unwrap_err();
        assert!(matches!(err, Error::DomainExit { level: 1, .. }), "{err}");
    }

    #[test]
    fn from_masses_checks_normalisation() {
        assert!(CopyDistribution::from_masses(0, vec![0.5, 0.5]).is_some());
        assert!(CopyDistribution::from_masses(0, vec![0.5, 0.4]).is_none());
        assert!(CopyDistribution::from_masses(0, vec![1.5, -0.5]).is_none());
    }

    proptest! {
        #[test]
        fn steps_stay_normalised(n0 in 0usize..400, r in 2usize..6, p in 0.0f64..=1.0, p2 in 0.0f64..=1.0) {
            let q1 = dp_step(&CopyDistribution::point(n0), p, r);
            let q2 = dp_step(&q1, p2, r);
            for q in [&q1, &q2] {
                prop_assert!((q.total() - 1.0).abs() < 1e-10);
                prop_assert!(q.masses().iter().all(|&m| m >= 0.0));
            }
            prop_assert!(q1.max_support() <= n0 / r);
            prop_assert!(q2.max_support() <= n0 / (r * r));
        }

        #[test]
        fn depth_one_closed_form(n0 in 0usize..2000, r in 2usize..8, p in 0.001f64..0.999) {
            let got = all_in_success(ScheduleConfig::new(r, n0), &[p]);
            let want = 1.0 - (1.0 - p).powi((n0 / r) as i32);
            prop_assert!((got - want).abs() < 1e-12, "{} vs {}", got, want);
        }

        #[test]
        fn success_monotone_in_budget(n0 in 1usize..300, r in 2usize..5, ps in proptest::collection::vec(0.05f64..1.0, 1..4)) {
            let a = all_in_success(ScheduleConfig::new(r, n0), &ps);
            let b = all_in_success(ScheduleConfig::new(r, n0 + 1), &ps);
            prop_assert!(b >= a - 1e-12);
        }
    }
}
