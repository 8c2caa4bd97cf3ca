//! Monte Carlo replay of the all-in schedule, used to cross-check the exact
//! survivor-count recursion.
//!
//! Every episode draws its randomness from its own ChaCha stream (seed, episode
//! index), so the estimate does not depend on how episodes are split across
//! threads.

use rand::distributions::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::{blocks, ScheduleConfig, ScheduleTrace};

const EPISODES_PER_TASK: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub config: ScheduleConfig,
    pub p_levels: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
}

impl TrialSpec {
    pub fn new(config: ScheduleConfig, p_levels: Vec<f64>, trials: u64, seed: u64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::domain("trials", 0.0, 1.0, f64::INFINITY));
        }
        if let Some(&p) = p_levels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::domain("level success probability", p, 0.0, 1.0));
        }
        Ok(TrialSpec {
            config,
            p_levels,
            trials,
            seed,
        })
    }

    pub fn from_trace(config: ScheduleConfig, trace: &ScheduleTrace, trials: u64, seed: u64) -> Result<Self> {
        TrialSpec::new(config, trace.p_levels.clone(), trials, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub successes: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Standardised distance to `reference`; zero when both coincide and the
    /// estimate has no spread.
    pub fn z_score(&self, reference: f64) -> f64 {
        let diff = self.p_hat - reference;
        if self.stderr > 0.0 {
            diff / self.stderr
        } else if diff.abs() <= 1e-12 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    }
}

fn episode(spec: &TrialSpec, levels: &[Bernoulli], index: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index);
    let mut copies = spec.config.n0;
    for level in levels {
        let attempts = blocks(copies, spec.config.block_size);
        copies = (0..attempts).filter(|_| level.sample(&mut rng)).count();
        if copies == 0 {
            return false;
        }
    }
    copies > 0
}

/// Fraction of simulated episodes ending with at least one copy, with its
/// binomial standard error.
pub fn simulate_success(spec: &TrialSpec) -> Estimate {
    let levels: Vec<Bernoulli> = spec
        .p_levels
        .iter()
        .map(|&p| Bernoulli::new(p).expect("validated probability"))
        .collect();
    let tasks = spec.trials.div_ceil(EPISODES_PER_TASK);
    let successes: u64 = (0..tasks)
        .into_par_iter()
        .map(|t| {
            let start = t * EPISODES_PER_TASK;
            let end = (start + EPISODES_PER_TASK).min(spec.trials);
            (start..end).filter(|&i| episode(spec, &levels, i)).count() as u64
        })
        .sum();
    let n = spec.trials as f64;
    let p_hat = successes as f64 / n;
    Estimate {
        successes,
        trials: spec.trials,
        p_hat,
        stderr: (p_hat * (1.0 - p_hat) / n).sqrt(),
    }
}
