//! Best-response iteration and the Monte-Carlo convergence harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::foc::{best_response_provider, smooth_objective, BestResponseOptions};
use crate::market::{EquilibriumResult, GovernmentPolicy, MarketConfig, StrategyProfile, TraceRecord};
use crate::scalar::Scalar;

/// Flattened trace row: `[s11, s12, s21, s22, f1, f2, obj1, obj2]`.
pub type TraceRow<T> = [T; 8];

/// The 2x2 trace as flat rows, starting from the all-zero state.
pub fn iteration_trace<T: Scalar>(result: &EquilibriumResult<T>) -> Vec<TraceRow<T>> {
    result
        .trace
        .iter()
        .map(|r| {
            let p = &r.profile;
            [
                p.spend(0, 0),
                p.spend(0, 1),
                p.spend(1, 0),
                p.spend(1, 1),
                p.fee(0),
                p.fee(1),
                r.objectives[0],
                r.objectives[1],
            ]
        })
        .collect()
}

fn objectives<T: Scalar>(profile: &StrategyProfile<T>, cfg: &MarketConfig<T>) -> Vec<T> {
    vec![smooth_objective(0, profile, cfg), smooth_objective(1, profile, cfg)]
}

/// Alternates best responses of provider 1 and provider 2 from the all-zero
/// profile until neither objective moves by `epsilon` or more.
///
/// Running out of iterations is not an error: the result comes back with
/// `converged = false`.
pub fn solve_equilibrium<T: Scalar>(
    cfg: &MarketConfig<T>,
    policy: &GovernmentPolicy<T>,
    epsilon: T,
    max_iter: usize,
) -> Result<EquilibriumResult<T>> {
    solve_equilibrium_with(cfg, policy, epsilon, max_iter, &BestResponseOptions::default())
}

pub fn solve_equilibrium_with<T: Scalar>(
    cfg: &MarketConfig<T>,
    policy: &GovernmentPolicy<T>,
    epsilon: T,
    max_iter: usize,
    options: &BestResponseOptions<T>,
) -> Result<EquilibriumResult<T>> {
    cfg.require_two_by_two()?;
    if !(epsilon > T::zero()) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let mut profile = StrategyProfile::zeros(2, 2);
    let mut current = objectives(&profile, cfg);
    let mut trace = vec![TraceRecord {
        profile: profile.clone(),
        objectives: current.clone(),
    }];
    for iter in 1..=max_iter {
        for j in 0..2 {
            let br = best_response_provider(j, &profile, policy, cfg, options)?;
            profile.set_provider(j, &br.spend, br.fee);
        }
        let next = objectives(&profile, cfg);
        let delta = current
            .iter()
            .zip(&next)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max);
        current = next;
        trace.push(TraceRecord {
            profile: profile.clone(),
            objectives: current.clone(),
        });
        if delta < epsilon {
            return Ok(EquilibriumResult {
                profile,
                objectives: current,
                iterations: iter,
                converged: true,
                trace,
            });
        }
    }
    Ok(EquilibriumResult {
        profile,
        objectives: current,
        iterations: max_iter,
        converged: false,
        trace,
    })
}

/// Inclusive integer sampling ranges for random 2x2 instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceRanges {
    pub total_subsidy: f64,
    pub xi1: (u64, u64),
    pub beta: (u64, u64),
    pub n1: (u64, u64),
    pub n2: (u64, u64),
    pub gamma: f64,
}

impl Default for InstanceRanges {
    fn default() -> Self {
        Self {
            total_subsidy: 1000.0,
            xi1: (50, 950),
            beta: (30, 200),
            n1: (20, 1000),
            n2: (20, 1000),
            gamma: 0.05,
        }
    }
}

/// One sampled instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Instance {
    pub xi1: u64,
    pub beta: u64,
    pub n1: u64,
    pub n2: u64,
}

impl InstanceRanges {
    fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("xi1", self.xi1), ("beta", self.beta), ("n1", self.n1), ("n2", self.n2)] {
            if lo > hi {
                return Err(Error::InvalidConfig(format!("empty range for {name}: [{lo}, {hi}]")));
            }
        }
        if self.xi1.1 as f64 > self.total_subsidy {
            return Err(Error::InvalidConfig("xi1 range exceeds the total subsidy".into()));
        }
        if self.beta.0 == 0 || self.n1.0 == 0 || self.n2.0 == 0 {
            return Err(Error::InvalidConfig("beta and populations must be positive".into()));
        }
        Ok(())
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Instance {
        Instance {
            xi1: rng.random_range(self.xi1.0..=self.xi1.1),
            beta: rng.random_range(self.beta.0..=self.beta.1),
            n1: rng.random_range(self.n1.0..=self.n1.1),
            n2: rng.random_range(self.n2.0..=self.n2.1),
        }
    }

    pub fn market(&self, inst: &Instance) -> Result<(MarketConfig<f64>, GovernmentPolicy<f64>)> {
        let cfg = MarketConfig::two_by_two(inst.n1, inst.n2, inst.beta as f64, self.gamma, self.total_subsidy)?;
        let policy = GovernmentPolicy::split(&cfg, inst.xi1 as f64)?;
        Ok((cfg, policy))
    }
}

/// Generator for run `index` of a Monte-Carlo batch seeded with `seed`.
pub fn run_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Iteration-count histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub run_count: u64,
    pub seed: u64,
    pub at_most_15: u64,
    pub from_16_to_99: u64,
    pub at_least_100: u64,
    pub nonconverged: u64,
}

impl MonteCarloReport {
    fn record(&mut self, outcome: Option<usize>) {
        self.run_count += 1;
        match outcome {
            None => self.nonconverged += 1,
            Some(i) if i <= 15 => self.at_most_15 += 1,
            Some(i) if i < 100 => self.from_16_to_99 += 1,
            Some(_) => self.at_least_100 += 1,
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.run_count += other.run_count;
        self.at_most_15 += other.at_most_15;
        self.from_16_to_99 += other.from_16_to_99;
        self.at_least_100 += other.at_least_100;
        self.nonconverged += other.nonconverged;
        self
    }

    pub fn fraction_fast(&self) -> f64 {
        self.at_most_15 as f64 / self.run_count.max(1) as f64
    }

    pub fn fraction_nonconverged(&self) -> f64 {
        self.nonconverged as f64 / self.run_count.max(1) as f64
    }
}

/// Iterations to convergence for a single sampled instance; `None` when it
/// did not converge (or the solver failed).
pub fn run_instance(ranges: &InstanceRanges, inst: &Instance, epsilon: f64, max_iter: usize) -> Option<usize> {
    let (cfg, policy) = ranges.market(inst).ok()?;
    match solve_equilibrium(&cfg, &policy, epsilon, max_iter) {
        Ok(r) if r.converged => Some(r.iterations),
        _ => None,
    }
}

/// Runs `runs` random instances in parallel and buckets their iteration counts.
pub fn monte_carlo(
    ranges: &InstanceRanges,
    runs: u64,
    seed: u64,
    epsilon: f64,
    max_iter: usize,
) -> Result<MonteCarloReport> {
    ranges.validate()?;
    if runs == 0 {
        return Err(Error::InvalidArgument("runs must be positive".into()));
    }
    let report = (0..runs)
        .into_par_iter()
        .map(|i| {
            let inst = ranges.sample(&mut run_rng(seed, i));
            let mut r = MonteCarloReport::default();
            r.record(run_instance(ranges, &inst, epsilon, max_iter));
            r
        })
        .reduce(MonteCarloReport::default, MonteCarloReport::merge);
    Ok(MonteCarloReport { seed, ..report })
}
