//! First-order conditions of the two-provider, two-region game and the
//! per-provider best response.
//!
//! In the 2x2 game with linear reward and `alpha` cancelled, provider `j`
//! facing opponent `o` maximizes
//!
//! ```text
//! sum_k f_j n_k x_k / (x_k + y_k) + (xi / I) sum_k n_{-k} sqrt(s_jk) / (sqrt(s_jk) + sqrt(s_ok)) - s_j1 - s_j2
//! ```
//!
//! with `x_k = gamma beta sqrt(s_jk) - f_j` and `y_k = gamma beta sqrt(s_ok) - f_o`,
//! subject to `s_j1 + s_j2 <= E_j + xi_j`. The solver works with this smooth
//! share on its domain `x_k + y_k > 0`; an opponent offering nonpositive
//! utility is treated as offering a vanishing positive utility `eta`.

use crate::error::{Error, Result};
use crate::market::{GovernmentPolicy, MarketConfig, StrategyProfile};
use crate::roots::{brent, concave_argmax};
use crate::scalar::Scalar;

/// Stationarity residuals of one provider's KKT system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocResidual<T> {
    pub r_f: T,
    pub r_s1: T,
    pub r_s2: T,
    /// `|lambda * slack|` plus any budget overrun or negative multiplier.
    pub complementarity: T,
    pub lambda: T,
}

impl<T: Scalar> FocResidual<T> {
    pub fn max_abs(&self) -> T {
        self.r_f
            .abs()
            .max(self.r_s1.abs())
            .max(self.r_s2.abs())
            .max(self.complementarity.abs())
    }
}

/// A provider's own decision together with its budget multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OwnPoint<T> {
    pub spend: [T; 2],
    pub fee: T,
    pub lambda: T,
}

/// The opponent's (fixed) decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpponentPoint<T> {
    pub spend: [T; 2],
    pub fee: T,
}

impl<T: Scalar> OpponentPoint<T> {
    pub fn of(profile: &StrategyProfile<T>, j: usize) -> Self {
        Self {
            spend: [profile.spend(j, 0), profile.spend(j, 1)],
            fee: profile.fee(j),
        }
    }
}

/// Smallest opponent utility the solver distinguishes from zero; never below
/// the rounding resolution of a utility evaluation.
pub(crate) fn utility_floor<T: Scalar>(cfg: &MarketConfig<T>) -> T {
    let gb = cfg.utility_scale() * cfg.home_calls();
    let rel = T::lit(1e-9).max(T::lit(64.0) * T::epsilon());
    rel * gb * cfg.total_subsidy().max(T::one()).sqrt()
}

/// Smallest own spend the solver places in a region.
pub(crate) fn spend_floor<T: Scalar>(cfg: &MarketConfig<T>) -> T {
    T::lit(1e-9) * cfg.total_subsidy().max(T::one())
}

/// Relative slack for value comparisons and domain offsets.
fn rel_tol<T: Scalar>() -> T {
    T::lit(1e-12).max(T::lit(16.0) * T::epsilon())
}

/// One region as seen by the acting provider at a fixed fee.
#[derive(Debug, Clone, Copy)]
struct Region<T> {
    gb: T,
    fee: T,
    customers: T,
    rival_utility: T,
    rival_root: T,
    reward: T,
}

impl<T: Scalar> Region<T> {
    fn new(cfg: &MarketConfig<T>, k: usize, fee: T, opp: &OpponentPoint<T>, floor: Option<T>) -> Self {
        let gb = cfg.utility_scale() * cfg.home_calls();
        let raw = gb * opp.spend[k].sqrt() - opp.fee;
        let rival_utility = match floor {
            Some(eta) if raw <= eta => eta,
            _ => raw,
        };
        let per_customer = cfg.total_subsidy() / T::from_count(cfg.total_customers());
        Self {
            gb,
            fee,
            customers: cfg.population(k),
            rival_utility,
            rival_root: opp.spend[k].sqrt(),
            reward: per_customer * cfg.population(1 - k),
        }
    }

    fn value(&self, s: T) -> T {
        let r = s.sqrt();
        let x = self.gb * r - self.fee;
        let d = x + self.rival_utility;
        let revenue = if self.fee == T::zero() {
            T::zero()
        } else if d > T::zero() {
            self.fee * self.customers * x / d
        } else {
            T::neg_infinity()
        };
        let denom = r + self.rival_root;
        let reward = if denom > T::zero() {
            self.reward * r / denom
        } else {
            self.reward * T::lit(0.5)
        };
        revenue + reward
    }

    /// Derivative of `value` in the spend.
    fn slope(&self, s: T) -> T {
        let two = T::lit(2.0);
        let r = s.sqrt();
        let d = self.gb * r - self.fee + self.rival_utility;
        let revenue = self.fee * self.customers * self.gb * self.rival_utility / (two * r * d * d);
        let c = self.rival_root;
        let reward = self.reward * c / (two * (r + c) * (r + c) * r);
        revenue + reward
    }

    /// Derivative of `value` in the fee.
    fn fee_slope(&self, s: T) -> T {
        let a = self.gb * s.sqrt();
        let x = a - self.fee;
        let d = x + self.rival_utility;
        self.customers * ((a - T::lit(2.0) * self.fee) * d + self.fee * x) / (d * d)
    }

    /// Spend below which the smooth share leaves its domain.
    fn pole(&self) -> T {
        if self.fee > self.rival_utility {
            let r = (self.fee - self.rival_utility) / self.gb;
            r * r
        } else {
            T::zero()
        }
    }
}

fn regions<T: Scalar>(cfg: &MarketConfig<T>, fee: T, opp: &OpponentPoint<T>, floor: Option<T>) -> [Region<T>; 2] {
    [Region::new(cfg, 0, fee, opp, floor), Region::new(cfg, 1, fee, opp, floor)]
}

fn residual_from<T: Scalar>(rs: &[Region<T>; 2], own: &OwnPoint<T>, budget: T) -> FocResidual<T> {
    let r_f = rs[0].fee_slope(own.spend[0]) + rs[1].fee_slope(own.spend[1]);
    let r_s1 = rs[0].slope(own.spend[0]) - T::one() - own.lambda;
    let r_s2 = rs[1].slope(own.spend[1]) - T::one() - own.lambda;
    let slack = budget - own.spend[0] - own.spend[1];
    let complementarity = (own.lambda * slack).abs() + (-slack).max(T::zero()) + (-own.lambda).max(T::zero());
    FocResidual {
        r_f,
        r_s1,
        r_s2,
        complementarity,
        lambda: own.lambda,
    }
}

/// FOC residuals of provider `j` (0 or 1), evaluated exactly as derived from
/// the smooth objective with the raw opponent utility.
pub fn residuals<T: Scalar>(
    j: usize,
    own: &OwnPoint<T>,
    opp: &OpponentPoint<T>,
    policy: &GovernmentPolicy<T>,
    cfg: &MarketConfig<T>,
) -> Result<FocResidual<T>> {
    cfg.require_two_by_two()?;
    let o = 1 - j;
    for k in 0..2 {
        if !(own.spend[k] > T::zero()) {
            return Err(Error::SingularDomain { provider: j, region: k });
        }
        if !(opp.spend[k] > T::zero()) {
            return Err(Error::SingularDomain { provider: o, region: k });
        }
    }
    let rs = regions(cfg, own.fee, opp, None);
    Ok(residual_from(&rs, own, policy.budget(cfg, j)))
}

pub fn residuals_provider1<T: Scalar>(
    own: &OwnPoint<T>,
    opp: &OpponentPoint<T>,
    policy: &GovernmentPolicy<T>,
    cfg: &MarketConfig<T>,
) -> Result<FocResidual<T>> {
    residuals(0, own, opp, policy, cfg)
}

pub fn residuals_provider2<T: Scalar>(
    own: &OwnPoint<T>,
    opp: &OpponentPoint<T>,
    policy: &GovernmentPolicy<T>,
    cfg: &MarketConfig<T>,
) -> Result<FocResidual<T>> {
    residuals(1, own, opp, policy, cfg)
}

/// Residuals of both providers at a profile, each with the budget multiplier
/// that best balances its two spend conditions (zero when the budget is slack).
pub fn profile_residuals<T: Scalar>(
    profile: &StrategyProfile<T>,
    policy: &GovernmentPolicy<T>,
    cfg: &MarketConfig<T>,
) -> Result<[FocResidual<T>; 2]> {
    let one = |j: usize| -> Result<FocResidual<T>> {
        let opp = OpponentPoint::of(profile, 1 - j);
        let mut own = OwnPoint {
            spend: [profile.spend(j, 0), profile.spend(j, 1)],
            fee: profile.fee(j),
            lambda: T::zero(),
        };
        let free = residuals(j, &own, &opp, policy, cfg)?;
        let slack = policy.budget(cfg, j) - own.spend[0] - own.spend[1];
        if slack <= T::lit(1e-9) * policy.budget(cfg, j).max(T::one()) {
            own.lambda = ((free.r_s1 + free.r_s2) * T::lit(0.5)).max(T::zero());
        }
        residuals(j, &own, &opp, policy, cfg)
    };
    Ok([one(0)?, one(1)?])
}

/// Provider `j`'s payoff in the 2x2 game as the solver sees it: smooth
/// subscription share with the opponent's utility floored at a vanishing
/// positive value. Equals [`crate::market::provider_objective`] whenever every
/// customer utility is positive. Returns `-inf` outside the share's domain.
pub fn smooth_objective<T: Scalar>(j: usize, profile: &StrategyProfile<T>, cfg: &MarketConfig<T>) -> T {
    let opp = OpponentPoint::of(profile, 1 - j);
    let rs = regions(cfg, profile.fee(j), &opp, Some(utility_floor(cfg)));
    rs[0].value(profile.spend(j, 0)) + rs[1].value(profile.spend(j, 1)) - profile.total_spend(j)
}

/// Same as [`smooth_objective`] for a candidate own decision against a fixed opponent.
pub fn smooth_objective_at<T: Scalar>(spend: [T; 2], fee: T, opp: &OpponentPoint<T>, cfg: &MarketConfig<T>) -> T {
    let rs = regions(cfg, fee, opp, Some(utility_floor(cfg)));
    rs[0].value(spend[0]) + rs[1].value(spend[1]) - spend[0] - spend[1]
}

/// Solver knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponseOptions<T> {
    /// Uniform fee grid resolution for the global scan.
    pub fee_grid: usize,
    /// Largest acceptable residual at an interior solution.
    pub tol_foc: T,
}

impl<T: Scalar> Default for BestResponseOptions<T> {
    fn default() -> Self {
        Self {
            fee_grid: 48,
            tol_foc: T::lit(1e-8).max(T::lit(1e6) * T::epsilon()),
        }
    }
}

/// A provider's optimal reply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponse<T> {
    pub spend: [T; 2],
    pub fee: T,
    pub lambda: T,
    pub objective: T,
    pub residual: FocResidual<T>,
    /// The reply sits on a bound (zero fee, spend floor, share domain edge) or
    /// faces an opponent offering no utility, so stationarity need not hold.
    pub boundary: bool,
}

#[derive(Debug, Clone, Copy)]
struct Candidate<T> {
    fee: T,
    spend: [T; 2],
    lambda: T,
    value: T,
}

struct Subproblem<'a, T> {
    cfg: &'a MarketConfig<T>,
    opp: OpponentPoint<T>,
    budget: T,
    floor: T,
    eta: T,
}

impl<T: Scalar> Subproblem<'_, T> {
    /// Optimal spend for a fixed fee, or `None` if no feasible spend keeps the
    /// share well defined.
    fn spend_at(&self, fee: T) -> Option<Candidate<T>> {
        let rs = regions(self.cfg, fee, &self.opp, Some(self.eta));
        let lo = [
            (rs[0].pole() * (T::one() + rel_tol::<T>())).max(self.floor),
            (rs[1].pole() * (T::one() + rel_tol::<T>())).max(self.floor),
        ];
        if lo[0] + lo[1] >= self.budget {
            return None;
        }
        let free = [
            concave_argmax(|s| rs[0].slope(s) - T::one(), lo[0], self.budget),
            concave_argmax(|s| rs[1].slope(s) - T::one(), lo[1], self.budget),
        ];
        let (spend, lambda) = if free[0] + free[1] <= self.budget {
            (free, T::zero())
        } else {
            let b = self.budget;
            let s1 = concave_argmax(|s| rs[0].slope(s) - rs[1].slope(b - s), lo[0], b - lo[1]);
            let s = [s1, b - s1];
            let lambda = (rs[0].slope(s1) - T::one()).max(T::zero());
            (s, lambda)
        };
        let value = rs[0].value(spend[0]) + rs[1].value(spend[1]) - spend[0] - spend[1];
        Some(Candidate {
            fee,
            spend,
            lambda,
            value,
        })
    }

    fn value_at(&self, fee: T) -> T {
        self.spend_at(fee).map_or(T::neg_infinity(), |c| c.value)
    }

    /// Envelope derivative of the optimal value in the fee; negative when infeasible.
    fn fee_slope_at(&self, fee: T) -> T {
        match self.spend_at(fee) {
            Some(c) => {
                let rs = regions(self.cfg, fee, &self.opp, Some(self.eta));
                let d = rs[0].fee_slope(c.spend[0]) + rs[1].fee_slope(c.spend[1]);
                if d.is_nan() {
                    -T::one()
                } else {
                    d
                }
            }
            None => -T::one(),
        }
    }

    /// Polishes a grid maximum `grid[i]` to a stationary fee.
    fn refine(&self, grid: &[T], values: &[T], i: usize) -> Candidate<T> {
        let last = grid.len() - 1;
        let here = self.spend_at(grid[i]).expect("grid maximum is feasible");
        let slope = self.fee_slope_at(grid[i]);
        let (lo, hi) = if slope > T::zero() && i < last {
            (grid[i], grid[i + 1])
        } else if slope < T::zero() && i > 0 {
            (grid[i - 1], grid[i])
        } else {
            return here;
        };
        let refined = brent(|f| self.fee_slope_at(f), lo, hi, T::zero(), 200)
            .and_then(|f| self.spend_at(f))
            .filter(|c| c.value >= values[i] - rel_tol::<T>() * values[i].abs().max(T::one()));
        refined.unwrap_or(here)
    }
}

fn better<T: Scalar>(a: &Candidate<T>, b: &Candidate<T>) -> bool {
    let scale = a.value.abs().max(b.value.abs()).max(T::one());
    let tie = (a.value - b.value).abs() <= rel_tol::<T>() * scale;
    if tie {
        a.fee > b.fee
    } else {
        a.value > b.value
    }
}

/// Provider `j`'s best reply to the opponent's strategy in `profile`.
///
/// The fee is found by a global scan over `[0, gamma beta sqrt(budget)]`
/// (plus the provider's current fee as an extra candidate) followed by root
/// polishing of the envelope derivative; for each fee the spends solve the
/// concave inner problem exactly.
pub fn best_response_provider<T: Scalar>(
    j: usize,
    profile: &StrategyProfile<T>,
    policy: &GovernmentPolicy<T>,
    cfg: &MarketConfig<T>,
    options: &BestResponseOptions<T>,
) -> Result<BestResponse<T>> {
    cfg.require_two_by_two()?;
    profile.require_shape(cfg)?;
    if j > 1 {
        return Err(Error::InvalidArgument(format!("provider index {j} out of range")));
    }
    let opp = OpponentPoint::of(profile, 1 - j);
    let eta = utility_floor(cfg);
    let sub = Subproblem {
        cfg,
        opp,
        budget: policy.budget(cfg, j),
        floor: spend_floor(cfg),
        eta,
    };
    if sub.budget <= T::lit(2.0) * sub.floor {
        let spend = [T::zero(); 2];
        let rs = regions(cfg, T::zero(), &opp, Some(eta));
        let own = OwnPoint {
            spend,
            fee: T::zero(),
            lambda: T::zero(),
        };
        return Ok(BestResponse {
            spend,
            fee: T::zero(),
            lambda: T::zero(),
            objective: smooth_objective_at(spend, T::zero(), &opp, cfg),
            residual: residual_from(&rs, &own, sub.budget),
            boundary: true,
        });
    }

    let gb = cfg.utility_scale() * cfg.home_calls();
    let fee_max = gb * sub.budget.sqrt();
    let n = options.fee_grid.max(2);
    let mut grid: Vec<T> = (0..=n)
        .map(|i| fee_max * T::from_count(i as u64) / T::from_count(n as u64))
        .collect();
    let warm = profile.fee(j);
    if warm > T::zero() && warm < fee_max {
        let at = grid.partition_point(|&f| f < warm);
        if grid[at] != warm {
            grid.insert(at, warm);
        }
    }
    let values: Vec<T> = grid.iter().map(|&f| sub.value_at(f)).collect();

    let mut best: Option<Candidate<T>> = None;
    for i in 0..grid.len() {
        if values[i] == T::neg_infinity() {
            continue;
        }
        let left_ok = i == 0 || values[i] >= values[i - 1];
        let right_ok = i + 1 == grid.len() || values[i] >= values[i + 1];
        if !(left_ok && right_ok) {
            continue;
        }
        let cand = sub.refine(&grid, &values, i);
        if best.as_ref().is_none_or(|b| better(&cand, b)) {
            best = Some(cand);
        }
    }
    let best = best.ok_or(Error::NonConvergence {
        provider: j,
        residual: f64::INFINITY,
    })?;

    let rs = regions(cfg, best.fee, &opp, Some(eta));
    let own = OwnPoint {
        spend: best.spend,
        fee: best.fee,
        lambda: best.lambda,
    };
    let residual = residual_from(&rs, &own, sub.budget);
    let rival_silent = (0..2).any(|k| gb * opp.spend[k].sqrt() - opp.fee <= eta);
    let near = |s: T, bound: T| s <= bound * T::lit(1.0 + 1e-9) + sub.floor;
    let boundary = best.fee == T::zero()
        || best.fee >= fee_max
        || rival_silent
        || (0..2).any(|k| near(best.spend[k], rs[k].pole().max(sub.floor)));
    if !boundary && !(residual.max_abs() <= options.tol_foc) {
        return Err(Error::NonConvergence {
            provider: j,
            residual: residual.max_abs().to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(BestResponse {
        spend: best.spend,
        fee: best.fee,
        lambda: best.lambda,
        objective: best.value,
        residual,
        boundary,
    })
}
