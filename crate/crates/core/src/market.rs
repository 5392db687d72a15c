//! Market primitives: who lives where, what providers spend and charge, and
//! the pure functions that turn a strategy profile into subscriptions,
//! outside-call counts, provider payoffs and social welfare.
//!
//! Customers pick a home provider with probability proportional to the
//! utility offered in their home region (a Tullock contest). Utilities are
//! clamped at zero before normalizing; if every provider offers zero or
//! negative utility in a region, the region splits uniformly. Outside calls
//! are routed to providers in proportion to the utility of the signal they
//! offer where the call is made, with the same uniform fallback.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// The exogenous world: regions, populations, call volumes and budgets.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketConfig<T> {
    populations: Vec<u64>,
    total_customers: u64,
    provider_count: usize,
    home_calls: T,
    outside_calls: T,
    utility_scale: T,
    initial_cash: Vec<T>,
    total_subsidy: T,
}

impl<T: Scalar> MarketConfig<T> {
    /// Builds a market with zero initial cash for every provider.
    pub fn new(
        populations: Vec<u64>,
        provider_count: usize,
        home_calls: T,
        outside_calls: T,
        utility_scale: T,
        total_subsidy: T,
    ) -> Result<Self> {
        if populations.is_empty() {
            return Err(Error::InvalidConfig("at least one region is required".into()));
        }
        if let Some(k) = populations.iter().position(|&n| n == 0) {
            return Err(Error::InvalidConfig(format!("region {k} has no customers")));
        }
        if provider_count == 0 {
            return Err(Error::InvalidConfig("at least one provider is required".into()));
        }
        if !(home_calls.is_finite() && home_calls > T::zero()) {
            return Err(Error::InvalidConfig(format!("beta must be positive, got {home_calls}")));
        }
        if !(outside_calls.is_finite() && outside_calls >= T::zero()) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be nonnegative, got {outside_calls}"
            )));
        }
        if !(utility_scale.is_finite() && utility_scale > T::zero()) {
            return Err(Error::InvalidConfig(format!(
                "gamma must be positive, got {utility_scale}"
            )));
        }
        if !(total_subsidy.is_finite() && total_subsidy >= T::zero()) {
            return Err(Error::InvalidConfig(format!(
                "xi must be nonnegative, got {total_subsidy}"
            )));
        }
        let total_customers = populations.iter().sum();
        Ok(Self {
            populations,
            total_customers,
            provider_count,
            home_calls,
            outside_calls,
            utility_scale,
            initial_cash: vec![T::zero(); provider_count],
            total_subsidy,
        })
    }

    /// Two regions, two providers, `alpha = 1`.
    pub fn two_by_two(n1: u64, n2: u64, beta: T, gamma: T, xi: T) -> Result<Self> {
        Self::new(vec![n1, n2], 2, beta, T::one(), gamma, xi)
    }

    pub fn with_initial_cash(mut self, cash: Vec<T>) -> Result<Self> {
        if cash.len() != self.provider_count {
            return Err(Error::InvalidConfig(format!(
                "expected {} cash entries, got {}",
                self.provider_count,
                cash.len()
            )));
        }
        if cash.iter().any(|e| !(e.is_finite() && *e >= T::zero())) {
            return Err(Error::InvalidConfig("initial cash must be nonnegative".into()));
        }
        self.initial_cash = cash;
        Ok(self)
    }

    /// Same market with a different number of outside calls per customer.
    pub fn with_outside_calls(mut self, alpha: T) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= T::zero()) {
            return Err(Error::InvalidConfig(format!("alpha must be nonnegative, got {alpha}")));
        }
        self.outside_calls = alpha;
        Ok(self)
    }

    pub fn region_count(&self) -> usize {
        self.populations.len()
    }

    pub fn provider_count(&self) -> usize {
        self.provider_count
    }

    pub fn populations(&self) -> &[u64] {
        &self.populations
    }

    pub fn population(&self, k: usize) -> T {
        T::from_count(self.populations[k])
    }

    /// Total customers `I`.
    pub fn total_customers(&self) -> u64 {
        self.total_customers
    }

    pub fn home_calls(&self) -> T {
        self.home_calls
    }

    pub fn outside_calls(&self) -> T {
        self.outside_calls
    }

    pub fn utility_scale(&self) -> T {
        self.utility_scale
    }

    pub fn initial_cash(&self) -> &[T] {
        &self.initial_cash
    }

    pub fn total_subsidy(&self) -> T {
        self.total_subsidy
    }

    /// `u(psi) = gamma * sqrt(psi)`.
    pub fn intensity_utility(&self, psi: T) -> T {
        self.utility_scale * psi.max(T::zero()).sqrt()
    }

    pub(crate) fn require_two_by_two(&self) -> Result<()> {
        if self.region_count() != 2 || self.provider_count != 2 {
            return Err(Error::InvalidConfig(format!(
                "two regions and two providers required, got K={} J={}",
                self.region_count(),
                self.provider_count
            )));
        }
        Ok(())
    }
}

/// Proportion of a provider's grant the government claws back, as a function
/// of the outside calls it served.
#[derive(Clone)]
pub struct PenaltyFn<T> {
    inner: Arc<dyn Fn(T) -> T + Send + Sync>,
    label: &'static str,
}

impl<T: Scalar> PenaltyFn<T> {
    /// Wraps an arbitrary map. It must satisfy `p(0) = 1`.
    pub fn new(label: &'static str, f: impl Fn(T) -> T + Send + Sync + 'static) -> Result<Self> {
        let p0 = f(T::zero());
        if p0 != T::one() {
            return Err(Error::InvalidArgument(format!(
                "penalty must equal 1 at zero outside calls, got {p0}"
            )));
        }
        Ok(Self {
            inner: Arc::new(f),
            label,
        })
    }

    /// `p(x) = 1 - per_call * x / grant`, unbounded below. Equivalent to an
    /// uncapped reward of `per_call` money per outside call.
    pub fn linear(per_call: T, grant: T) -> Self {
        Self {
            inner: Arc::new(move |x: T| {
                if grant > T::zero() {
                    T::one() - per_call * x / grant
                } else {
                    T::one()
                }
            }),
            label: "linear",
        }
    }

    /// Linear penalty that stops at zero once `grant / per_call` calls are served.
    pub fn linear_capped(per_call: T, grant: T) -> Self {
        let lin = Self::linear(per_call, grant);
        Self {
            inner: Arc::new(move |x: T| lin.eval(x).max(T::zero())),
            label: "linear-capped",
        }
    }

    /// Always forfeit the full grant.
    pub fn forfeit_all() -> Self {
        Self {
            inner: Arc::new(|_| T::one()),
            label: "forfeit-all",
        }
    }

    /// Never forfeit anything. Breaks `p(0) = 1`; intended for bounding tests.
    pub fn forgive_all() -> Self {
        Self {
            inner: Arc::new(|_| T::zero()),
            label: "forgive-all",
        }
    }

    pub fn eval(&self, outside_calls: T) -> T {
        (self.inner)(outside_calls)
    }
}

impl<T> fmt::Debug for PenaltyFn<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PenaltyFn").field("label", &self.label).finish()
    }
}

/// How served outside calls turn into retained subsidy.
#[derive(Debug, Clone)]
pub enum RewardRule<T> {
    /// Uncapped reward `delta * OC_j` with `delta = xi / (alpha * I)`.
    Linear,
    /// General mode: the provider keeps `(1 - p(OC_j)) * xi_j`.
    Penalty(PenaltyFn<T>),
}

/// The government's move: per-provider grants and the reward rule.
#[derive(Debug, Clone)]
pub struct GovernmentPolicy<T> {
    grants: Vec<T>,
    reward: RewardRule<T>,
}

impl<T: Scalar> GovernmentPolicy<T> {
    pub fn linear(cfg: &MarketConfig<T>, grants: Vec<T>) -> Result<Self> {
        Self::validate_grants(cfg, &grants)?;
        Ok(Self {
            grants,
            reward: RewardRule::Linear,
        })
    }

    pub fn with_penalty(cfg: &MarketConfig<T>, grants: Vec<T>, penalty: PenaltyFn<T>) -> Result<Self> {
        Self::validate_grants(cfg, &grants)?;
        Ok(Self {
            grants,
            reward: RewardRule::Penalty(penalty),
        })
    }

    /// Grants `(xi1, xi - xi1)` under the linear reward.
    pub fn split(cfg: &MarketConfig<T>, xi1: T) -> Result<Self> {
        let xi = cfg.total_subsidy();
        Self::linear(cfg, vec![xi1, (xi - xi1).max(T::zero())])
    }

    fn validate_grants(cfg: &MarketConfig<T>, grants: &[T]) -> Result<()> {
        if grants.len() != cfg.provider_count() {
            return Err(Error::InvalidConfig(format!(
                "expected {} grants, got {}",
                cfg.provider_count(),
                grants.len()
            )));
        }
        if grants.iter().any(|g| !(g.is_finite() && *g >= T::zero())) {
            return Err(Error::InvalidConfig("grants must be nonnegative".into()));
        }
        let total: T = grants.iter().copied().sum();
        let xi = cfg.total_subsidy();
        if total > xi + T::lit(1e-12) * xi.max(T::one()) {
            return Err(Error::InvalidConfig(format!(
                "grants sum to {total}, exceeding the subsidy budget {xi}"
            )));
        }
        Ok(())
    }

    pub fn grants(&self) -> &[T] {
        &self.grants
    }

    pub fn grant(&self, j: usize) -> T {
        self.grants[j]
    }

    pub fn reward(&self) -> &RewardRule<T> {
        &self.reward
    }

    /// `delta = xi / (alpha * I)`; `None` when nobody makes outside calls.
    pub fn per_call_reward(&self, cfg: &MarketConfig<T>) -> Option<T> {
        let alpha = cfg.outside_calls();
        if alpha > T::zero() {
            Some(cfg.total_subsidy() / (alpha * T::from_count(cfg.total_customers())))
        } else {
            None
        }
    }

    /// Cash available to provider `j`: `E_j + xi_j`.
    pub fn budget(&self, cfg: &MarketConfig<T>, j: usize) -> T {
        cfg.initial_cash()[j] + self.grants[j]
    }
}

/// Every provider's regional spend and its fee.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile<T> {
    spend: Vec<Vec<T>>,
    fees: Vec<T>,
}

impl<T: Scalar> StrategyProfile<T> {
    pub fn new(spend: Vec<Vec<T>>, fees: Vec<T>) -> Result<Self> {
        if spend.len() != fees.len() || spend.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "{} spend rows for {} fees",
                spend.len(),
                fees.len()
            )));
        }
        let k = spend[0].len();
        if k == 0 || spend.iter().any(|row| row.len() != k) {
            return Err(Error::InvalidArgument("spend rows must share one nonzero length".into()));
        }
        let ok = |v: &T| v.is_finite() && *v >= T::zero();
        if !spend.iter().flatten().all(ok) || !fees.iter().all(ok) {
            return Err(Error::InvalidArgument(
                "spends and fees must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { spend, fees })
    }

    pub fn zeros(providers: usize, regions: usize) -> Self {
        Self {
            spend: vec![vec![T::zero(); regions]; providers],
            fees: vec![T::zero(); providers],
        }
    }

    /// Two-provider, two-region profile `[[s11, s12], [s21, s22]]`, `[f1, f2]`.
    pub fn two_by_two(spend: [[T; 2]; 2], fees: [T; 2]) -> Result<Self> {
        Self::new(spend.iter().map(|r| r.to_vec()).collect(), fees.to_vec())
    }

    pub fn provider_count(&self) -> usize {
        self.fees.len()
    }

    pub fn region_count(&self) -> usize {
        self.spend[0].len()
    }

    pub fn spend(&self, j: usize, k: usize) -> T {
        self.spend[j][k]
    }

    pub fn spend_row(&self, j: usize) -> &[T] {
        &self.spend[j]
    }

    pub fn fee(&self, j: usize) -> T {
        self.fees[j]
    }

    pub fn fees(&self) -> &[T] {
        &self.fees
    }

    pub fn total_spend(&self, j: usize) -> T {
        self.spend[j].iter().copied().sum()
    }

    /// `sum_k s_jk <= E_j + xi_j`, with a relative slack of `1e-12`.
    pub fn is_feasible(&self, j: usize, policy: &GovernmentPolicy<T>, cfg: &MarketConfig<T>) -> bool {
        let budget = policy.budget(cfg, j);
        self.total_spend(j) <= budget + T::lit(1e-12) * budget.max(T::one())
    }

    pub(crate) fn require_shape(&self, cfg: &MarketConfig<T>) -> Result<()> {
        if self.provider_count() != cfg.provider_count() || self.region_count() != cfg.region_count() {
            return Err(Error::InvalidArgument(format!(
                "profile is {}x{}, market is {}x{}",
                self.provider_count(),
                self.region_count(),
                cfg.provider_count(),
                cfg.region_count()
            )));
        }
        Ok(())
    }

    pub(crate) fn set_provider(&mut self, j: usize, spend: &[T], fee: T) {
        self.spend[j].copy_from_slice(spend);
        self.fees[j] = fee;
    }
}

/// One snapshot of the best-response iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord<T> {
    pub profile: StrategyProfile<T>,
    pub objectives: Vec<T>,
}

/// Outcome of best-response iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult<T> {
    pub profile: StrategyProfile<T>,
    pub objectives: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Starts with the all-zero profile, then one record per iteration.
    pub trace: Vec<TraceRecord<T>>,
}

/// Closed-form approximation of the providers' equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormSolution<T> {
    /// `[[s11, s12], [s21, s22]]`.
    pub s_star: [[T; 2]; 2],
    pub f_star: [T; 2],
    /// Fees from all three cubic roots, indexed by branch `k = 0, 1, 2`.
    pub fee_branches: [[T; 3]; 2],
    /// True for a provider whose selected fee came out negative and was clamped to zero.
    pub fee_clamped: [bool; 2],
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
    pub s1_star: T,
    pub s2_star: T,
}

/// `U = beta * gamma * sqrt(psi) - fee`. Negative values are allowed.
pub fn customer_utility<T: Scalar>(psi: T, fee: T, cfg: &MarketConfig<T>) -> T {
    cfg.home_calls() * cfg.intensity_utility(psi) - fee
}

/// Normalized contest shares of nonnegative-clamped weights; uniform if all
/// weights are zero.
pub(crate) fn contest_shares<T: Scalar>(weights: impl IntoIterator<Item = T>) -> Vec<T> {
    let clamped: Vec<T> = weights.into_iter().map(|w| w.max(T::zero())).collect();
    let total: T = clamped.iter().copied().sum();
    if total > T::zero() {
        clamped.into_iter().map(|w| w / total).collect()
    } else {
        let n = clamped.len();
        vec![T::one() / T::from_count(n as u64); n]
    }
}

/// Subscription probabilities in region `k`, one per provider.
pub fn choice_probabilities<T: Scalar>(k: usize, profile: &StrategyProfile<T>, cfg: &MarketConfig<T>) -> Vec<T> {
    contest_shares(
        (0..profile.provider_count()).map(|j| customer_utility(profile.spend(j, k), profile.fee(j), cfg)),
    )
}

/// Share of the outside calls made in region `k` that each provider serves.
pub fn intensity_shares<T: Scalar>(k: usize, profile: &StrategyProfile<T>, cfg: &MarketConfig<T>) -> Vec<T> {
    contest_shares((0..profile.provider_count()).map(|j| cfg.intensity_utility(profile.spend(j, k))))
}

/// `flows[from][to]`: outside calls made by customers of region `from` while in region `to`.
pub fn outside_call_flows<T: Scalar>(cfg: &MarketConfig<T>) -> Result<Vec<Vec<T>>> {
    let k_count = cfg.region_count();
    let alpha = cfg.outside_calls();
    let mut flows = vec![vec![T::zero(); k_count]; k_count];
    if alpha == T::zero() {
        return Ok(flows);
    }
    let total = cfg.total_customers();
    for (from, row) in flows.iter_mut().enumerate() {
        let complement = total - cfg.populations()[from];
        if complement == 0 {
            if k_count == 1 {
                break;
            }
            return Err(Error::EmptyComplement { region: from });
        }
        let denom = T::from_count(complement);
        for (to, cell) in row.iter_mut().enumerate() {
            if to != from {
                *cell = alpha * cfg.population(from) * cfg.population(to) / denom;
            }
        }
    }
    Ok(flows)
}

/// Outside calls `OC_j` served by provider `j`.
pub fn outside_calls_served<T: Scalar>(j: usize, profile: &StrategyProfile<T>, cfg: &MarketConfig<T>) -> Result<T> {
    profile.require_shape(cfg)?;
    let flows = outside_call_flows(cfg)?;
    Ok(served_given_flows(j, cfg, &flows, |p, k| cfg.intensity_utility(profile.spend(p, k))))
}

fn served_given_flows<T: Scalar>(
    j: usize,
    cfg: &MarketConfig<T>,
    flows: &[Vec<T>],
    utility_in: impl Fn(usize, usize) -> T,
) -> T {
    let k_count = cfg.region_count();
    (0..k_count)
        .map(|k| {
            let inbound: T = (0..k_count).filter(|&h| h != k).map(|h| flows[h][k]).sum();
            let shares = contest_shares((0..cfg.provider_count()).map(|p| utility_in(p, k)));
            inbound * shares[j]
        })
        .sum()
}

/// Weight of region `k` in the linear reward: `sum_{h != k} n_h n_k / sum_{k' != h} n_k'`.
fn reward_weight<T: Scalar>(cfg: &MarketConfig<T>, k: usize) -> T {
    let total = cfg.total_customers();
    (0..cfg.region_count())
        .filter(|&h| h != k)
        .map(|h| {
            let complement = T::from_count(total - cfg.populations()[h]);
            cfg.population(h) * cfg.population(k) / complement
        })
        .sum()
}

/// Provider `j`'s payoff under the linear reward:
/// fee revenue, plus `(xi / I)` times its share of outside-call weight, minus spend.
/// The per-call volume `alpha` cancels and does not enter.
pub fn provider_objective<T: Scalar>(
    j: usize,
    profile: &StrategyProfile<T>,
    policy: &GovernmentPolicy<T>,
    cfg: &MarketConfig<T>,
) -> Result<T> {
    profile.require_shape(cfg)?;
    check_budget(j, profile, policy, cfg)?;
    let fee = profile.fee(j);
    let revenue: T = (0..cfg.region_count())
        .map(|k| fee * cfg.population(k) * choice_probabilities(k, profile, cfg)[j])
        .sum();
    let per_customer = cfg.total_subsidy() / T::from_count(cfg.total_customers());
    let reward: T = (0..cfg.region_count())
        .map(|k| reward_weight(cfg, k) * intensity_shares(k, profile, cfg)[j])
        .sum::<T>()
        * per_customer;
    Ok(revenue + reward - profile.total_spend(j))
}

fn check_budget<T: Scalar>(
    j: usize,
    profile: &StrategyProfile<T>,
    policy: &GovernmentPolicy<T>,
    cfg: &MarketConfig<T>,
) -> Result<()> {
    if !profile.is_feasible(j, policy, cfg) {
        return Err(Error::BudgetViolation {
            provider: j,
            spend: profile.total_spend(j).to_f64().unwrap_or(f64::NAN),
            budget: policy.budget(cfg, j).to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

/// Per-provider bandwidth use `b_jk` and the grants `B_j` it must exhaust.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthPlan<T> {
    pub usage: Vec<Vec<T>>,
    pub grants: Vec<T>,
}

/// Provider `j`'s payoff in the general model: intensity `Q(s, b)` and an
/// arbitrary penalty on outside calls. Evaluation only.
pub fn general_provider_objective<T, Q>(
    j: usize,
    profile: &StrategyProfile<T>,
    bandwidth: Option<&BandwidthPlan<T>>,
    intensity: Q,
    penalty: &PenaltyFn<T>,
    policy: &GovernmentPolicy<T>,
    cfg: &MarketConfig<T>,
) -> Result<T>
where
    T: Scalar,
    Q: Fn(T, T) -> T,
{
    profile.require_shape(cfg)?;
    check_budget(j, profile, policy, cfg)?;
    if let Some(plan) = bandwidth {
        let sum: T = plan.usage[j].iter().copied().sum();
        let grant = plan.grants[j];
        if (sum - grant).abs() > T::lit(1e-12) * grant.abs().max(T::one()) {
            return Err(Error::BandwidthMismatch {
                provider: j,
                sum: sum.to_f64().unwrap_or(f64::NAN),
                grant: grant.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    let psi = |p: usize, k: usize| {
        let b = bandwidth.map_or(T::zero(), |plan| plan.usage[p][k]);
        intensity(profile.spend(p, k), b)
    };
    let fee = profile.fee(j);
    let revenue: T = (0..cfg.region_count())
        .map(|k| {
            let probs = contest_shares(
                (0..cfg.provider_count()).map(|p| cfg.home_calls() * cfg.intensity_utility(psi(p, k)) - profile.fee(p)),
            );
            fee * cfg.population(k) * probs[j]
        })
        .sum();
    let flows = outside_call_flows(cfg)?;
    let served = served_given_flows(j, cfg, &flows, |p, k| cfg.intensity_utility(psi(p, k)));
    let p = penalty.eval(served);
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::PenaltyOutOfRange {
            outside_calls: served.to_f64().unwrap_or(f64::NAN),
            value: p.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(revenue + (T::one() - p) * policy.grant(j) - profile.total_spend(j))
}

/// Government objective: expected home-call utility under the subscription
/// probabilities, plus outside-call utility with each call weighted by the
/// serving provider's intensity share.
pub fn social_welfare<T: Scalar>(profile: &StrategyProfile<T>, cfg: &MarketConfig<T>) -> Result<T> {
    profile.require_shape(cfg)?;
    let flows = outside_call_flows(cfg)?;
    let k_count = cfg.region_count();
    let j_count = cfg.provider_count();
    let mut home = T::zero();
    let mut outside = T::zero();
    for k in 0..k_count {
        let probs = choice_probabilities(k, profile, cfg);
        let shares = intensity_shares(k, profile, cfg);
        let inbound: T = (0..k_count).filter(|&h| h != k).map(|h| flows[h][k]).sum();
        for j in 0..j_count {
            let u = cfg.intensity_utility(profile.spend(j, k));
            home = home + cfg.population(k) * probs[j] * cfg.home_calls() * u;
            outside = outside + inbound * shares[j] * u;
        }
    }
    Ok(home + outside)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table5() -> MarketConfig<f64> {
        MarketConfig::two_by_two(40, 80, 30.0, 0.05, 1000.0).unwrap()
    }

    #[test]
    fn utility_examples() {
        let cfg = table5();
        assert_eq!(customer_utility(0.0, 0.0, &cfg), 0.0);
        let u = customer_utility(200.0, 0.0, &cfg);
        assert!((u - 30.0 * 0.05 * 200f64.sqrt()).abs() < 1e-12);
        assert!((u - 21.2132).abs() < 1e-4);
        let neg = customer_utility(100.0, u, &cfg);
        assert!((neg - (15.0 - u)).abs() < 1e-12);
        assert!((neg + 6.2132).abs() < 1e-4);
    }

    #[test]
    fn choice_probabilities_examples() {
        let cfg = table5();
        let p = StrategyProfile::two_by_two([[100.0, 50.0], [100.0, 50.0]], [3.0, 3.0]).unwrap();
        assert_eq!(choice_probabilities(0, &p, &cfg), vec![0.5, 0.5]);

        // beta*gamma = 1.5, so sqrt(s) = 20 gives U = 30 at zero fee.
        let p = StrategyProfile::two_by_two([[400.0, 1.0], [400.0, 1.0]], [0.0, 20.0]).unwrap();
        let probs = choice_probabilities(0, &p, &cfg);
        assert!((probs[0] - 0.75).abs() < 1e-15 && (probs[1] - 0.25).abs() < 1e-15);

        // Both utilities at -5: uniform fallback.
        let p = StrategyProfile::two_by_two([[0.0, 0.0], [0.0, 0.0]], [5.0, 5.0]).unwrap();
        assert_eq!(choice_probabilities(0, &p, &cfg), vec![0.5, 0.5]);
    }

    #[test]
    fn flow_examples() {
        let cfg = MarketConfig::new(vec![40, 80], 2, 30.0, 2.0, 0.05, 1000.0).unwrap();
        let f = outside_call_flows(&cfg).unwrap();
        assert_eq!(f[0][1], 80.0);
        assert_eq!(f[1][0], 160.0);
        assert_eq!(f[0][0], 0.0);

        let cfg0 = cfg.clone().with_outside_calls(0.0).unwrap();
        assert!(outside_call_flows(&cfg0).unwrap().iter().flatten().all(|&v| v == 0.0));

        let cfg3 = MarketConfig::new(vec![10, 10, 10], 2, 30.0, 1.0, 0.05, 1000.0).unwrap();
        let f3 = outside_call_flows(&cfg3).unwrap();
        for (from, row) in f3.iter().enumerate() {
            for (to, v) in row.iter().enumerate() {
                assert_eq!(*v, if from == to { 0.0 } else { 5.0 });
            }
            assert_eq!(row.iter().sum::<f64>(), 10.0);
        }

        let single = MarketConfig::new(vec![10], 1, 30.0, 1.0, 0.05, 10.0).unwrap();
        assert_eq!(outside_call_flows(&single).unwrap(), vec![vec![0.0]]);
    }

    #[test]
    fn outside_calls_examples() {
        let cfg = MarketConfig::<f64>::new(vec![40, 80], 2, 30.0, 2.0, 0.05, 1000.0).unwrap();
        let sym = StrategyProfile::two_by_two([[30.0, 70.0], [30.0, 70.0]], [1.0, 2.0]).unwrap();
        let oc1 = outside_calls_served(0, &sym, &cfg).unwrap();
        assert!((oc1 - 120.0).abs() < 1e-12);
        assert!((outside_calls_served(1, &sym, &cfg).unwrap() - 120.0).abs() < 1e-12);

        let lopsided = StrategyProfile::two_by_two([[100.0, 100.0], [0.0, 0.0]], [0.0, 0.0]).unwrap();
        assert_eq!(outside_calls_served(0, &lopsided, &cfg).unwrap(), 240.0);
        assert_eq!(outside_calls_served(1, &lopsided, &cfg).unwrap(), 0.0);

        let quiet = cfg.with_outside_calls(0.0).unwrap();
        assert_eq!(outside_calls_served(0, &lopsided, &quiet).unwrap(), 0.0);
    }

    #[test]
    fn zero_profile_objective_is_even_split_of_subsidy() {
        let cfg = table5();
        let policy = GovernmentPolicy::split(&cfg, 400.0).unwrap();
        let zero = StrategyProfile::zeros(2, 2);
        for j in 0..2 {
            let v = provider_objective(j, &zero, &policy, &cfg).unwrap();
            assert!((v - 500.0).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn objective_rejects_overspending() {
        let cfg = table5();
        let policy = GovernmentPolicy::split(&cfg, 400.0).unwrap();
        let p = StrategyProfile::two_by_two([[300.0, 200.0], [1.0, 1.0]], [1.0, 1.0]).unwrap();
        assert!(matches!(
            provider_objective(0, &p, &policy, &cfg),
            Err(Error::BudgetViolation { provider: 0, .. })
        ));
        assert!(provider_objective(1, &p, &policy, &cfg).is_ok());
    }

    #[test]
    fn initial_cash_extends_the_budget() {
        let cfg = table5().with_initial_cash(vec![100.0, 0.0]).unwrap();
        let policy = GovernmentPolicy::split(&cfg, 400.0).unwrap();
        let p = StrategyProfile::two_by_two([[300.0, 200.0], [1.0, 1.0]], [1.0, 1.0]).unwrap();
        assert!(provider_objective(0, &p, &policy, &cfg).is_ok());
    }

    #[test]
    fn policy_rejects_grants_over_budget() {
        let cfg = table5();
        assert!(GovernmentPolicy::linear(&cfg, vec![600.0, 600.0]).is_err());
        let p = GovernmentPolicy::linear(&cfg, vec![300.0, 600.0]).unwrap();
        let cfg2 = MarketConfig::new(vec![40, 80], 2, 30.0, 2.0, 0.05, 1000.0).unwrap();
        assert_eq!(p.per_call_reward(&cfg2), Some(1000.0 / 240.0));
        assert_eq!(p.per_call_reward(&cfg2.with_outside_calls(0.0).unwrap()), None);
    }

    #[test]
    fn config_validation() {
        assert!(MarketConfig::new(vec![], 2, 30.0, 1.0, 0.05, 10.0).is_err());
        assert!(MarketConfig::new(vec![3, 0], 2, 30.0, 1.0, 0.05, 10.0).is_err());
        assert!(MarketConfig::new(vec![3, 4], 0, 30.0, 1.0, 0.05, 10.0).is_err());
        assert!(MarketConfig::new(vec![3, 4], 2, 0.0, 1.0, 0.05, 10.0).is_err());
        assert!(MarketConfig::new(vec![3, 4], 2, 30.0, -1.0, 0.05, 10.0).is_err());
        assert!(MarketConfig::new(vec![3, 4], 2, 30.0, 1.0, 0.0, 10.0).is_err());
        let cfg = MarketConfig::new(vec![3, 4, 5], 2, 30.0, 1.0, 0.05, 10.0).unwrap();
        assert_eq!(cfg.total_customers(), 12);
    }

    #[test]
    fn penalty_construction() {
        assert!(PenaltyFn::<f64>::new("half", |_| 0.5).is_err());
        let p = PenaltyFn::<f64>::new("step", |x| if x < 10.0 { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(p.eval(20.0), 0.0);
        let capped = PenaltyFn::linear_capped(2.0, 10.0);
        assert_eq!(capped.eval(0.0), 1.0);
        assert_eq!(capped.eval(100.0), 0.0);
        assert_eq!(PenaltyFn::linear(2.0, 10.0).eval(10.0), -1.0);
    }

    #[test]
    fn general_objective_forfeit_and_forgive() {
        let cfg = table5();
        let policy = GovernmentPolicy::split(&cfg, 400.0).unwrap();
        let p = StrategyProfile::two_by_two([[100.0, 150.0], [200.0, 250.0]], [10.0, 12.0]).unwrap();
        let linear_q = |s: f64, _b: f64| s;
        let revenue: f64 = (0..2)
            .map(|k| p.fee(0) * cfg.population(k) * choice_probabilities(k, &p, &cfg)[0])
            .sum();
        let forfeit =
            general_provider_objective(0, &p, None, linear_q, &PenaltyFn::forfeit_all(), &policy, &cfg).unwrap();
        assert!((forfeit - (revenue - 250.0)).abs() < 1e-9);

        let zero = StrategyProfile::two_by_two([[0.0, 0.0], [200.0, 250.0]], [10.0, 12.0]).unwrap();
        let rev0: f64 = (0..2)
            .map(|k| zero.fee(0) * cfg.population(k) * choice_probabilities(k, &zero, &cfg)[0])
            .sum();
        let forgive =
            general_provider_objective(0, &zero, None, linear_q, &PenaltyFn::forgive_all(), &policy, &cfg).unwrap();
        assert!((forgive - (rev0 + 400.0)).abs() < 1e-9);
    }

    #[test]
    fn general_objective_validates_inputs() {
        let cfg = table5();
        let policy = GovernmentPolicy::split(&cfg, 400.0).unwrap();
        let p = StrategyProfile::two_by_two([[100.0, 150.0], [200.0, 250.0]], [10.0, 12.0]).unwrap();
        let plan = BandwidthPlan {
            usage: vec![vec![1.0, 2.0], vec![3.0, 3.0]],
            grants: vec![4.0, 6.0],
        };
        let q = |s: f64, b: f64| s * (1.0 + b);
        assert!(matches!(
            general_provider_objective(0, &p, Some(&plan), q, &PenaltyFn::forfeit_all(), &policy, &cfg),
            Err(Error::BandwidthMismatch { provider: 0, .. })
        ));
        assert!(general_provider_objective(1, &p, Some(&plan), q, &PenaltyFn::forfeit_all(), &policy, &cfg).is_ok());

        let bad = PenaltyFn::linear(1e6, 1.0);
        assert!(matches!(
            general_provider_objective(0, &p, None, |s, _| s, &bad, &policy, &cfg),
            Err(Error::PenaltyOutOfRange { .. })
        ));
    }

    #[test]
    fn welfare_of_idle_market_is_zero() {
        let cfg = table5();
        let zero = StrategyProfile::two_by_two([[0.0, 0.0], [0.0, 0.0]], [3.0, 1.0]).unwrap();
        assert_eq!(social_welfare(&zero, &cfg).unwrap(), 0.0);
    }
}
