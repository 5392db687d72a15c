//! Closed-form approximations: heuristic subsidy splits and the fee obtained
//! from a depressed cubic solved with Viète's trigonometric formula.

use crate::error::{Error, Result};
use crate::market::{ClosedFormSolution, GovernmentPolicy, MarketConfig};
use crate::scalar::Scalar;

/// Branch the fee formulas select by default.
pub const MATCHING_BRANCH: usize = 1;

/// Approximate equilibrium spend `[[s11, s12], [s21, s22]]`.
pub fn subsidy_split<T: Scalar>(cfg: &MarketConfig<T>, policy: &GovernmentPolicy<T>) -> Result<[[T; 2]; 2]> {
    cfg.require_two_by_two()?;
    let half = T::lit(0.5);
    let n1 = cfg.population(0);
    let n2 = cfg.population(1);
    let w1 = n1 / (n1 + n2) + half;
    let w2 = n2 / (n1 + n2) + half;
    let row = |xi: T| [xi * half * w1, xi * half * w2];
    Ok([row(policy.grant(0)), row(policy.grant(1))])
}

/// Coefficients `(A, B, C, D)` of the depressed cubics `t^3 - A t - B` and
/// `t^3 - C t - D` for providers 1 and 2.
pub fn cubic_coefficients<T: Scalar>(s1: T, s2: T, cfg: &MarketConfig<T>) -> (T, T, T, T) {
    cubic_coefficients_scaled(s1, s2, cfg.utility_scale() * cfg.home_calls())
}

/// [`cubic_coefficients`] with the product `gamma * beta` passed directly.
pub fn cubic_coefficients_scaled<T: Scalar>(s1: T, s2: T, gb: T) -> (T, T, T, T) {
    let linear = |p: T, q: T| {
        let (rp, rq) = (p.sqrt(), q.sqrt());
        let lead = rp - T::lit(2.0) * rq;
        T::lit(4.0) * gb * gb * (T::lit(9.0) * (p * q).sqrt() + lead * lead) / T::lit(27.0)
    };
    let constant = |p: T, q: T| {
        let (rp, rq) = (p.sqrt(), q.sqrt());
        let poly = T::lit(16.0) * p * rp - T::lit(240.0) * q * rp - T::lit(123.0) * p * rq - T::lit(128.0) * q * rq;
        gb * gb * gb / T::lit(729.0) * poly
    };
    (linear(s1, s2), constant(s1, s2), linear(s2, s1), constant(s2, s1))
}

fn regime_error<T: Scalar>(a: T, b: T, argument: T) -> Error {
    Error::ComplexRoots {
        a: a.to_f64().unwrap_or(f64::NAN),
        b: b.to_f64().unwrap_or(f64::NAN),
        argument: argument.to_f64().unwrap_or(f64::NAN),
    }
}

/// The three real roots of `t^3 - A t - B = 0`, in branch order `k = 0, 1, 2`:
/// `t_k = 2 sqrt(A/3) cos(theta/3 + (3 - 2k) pi / 3)` with
/// `cos(theta) = -(B/2) sqrt(27 / A^3)`.
///
/// For `B <= 0` the angle reduces to `arccos(sqrt(27 B^2 / 4 A^3))`; keeping
/// the sign of `B` makes the same formula valid for `B > 0`.
pub fn viete_roots<T: Scalar>(a: T, b: T) -> Result<[T; 3]> {
    if a == T::zero() && b == T::zero() {
        return Ok([T::zero(); 3]);
    }
    if !(a > T::zero()) {
        return Err(regime_error(a, b, T::nan()));
    }
    let mut arg = -(b / T::lit(2.0)) * (T::lit(27.0) / (a * a * a)).sqrt();
    if arg.abs() > T::one() {
        if arg.abs() - T::one() <= T::lit(1e-12) {
            arg = arg.signum();
        } else {
            return Err(regime_error(a, b, arg));
        }
    }
    let theta = arg.acos();
    let radius = T::lit(2.0) * (a / T::lit(3.0)).sqrt();
    let third = T::lit(1.0 / 3.0);
    let root = |k: u64| {
        let shift = (T::lit(3.0) - T::lit(2.0) * T::from_count(k)) * T::PI() * third;
        radius * (theta * third + shift).cos()
    };
    Ok([root(0), root(1), root(2)])
}

/// Viète roots sorted ascending.
pub fn viete_roots_sorted<T: Scalar>(a: T, b: T) -> Result<[T; 3]> {
    let mut r = viete_roots(a, b)?;
    r.sort_by(|x, y| x.partial_cmp(y).expect("finite roots"));
    Ok(r)
}

/// Residuals of the reduced fee conditions
/// `x^2 + y (2x - a1)` and `y^2 + x (2y - a2)`, `a_j = gamma beta sqrt(s_j)`.
pub fn reduced_foc_residuals<T: Scalar>(f1: T, f2: T, s1: T, s2: T, cfg: &MarketConfig<T>) -> (T, T) {
    let gb = cfg.utility_scale() * cfg.home_calls();
    let (a1, a2) = (gb * s1.sqrt(), gb * s2.sqrt());
    let (x, y) = (a1 - f1, a2 - f2);
    let two = T::lit(2.0);
    (x * x + y * (two * x - a1), y * y + x * (two * y - a2))
}

/// Fee branches `f_k = gamma beta (7 sqrt(p) + 4 sqrt(q)) / 9 - t_k` for the provider with
/// per-region spend `p` facing a rival spending `q`.
fn fee_branches<T: Scalar>(p: T, q: T, a: T, b: T, cfg: &MarketConfig<T>) -> Result<[T; 3]> {
    let gb = cfg.utility_scale() * cfg.home_calls();
    let base = gb * (T::lit(7.0) * p.sqrt() + T::lit(4.0) * q.sqrt()) / T::lit(9.0);
    let t = viete_roots(a, b)?;
    Ok([base - t[0], base - t[1], base - t[2]])
}

/// Closed-form subsidy split and fees. The fee formulas take each provider's
/// per-region spend to be half its grant, whatever the populations.
pub fn optimum_fees<T: Scalar>(cfg: &MarketConfig<T>, policy: &GovernmentPolicy<T>) -> Result<ClosedFormSolution<T>> {
    let s_star = subsidy_split(cfg, policy)?;
    let half = T::lit(0.5);
    let s1 = policy.grant(0) * half;
    let s2 = policy.grant(1) * half;
    let (a, b, c, d) = cubic_coefficients(s1, s2, cfg);
    let fee_branches = [fee_branches(s1, s2, a, b, cfg)?, fee_branches(s2, s1, c, d, cfg)?];
    let mut f_star = [fee_branches[0][MATCHING_BRANCH], fee_branches[1][MATCHING_BRANCH]];
    let mut fee_clamped = [false; 2];
    for j in 0..2 {
        if f_star[j] < T::zero() {
            f_star[j] = T::zero();
            fee_clamped[j] = true;
        }
    }
    Ok(ClosedFormSolution {
        s_star,
        f_star,
        fee_branches,
        fee_clamped,
        a,
        b,
        c,
        d,
        s1_star: s1,
        s2_star: s2,
    })
}
