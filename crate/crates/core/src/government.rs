//! The regulator's move: sweep subsidy splits, solve the providers' game at
//! each, and keep the split with the highest social welfare.

use rayon::prelude::*;

use crate::dynamics::solve_equilibrium;
use crate::error::{Error, Result};
use crate::market::{social_welfare, EquilibriumResult, GovernmentPolicy, MarketConfig};
use crate::scalar::Scalar;

/// Smallest grant either provider receives in a default sweep.
pub const DEFAULT_MIN_GRANT: f64 = 50.0;

/// Welfare over a uniform grid of splits `(xi1, xi - xi1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult<T> {
    pub grid: Vec<(T, T)>,
    /// `None` where the providers' iteration did not converge.
    pub welfare: Vec<Option<T>>,
    pub equilibria: Vec<Option<EquilibriumResult<T>>>,
    pub argmax_index: usize,
    pub xi_star: (T, T),
}

impl<T: Scalar> SweepResult<T> {
    pub fn max_welfare(&self) -> T {
        self.welfare[self.argmax_index].expect("argmax is a converged point")
    }
}

/// Uniform grid of `grid_size` grants for provider 1 over `[lo, xi - lo]`.
pub fn split_grid<T: Scalar>(xi: T, lo: T, grid_size: usize) -> Vec<(T, T)> {
    let hi = xi - lo;
    let steps = T::from_count((grid_size - 1) as u64);
    (0..grid_size)
        .map(|i| {
            let xi1 = if i + 1 == grid_size {
                hi
            } else {
                lo + (hi - lo) * T::from_count(i as u64) / steps
            };
            (xi1, xi - xi1)
        })
        .collect()
}

pub fn sweep<T: Scalar>(cfg: &MarketConfig<T>, grid_size: usize, epsilon: T, max_iter: usize) -> Result<SweepResult<T>> {
    sweep_from(cfg, T::lit(DEFAULT_MIN_GRANT), grid_size, epsilon, max_iter)
}

/// Sweep with an explicit minimum grant `lo`.
pub fn sweep_from<T: Scalar>(
    cfg: &MarketConfig<T>,
    lo: T,
    grid_size: usize,
    epsilon: T,
    max_iter: usize,
) -> Result<SweepResult<T>> {
    cfg.require_two_by_two()?;
    if grid_size < 2 {
        return Err(Error::InvalidArgument(format!("grid_size must be at least 2, got {grid_size}")));
    }
    let xi = cfg.total_subsidy();
    if !(lo >= T::zero() && lo + lo <= xi) {
        return Err(Error::InvalidArgument(format!("minimum grant {lo} does not fit in {xi}")));
    }
    let grid = split_grid(xi, lo, grid_size);
    let points: Vec<Result<Option<(EquilibriumResult<T>, T)>>> = grid
        .par_iter()
        .map(|&(xi1, _)| {
            let policy = GovernmentPolicy::split(cfg, xi1)?;
            let eq = match solve_equilibrium(cfg, &policy, epsilon, max_iter) {
                Ok(eq) if eq.converged => eq,
                Ok(_) | Err(Error::NonConvergence { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let w = social_welfare(&eq.profile, cfg)?;
            Ok(Some((eq, w)))
        })
        .collect();
    let mut welfare = Vec::with_capacity(grid_size);
    let mut equilibria = Vec::with_capacity(grid_size);
    for p in points {
        match p? {
            Some((eq, w)) => {
                welfare.push(Some(w));
                equilibria.push(Some(eq));
            }
            None => {
                welfare.push(None);
                equilibria.push(None);
            }
        }
    }
    let argmax_index = welfare
        .iter()
        .enumerate()
        .filter_map(|(i, w)| w.map(|w| (i, w)))
        .fold(None, |best: Option<(usize, T)>, (i, w)| match best {
            Some((_, bw)) if bw >= w => best,
            _ => Some((i, w)),
        })
        .map(|(i, _)| i)
        .ok_or(Error::SweepFailed)?;
    Ok(SweepResult {
        xi_star: grid[argmax_index],
        grid,
        welfare,
        equilibria,
        argmax_index,
    })
}
