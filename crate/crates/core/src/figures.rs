//! Tabular datasets behind the published figures.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::closed_form::optimum_fees;
use crate::config::ExperimentConfig;
use crate::dynamics::{iteration_trace, solve_equilibrium};
use crate::error::{Error, Result};
use crate::foc::smooth_objective;
use crate::market::{ClosedFormSolution, EquilibriumResult, StrategyProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FigureId {
    Fig2,
    Fig3a,
    Fig3b,
    Fig4,
    Fig5a,
    Fig5b,
    Fig6a,
    Fig6b,
    Fig10,
}

impl FigureId {
    pub const ALL: [FigureId; 9] = [
        FigureId::Fig2,
        FigureId::Fig3a,
        FigureId::Fig3b,
        FigureId::Fig4,
        FigureId::Fig5a,
        FigureId::Fig5b,
        FigureId::Fig6a,
        FigureId::Fig6b,
        FigureId::Fig10,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureId::Fig2 => "fig2",
            FigureId::Fig3a => "fig3a",
            FigureId::Fig3b => "fig3b",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5a => "fig5a",
            FigureId::Fig5b => "fig5b",
            FigureId::Fig6a => "fig6a",
            FigureId::Fig6b => "fig6b",
            FigureId::Fig10 => "fig10",
        }
    }

    /// Base setup used when no config is given.
    pub fn default_config(self) -> ExperimentConfig {
        match self {
            FigureId::Fig2 => ExperimentConfig::trace_example(),
            _ => ExperimentConfig::fixed_parameters(),
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FigureId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        FigureId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| format!("unknown figure id {s:?}"))
    }
}

/// Header plus numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| *h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()
    }
}

/// Population values swept in the population figures.
pub const POPULATION_AXIS: [u64; 15] = [10, 25, 50, 75, 100, 150, 200, 300, 400, 500, 600, 700, 800, 900, 1000];

/// Grants of provider 1 swept in the subsidy figures.
pub fn subsidy_axis(cfg: &ExperimentConfig) -> Vec<f64> {
    let layout = cfg.sweep_layout();
    crate::government::split_grid(cfg.xi, layout.min_grant, layout.grid_size.max(2))
        .into_iter()
        .map(|(xi1, _)| xi1)
        .collect()
}

pub fn beta_axis() -> Vec<f64> {
    (3..=20).map(|b| f64::from(b) * 10.0).collect()
}

/// Numerical equilibrium and closed form for one setup.
pub struct Point {
    pub equilibrium: EquilibriumResult<f64>,
    pub closed: ClosedFormSolution<f64>,
}

pub fn solve_point(cfg: &ExperimentConfig, max_iter: usize) -> Result<Point> {
    let market = cfg.market()?;
    let policy = cfg.policy()?;
    let equilibrium = solve_equilibrium(&market, &policy, cfg.epsilon, max_iter)?;
    let closed = optimum_fees(&market, &policy)?;
    Ok(Point { equilibrium, closed })
}

fn with_split(cfg: &ExperimentConfig, xi1: f64) -> ExperimentConfig {
    ExperimentConfig {
        xi_split: Some(vec![xi1, cfg.xi - xi1]),
        ..cfg.clone()
    }
}

fn with_populations(cfg: &ExperimentConfig, n1: u64, n2: u64) -> ExperimentConfig {
    ExperimentConfig {
        n: vec![n1, n2],
        ..cfg.clone()
    }
}

/// Solves every setup in parallel, dropping those that did not converge.
fn sweep_points(setups: Vec<(f64, ExperimentConfig)>, max_iter: usize) -> Result<Vec<(f64, Point)>> {
    let solved: Vec<Result<(f64, Point)>> = setups
        .into_par_iter()
        .map(|(x, c)| solve_point(&c, max_iter).map(|p| (x, p)))
        .collect();
    let mut out = Vec::new();
    for s in solved {
        let (x, p) = s?;
        if p.equilibrium.converged {
            out.push((x, p));
        }
    }
    Ok(out)
}

fn spend(p: &StrategyProfile<f64>) -> [f64; 4] {
    [p.spend(0, 0), p.spend(0, 1), p.spend(1, 0), p.spend(1, 1)]
}

fn closed_objectives(cfg: &ExperimentConfig, sol: &ClosedFormSolution<f64>) -> Result<[f64; 2]> {
    let market = cfg.market()?;
    let profile = StrategyProfile::two_by_two(sol.s_star, sol.f_star)?;
    Ok([smooth_objective(0, &profile, &market), smooth_objective(1, &profile, &market)])
}

pub fn generate(id: FigureId, cfg: &ExperimentConfig, max_iter: usize) -> Result<Table> {
    match id {
        FigureId::Fig2 => {
            let market = cfg.market()?;
            let policy = cfg.policy()?;
            let eq = solve_equilibrium(&market, &policy, cfg.epsilon, max_iter)?;
            if !eq.converged {
                return Err(Error::NonConvergence {
                    provider: 0,
                    residual: f64::NAN,
                });
            }
            let rows = iteration_trace(&eq)
                .into_iter()
                .enumerate()
                .map(|(i, r)| std::iter::once(i as f64).chain(r).collect())
                .collect();
            Ok(Table {
                header: vec!["iter", "s11", "s12", "s21", "s22", "f1", "f2", "obj1", "obj2"],
                rows,
            })
        }
        FigureId::Fig3a | FigureId::Fig3b | FigureId::Fig5a | FigureId::Fig10 => {
            let setups = subsidy_axis(cfg).into_iter().map(|x| (x, with_split(cfg, x))).collect();
            let points = sweep_points(setups, max_iter)?;
            let mut rows = Vec::with_capacity(points.len());
            for (xi1, p) in &points {
                let xi2 = cfg.xi - xi1;
                let eq = &p.equilibrium;
                let cf = &p.closed;
                let row = match id {
                    FigureId::Fig3a => {
                        let o = closed_objectives(&with_split(cfg, *xi1), cf)?;
                        vec![*xi1, xi2, eq.objectives[0], eq.objectives[1], o[0], o[1]]
                    }
                    FigureId::Fig3b => {
                        let s = spend(&eq.profile);
                        let c = cf.s_star;
                        vec![*xi1, xi2, s[0], s[1], s[2], s[3], c[0][0], c[0][1], c[1][0], c[1][1]]
                    }
                    FigureId::Fig5a => vec![*xi1, xi2, eq.profile.fee(0), eq.profile.fee(1), cf.f_star[0], cf.f_star[1]],
                    _ => {
                        let b = cf.fee_branches[0];
                        vec![*xi1, xi2, b[0], b[1], b[2], eq.profile.fee(0)]
                    }
                };
                rows.push(row);
            }
            let header = match id {
                FigureId::Fig3a => vec!["xi1", "xi2", "obj1", "obj2", "obj1_closed", "obj2_closed"],
                FigureId::Fig3b => vec![
                    "xi1", "xi2", "s11", "s12", "s21", "s22", "s11_closed", "s12_closed", "s21_closed", "s22_closed",
                ],
                FigureId::Fig5a => vec!["xi1", "xi2", "f1", "f2", "f1_closed", "f2_closed"],
                _ => vec!["xi1", "xi2", "f1_k0", "f1_k1", "f1_k2", "f1"],
            };
            Ok(Table { header, rows })
        }
        FigureId::Fig4 | FigureId::Fig6a | FigureId::Fig6b => {
            let n = &cfg.n;
            let setups = POPULATION_AXIS
                .iter()
                .map(|&v| {
                    let c = match id {
                        FigureId::Fig6b => with_populations(cfg, n[0], v),
                        _ => with_populations(cfg, v, n[1]),
                    };
                    (v as f64, c)
                })
                .collect();
            let points = sweep_points(setups, max_iter)?;
            let (header, rows) = if id == FigureId::Fig4 {
                let rows = points
                    .iter()
                    .map(|(x, p)| {
                        let s = spend(&p.equilibrium.profile);
                        let c = p.closed.s_star;
                        vec![*x, s[0], s[1], s[2], s[3], c[0][0], c[0][1], c[1][0], c[1][1]]
                    })
                    .collect();
                (
                    vec!["n1", "s11", "s12", "s21", "s22", "s11_closed", "s12_closed", "s21_closed", "s22_closed"],
                    rows,
                )
            } else {
                let rows = points
                    .iter()
                    .map(|(x, p)| {
                        let f = p.equilibrium.profile.fees();
                        vec![*x, f[0], f[1], p.closed.f_star[0], p.closed.f_star[1]]
                    })
                    .collect();
                let axis = if id == FigureId::Fig6a { "n1" } else { "n2" };
                (vec![axis, "f1", "f2", "f1_closed", "f2_closed"], rows)
            };
            Ok(Table { header, rows })
        }
        FigureId::Fig5b => {
            let setups = beta_axis()
                .into_iter()
                .map(|b| (b, ExperimentConfig { beta: b, ..cfg.clone() }))
                .collect();
            let rows = sweep_points(setups, max_iter)?
                .iter()
                .map(|(b, p)| {
                    let f = p.equilibrium.profile.fees();
                    vec![*b, f[0], f[1], p.closed.f_star[0], p.closed.f_star[1]]
                })
                .collect();
            Ok(Table {
                header: vec!["beta", "f1", "f2", "f1_closed", "f2_closed"],
                rows,
            })
        }
    }
}

/// `(max - min) / max` of a positive series.
pub fn relative_spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    (max - min) / max
}
