//! Command-line experiment runner.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::closed_form::optimum_fees;
use crate::config::{ExperimentConfig, LoadError};
use crate::dynamics::{iteration_trace, monte_carlo, solve_equilibrium};
use crate::error::Error;
use crate::figures::{generate, FigureId, Table};
use crate::government::sweep_from;
use crate::market::{outside_calls_served, provider_objective, social_welfare};

#[derive(Debug, Parser)]
#[command(name = "spectrum-subsidy", version, about = "Subsidized spectrum-market equilibria and figure datasets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Market configuration (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Convergence threshold on objective changes; overrides the config.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Objectives, outside calls and welfare of the profile in the config.
    Evaluate(Common),
    /// Best-response iteration; writes the trace.
    Equilibrium(Common),
    /// Convergence statistics over random instances.
    MonteCarlo {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        runs: u64,
    },
    /// Closed-form spends and fees.
    ClosedForm(Common),
    /// Welfare over subsidy splits.
    Sweep(Common),
    /// Dataset behind one figure.
    Figure {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        figure: FigureId,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Evaluate,
    Equilibrium,
    MonteCarlo,
    ClosedForm,
    Sweep,
    Figure,
}

/// Everything one invocation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub command: CommandKind,
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub epsilon: Option<f64>,
    pub max_iter: usize,
    pub figure: Option<FigureId>,
    pub runs: u64,
}

impl From<Cli> for ExperimentSpec {
    fn from(cli: Cli) -> Self {
        let (command, common, figure, runs) = match cli.command {
            Command::Evaluate(c) => (CommandKind::Evaluate, c, None, 0),
            Command::Equilibrium(c) => (CommandKind::Equilibrium, c, None, 0),
            Command::MonteCarlo { common, runs } => (CommandKind::MonteCarlo, common, None, runs),
            Command::ClosedForm(c) => (CommandKind::ClosedForm, c, None, 0),
            Command::Sweep(c) => (CommandKind::Sweep, c, None, 0),
            Command::Figure { common, figure } => (CommandKind::Figure, common, Some(figure), 0),
        };
        Self {
            command,
            config: common.config,
            out: common.out,
            seed: common.seed,
            epsilon: common.epsilon,
            max_iter: common.max_iter,
            figure,
            runs,
        }
    }
}

/// Failure classes, one exit code each.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    NonConvergence(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::NonConvergence(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidConfig(_)
            | Error::InvalidArgument(_)
            | Error::BudgetViolation { .. }
            | Error::EmptyComplement { .. }
            | Error::BandwidthMismatch { .. } => CliError::Config(msg),
            Error::NonConvergence { .. } | Error::SweepFailed => CliError::NonConvergence(msg),
            Error::SingularDomain { .. } | Error::PenaltyOutOfRange { .. } | Error::ComplexRoots { .. } => {
                CliError::Numeric(msg)
            }
        }
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Io(_) => CliError::Io(e.to_string()),
            LoadError::Config(_) => CliError::Config(e.to_string()),
        }
    }
}

fn io_err(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

fn load(spec: &ExperimentSpec, fallback: Option<ExperimentConfig>) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match (&spec.config, fallback) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(cfg)) => cfg,
        (None, None) => return Err(CliError::Config("--config is required for this command".into())),
    };
    if let Some(eps) = spec.epsilon {
        if !(eps > 0.0) {
            return Err(CliError::Config(format!("--epsilon must be positive, got {eps}")));
        }
        cfg.epsilon = eps;
    }
    Ok(cfg)
}

/// Executes one command, writing its CSV. Returns a one-line summary.
pub fn run(spec: &ExperimentSpec) -> Result<String, CliError> {
    if spec.figure.is_some() != (spec.command == CommandKind::Figure) {
        return Err(CliError::Config("a figure id goes with the figure command only".into()));
    }
    let (table, summary) = match spec.command {
        CommandKind::Evaluate => evaluate(spec)?,
        CommandKind::Equilibrium => equilibrium(spec)?,
        CommandKind::MonteCarlo => monte(spec)?,
        CommandKind::ClosedForm => closed(spec)?,
        CommandKind::Sweep => sweep_cmd(spec)?,
        CommandKind::Figure => {
            let id = spec.figure.expect("checked above");
            let cfg = load(spec, Some(id.default_config()))?;
            let table = generate(id, &cfg, spec.max_iter)?;
            let summary = format!("{id}: {} rows", table.rows.len());
            (table, summary)
        }
    };
    if table.rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(CliError::Numeric("non-finite value in output".into()));
    }
    emit(spec, &table)?;
    Ok(summary)
}

fn emit(spec: &ExperimentSpec, table: &Table) -> Result<(), CliError> {
    match &spec.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| io_err(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            table.write_csv(&mut w).map_err(io_err)?;
            w.flush().map_err(io_err)
        }
        None => table.write_csv(io::stdout().lock()).map_err(io_err),
    }
}

type Outcome = Result<(Table, String), CliError>;

fn evaluate(spec: &ExperimentSpec) -> Outcome {
    let cfg = load(spec, None)?;
    let market = cfg.market()?;
    let policy = cfg.policy()?;
    let profile = cfg.strategy()?;
    let welfare = social_welfare(&profile, &market)?;
    let mut rows = Vec::new();
    for j in 0..market.provider_count() {
        rows.push(vec![
            (j + 1) as f64,
            provider_objective(j, &profile, &policy, &market)?,
            outside_calls_served(j, &profile, &market)?,
            welfare,
        ]);
    }
    Ok((
        Table {
            header: vec!["provider", "objective", "outside_calls", "welfare"],
            rows,
        },
        format!("welfare {welfare}"),
    ))
}

fn equilibrium(spec: &ExperimentSpec) -> Outcome {
    let cfg = load(spec, None)?;
    let market = cfg.market()?;
    let policy = cfg.policy()?;
    let eq = solve_equilibrium(&market, &policy, cfg.epsilon, spec.max_iter)?;
    if !eq.converged {
        return Err(CliError::NonConvergence(format!(
            "no equilibrium within {} iterations",
            spec.max_iter
        )));
    }
    let rows = iteration_trace(&eq)
        .into_iter()
        .enumerate()
        .map(|(i, r)| std::iter::once(i as f64).chain(r).collect())
        .collect();
    Ok((
        Table {
            header: vec!["iter", "s11", "s12", "s21", "s22", "f1", "f2", "obj1", "obj2"],
            rows,
        },
        format!("converged in {} iterations", eq.iterations),
    ))
}

fn monte(spec: &ExperimentSpec) -> Outcome {
    let cfg = load(spec, Some(ExperimentConfig::fixed_parameters()))?;
    let report = monte_carlo(&cfg.instance_ranges(), spec.runs, spec.seed, cfg.epsilon, spec.max_iter)?;
    let row = vec![
        report.run_count as f64,
        report.seed as f64,
        report.at_most_15 as f64,
        report.from_16_to_99 as f64,
        report.at_least_100 as f64,
        report.nonconverged as f64,
    ];
    Ok((
        Table {
            header: vec!["runs", "seed", "iter_le_15", "iter_16_99", "iter_ge_100", "nonconverged"],
            rows: vec![row],
        },
        format!(
            "{:.2}% within 15 iterations, {} nonconverged",
            100.0 * report.fraction_fast(),
            report.nonconverged
        ),
    ))
}

fn closed(spec: &ExperimentSpec) -> Outcome {
    let cfg = load(spec, None)?;
    let sol = optimum_fees(&cfg.market()?, &cfg.policy()?)?;
    let coeff = [(sol.a, sol.b), (sol.c, sol.d)];
    let rows = (0..2)
        .map(|j| {
            let b = sol.fee_branches[j];
            vec![
                (j + 1) as f64,
                sol.s_star[j][0],
                sol.s_star[j][1],
                sol.f_star[j],
                b[0],
                b[1],
                b[2],
                coeff[j].0,
                coeff[j].1,
            ]
        })
        .collect();
    Ok((
        Table {
            header: vec!["provider", "s_1", "s_2", "f", "f_k0", "f_k1", "f_k2", "cubic_linear", "cubic_constant"],
            rows,
        },
        format!("f1 {} f2 {}", sol.f_star[0], sol.f_star[1]),
    ))
}

fn sweep_cmd(spec: &ExperimentSpec) -> Outcome {
    let cfg = load(spec, None)?;
    let layout = cfg.sweep_layout();
    let res = sweep_from(&cfg.market()?, layout.min_grant, layout.grid_size, cfg.epsilon, spec.max_iter)?;
    let rows = res
        .grid
        .iter()
        .zip(&res.welfare)
        .zip(&res.equilibria)
        .filter_map(|((&(xi1, xi2), w), eq)| {
            let (w, eq) = (w.as_ref()?, eq.as_ref()?);
            Some(vec![xi1, xi2, *w, eq.objectives[0], eq.objectives[1], eq.iterations as f64])
        })
        .collect();
    Ok((
        Table {
            header: vec!["xi1", "xi2", "welfare", "obj1", "obj2", "iterations"],
            rows,
        },
        format!("xi* = ({}, {})", res.xi_star.0, res.xi_star.1),
    ))
}
