use thiserror::Error;

/// Errors raised by the market model, the solvers and the closed forms.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid market configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("provider {provider} spends {spend} but only {budget} is available")]
    BudgetViolation {
        provider: usize,
        spend: f64,
        budget: f64,
    },

    #[error("outside-call flows undefined: population outside region {region} is zero")]
    EmptyComplement { region: usize },

    #[error("first-order conditions are singular at nonpositive spend (provider {provider}, region {region})")]
    SingularDomain { provider: usize, region: usize },

    #[error("bandwidth rows of provider {provider} sum to {sum}, grant is {grant}")]
    BandwidthMismatch { provider: usize, sum: f64, grant: f64 },

    #[error("penalty function returned {value} for {outside_calls} outside calls; expected a proportion in [0, 1]")]
    PenaltyOutOfRange { outside_calls: f64, value: f64 },

    #[error("best response of provider {provider} did not converge (residual {residual:e})")]
    NonConvergence { provider: usize, residual: f64 },

    #[error("depressed cubic t^3 - {a} t - {b} is outside the three-real-root regime (arccos argument {argument})")]
    ComplexRoots { a: f64, b: f64, argument: f64 },

    #[error("subsidy sweep failed: no grid point reached equilibrium")]
    SweepFailed,
}

pub type Result<T> = std::result::Result<T, Error>;
