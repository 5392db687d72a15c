//! Equilibria of a spectrum market in which a regulator subsidizes wireless
//! providers in proportion to the outside calls they serve.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the solvers are tuned for.

pub mod cli;
pub mod closed_form;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod figures;
pub mod foc;
pub mod government;
pub mod market;
pub mod roots;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type MarketConfig = market::MarketConfig<f64>;
pub type GovernmentPolicy = market::GovernmentPolicy<f64>;
pub type StrategyProfile = market::StrategyProfile<f64>;
pub type EquilibriumResult = market::EquilibriumResult<f64>;
pub type ClosedFormSolution = market::ClosedFormSolution<f64>;
pub type PenaltyFn = market::PenaltyFn<f64>;
pub type FocResidual = foc::FocResidual<f64>;
pub type BestResponse = foc::BestResponse<f64>;
pub type SweepResult = government::SweepResult<f64>;
