//! Experiment configuration files (TOML).
//!
//! ```toml
//! beta = 76.0
//! alpha = 1.0
//! gamma = 0.05
//! n = [26, 744]
//! xi = 1000.0
//! xi_split = [262.0, 738.0]
//! epsilon = 1e-3
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::InstanceRanges;
use crate::error::{Error, Result};
use crate::market::{GovernmentPolicy, MarketConfig, StrategyProfile};

fn default_alpha() -> f64 {
    1.0
}

fn default_epsilon() -> f64 {
    1e-3
}

/// Sampling ranges for random instances; population and subsidy scale come
/// from the enclosing config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangesConfig {
    pub xi1: (u64, u64),
    pub beta: (u64, u64),
    pub n1: (u64, u64),
    pub n2: (u64, u64),
}

impl Default for RangesConfig {
    fn default() -> Self {
        let r = InstanceRanges::default();
        Self {
            xi1: r.xi1,
            beta: r.beta,
            n1: r.n1,
            n2: r.n2,
        }
    }
}

/// A strategy profile to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub spend: Vec<Vec<f64>>,
    pub fees: Vec<f64>,
}

/// Subsidy sweep layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub grid_size: usize,
    pub min_grant: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            grid_size: 19,
            min_grant: crate::government::DEFAULT_MIN_GRANT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub beta: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub gamma: f64,
    pub n: Vec<u64>,
    pub xi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_split: Option<Vec<f64>>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub providers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cash: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranges: Option<RangesConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

impl ExperimentConfig {
    /// Two regions, two providers, grants `(xi1, xi - xi1)`.
    pub fn two_by_two(beta: f64, gamma: f64, n: [u64; 2], xi: f64, xi1: f64) -> Self {
        Self {
            beta,
            alpha: default_alpha(),
            gamma,
            n: n.to_vec(),
            xi,
            xi_split: Some(vec![xi1, xi - xi1]),
            epsilon: default_epsilon(),
            providers: None,
            cash: None,
            ranges: None,
            profile: None,
            sweep: None,
        }
    }

    /// Fixed-parameter setup used for the subsidy and fee figures.
    pub fn fixed_parameters() -> Self {
        Self::two_by_two(30.0, 0.05, [40, 80], 1000.0, 400.0)
    }

    /// Setup of the convergence-trace figure.
    pub fn trace_example() -> Self {
        Self::two_by_two(76.0, 0.05, [26, 744], 1000.0, 262.0)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.market()?;
        cfg.policy()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> std::result::Result<Self, LoadError> {
        let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| LoadError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn provider_count(&self) -> usize {
        self.providers
            .or_else(|| self.xi_split.as_ref().map(Vec::len))
            .unwrap_or(2)
    }

    pub fn market(&self) -> Result<MarketConfig<f64>> {
        let cfg = MarketConfig::new(
            self.n.clone(),
            self.provider_count(),
            self.beta,
            self.alpha,
            self.gamma,
            self.xi,
        )?;
        match &self.cash {
            Some(cash) => cfg.with_initial_cash(cash.clone()),
            None => Ok(cfg),
        }
    }

    /// Linear-reward policy; without `xi_split` the subsidy is shared equally.
    pub fn policy(&self) -> Result<GovernmentPolicy<f64>> {
        let cfg = self.market()?;
        let grants = match &self.xi_split {
            Some(g) => g.clone(),
            None => vec![self.xi / cfg.provider_count() as f64; cfg.provider_count()],
        };
        GovernmentPolicy::linear(&cfg, grants)
    }

    pub fn strategy(&self) -> Result<StrategyProfile<f64>> {
        let p = self
            .profile
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("missing [profile] table".into()))?;
        StrategyProfile::new(p.spend.clone(), p.fees.clone())
    }

    pub fn instance_ranges(&self) -> InstanceRanges {
        let r = self.ranges.clone().unwrap_or_default();
        InstanceRanges {
            total_subsidy: self.xi,
            xi1: r.xi1,
            beta: r.beta,
            n1: r.n1,
            n2: r.n2,
            gamma: self.gamma,
        }
    }

    pub fn sweep_layout(&self) -> SweepConfig {
        self.sweep.clone().unwrap_or_default()
    }
}

/// Failure to obtain a config from disk.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read config {0}")]
    Io(String),
    #[error("invalid config {0}")]
    Config(String),
}
