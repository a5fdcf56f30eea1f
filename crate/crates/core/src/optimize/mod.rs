//! Data-collection optimization: learning-curve fits, the size-or-setting
//! decision, policy search over pipeline operations and the iterative
//! learn / optimize / collect loop.
//!
//! Scores are accuracies in `[0, 1]`; test error is `1 - score`.

pub mod law;
pub mod loc;
pub mod policy;

use serde::{Deserialize, Serialize};

pub use law::{estimate_data_requirement, fit_scaling_law, ScalingLawParams};
pub use loc::{
    load_config, run_loc_loop, DatasetFactory, ExternalCommandOracle, LocIterationRecord, LocOutcome, LocStatus, OptimizerConfig,
    OracleConfig, PerformanceOracle, PipelineFactory, SyntheticOracle,
};
pub use policy::{sample_policy, update_policy, Magnitude, OpKind, Policy, PolicyOp, PolicyStep, SearchSpace, SubPolicy};

#[derive(Debug, thiserror::Error)]
pub enum OptimizeError {
    #[error("need at least 3 points to fit, got {0}")]
    InsufficientPoints(usize),
    #[error("invalid point (n={n}, error={e}): need n >= 1 and error in (0, 1)")]
    InvalidPoint { n: f64, e: f64 },
    #[error("all points share one data size")]
    DegenerateFit,
    #[error("target error {e_star:.4} is not above the transfer gap {transfer_gap_c:.4}")]
    Unreachable { e_star: f64, transfer_gap_c: f64 },
    #[error("target {v_star} not reached after {iterations} iterations (best {best_score})")]
    BudgetExhausted { iterations: usize, best_score: f64, v_star: f64 },
    #[error("invalid optimizer config: {0}")]
    Config(String),
    #[error("search space: {0}")]
    SearchSpace(String),
    #[error("oracle failed: {0}")]
    Oracle(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", content = "size", rename_all = "snake_case")]
pub enum Decision {
    /// Keep the setting and collect this many records.
    IncreaseSize(u64),
    /// The data itself has to change: re-sample the policy.
    ChangeSetting,
}

impl Decision {
    pub fn label(&self) -> String {
        match self {
            Decision::IncreaseSize(n) => format!("IncreaseSize({n})"),
            Decision::ChangeSetting => "ChangeSetting".into(),
        }
    }
}

pub mod defaults {
    pub const ALPHA_MIN: f64 = 0.3;
    pub const N_0: u64 = 10;
    /// Largest multiplicative size step between iterations.
    pub const GROWTH_CAP: f64 = 10.0;
    /// Smallest multiplicative size step, so sizes keep rising.
    pub const MIN_GROWTH: f64 = 1.25;
    pub const MAX_ITERATIONS: usize = 8;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocConfig {
    pub v_star: f64,
    #[serde(default = "d_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "d_alpha_min")]
    pub alpha_min: f64,
    #[serde(default = "d_n_0")]
    pub n_0: u64,
    #[serde(default = "d_growth_cap")]
    pub growth_cap: f64,
    #[serde(default = "d_min_growth")]
    pub min_growth: f64,
}

fn d_max_iterations() -> usize {
    defaults::MAX_ITERATIONS
}
fn d_alpha_min() -> f64 {
    defaults::ALPHA_MIN
}
fn d_n_0() -> u64 {
    defaults::N_0
}
fn d_growth_cap() -> f64 {
    defaults::GROWTH_CAP
}
fn d_min_growth() -> f64 {
    defaults::MIN_GROWTH
}

impl LocConfig {
    pub fn new(v_star: f64) -> Self {
        Self {
            v_star,
            max_iterations: defaults::MAX_ITERATIONS,
            alpha_min: defaults::ALPHA_MIN,
            n_0: defaults::N_0,
            growth_cap: defaults::GROWTH_CAP,
            min_growth: defaults::MIN_GROWTH,
        }
    }

    pub fn validate(&self) -> Result<(), OptimizeError> {
        let bad = |m: String| Err(OptimizeError::Config(m));
        if !(self.v_star > 0.0 && self.v_star <= 1.0) {
            return bad(format!("v_star must lie in (0, 1], got {}", self.v_star));
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be >= 1".into());
        }
        if !(self.alpha_min.is_finite() && self.alpha_min >= 0.0) {
            return bad(format!("alpha_min must be finite and >= 0, got {}", self.alpha_min));
        }
        if self.n_0 == 0 {
            return bad("n_0 must be >= 1".into());
        }
        if !(self.min_growth > 1.0 && self.growth_cap >= self.min_growth && self.growth_cap.is_finite()) {
            return bad(format!("need 1 < min_growth <= growth_cap, got {} and {}", self.min_growth, self.growth_cap));
        }
        Ok(())
    }

    /// Size for the iteration after one of `current` records: `wanted`
    /// clamped into `[current * min_growth, current * growth_cap]`, and always
    /// above `current`.
    pub fn next_size(&self, current: u64, wanted: u64) -> u64 {
        let c = current as f64;
        let lo = ((c * self.min_growth).ceil() as u64).max(current + 1);
        let hi = ((c * self.growth_cap).floor() as u64).max(lo);
        wanted.clamp(lo, hi)
    }
}

/// The size-or-setting rule. Pure in `(params, config)`; the per-iteration
/// growth cap is applied by [`LocConfig::next_size`].
pub fn decide_action(params: &ScalingLawParams, config: &LocConfig) -> Decision {
    if params.alpha < config.alpha_min || params.transfer_gap_c >= 1.0 - config.v_star {
        return Decision::ChangeSetting;
    }
    match estimate_data_requirement(params, config.v_star) {
        Ok(n) => Decision::IncreaseSize(n),
        Err(_) => Decision::ChangeSetting,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_branches() {
        let cfg = LocConfig::new(0.85);
        assert_eq!(decide_action(&ScalingLawParams::new(0.8, 0.5, 0.05), &cfg), Decision::IncreaseSize(64));
        assert_eq!(decide_action(&ScalingLawParams::new(0.8, 0.5, 0.20), &cfg), Decision::ChangeSetting);
        assert_eq!(decide_action(&ScalingLawParams::new(0.8, 0.1, 0.0), &cfg), Decision::ChangeSetting);
    }

    #[test]
    fn config_bounds() {
        assert!(LocConfig::new(1.01).validate().is_err());
        assert!(LocConfig::new(0.0).validate().is_err());
        assert!(LocConfig::new(1.0).validate().is_ok());
        let mut c = LocConfig::new(0.9);
        c.max_iterations = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn next_size_is_monotone_and_capped() {
        let c = LocConfig::new(0.9);
        assert_eq!(c.next_size(40, 64), 64);
        assert_eq!(c.next_size(40, 10), 50);
        assert_eq!(c.next_size(40, 100_000), 400);
        assert_eq!(c.next_size(1, 1), 2);
    }
}
