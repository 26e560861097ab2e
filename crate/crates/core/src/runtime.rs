//! Stochastic runtime-compliance generation from a deposit-aware effort level.
//!
//! A seller's effort for one trade is a logistic function of its posture and
//! the deposit-to-ask ratio. Effort parameterizes per-trial Bernoulli draws
//! for authentication and policy outcomes and a uniform delay inflation, so
//! higher effort statistically improves all three compliance scores. The
//! per-trial construction gives coupled monotonicity under common random
//! numbers: replaying the same stream with a higher effort never produces a
//! worse measurement.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{EffortSettings, MechanismConfig};
use crate::settlement::ComplianceMeasurement;

/// Effort-response coefficients plus the compliance-draw plumbing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffortModel {
    /// Logistic intercept.
    pub tau0: f64,
    /// Weight on seller posture.
    pub tau1: f64,
    /// Weight on the deposit-to-ask ratio.
    pub tau2: f64,
    pub auth_events_per_trade: u32,
    pub policy_checks_per_trade: u32,
    /// Violation probability scale at zero effort, in [0, 1].
    pub violation_scale: f64,
    /// Maximum fractional delay inflation at zero effort, >= 0.
    pub delay_inflation_scale: f64,
}

impl EffortModel {
    /// Assemble the model from the mechanism's effort coefficients and the
    /// scenario's runtime settings.
    pub fn from_config(mechanism: &MechanismConfig, settings: &EffortSettings) -> EffortModel {
        let [tau0, tau1, tau2] = mechanism.effort_coeffs;
        EffortModel {
            tau0,
            tau1,
            tau2,
            auth_events_per_trade: settings.auth_events_per_trade,
            policy_checks_per_trade: settings.policy_checks_per_trade,
            violation_scale: settings.violation_scale,
            delay_inflation_scale: settings.delay_inflation_scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.auth_events_per_trade == 0 || self.policy_checks_per_trade == 0 {
            return Err(Error::config("effort model event counts must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.violation_scale) {
            return Err(Error::config("violation_scale must be in [0, 1]"));
        }
        if self.delay_inflation_scale < 0.0 {
            return Err(Error::config("delay_inflation_scale must be >= 0"));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Deposit-aware effort level: sigmoid of `tau0 + tau1*q + tau2*deposit/ask`.
/// Strictly increasing in posture and in the deposit ratio; the effective ask
/// must be positive.
pub fn effort_level(posture: f64, deposit: f64, effective_ask: f64, model: &EffortModel) -> Result<f64> {
    if effective_ask <= 0.0 || effective_ask.is_nan() {
        return Err(Error::domain(format!("effective ask must be > 0, got {effective_ask}")));
    }
    Ok(sigmoid(model.tau0 + model.tau1 * posture + model.tau2 * deposit / effective_ask))
}

/// Draw one compliance measurement. Authentication successes are per-trial
/// Bernoulli(effort), policy violations Bernoulli(nu * (1 - effort)), and the
/// realized delay inflates the planned delay by a uniform factor scaled by
/// (1 - effort); delay never deflates.
pub fn draw_compliance<R: Rng>(
    effort: f64,
    planned_delay_s: f64,
    model: &EffortModel,
    rng: &mut R,
) -> ComplianceMeasurement {
    debug_assert!(effort > 0.0 && effort < 1.0);
    debug_assert!(planned_delay_s > 0.0);

    let auth_requested = model.auth_events_per_trade;
    let mut auth_succeeded = 0u32;
    for _ in 0..auth_requested {
        if rng.gen::<f64>() < effort {
            auth_succeeded += 1;
        }
    }

    let checks = model.policy_checks_per_trade;
    let violation_p = model.violation_scale * (1.0 - effort);
    let mut violations = 0u32;
    for _ in 0..checks {
        if rng.gen::<f64>() < violation_p {
            violations += 1;
        }
    }

    let inflation = model.delay_inflation_scale * (1.0 - effort) * rng.gen::<f64>();
    let realized_delay_s = planned_delay_s * (1.0 + inflation);

    ComplianceMeasurement { auth_requested, auth_succeeded, checks, violations, realized_delay_s }
}
