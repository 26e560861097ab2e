//! Deterministic, seedable simulator and mechanism library for zero-trust
//! bilateral edge-service trading.
//!
//! The closed loop per trading round: feasible package screening, pair-wise
//! best-package identification, DP-based positive-margin clearing, midpoint
//! pricing with capped deposit assignment, ex-post compliance settlement, and
//! seller-posture update. Five baseline mechanisms and six market metrics sit
//! on the same round machinery, with episode seeds shared across mechanisms
//! so comparisons are paired.

pub mod clearing;
pub mod error;
pub mod eval;
pub mod harness;
pub mod invariants;
pub mod market;
pub mod mechanism;
pub mod metrics;
pub mod posture;
pub mod runtime;
pub mod seed;
pub mod settlement;

pub use clearing::{ClearingOutcome, QuantizedInstance};
pub use error::{Error, Result};
pub use eval::PackageEvaluation;
pub use harness::{run_episode, run_plan, EpisodeResult, RunPlan};
pub use market::{BuyerRequest, MechanismConfig, Package, ScenarioConfig, SellerState};
pub use mechanism::{MechanismSpec, RoundResult, TradeRecord};
pub use metrics::{EpisodeMetrics, RoundMetrics, SummaryRow};
pub use settlement::{ComplianceMeasurement, SettlementRecord};
