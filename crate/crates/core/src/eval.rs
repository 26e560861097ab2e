//! Per-package derived quantities and best-package selection.
//!
//! For a candidate package this module computes the transmission rate, total
//! service delay, compliance score, privacy risk, seller-side compliance
//! cost, buyer-side effective valuation, seller-side effective ask, and the
//! bilateral trading margin, then screens feasibility against the buyer's
//! deadline and minimum-security requirement.
//!
//! [`EvalPolicy`] switches individual value and feasibility terms on and off;
//! the full policy is the reference semantics, reduced policies back the
//! baseline mechanisms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{BuyerRequest, MechanismConfig, Package, SellerState};

/// A candidate package together with everything derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackageEvaluation {
    pub package: Package,
    /// Transmission rate in Mbit/s.
    pub rate_mbps: f64,
    /// Total service delay in seconds.
    pub delay_s: f64,
    /// Package-level security compliance score in [0, 1].
    pub compliance_score: f64,
    /// Buyer privacy risk, >= 0.
    pub privacy_risk: f64,
    /// Seller-side zero-trust compliance cost.
    pub zt_cost: f64,
    pub effective_valuation: f64,
    pub effective_ask: f64,
    /// Trading margin: effective valuation minus effective ask.
    pub margin: f64,
    pub feasible: bool,
}

/// Which terms enter the valuation/ask and which admission constraints are
/// enforced. [`EvalPolicy::full`] reproduces the reference evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalPolicy {
    /// Subtract delay and privacy penalties from the gross valuation.
    pub include_value_penalties: bool,
    /// Add the zero-trust compliance cost to the effective ask.
    pub include_zt_cost: bool,
    /// Enforce the minimum-security constraint at admission.
    pub enforce_security: bool,
    /// Enforce the delay deadline at admission.
    pub enforce_deadline: bool,
}

impl EvalPolicy {
    pub fn full() -> Self {
        EvalPolicy {
            include_value_penalties: true,
            include_zt_cost: true,
            enforce_security: true,
            enforce_deadline: true,
        }
    }
}

/// Transmission rate `b * log2(1 + sinr)` with bandwidth in MHz, giving
/// Mbit/s. Non-positive bandwidth or SINR is a domain error.
pub fn transmission_rate(package: &Package, sinr: f64) -> Result<f64> {
    if package.bandwidth_mhz <= 0.0 || package.bandwidth_mhz.is_nan() {
        return Err(Error::domain(format!("bandwidth must be > 0, got {}", package.bandwidth_mhz)));
    }
    if sinr <= 0.0 || sinr.is_nan() {
        return Err(Error::domain(format!("sinr must be > 0, got {sinr}")));
    }
    Ok(package.bandwidth_mhz * (1.0 + sinr).log2())
}

/// Total service delay: transmission (MB converted to Mbit) plus compute plus
/// verification overhead plus posture-deficiency overhead, in seconds.
pub fn service_delay(
    buyer: &BuyerRequest,
    seller: &SellerState,
    package: &Package,
    sinr: f64,
    cfg: &MechanismConfig,
) -> Result<f64> {
    let rate = transmission_rate(package, sinr)?;
    if package.compute_gcps <= 0.0 || package.compute_gcps.is_nan() {
        return Err(Error::domain(format!("compute share must be > 0, got {}", package.compute_gcps)));
    }
    Ok(8.0 * buyer.data_size_mb / rate
        + buyer.workload_gcycles / package.compute_gcps
        + cfg.delay_verif_coeff * package.verification
        + cfg.delay_posture_coeff * (1.0 - seller.posture))
}

/// Package-level security compliance score: a convex combination of
/// verification intensity and seller posture, nondecreasing in both.
pub fn compliance_score(verification: f64, posture: f64, cfg: &MechanismConfig) -> f64 {
    cfg.compliance_weight * verification + (1.0 - cfg.compliance_weight) * posture
}

/// Buyer privacy risk `l * (1 - z) * (1 - q)`, decreasing in both z and q.
pub fn privacy_risk(buyer: &BuyerRequest, verification: f64, posture: f64) -> f64 {
    buyer.privacy_sensitivity * (1.0 - verification) * (1.0 - posture)
}

/// Seller-side zero-trust compliance cost.
pub fn zt_cost(verification: f64, posture: f64, cfg: &MechanismConfig) -> f64 {
    cfg.zt_verif_cost * verification + cfg.zt_posture_cost * (1.0 - posture)
}

/// Evaluate one candidate package under the full reference semantics.
pub fn evaluate_package(
    buyer: &BuyerRequest,
    seller: &SellerState,
    package: &Package,
    sinr: f64,
    cfg: &MechanismConfig,
) -> Result<PackageEvaluation> {
    evaluate_package_with(EvalPolicy::full(), buyer, seller, package, sinr, cfg)
}

/// Evaluate one candidate package under an explicit policy.
pub fn evaluate_package_with(
    policy: EvalPolicy,
    buyer: &BuyerRequest,
    seller: &SellerState,
    package: &Package,
    sinr: f64,
    cfg: &MechanismConfig,
) -> Result<PackageEvaluation> {
    let rate_mbps = transmission_rate(package, sinr)?;
    let delay_s = service_delay(buyer, seller, package, sinr, cfg)?;
    let g = compliance_score(package.verification, seller.posture, cfg);
    let xi = privacy_risk(buyer, package.verification, seller.posture);
    let c_zt = zt_cost(package.verification, seller.posture, cfg);

    let effective_valuation = if policy.include_value_penalties {
        buyer.gross_valuation - buyer.delay_penalty * delay_s - buyer.privacy_penalty * xi
    } else {
        buyer.gross_valuation
    };
    let mut effective_ask = seller.base_ask
        + seller.unit_bandwidth_cost * package.bandwidth_mhz
        + seller.unit_compute_cost * package.compute_gcps;
    if policy.include_zt_cost {
        effective_ask += c_zt;
    }

    let feasible = (!policy.enforce_deadline || delay_s <= buyer.deadline_s)
        && (!policy.enforce_security || g >= buyer.min_security);

    Ok(PackageEvaluation {
        package: *package,
        rate_mbps,
        delay_s,
        compliance_score: g,
        privacy_risk: xi,
        zt_cost: c_zt,
        effective_valuation,
        effective_ask,
        margin: effective_valuation - effective_ask,
        feasible,
    })
}

/// Select the feasible candidate with the maximum margin under the full
/// reference semantics; `None` when no candidate is feasible. Ties break
/// toward lower bandwidth, then lower compute, then lower verification.
pub fn best_feasible_package(
    buyer: &BuyerRequest,
    seller: &SellerState,
    candidates: &[Package],
    sinr: f64,
    cfg: &MechanismConfig,
) -> Result<Option<PackageEvaluation>> {
    best_package_with(EvalPolicy::full(), buyer, seller, candidates, sinr, cfg)
}

/// Policy-parameterized best-package selection with the same tie-breaking.
pub fn best_package_with(
    policy: EvalPolicy,
    buyer: &BuyerRequest,
    seller: &SellerState,
    candidates: &[Package],
    sinr: f64,
    cfg: &MechanismConfig,
) -> Result<Option<PackageEvaluation>> {
    let mut best: Option<PackageEvaluation> = None;
    for package in candidates {
        let eval = evaluate_package_with(policy, buyer, seller, package, sinr, cfg)?;
        if !eval.feasible {
            continue;
        }
        best = Some(match best.take() {
            None => eval,
            Some(cur) => {
                if better_of(&eval, &cur) {
                    eval
                } else {
                    cur
                }
            }
        });
    }
    Ok(best)
}

/// True when `a` should replace `b`: strictly higher margin, or equal margin
/// with a smaller resource footprint.
fn better_of(a: &PackageEvaluation, b: &PackageEvaluation) -> bool {
    if a.margin != b.margin {
        return a.margin > b.margin;
    }
    let ka = (a.package.bandwidth_mhz, a.package.compute_gcps, a.package.verification);
    let kb = (b.package.bandwidth_mhz, b.package.compute_gcps, b.package.verification);
    ka < kb
}
