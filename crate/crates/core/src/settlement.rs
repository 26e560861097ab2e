//! Pricing, capped deposits, refund-ratio settlement, and per-trade utilities.
//!
//! Accepted trades are priced at the midpoint of effective valuation and ask.
//! The seller escrows a deposit capped at a fraction of the trade margin;
//! measured runtime compliance converts into a refund ratio that splits the
//! deposit into a refund and a forfeiture, the forfeiture into buyer
//! compensation and a platform cut. Everything settles within the round.
//!
//! Monetary quantities are binary floating point; invariants are checked at
//! 1e-9 absolute tolerance.

use serde::{Deserialize, Serialize};

use crate::eval::PackageEvaluation;
use crate::market::MechanismConfig;

/// Measured runtime-compliance outcome of one executed trade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplianceMeasurement {
    /// Requested authentication events.
    pub auth_requested: u32,
    /// Successful authentication events, <= auth_requested.
    pub auth_succeeded: u32,
    /// Policy checks performed.
    pub checks: u32,
    /// Detected policy violations, <= checks.
    pub violations: u32,
    /// Realized end-to-end service delay in seconds.
    pub realized_delay_s: f64,
}

impl ComplianceMeasurement {
    pub fn validate(&self) -> bool {
        self.auth_succeeded <= self.auth_requested
            && self.violations <= self.checks
            && self.realized_delay_s > 0.0
    }
}

/// Per-trade money flows and final utilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettlementRecord {
    pub price: f64,
    pub deposit: f64,
    /// Authentication-success score in [0, 1].
    pub auth_score: f64,
    /// Policy-consistency score in [0, 1].
    pub policy_score: f64,
    /// SLA-satisfaction score in [0, 1].
    pub sla_score: f64,
    pub refund_ratio: f64,
    /// Deposit returned to the seller.
    pub refunded: f64,
    /// Deposit withheld from the seller.
    pub forfeited: f64,
    /// Share of the forfeiture paid to the buyer.
    pub buyer_compensation: f64,
    /// Share of the forfeiture kept by the platform.
    pub platform_cut: f64,
    pub buyer_utility: f64,
    pub seller_utility: f64,
}

/// Midpoint pricing over effective valuation and effective ask.
pub fn midpoint_price(effective_valuation: f64, effective_ask: f64) -> f64 {
    (effective_valuation + effective_ask) / 2.0
}

/// Deposit for an accepted trade: a linear surcharge in verification level
/// and posture deficiency, capped at `deposit_cap_ratio` times the margin.
pub fn capped_deposit(verification: f64, posture: f64, margin: f64, cfg: &MechanismConfig) -> f64 {
    debug_assert!(margin > 0.0, "deposits apply to accepted trades only");
    let raw = cfg.deposit_verif_coeff * verification + cfg.deposit_posture_coeff * (1.0 - posture);
    raw.min(cfg.deposit_cap_ratio * margin)
}

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Authentication, policy-consistency, and SLA scores from a measurement.
pub fn compliance_scores(m: &ComplianceMeasurement, deadline_s: f64) -> (f64, f64, f64) {
    let auth = m.auth_succeeded as f64 / (m.auth_requested.max(1)) as f64;
    let policy = clamp01(1.0 - m.violations as f64 / (m.checks.max(1)) as f64);
    let sla = clamp01(1.0 - (m.realized_delay_s - deadline_s).max(0.0) / deadline_s);
    (auth, policy, sla)
}

/// Weighted refund ratio over the three compliance scores; in [0, 1].
pub fn refund_ratio(scores: (f64, f64, f64), cfg: &MechanismConfig) -> f64 {
    let [w_auth, w_policy, w_sla] = cfg.refund_weights;
    clamp01(w_auth * scores.0 + w_policy * scores.1 + w_sla * scores.2)
}

/// Settle one accepted trade at an explicit price and deposit. The refund is
/// computed from the measurement; complements are taken by subtraction so the
/// money-conservation identities hold to float precision.
pub fn settle_trade_at_price(
    evaluation: &PackageEvaluation,
    price: f64,
    deposit: f64,
    measurement: &ComplianceMeasurement,
    deadline_s: f64,
    cfg: &MechanismConfig,
) -> SettlementRecord {
    let (auth_score, policy_score, sla_score) = compliance_scores(measurement, deadline_s);
    let rho = refund_ratio((auth_score, policy_score, sla_score), cfg);
    let refunded = rho * deposit;
    let forfeited = deposit - refunded;
    let buyer_compensation = cfg.compensation_share * forfeited;
    let platform_cut = forfeited - buyer_compensation;
    SettlementRecord {
        price,
        deposit,
        auth_score,
        policy_score,
        sla_score,
        refund_ratio: rho,
        refunded,
        forfeited,
        buyer_compensation,
        platform_cut,
        buyer_utility: evaluation.effective_valuation - price + buyer_compensation,
        seller_utility: price - evaluation.effective_ask - forfeited,
    }
}

/// Settle one accepted trade under the reference rules: midpoint pricing of
/// the starred evaluation and the capped deposit for the seller's posture.
pub fn settle_trade(
    evaluation: &PackageEvaluation,
    posture: f64,
    measurement: &ComplianceMeasurement,
    deadline_s: f64,
    cfg: &MechanismConfig,
) -> SettlementRecord {
    let price = midpoint_price(evaluation.effective_valuation, evaluation.effective_ask);
    let deposit = capped_deposit(evaluation.package.verification, posture, evaluation.margin, cfg);
    settle_trade_at_price(evaluation, price, deposit, measurement, deadline_s, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::Package;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-9;

    fn cfg() -> MechanismConfig {
        MechanismConfig::default()
    }

    fn eval(v_hat: f64, a_hat: f64, z: f64) -> PackageEvaluation {
        PackageEvaluation {
            package: Package { bandwidth_mhz: 4.0, compute_gcps: 10.0, verification: z },
            rate_mbps: 12.0,
            delay_s: 0.5,
            compliance_score: 0.7,
            privacy_risk: 0.1,
            zt_cost: 0.5,
            effective_valuation: v_hat,
            effective_ask: a_hat,
            margin: v_hat - a_hat,
            feasible: true,
        }
    }

    fn full_compliance(delay: f64) -> ComplianceMeasurement {
        ComplianceMeasurement {
            auth_requested: 20,
            auth_succeeded: 20,
            checks: 20,
            violations: 0,
            realized_delay_s: delay,
        }
    }

    #[test]
    fn midpoint_examples() {
        assert_eq!(midpoint_price(10.0, 6.0), 8.0);
        assert_eq!(midpoint_price(5.0, 5.0), 5.0);
        assert!((midpoint_price(8.2, 4.6) - 6.4).abs() < TOL);
    }

    #[test]
    fn deposit_examples() {
        let mut mech = cfg();
        mech.deposit_verif_coeff = 1.0;
        mech.deposit_posture_coeff = 1.0;
        mech.deposit_cap_ratio = 0.4;
        // min(0.5 + 0.2, 0.4*4) = 0.7.
        assert!((capped_deposit(0.5, 0.8, 4.0, &mech) - 0.7).abs() < TOL);
        // Perfect posture and no verification: zero surcharge.
        assert_eq!(capped_deposit(0.0, 1.0, 4.0, &mech), 0.0);
        // Raw deposit 5 against cap 1.2: the cap binds.
        mech.deposit_verif_coeff = 10.0;
        assert!((capped_deposit(0.5, 1.0, 3.0, &mech) - 1.2).abs() < TOL);
    }

    #[test]
    fn score_guards_and_clamps() {
        let m = ComplianceMeasurement {
            auth_requested: 0,
            auth_succeeded: 0,
            checks: 0,
            violations: 0,
            realized_delay_s: 0.5,
        };
        let (a, g, s) = compliance_scores(&m, 1.0);
        assert_eq!(a, 0.0);
        assert_eq!(g, 1.0);
        assert_eq!(s, 1.0);

        // On-time delivery pins the SLA score at 1.
        let m = full_compliance(0.9);
        assert_eq!(compliance_scores(&m, 1.0).2, 1.0);
        // Twice the deadline pins it at 0.
        let m = full_compliance(2.0);
        assert_eq!(compliance_scores(&m, 1.0).2, 0.0);
    }

    #[test]
    fn refund_ratio_examples() {
        let mech = cfg();
        assert!((refund_ratio((1.0, 1.0, 1.0), &mech) - 1.0).abs() < TOL);
        assert_eq!(refund_ratio((0.0, 0.0, 0.0), &mech), 0.0);
        // Weights (0.35, 0.30, 0.35) on (1, 0.5, 1) give 0.85.
        assert!((refund_ratio((1.0, 0.5, 1.0), &mech) - 0.85).abs() < TOL);
    }

    #[test]
    fn refund_ratio_monotone_in_each_score() {
        let mech = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let base = (rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>());
            let r0 = refund_ratio(base, &mech);
            let bump = rng.gen::<f64>() * (1.0 - base.0);
            assert!(refund_ratio((base.0 + bump, base.1, base.2), &mech) >= r0 - TOL);
            let bump = rng.gen::<f64>() * (1.0 - base.1);
            assert!(refund_ratio((base.0, base.1 + bump, base.2), &mech) >= r0 - TOL);
            let bump = rng.gen::<f64>() * (1.0 - base.2);
            assert!(refund_ratio((base.0, base.1, base.2 + bump), &mech) >= r0 - TOL);
        }
    }

    #[test]
    fn full_refund_splits_margin_evenly() {
        // rho = 1: no forfeiture, both sides earn exactly half the margin.
        let e = eval(10.0, 6.0, 0.5);
        let rec = settle_trade(&e, 0.8, &full_compliance(0.4), 0.8, &cfg());
        assert!((rec.refund_ratio - 1.0).abs() < TOL);
        assert!(rec.forfeited.abs() < TOL);
        assert!((rec.buyer_utility - 2.0).abs() < TOL);
        assert!((rec.seller_utility - 2.0).abs() < TOL);
    }

    #[test]
    fn settlement_arithmetic_chain() {
        // Margin 4, deposit 0.7, rho = 0.5, chi = 0.7:
        // forfeited 0.35, compensation 0.245, platform 0.105, U_S = 2 - 0.35.
        let mut mech = cfg();
        mech.refund_weights = [1.0, 0.0, 0.0];
        mech.compensation_share = 0.7;
        mech.deposit_verif_coeff = 1.0;
        mech.deposit_posture_coeff = 1.0;
        let e = eval(10.0, 6.0, 0.5);
        let m = ComplianceMeasurement {
            auth_requested: 20,
            auth_succeeded: 10,
            checks: 20,
            violations: 0,
            realized_delay_s: 0.4,
        };
        let rec = settle_trade(&e, 0.8, &m, 0.8, &mech);
        assert!((rec.deposit - 0.7).abs() < TOL);
        assert!((rec.refund_ratio - 0.5).abs() < TOL);
        assert!((rec.forfeited - 0.35).abs() < TOL);
        assert!((rec.buyer_compensation - 0.245).abs() < TOL);
        assert!((rec.platform_cut - 0.105).abs() < TOL);
        assert!((rec.seller_utility - 1.65).abs() < TOL);
    }

    #[test]
    fn zero_refund_keeps_seller_above_cap_bound() {
        // rho = 0 worst case: U_S = margin/2 - deposit >= (0.5 - lambda) * margin.
        let mech = cfg();
        let e = eval(10.0, 6.0, 0.9);
        let m = ComplianceMeasurement {
            auth_requested: 20,
            auth_succeeded: 0,
            checks: 20,
            violations: 20,
            realized_delay_s: 10.0,
        };
        let rec = settle_trade(&e, 0.0, &m, 0.5, &mech);
        assert_eq!(rec.refund_ratio, 0.0);
        let bound = (0.5 - mech.deposit_cap_ratio) * e.margin;
        assert!(rec.seller_utility >= bound - TOL);
        assert!(rec.seller_utility > 0.0);
    }

    #[test]
    fn random_settlements_conserve_money() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mech = cfg();
        for _ in 0..2000 {
            let margin = rng.gen_range(0.05..10.0);
            let a_hat = rng.gen_range(2.0..8.0);
            let e = eval(a_hat + margin, a_hat, rng.gen_range(0.0..=1.0));
            let deadline = rng.gen_range(0.25..0.9);
            let m = ComplianceMeasurement {
                auth_requested: 20,
                auth_succeeded: rng.gen_range(0..=20),
                checks: 20,
                violations: rng.gen_range(0..=20),
                realized_delay_s: deadline * rng.gen_range(0.5..2.5),
            };
            assert!(m.validate());
            let rec = settle_trade(&e, rng.gen_range(0.0..=1.0), &m, deadline, &mech);

            assert!((0.0..=1.0).contains(&rec.refund_ratio));
            assert!(rec.deposit >= 0.0);
            assert!((rec.refunded + rec.forfeited - rec.deposit).abs() < TOL);
            assert!((rec.buyer_compensation + rec.platform_cut - rec.forfeited).abs() < TOL);
            // Buyer payment fully accounted: p = (p - forfeit) + compensation + platform cut.
            let accounted = (rec.price - rec.forfeited) + rec.buyer_compensation + rec.platform_cut;
            assert!((rec.price - accounted).abs() < TOL);
            // Pre-settlement individual rationality (midpoint split).
            assert!((e.effective_valuation - rec.price - e.margin / 2.0).abs() < TOL);
            assert!((rec.price - e.effective_ask - e.margin / 2.0).abs() < TOL);
            // Ex-post bounds.
            assert!(rec.seller_utility >= (0.5 - mech.deposit_cap_ratio) * e.margin - TOL);
            assert!(rec.buyer_utility >= e.margin / 2.0 - TOL);
            assert!(rec.platform_cut >= 0.0);
        }
    }
}
