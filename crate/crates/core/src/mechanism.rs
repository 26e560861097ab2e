//! The mechanism interface (clear, price, deposit, settle, feedback) and the
//! six built-in configurations of it.
//!
//! Every mechanism runs the same round pipeline; flags control which value
//! and feasibility terms enter package selection, whether deposits are
//! escrowed, and whether posture evolves. The resource-only baseline clears
//! on raw valuation-minus-ask margins and prices at their midpoint, while its
//! trades are still measured and reported at full semantics, so its metrics
//! reflect the surplus it actually realizes.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clearing::{
    build_candidate_set, dp_clear, quantize_resources, ClearingOutcome, QuantizedInstance,
};
use crate::error::{Error, Result};
use crate::eval::{best_package_with, evaluate_package, EvalPolicy, PackageEvaluation};
use crate::market::{RoundInputs, ScenarioConfig};
use crate::posture::average_refund;
use crate::runtime::{draw_compliance, effort_level, EffortModel};
use crate::seed::trade_seed;
use crate::settlement::{
    capped_deposit, midpoint_price, settle_trade_at_price, ComplianceMeasurement, SettlementRecord,
};

/// Which clearing routine a mechanism uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClearingRule {
    /// Welfare-maximizing DP over the mechanism's selection margins.
    MarginDp,
    /// Greedy admission by ascending effective ask.
    AskFirstGreedy,
    /// Welfare-maximizing DP over raw valuation-minus-ask margins.
    RawMarginDp,
}

/// A mechanism as a fixed flag combination over the shared round pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismSpec {
    pub name: String,
    /// Subtract the buyer-side delay and privacy penalties from value.
    pub use_privacy_penalty: bool,
    /// Charge the seller-side zero-trust compliance cost in the ask.
    pub use_zt_cost: bool,
    /// Enforce the minimum-security constraint at admission.
    pub enforce_security_constraint: bool,
    /// Escrow capped deposits and settle them by measured compliance.
    pub deposit_enabled: bool,
    /// Evolve seller posture from refund feedback.
    pub posture_dynamic: bool,
    pub clearing_rule: ClearingRule,
}

impl MechanismSpec {
    /// The full closed loop: zero-trust-aware clearing, capped deposits,
    /// compliance settlement, and posture feedback.
    pub fn zebris() -> Self {
        MechanismSpec {
            name: "zebris".into(),
            use_privacy_penalty: true,
            use_zt_cost: true,
            enforce_security_constraint: true,
            deposit_enabled: true,
            posture_dynamic: true,
            clearing_rule: ClearingRule::MarginDp,
        }
    }

    /// Ablation: full loop with seller posture frozen at its initial draw.
    pub fn zebris_static() -> Self {
        MechanismSpec { name: "zebris-s".into(), posture_dynamic: false, ..Self::zebris() }
    }

    /// Zero-trust-aware clearing only; no deposits, compensation, or posture
    /// feedback.
    pub fn zt_only() -> Self {
        MechanismSpec {
            name: "ztonly".into(),
            deposit_enabled: false,
            posture_dynamic: false,
            ..Self::zebris()
        }
    }

    /// Privacy-aware clearing without deposit-refund regulation. Under the
    /// resolved flag assignments this coincides behaviorally with `ztonly`;
    /// it is kept as a distinct named baseline.
    pub fn p_aware() -> Self {
        MechanismSpec { name: "paware".into(), ..Self::zt_only() }
    }

    /// Cost-oriented heuristic: greedy admission by ascending effective ask
    /// over the same positive-margin candidates.
    pub fn ask_first() -> Self {
        MechanismSpec {
            name: "askfirst".into(),
            clearing_rule: ClearingRule::AskFirstGreedy,
            ..Self::zt_only()
        }
    }

    /// Resource-only trading: raw valuation-ask comparison without privacy
    /// risk, compliance cost, or security screening; no ex-post settlement.
    pub fn res_only() -> Self {
        MechanismSpec {
            name: "resonly".into(),
            use_privacy_penalty: false,
            use_zt_cost: false,
            enforce_security_constraint: false,
            deposit_enabled: false,
            posture_dynamic: false,
            clearing_rule: ClearingRule::RawMarginDp,
        }
    }

    pub fn names() -> &'static [&'static str] {
        &["zebris", "zebris-s", "ztonly", "paware", "askfirst", "resonly"]
    }

    pub fn all() -> Vec<MechanismSpec> {
        vec![
            Self::zebris(),
            Self::zebris_static(),
            Self::zt_only(),
            Self::p_aware(),
            Self::ask_first(),
            Self::res_only(),
        ]
    }

    pub fn by_name(name: &str) -> Result<MechanismSpec> {
        match name.to_ascii_lowercase().as_str() {
            "zebris" => Ok(Self::zebris()),
            "zebris-s" => Ok(Self::zebris_static()),
            "ztonly" => Ok(Self::zt_only()),
            "paware" => Ok(Self::p_aware()),
            "askfirst" => Ok(Self::ask_first()),
            "resonly" => Ok(Self::res_only()),
            _ => Err(Error::UnknownMechanism {
                name: name.to_string(),
                valid: Self::names().join(", "),
            }),
        }
    }

    /// The package-selection semantics induced by the flags. Raw-margin
    /// clearing may drop the delay deadline at admission when the scenario
    /// says so; every other mechanism always enforces it.
    pub fn eval_policy(&self, scenario: &ScenarioConfig) -> EvalPolicy {
        let enforce_deadline = if self.clearing_rule == ClearingRule::RawMarginDp {
            scenario.resonly_enforce_deadline
        } else {
            true
        };
        EvalPolicy {
            include_value_penalties: self.use_privacy_penalty,
            include_zt_cost: self.use_zt_cost,
            enforce_security: self.enforce_security_constraint,
            enforce_deadline,
        }
    }

    fn selection_is_full(&self, scenario: &ScenarioConfig) -> bool {
        self.eval_policy(scenario) == EvalPolicy::full()
    }
}

/// One executed trade: the admitting selection margin, the full-semantics
/// evaluation it settles under, and the measured outcome.
#[derive(Debug, Clone)]
pub struct TradeRecord {
    pub buyer_id: usize,
    pub seller_id: usize,
    /// Full-semantics evaluation of the executed package.
    pub evaluation: PackageEvaluation,
    /// Margin under the mechanism's own selection semantics.
    pub selection_margin: f64,
    /// Buyer's privacy penalty for this trade (beta times realized risk).
    pub privacy_penalty: f64,
    pub deadline_s: f64,
    pub effort: f64,
    pub measurement: ComplianceMeasurement,
    pub settlement: SettlementRecord,
}

/// Output of one mechanism round.
#[derive(Debug, Clone)]
pub struct RoundResult {
    pub outcome: ClearingOutcome,
    pub trades: Vec<TradeRecord>,
    /// Per-seller refund reference for the posture update, aligned with the
    /// round's seller slice.
    pub avg_refunds: Vec<f64>,
    /// The quantized instance the round cleared, for shadow comparisons.
    pub instance: QuantizedInstance,
}

/// Execute the six round stages for one mechanism: screening, best-package
/// identification, positive-margin clearing, pricing with deposit
/// assignment, compliance settlement, and the posture-reference computation.
/// Posture updates themselves are applied by the episode ledger.
pub fn run_round(
    spec: &MechanismSpec,
    inputs: &RoundInputs,
    scenario: &ScenarioConfig,
    episode_seed: u64,
) -> Result<RoundResult> {
    let cfg = &scenario.mechanism;
    let policy = spec.eval_policy(scenario);
    let full_selection = spec.selection_is_full(scenario);
    let effort_model = EffortModel::from_config(cfg, &scenario.effort);

    // Stages 1-2: screen candidate packages, keep each pair's best. The grid
    // depends only on the seller, so enumerate once per seller.
    let mut selection_evals = Vec::new();
    if !inputs.buyers.is_empty() {
        let grids: Vec<Vec<crate::market::Package>> = inputs
            .sellers
            .iter()
            .map(|s| crate::market::enumerate_candidates(&inputs.buyers[0], s, scenario))
            .collect();
        for buyer in &inputs.buyers {
            for (seller, candidates) in inputs.sellers.iter().zip(&grids) {
                let sinr = inputs.channel.sinr(buyer.buyer_id, seller.seller_id);
                if let Some(eval) = best_package_with(policy, buyer, seller, candidates, sinr, cfg)? {
                    selection_evals.push((buyer.buyer_id, seller.seller_id, eval));
                }
            }
        }
    }

    // Stage 3: positive-margin clearing.
    let pairs = build_candidate_set(selection_evals);
    let instance = quantize_resources(&pairs, &inputs.sellers, scenario.resource_quantum)?;
    let outcome = match spec.clearing_rule {
        ClearingRule::MarginDp | ClearingRule::RawMarginDp => dp_clear(&instance, scenario.state_cap)?,
        ClearingRule::AskFirstGreedy => ask_first_clear(&instance),
    };

    let buyer_by_id: HashMap<usize, &crate::market::BuyerRequest> =
        inputs.buyers.iter().map(|b| (b.buyer_id, b)).collect();
    let seller_pos: HashMap<usize, usize> =
        inputs.sellers.iter().enumerate().map(|(i, s)| (s.seller_id, i)).collect();

    // Stages 4-5: price, escrow, execute, measure, settle.
    let mut trades = Vec::with_capacity(outcome.accepted.len());
    let mut refunds_by_seller: Vec<Vec<f64>> = vec![Vec::new(); inputs.sellers.len()];
    for pair in &outcome.accepted {
        let buyer = buyer_by_id[&pair.buyer_id];
        let seller = &inputs.sellers[seller_pos[&pair.seller_id]];
        let selection = &pair.evaluation;

        let evaluation = if full_selection {
            selection.clone()
        } else {
            let sinr = inputs.channel.sinr(buyer.buyer_id, seller.seller_id);
            evaluate_package(buyer, seller, &selection.package, sinr, cfg)?
        };

        let price = midpoint_price(selection.effective_valuation, selection.effective_ask);
        let deposit = if spec.deposit_enabled {
            capped_deposit(selection.package.verification, seller.posture, selection.margin, cfg)
        } else {
            0.0
        };
        let effort = effort_level(seller.posture, deposit, evaluation.effective_ask, &effort_model)?;
        let mut trade_rng = ChaCha8Rng::seed_from_u64(trade_seed(
            episode_seed,
            inputs.round,
            pair.buyer_id,
            pair.seller_id,
        ));
        let measurement = draw_compliance(effort, evaluation.delay_s, &effort_model, &mut trade_rng);
        let settlement =
            settle_trade_at_price(&evaluation, price, deposit, &measurement, buyer.deadline_s, cfg);

        refunds_by_seller[seller_pos[&pair.seller_id]].push(settlement.refund_ratio);
        trades.push(TradeRecord {
            buyer_id: pair.buyer_id,
            seller_id: pair.seller_id,
            privacy_penalty: buyer.privacy_penalty * evaluation.privacy_risk,
            selection_margin: selection.margin,
            deadline_s: buyer.deadline_s,
            effort,
            evaluation,
            measurement,
            settlement,
        });
    }

    // Stage 6 reference values; the ledger applies the actual update.
    let avg_refunds: Vec<f64> = inputs
        .sellers
        .iter()
        .enumerate()
        .map(|(i, s)| average_refund(&refunds_by_seller[i], s.posture))
        .collect();

    Ok(RoundResult { outcome, trades, avg_refunds, instance })
}

/// Greedy clearing by ascending effective ask on the same quantized instance
/// the DP sees: accept a pair when its buyer is unmatched and the seller's
/// residual quanta suffice. Ties order by (buyer_id, seller_id).
pub fn ask_first_clear(instance: &QuantizedInstance) -> ClearingOutcome {
    let mut views: Vec<_> = instance.pair_views().collect();
    views.sort_by(|a, b| {
        a.pair
            .evaluation
            .effective_ask
            .total_cmp(&b.pair.evaluation.effective_ask)
            .then_with(|| (a.pair.buyer_id, a.pair.seller_id).cmp(&(b.pair.buyer_id, b.pair.seller_id)))
    });

    let mut residual_q = instance.capacities_q().to_vec();
    let mut matched: Vec<usize> = Vec::new();
    let mut accepted = Vec::new();
    for view in views {
        if matched.contains(&view.pair.buyer_id) {
            continue;
        }
        let (db, df) = view.demand_quanta;
        let (rb, rf) = residual_q[view.seller_idx];
        if db <= rb && df <= rf {
            residual_q[view.seller_idx] = (rb - db, rf - df);
            matched.push(view.pair.buyer_id);
            accepted.push((view.pair.clone(), view.seller_idx));
        }
    }

    accepted.sort_by_key(|(p, _)| (p.buyer_id, p.seller_id));
    let mut residual = instance.real_capacities().to_vec();
    for (pair, seller_idx) in &accepted {
        residual[*seller_idx].0 -= pair.evaluation.package.bandwidth_mhz;
        residual[*seller_idx].1 -= pair.evaluation.package.compute_gcps;
    }
    let accepted: Vec<_> = accepted.into_iter().map(|(p, _)| p).collect();
    let welfare: f64 = accepted.iter().map(|p| p.evaluation.margin).sum();
    ClearingOutcome { accepted, welfare, residual }
}
