//! Executable checks of the settlement guarantees, run post-hoc over audit
//! logs: the midpoint split (pre-settlement individual rationality), the
//! deposit-cap bound on seller utility, and no-subsidy weak budget balance.
//!
//! Equalities are checked at 1e-9 absolute tolerance; the strict-positivity
//! claims are bounded away from zero by the positive-margin admission filter.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::{read_audit_csv, AuditRow};

const TOL: f64 = 1e-9;

/// One failed bound, with enough context to find the trade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub invariant: String,
    pub mechanism: String,
    pub episode: usize,
    pub round: usize,
    pub buyer_id: usize,
    pub seller_id: usize,
    pub observed: f64,
    pub bound: f64,
}

impl fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: mechanism={} episode={} round={} trade=({}, {}): observed {} vs bound {}",
            self.invariant,
            self.mechanism,
            self.episode,
            self.round,
            self.buyer_id,
            self.seller_id,
            self.observed,
            self.bound
        )
    }
}

fn violation(invariant: &str, row: &AuditRow, observed: f64, bound: f64) -> ViolationReport {
    ViolationReport {
        invariant: invariant.to_string(),
        mechanism: row.mechanism.clone(),
        episode: row.episode,
        round: row.round,
        buyer_id: row.buyer_id,
        seller_id: row.seller_id,
        observed,
        bound,
    }
}

/// Midpoint split: each side's pre-settlement utility equals half the margin,
/// and the margin is strictly positive.
pub fn check_midpoint_split(rows: &[AuditRow]) -> Vec<ViolationReport> {
    let mut out = Vec::new();
    for row in rows {
        let half = row.margin / 2.0;
        if row.margin <= 0.0 {
            out.push(violation("positive_margin", row, row.margin, 0.0));
        }
        let buyer_side = row.effective_valuation - row.price;
        if (buyer_side - half).abs() > TOL {
            out.push(violation("midpoint_buyer", row, buyer_side, half));
        }
        let seller_side = row.price - row.effective_ask;
        if (seller_side - half).abs() > TOL {
            out.push(violation("midpoint_seller", row, seller_side, half));
        }
    }
    out
}

/// Deposit-capped ex-post seller rationality: final seller utility never
/// falls below (1/2 - lambda) times the margin.
pub fn check_seller_floor(rows: &[AuditRow], deposit_cap_ratio: f64) -> Vec<ViolationReport> {
    let mut out = Vec::new();
    for row in rows {
        let bound = (0.5 - deposit_cap_ratio) * row.margin;
        if row.seller_utility < bound - TOL {
            out.push(violation("seller_floor", row, row.seller_utility, bound));
        }
    }
    out
}

/// No-subsidy weak budget balance: per-trade money conservation, nonnegative
/// per-round platform revenue, and the buyer-compensation floor.
pub fn check_budget(rows: &[AuditRow]) -> Vec<ViolationReport> {
    let mut out = Vec::new();
    let mut round_revenue: BTreeMap<(String, usize, usize, usize), (f64, AuditRow)> = BTreeMap::new();
    for row in rows {
        // Deposit split identities.
        if (row.refunded + row.forfeited - row.deposit).abs() > TOL {
            out.push(violation("budget_deposit_split", row, row.refunded + row.forfeited, row.deposit));
        }
        if (row.buyer_compensation + row.platform_cut - row.forfeited).abs() > TOL {
            out.push(violation(
                "budget_forfeit_split",
                row,
                row.buyer_compensation + row.platform_cut,
                row.forfeited,
            ));
        }
        // Buyer payment fully accounted across seller receipt, compensation,
        // and platform cut.
        let accounted = (row.price - row.forfeited) + row.buyer_compensation + row.platform_cut;
        if (row.price - accounted).abs() > TOL {
            out.push(violation("budget_conservation", row, accounted, row.price));
        }
        if row.platform_cut < -TOL {
            out.push(violation("budget_platform_cut", row, row.platform_cut, 0.0));
        }
        // Buyer never ends below the midpoint split.
        if row.buyer_utility < row.margin / 2.0 - TOL {
            out.push(violation("budget_buyer_floor", row, row.buyer_utility, row.margin / 2.0));
        }
        let key = (row.mechanism.clone(), row.buyer_pool_size, row.episode, row.round);
        let entry = round_revenue.entry(key).or_insert((0.0, row.clone()));
        entry.0 += row.platform_cut;
    }
    for (_, (revenue, row)) in round_revenue {
        if revenue < -TOL {
            out.push(violation("budget_round_revenue", &row, revenue, 0.0));
        }
    }
    out
}

/// All checks applicable to a log. Mechanisms that price away from the
/// full-semantics midpoint (the resource-only baseline) are excluded from the
/// midpoint and floor checks unless `include_all` is set; conservation checks
/// always apply.
pub fn check_all(rows: &[AuditRow], deposit_cap_ratio: f64, include_all: bool) -> Vec<ViolationReport> {
    let midpoint_rows: Vec<AuditRow> = if include_all {
        rows.to_vec()
    } else {
        rows.iter().filter(|r| r.mechanism != "resonly").cloned().collect()
    };
    let mut out = check_midpoint_split(&midpoint_rows);
    out.extend(check_seller_floor(&midpoint_rows, deposit_cap_ratio));
    out.extend(check_budget_scoped(rows, &midpoint_rows));
    out
}

fn check_budget_scoped(all_rows: &[AuditRow], midpoint_rows: &[AuditRow]) -> Vec<ViolationReport> {
    // Conservation and platform-revenue checks hold for every mechanism; the
    // buyer floor is a midpoint-pricing property.
    let mut out: Vec<ViolationReport> = check_budget(all_rows)
        .into_iter()
        .filter(|v| v.invariant != "budget_buyer_floor")
        .collect();
    out.extend(
        check_budget(midpoint_rows).into_iter().filter(|v| v.invariant == "budget_buyer_floor"),
    );
    out
}

/// Parse an audit CSV and run the full suite.
pub fn check_file(path: &Path, deposit_cap_ratio: f64, include_all: bool) -> Result<Vec<ViolationReport>> {
    let rows = read_audit_csv(path)?;
    Ok(check_all(&rows, deposit_cap_ratio, include_all))
}
