//! The six market metrics per round and their Monte Carlo aggregation.
//!
//! Social welfare counts the full-semantics margins of accepted trades;
//! transfer terms (payments, deposits, refunds, compensation) never enter it.
//! Averages over an empty accepted set are absent rather than zero, so
//! cross-round means are taken over non-empty rounds only.

use serde::{Deserialize, Serialize};

use crate::mechanism::TradeRecord;

/// Metric values for one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    /// Sum of accepted trade margins (full semantics).
    pub social_welfare: f64,
    /// Accepted trades over active requests; 0 when no buyer was active.
    pub accepted_trading_ratio: f64,
    /// Mean realized delay of accepted trades, seconds.
    pub avg_delay_s: Option<f64>,
    /// Mean privacy penalty (beta times realized risk) of accepted trades.
    pub avg_privacy_cost: Option<f64>,
    /// Mean weighted compliance score of accepted trades.
    pub avg_compliance: Option<f64>,
    /// Mean realized seller utility after settlement.
    pub avg_seller_utility: Option<f64>,
    /// Sum of platform cuts over accepted trades.
    pub platform_revenue: f64,
}

/// Compute the round metrics from the executed trades. `trades` corresponds
/// one-to-one with the round's accepted pairs.
pub fn compute_round_metrics(trades: &[TradeRecord], active_buyers: usize) -> RoundMetrics {
    let n = trades.len();
    let social_welfare: f64 = trades.iter().map(|t| t.evaluation.margin).sum();
    let platform_revenue: f64 = trades.iter().map(|t| t.settlement.platform_cut).sum();
    let accepted_trading_ratio =
        if active_buyers == 0 { 0.0 } else { n as f64 / active_buyers as f64 };

    let mean = |f: &dyn Fn(&TradeRecord) -> f64| -> Option<f64> {
        if n == 0 {
            None
        } else {
            Some(trades.iter().map(f).sum::<f64>() / n as f64)
        }
    };

    RoundMetrics {
        social_welfare,
        accepted_trading_ratio,
        avg_delay_s: mean(&|t| t.measurement.realized_delay_s),
        avg_privacy_cost: mean(&|t| t.privacy_penalty),
        // The weighted compliance score per trade is exactly its refund ratio.
        avg_compliance: mean(&|t| t.settlement.refund_ratio),
        avg_seller_utility: mean(&|t| t.settlement.seller_utility),
        platform_revenue,
    }
}

/// Per-episode metric values: means over rounds, with the optional metrics
/// averaged over non-empty rounds only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub social_welfare: f64,
    pub accepted_trading_ratio: f64,
    pub avg_delay_s: Option<f64>,
    pub avg_privacy_cost: Option<f64>,
    pub avg_compliance: Option<f64>,
    pub avg_seller_utility: Option<f64>,
    pub platform_revenue: f64,
}

pub fn summarize_episode(rounds: &[RoundMetrics]) -> EpisodeMetrics {
    let n = rounds.len().max(1) as f64;
    let opt_mean = |f: &dyn Fn(&RoundMetrics) -> Option<f64>| -> Option<f64> {
        let values: Vec<f64> = rounds.iter().filter_map(f).collect();
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<f64>() / values.len() as f64)
        }
    };
    EpisodeMetrics {
        social_welfare: rounds.iter().map(|r| r.social_welfare).sum::<f64>() / n,
        accepted_trading_ratio: rounds.iter().map(|r| r.accepted_trading_ratio).sum::<f64>() / n,
        avg_delay_s: opt_mean(&|r| r.avg_delay_s),
        avg_privacy_cost: opt_mean(&|r| r.avg_privacy_cost),
        avg_compliance: opt_mean(&|r| r.avg_compliance),
        avg_seller_utility: opt_mean(&|r| r.avg_seller_utility),
        platform_revenue: rounds.iter().map(|r| r.platform_revenue).sum::<f64>() / n,
    }
}

/// Stable metric column order for summary outputs.
pub const METRIC_NAMES: [&str; 7] = ["sw", "atr", "aed", "aprc", "acs", "su", "platform_revenue"];

/// Fetch one named metric from an episode; `None` when undefined (no trades
/// in any round).
pub fn metric_value(metrics: &EpisodeMetrics, name: &str) -> Option<f64> {
    match name {
        "sw" => Some(metrics.social_welfare),
        "atr" => Some(metrics.accepted_trading_ratio),
        "aed" => metrics.avg_delay_s,
        "aprc" => metrics.avg_privacy_cost,
        "acs" => metrics.avg_compliance,
        "su" => metrics.avg_seller_utility,
        "platform_revenue" => Some(metrics.platform_revenue),
        _ => None,
    }
}

/// One (mechanism, pool size, metric) aggregate across episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub mechanism: String,
    pub buyer_pool_size: usize,
    pub metric: String,
    pub mean: f64,
    pub std_dev: f64,
    pub ci95_half_width: f64,
    /// Episodes in which the metric was defined.
    pub episodes: usize,
}

/// One finished episode keyed by its sweep cell.
#[derive(Debug, Clone)]
pub struct EpisodeCell {
    pub mechanism: String,
    pub buyer_pool_size: usize,
    pub metrics: EpisodeMetrics,
}

/// Mean, sample standard deviation, and 95% normal-approximation confidence
/// half-width per metric, keyed by (mechanism, buyer-pool size). Rows come
/// out sorted by (mechanism, pool size, metric order).
pub fn aggregate_episodes(cells: &[EpisodeCell]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, usize)> =
        cells.iter().map(|c| (c.mechanism.clone(), c.buyer_pool_size)).collect();
    keys.sort();
    keys.dedup();

    let mut rows = Vec::new();
    for (mechanism, pool) in keys {
        let group: Vec<&EpisodeCell> = cells
            .iter()
            .filter(|c| c.mechanism == mechanism && c.buyer_pool_size == pool)
            .collect();
        for metric in METRIC_NAMES {
            let values: Vec<f64> =
                group.iter().filter_map(|c| metric_value(&c.metrics, metric)).collect();
            let n = values.len();
            if n == 0 {
                continue;
            }
            let mean = values.iter().sum::<f64>() / n as f64;
            let std_dev = if n < 2 {
                0.0
            } else {
                let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
                (ss / (n - 1) as f64).sqrt()
            };
            let ci95_half_width = if n < 2 { 0.0 } else { 1.96 * std_dev / (n as f64).sqrt() };
            rows.push(SummaryRow {
                mechanism: mechanism.clone(),
                buyer_pool_size: pool,
                metric: metric.to_string(),
                mean,
                std_dev,
                ci95_half_width,
                episodes: n,
            });
        }
    }
    rows
}
