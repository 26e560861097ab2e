//! Cross-round seller-posture evolution via refund-ratio feedback.
//!
//! Each round, a seller's realized refund ratios average into a reference
//! value (its current posture when it won no trades), and the posture takes a
//! convex step toward that reference. The ledger is the only mutable state
//! carried across rounds.

use serde::{Deserialize, Serialize};

/// One posture observation: the seller's posture entering the next round and
/// the refund reference that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostureRecord {
    pub round: usize,
    pub seller_id: usize,
    pub posture: f64,
    pub avg_refund: f64,
}

/// Per-seller posture state plus the full update history of an episode.
#[derive(Debug, Clone)]
pub struct PostureLedger {
    postures: Vec<f64>,
    history: Vec<PostureRecord>,
}

impl PostureLedger {
    pub fn new(initial: Vec<f64>) -> Self {
        debug_assert!(initial.iter().all(|q| (0.0..=1.0).contains(q)));
        PostureLedger { postures: initial, history: Vec::new() }
    }

    pub fn postures(&self) -> &[f64] {
        &self.postures
    }

    pub fn history(&self) -> &[PostureRecord] {
        &self.history
    }

    /// Apply one round of posture feedback. All settlements of the round must
    /// be complete before calling; updates apply simultaneously. When
    /// `dynamic` is false the references are still recorded but postures stay
    /// put.
    pub fn apply_round(&mut self, round: usize, avg_refunds: &[f64], step: f64, dynamic: bool) {
        debug_assert_eq!(avg_refunds.len(), self.postures.len());
        for (seller_id, (&rho_bar, q)) in avg_refunds.iter().zip(self.postures.iter_mut()).enumerate() {
            if dynamic {
                *q = update_posture(*q, rho_bar, step);
            }
            self.history.push(PostureRecord { round, seller_id, posture: *q, avg_refund: rho_bar });
        }
    }
}

/// Average refund ratio over a seller's accepted trades this round; the
/// current posture stands in when the seller won no trades.
pub fn average_refund(refund_ratios: &[f64], current_posture: f64) -> f64 {
    if refund_ratios.is_empty() {
        current_posture
    } else {
        refund_ratios.iter().sum::<f64>() / refund_ratios.len() as f64
    }
}

/// Convex posture step toward the refund reference.
pub fn update_posture(posture: f64, avg_refund: f64, step: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&posture));
    debug_assert!((0.0..=1.0).contains(&avg_refund));
    debug_assert!(step > 0.0 && step <= 1.0);
    (1.0 - step) * posture + step * avg_refund
}
