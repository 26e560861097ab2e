//! Market entities, mechanism parameters, and per-round scenario generation.
//!
//! A scenario describes a desk-scale market: a pool of buyers activated by
//! Bernoulli trials each round, a fixed roster of sellers whose capacities are
//! resampled per round while security posture carries over, and a uniform-in-dB
//! SINR channel sampled per active pair. Candidate service packages are
//! enumerated on an even grid over each seller's bandwidth, compute, and
//! verification levels.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval used for uniform sampling; serialized as `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval(pub f64, pub f64);

impl Interval {
    pub fn lo(&self) -> f64 {
        self.0
    }

    pub fn hi(&self) -> f64 {
        self.1
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.0 == self.1 {
            self.0
        } else {
            rng.gen_range(self.0..=self.1)
        }
    }

    fn validate(&self, name: &str, domain: Interval) -> Result<()> {
        if !self.0.is_finite() || !self.1.is_finite() || self.0 > self.1 {
            return Err(Error::config(format!("range `{name}` [{}, {}] is not ordered", self.0, self.1)));
        }
        if self.0 < domain.0 || self.1 > domain.1 {
            return Err(Error::config(format!(
                "range `{name}` [{}, {}] leaves the legal domain [{}, {}]",
                self.0, self.1, domain.0, domain.1
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Domain entities
// ---------------------------------------------------------------------------

/// One active buyer's per-round demand tuple plus penalty coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuyerRequest {
    pub buyer_id: usize,
    /// Input data size in megabytes.
    pub data_size_mb: f64,
    /// Required computation workload in giga-cycles.
    pub workload_gcycles: f64,
    /// Delay deadline in seconds.
    pub deadline_s: f64,
    /// Privacy sensitivity level in [0, 1].
    pub privacy_sensitivity: f64,
    /// Minimum required security level in [0, 1].
    pub min_security: f64,
    /// Gross valuation in monetary units.
    pub gross_valuation: f64,
    /// Delay penalty coefficient (money per second).
    pub delay_penalty: f64,
    /// Privacy-risk penalty coefficient (money per risk unit).
    pub privacy_penalty: f64,
}

impl BuyerRequest {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("data_size_mb", self.data_size_mb),
            ("workload_gcycles", self.workload_gcycles),
            ("deadline_s", self.deadline_s),
            ("gross_valuation", self.gross_valuation),
            ("delay_penalty", self.delay_penalty),
            ("privacy_penalty", self.privacy_penalty),
        ];
        for (name, v) in pos {
            if v <= 0.0 || v.is_nan() {
                return Err(Error::config(format!("buyer {}: {name} must be > 0, got {v}", self.buyer_id)));
            }
        }
        for (name, v) in [("privacy_sensitivity", self.privacy_sensitivity), ("min_security", self.min_security)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("buyer {}: {name} must be in [0, 1], got {v}", self.buyer_id)));
            }
        }
        Ok(())
    }
}

/// One seller's capacity, posture, verification levels, and cost coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SellerState {
    pub seller_id: usize,
    /// Available bandwidth in MHz.
    pub bandwidth_mhz: f64,
    /// Available computation capacity in giga-cycles per second.
    pub compute_gcps: f64,
    /// Current security posture in [0, 1].
    pub posture: f64,
    /// Feasible normalized verification levels, strictly ascending in [0, 1].
    pub verification_levels: Vec<f64>,
    /// Base ask in monetary units.
    pub base_ask: f64,
    /// Unit bandwidth cost (money per MHz).
    pub unit_bandwidth_cost: f64,
    /// Unit compute cost (money per giga-cycle/s).
    pub unit_compute_cost: f64,
}

impl SellerState {
    pub fn validate(&self) -> Result<()> {
        if self.bandwidth_mhz <= 0.0 || self.compute_gcps <= 0.0 || self.bandwidth_mhz.is_nan() || self.compute_gcps.is_nan() {
            return Err(Error::config(format!("seller {}: capacities must be > 0", self.seller_id)));
        }
        if self.unit_bandwidth_cost <= 0.0 || self.unit_compute_cost <= 0.0 || self.unit_bandwidth_cost.is_nan() || self.unit_compute_cost.is_nan() {
            return Err(Error::config(format!("seller {}: unit costs must be > 0", self.seller_id)));
        }
        if self.base_ask < 0.0 {
            return Err(Error::config(format!("seller {}: base_ask must be >= 0", self.seller_id)));
        }
        if !(0.0..=1.0).contains(&self.posture) {
            return Err(Error::config(format!("seller {}: posture must be in [0, 1]", self.seller_id)));
        }
        if self.verification_levels.is_empty() {
            return Err(Error::config(format!("seller {}: verification_levels is empty", self.seller_id)));
        }
        for w in self.verification_levels.windows(2) {
            if w[0] >= w[1] || w[0].is_nan() || w[1].is_nan() {
                return Err(Error::config(format!(
                    "seller {}: verification_levels must be strictly ascending",
                    self.seller_id
                )));
            }
        }
        for &z in &self.verification_levels {
            if !(0.0..=1.0).contains(&z) {
                return Err(Error::config(format!("seller {}: verification level {z} outside [0, 1]", self.seller_id)));
            }
        }
        Ok(())
    }
}

/// A candidate service package: assigned bandwidth, compute, and verification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Package {
    pub bandwidth_mhz: f64,
    pub compute_gcps: f64,
    pub verification: f64,
}

/// Mechanism-level constants: delay/cost coefficients, refund weights,
/// deposit coefficients and cap, compensation split, posture step, and the
/// effort-response coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MechanismConfig {
    /// Delay added per unit of verification intensity (seconds).
    pub delay_verif_coeff: f64,
    /// Delay added per unit of posture deficiency (seconds).
    pub delay_posture_coeff: f64,
    /// Weight of verification vs posture in the compliance score, in [0, 1].
    pub compliance_weight: f64,
    /// Seller-side compliance cost per unit of verification (money).
    pub zt_verif_cost: f64,
    /// Seller-side compliance cost per unit of posture deficiency (money).
    pub zt_posture_cost: f64,
    /// Refund weights over (authentication, policy, SLA); must sum to 1.
    pub refund_weights: [f64; 3],
    /// Deposit coefficient on verification intensity (money).
    pub deposit_verif_coeff: f64,
    /// Deposit coefficient on posture deficiency (money).
    pub deposit_posture_coeff: f64,
    /// Deposit cap as a fraction of the trade margin, in (0, 0.5).
    pub deposit_cap_ratio: f64,
    /// Fraction of forfeited deposit returned to the buyer, in [0, 1].
    pub compensation_share: f64,
    /// Posture update step size, in (0, 1].
    pub posture_step: f64,
    /// Effort-response coefficients (intercept, posture, deposit ratio).
    pub effort_coeffs: [f64; 3],
}

impl Default for MechanismConfig {
    fn default() -> Self {
        MechanismConfig {
            delay_verif_coeff: 0.05,
            delay_posture_coeff: 0.4,
            compliance_weight: 0.9,
            zt_verif_cost: 0.15,
            zt_posture_cost: 2.5,
            refund_weights: [0.35, 0.30, 0.35],
            deposit_verif_coeff: 1.0,
            deposit_posture_coeff: 1.5,
            deposit_cap_ratio: 0.40,
            compensation_share: 0.70,
            posture_step: 0.3,
            effort_coeffs: [-1.0, 2.0, 2.0],
        }
    }
}

impl MechanismConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("delay_verif_coeff", self.delay_verif_coeff),
            ("delay_posture_coeff", self.delay_posture_coeff),
            ("zt_verif_cost", self.zt_verif_cost),
            ("zt_posture_cost", self.zt_posture_cost),
            ("deposit_verif_coeff", self.deposit_verif_coeff),
            ("deposit_posture_coeff", self.deposit_posture_coeff),
        ];
        for (name, v) in pos {
            if v <= 0.0 || v.is_nan() {
                return Err(Error::config(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.compliance_weight) {
            return Err(Error::config("compliance_weight must be in [0, 1]"));
        }
        let weight_sum: f64 = self.refund_weights.iter().sum();
        if self.refund_weights.iter().any(|&w| w < 0.0) || (weight_sum - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!(
                "refund_weights must be nonnegative and sum to 1, got {:?}",
                self.refund_weights
            )));
        }
        if self.deposit_cap_ratio <= 0.0 || self.deposit_cap_ratio >= 0.5 || self.deposit_cap_ratio.is_nan() {
            return Err(Error::config("deposit_cap_ratio must be in (0, 0.5)"));
        }
        if !(0.0..=1.0).contains(&self.compensation_share) {
            return Err(Error::config("compensation_share must be in [0, 1]"));
        }
        if self.posture_step <= 0.0 || self.posture_step > 1.0 || self.posture_step.is_nan() {
            return Err(Error::config("posture_step must be in (0, 1]"));
        }
        Ok(())
    }
}

/// Per-pair linear SINR for one round, keyed by (buyer_id, seller_id).
#[derive(Debug, Clone, Default)]
pub struct ChannelState {
    sinr: HashMap<(usize, usize), f64>,
}

impl ChannelState {
    pub fn insert(&mut self, buyer_id: usize, seller_id: usize, sinr: f64) {
        debug_assert!(sinr > 0.0);
        self.sinr.insert((buyer_id, seller_id), sinr);
    }

    /// Linear SINR for a pair sampled this round. Panics if the pair was
    /// never sampled, which indicates a harness bug.
    pub fn sinr(&self, buyer_id: usize, seller_id: usize) -> f64 {
        self.sinr[&(buyer_id, seller_id)]
    }

    pub fn len(&self) -> usize {
        self.sinr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sinr.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Scenario configuration
// ---------------------------------------------------------------------------

/// Buyer activation probabilities: a single constant for the whole pool, a
/// CSV file with one probability per line, or an explicit per-buyer list.
/// When the pool is larger than the list, probabilities repeat cyclically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ActivationConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<f64>>,
}

impl ActivationConfig {
    pub fn constant(p: f64) -> Self {
        ActivationConfig { constant: Some(p), file: None, probabilities: None }
    }

    /// Resolve to one probability per pool buyer. File contents are cached
    /// into `probabilities` by [`ScenarioConfig::load`].
    pub fn resolve(&self, pool_size: usize) -> Result<Vec<f64>> {
        let base: Vec<f64> = if let Some(list) = &self.probabilities {
            list.clone()
        } else if let Some(p) = self.constant {
            vec![p]
        } else if let Some(path) = &self.file {
            load_activation_profile(path)?
        } else {
            return Err(Error::config("activation: set `constant`, `file`, or `probabilities`"));
        };
        if base.is_empty() {
            return Err(Error::config("activation profile is empty"));
        }
        for &p in &base {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("activation probability {p} outside [0, 1]")));
            }
        }
        Ok((0..pool_size).map(|i| base[i % base.len()]).collect())
    }
}

/// Read an activation profile: one probability per pool buyer per line.
/// Lines starting with `#` and blank lines are skipped.
pub fn load_activation_profile(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut probs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let p: f64 = line.parse().map_err(|_| {
            Error::config(format!("{}:{}: expected a probability, got `{line}`", path.display(), lineno + 1))
        })?;
        probs.push(p);
    }
    if probs.is_empty() {
        return Err(Error::config(format!("{}: no probabilities found", path.display())));
    }
    Ok(probs)
}

/// Sampling ranges for per-round buyer request fields and per-episode
/// penalty coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuyerRanges {
    pub data_size_mb: Interval,
    pub workload_gcycles: Interval,
    pub deadline_s: Interval,
    pub privacy_sensitivity: Interval,
    pub min_security: Interval,
    pub gross_valuation: Interval,
    pub delay_penalty: Interval,
    pub privacy_penalty: Interval,
}

impl Default for BuyerRanges {
    fn default() -> Self {
        BuyerRanges {
            data_size_mb: Interval(0.15, 0.95),
            workload_gcycles: Interval(0.10, 1.00),
            deadline_s: Interval(0.25, 0.90),
            privacy_sensitivity: Interval(0.20, 1.00),
            min_security: Interval(0.40, 0.90),
            gross_valuation: Interval(8.0, 20.0),
            delay_penalty: Interval(3.0, 6.0),
            privacy_penalty: Interval(2.0, 5.0),
        }
    }
}

impl BuyerRanges {
    fn validate(&self) -> Result<()> {
        let pos = Interval(f64::MIN_POSITIVE, f64::MAX);
        let unit = Interval(0.0, 1.0);
        self.data_size_mb.validate("buyer_ranges.data_size_mb", pos)?;
        self.workload_gcycles.validate("buyer_ranges.workload_gcycles", pos)?;
        self.deadline_s.validate("buyer_ranges.deadline_s", pos)?;
        self.privacy_sensitivity.validate("buyer_ranges.privacy_sensitivity", unit)?;
        self.min_security.validate("buyer_ranges.min_security", unit)?;
        self.gross_valuation.validate("buyer_ranges.gross_valuation", pos)?;
        self.delay_penalty.validate("buyer_ranges.delay_penalty", pos)?;
        self.privacy_penalty.validate("buyer_ranges.privacy_penalty", pos)?;
        Ok(())
    }
}

/// Sampling ranges for per-round seller capacities and per-episode costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SellerRanges {
    pub bandwidth_mhz: Interval,
    pub compute_gcps: Interval,
    pub initial_posture: Interval,
    pub base_ask: Interval,
    pub unit_bandwidth_cost: Interval,
    pub unit_compute_cost: Interval,
}

impl Default for SellerRanges {
    fn default() -> Self {
        SellerRanges {
            bandwidth_mhz: Interval(6.0, 10.0),
            compute_gcps: Interval(18.0, 32.0),
            initial_posture: Interval(0.50, 0.92),
            base_ask: Interval(2.0, 6.0),
            unit_bandwidth_cost: Interval(0.08, 0.18),
            unit_compute_cost: Interval(0.10, 0.22),
        }
    }
}

impl SellerRanges {
    fn validate(&self) -> Result<()> {
        let pos = Interval(f64::MIN_POSITIVE, f64::MAX);
        let unit = Interval(0.0, 1.0);
        let nonneg = Interval(0.0, f64::MAX);
        self.bandwidth_mhz.validate("seller_ranges.bandwidth_mhz", pos)?;
        self.compute_gcps.validate("seller_ranges.compute_gcps", pos)?;
        self.initial_posture.validate("seller_ranges.initial_posture", unit)?;
        self.base_ask.validate("seller_ranges.base_ask", nonneg)?;
        self.unit_bandwidth_cost.validate("seller_ranges.unit_bandwidth_cost", pos)?;
        self.unit_compute_cost.validate("seller_ranges.unit_compute_cost", pos)?;
        Ok(())
    }
}

/// Stochastic runtime-compliance plumbing; the effort coefficients live in
/// [`MechanismConfig::effort_coeffs`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EffortSettings {
    pub auth_events_per_trade: u32,
    pub policy_checks_per_trade: u32,
    /// Scale of the violation probability at zero effort, in [0, 1].
    pub violation_scale: f64,
    /// Maximum fractional delay inflation at zero effort, >= 0.
    pub delay_inflation_scale: f64,
}

impl Default for EffortSettings {
    fn default() -> Self {
        EffortSettings {
            auth_events_per_trade: 20,
            policy_checks_per_trade: 20,
            violation_scale: 0.6,
            delay_inflation_scale: 0.8,
        }
    }
}

/// Full scenario description; maps one-to-one onto the scenario TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub num_sellers: usize,
    /// Trading rounds per episode.
    pub horizon: usize,
    pub buyer_pool_size: usize,
    pub rng_seed: u64,
    pub activation: ActivationConfig,
    pub buyer_ranges: BuyerRanges,
    pub seller_ranges: SellerRanges,
    /// SINR sampling interval in dB; converted to linear scale per pair.
    pub sinr_db_range: Interval,
    /// Seller verification-level set, strictly ascending in [0, 1].
    pub verification_levels: Vec<f64>,
    /// Candidate grid: (bandwidth levels, compute levels, verification levels).
    pub package_grid: [usize; 3],
    /// Clearing discretization step in (MHz, giga-cycles/s).
    pub resource_quantum: (f64, f64),
    /// Clearing DP state budget.
    pub state_cap: usize,
    /// Resample seller base asks each round; when false they are fixed at
    /// their episode-initial draw.
    pub resample_asks: bool,
    /// Whether the resource-only baseline still enforces the delay deadline
    /// at package admission.
    pub resonly_enforce_deadline: bool,
    pub mechanism: MechanismConfig,
    pub effort: EffortSettings,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            num_sellers: 6,
            horizon: 180,
            buyer_pool_size: 20,
            rng_seed: 42,
            activation: ActivationConfig::constant(0.18),
            buyer_ranges: BuyerRanges::default(),
            seller_ranges: SellerRanges::default(),
            sinr_db_range: Interval(5.0, 25.0),
            verification_levels: vec![0.3, 0.6, 0.9],
            package_grid: [4, 4, 3],
            resource_quantum: (0.5, 0.5),
            state_cap: 10_000_000,
            resample_asks: true,
            resonly_enforce_deadline: true,
            mechanism: MechanismConfig::default(),
            effort: EffortSettings::default(),
        }
    }
}

impl ScenarioConfig {
    /// Load a scenario from a TOML file. Relative activation-profile paths are
    /// resolved against the scenario file's directory and inlined so that the
    /// resolved config is self-contained.
    pub fn load(path: &Path) -> Result<ScenarioConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut scenario: ScenarioConfig = toml::from_str(&text)
            .map_err(|e| Error::Parse { path: path.into(), message: e.to_string() })?;
        if let Some(rel) = scenario.activation.file.take() {
            let resolved = if rel.is_relative() {
                path.parent().unwrap_or(Path::new(".")).join(rel)
            } else {
                rel
            };
            scenario.activation.probabilities = Some(load_activation_profile(&resolved)?);
        }
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_sellers == 0 {
            return Err(Error::config("num_sellers must be >= 1"));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon must be >= 1"));
        }
        if self.buyer_pool_size == 0 {
            return Err(Error::config("buyer_pool_size must be >= 1"));
        }
        self.activation.resolve(self.buyer_pool_size)?;
        self.buyer_ranges.validate()?;
        self.seller_ranges.validate()?;
        if self.sinr_db_range.0 > self.sinr_db_range.1 {
            return Err(Error::config("sinr_db_range is not ordered"));
        }
        if self.verification_levels.is_empty() {
            return Err(Error::config("verification_levels must be non-empty"));
        }
        for w in self.verification_levels.windows(2) {
            if w[0] >= w[1] || w[0].is_nan() || w[1].is_nan() {
                return Err(Error::config("verification_levels must be strictly ascending"));
            }
        }
        for &z in &self.verification_levels {
            if !(0.0..=1.0).contains(&z) {
                return Err(Error::config("verification levels must lie in [0, 1]"));
            }
        }
        if self.package_grid.contains(&0) {
            return Err(Error::config("package_grid counts must be >= 1"));
        }
        if self.resource_quantum.0 <= 0.0 || self.resource_quantum.1 <= 0.0 {
            return Err(Error::config("resource_quantum components must be > 0"));
        }
        if self.state_cap == 0 {
            return Err(Error::config("state_cap must be >= 1"));
        }
        self.mechanism.validate()?;
        if self.effort.auth_events_per_trade == 0 || self.effort.policy_checks_per_trade == 0 {
            return Err(Error::config("effort event counts must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.effort.violation_scale) {
            return Err(Error::config("violation_scale must be in [0, 1]"));
        }
        if self.effort.delay_inflation_scale < 0.0 {
            return Err(Error::config("delay_inflation_scale must be >= 0"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Episode profile and per-round sampling
// ---------------------------------------------------------------------------

/// Quantities fixed for the length of one episode: buyer penalty
/// coefficients, seller cost coefficients, initial postures, and the resolved
/// activation probabilities. Drawn from the episode stream before any round.
#[derive(Debug, Clone)]
pub struct EpisodeProfile {
    pub activation_probs: Vec<f64>,
    /// (delay_penalty, privacy_penalty) per pool buyer.
    pub buyer_penalties: Vec<(f64, f64)>,
    /// (unit_bandwidth_cost, unit_compute_cost) per seller.
    pub seller_costs: Vec<(f64, f64)>,
    /// Episode-initial base ask per seller, used when asks are not resampled.
    pub initial_asks: Vec<f64>,
    pub initial_postures: Vec<f64>,
}

impl EpisodeProfile {
    pub fn generate<R: Rng>(scenario: &ScenarioConfig, rng: &mut R) -> Result<EpisodeProfile> {
        if scenario.num_sellers == 0 {
            return Err(Error::config("cannot build an episode with an empty seller list"));
        }
        let activation_probs = scenario.activation.resolve(scenario.buyer_pool_size)?;
        let buyer_penalties = (0..scenario.buyer_pool_size)
            .map(|_| {
                (
                    scenario.buyer_ranges.delay_penalty.sample(rng),
                    scenario.buyer_ranges.privacy_penalty.sample(rng),
                )
            })
            .collect();
        let mut seller_costs = Vec::with_capacity(scenario.num_sellers);
        let mut initial_asks = Vec::with_capacity(scenario.num_sellers);
        let mut initial_postures = Vec::with_capacity(scenario.num_sellers);
        for _ in 0..scenario.num_sellers {
            seller_costs.push((
                scenario.seller_ranges.unit_bandwidth_cost.sample(rng),
                scenario.seller_ranges.unit_compute_cost.sample(rng),
            ));
            initial_asks.push(scenario.seller_ranges.base_ask.sample(rng));
            initial_postures.push(scenario.seller_ranges.initial_posture.sample(rng));
        }
        Ok(EpisodeProfile { activation_probs, buyer_penalties, seller_costs, initial_asks, initial_postures })
    }
}

/// Everything a mechanism needs to run one round.
#[derive(Debug, Clone)]
pub struct RoundInputs {
    pub round: usize,
    pub buyers: Vec<BuyerRequest>,
    pub sellers: Vec<SellerState>,
    pub channel: ChannelState,
}

/// Sample one round: Bernoulli buyer activation, fresh request fields for
/// active buyers, resampled seller capacities with posture injected from the
/// cross-round ledger, and a fresh channel draw per active pair.
///
/// The RNG consumption pattern is fixed regardless of activation outcomes so
/// that traces with equal seeds are reproducible draw for draw.
pub fn sample_round<R: Rng>(
    scenario: &ScenarioConfig,
    profile: &EpisodeProfile,
    postures: &[f64],
    rng: &mut R,
    round_index: usize,
) -> Result<RoundInputs> {
    if scenario.num_sellers == 0 {
        return Err(Error::config("cannot sample a round with an empty seller list"));
    }
    debug_assert!(round_index < scenario.horizon);
    debug_assert_eq!(postures.len(), scenario.num_sellers);

    let mut active = Vec::new();
    for buyer_id in 0..scenario.buyer_pool_size {
        let u: f64 = rng.gen();
        if u < profile.activation_probs[buyer_id] {
            active.push(buyer_id);
        }
    }

    let br = &scenario.buyer_ranges;
    let buyers: Vec<BuyerRequest> = active
        .iter()
        .map(|&buyer_id| BuyerRequest {
            buyer_id,
            data_size_mb: br.data_size_mb.sample(rng),
            workload_gcycles: br.workload_gcycles.sample(rng),
            deadline_s: br.deadline_s.sample(rng),
            privacy_sensitivity: br.privacy_sensitivity.sample(rng),
            min_security: br.min_security.sample(rng),
            gross_valuation: br.gross_valuation.sample(rng),
            delay_penalty: profile.buyer_penalties[buyer_id].0,
            privacy_penalty: profile.buyer_penalties[buyer_id].1,
        })
        .collect();

    let sr = &scenario.seller_ranges;
    let sellers: Vec<SellerState> = (0..scenario.num_sellers)
        .map(|seller_id| {
            let bandwidth_mhz = sr.bandwidth_mhz.sample(rng);
            let compute_gcps = sr.compute_gcps.sample(rng);
            let sampled_ask = sr.base_ask.sample(rng);
            SellerState {
                seller_id,
                bandwidth_mhz,
                compute_gcps,
                posture: postures[seller_id],
                verification_levels: scenario.verification_levels.clone(),
                base_ask: if scenario.resample_asks { sampled_ask } else { profile.initial_asks[seller_id] },
                unit_bandwidth_cost: profile.seller_costs[seller_id].0,
                unit_compute_cost: profile.seller_costs[seller_id].1,
            }
        })
        .collect();

    let mut channel = ChannelState::default();
    for buyer in &buyers {
        for seller in &sellers {
            let db = scenario.sinr_db_range.sample(rng);
            channel.insert(buyer.buyer_id, seller.seller_id, 10f64.powf(db / 10.0));
        }
    }

    Ok(RoundInputs { round: round_index, buyers, sellers, channel })
}

/// Enumerate the candidate package grid for one pair: evenly spaced bandwidth
/// shares `k*B/n` and compute shares `k*F/m` for `k = 1..=n`, crossed with the
/// highest `v` verification levels of the seller's set.
pub fn enumerate_candidates(
    _buyer: &BuyerRequest,
    seller: &SellerState,
    scenario: &ScenarioConfig,
) -> Vec<Package> {
    let [n_bw, n_cp, n_vl] = scenario.package_grid;
    let levels = &seller.verification_levels;
    let n_vl = n_vl.min(levels.len());
    let z_start = levels.len() - n_vl;

    let mut out = Vec::with_capacity(n_bw * n_cp * n_vl);
    for kb in 1..=n_bw {
        let bandwidth_mhz = seller.bandwidth_mhz * kb as f64 / n_bw as f64;
        for kc in 1..=n_cp {
            let compute_gcps = seller.compute_gcps * kc as f64 / n_cp as f64;
            for &verification in &levels[z_start..] {
                out.push(Package { bandwidth_mhz, compute_gcps, verification });
            }
        }
    }
    out
}
