//! Positive-margin candidate construction and round-wise welfare-maximizing
//! matching under buyer exclusiveness and per-seller bandwidth/compute
//! capacities.
//!
//! The solver discretizes resources (demands rounded up, capacities rounded
//! down, so any quantized-feasible matching is feasible in real resources)
//! and runs a buyer-sequential dynamic program whose state is the next buyer
//! index plus the vector of per-seller residual quanta. A brute-force
//! enumerator over exact real-valued capacities serves as the validation
//! oracle for small instances.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hasher};

use rand::Rng;

use crate::error::{Error, Result};
use crate::eval::PackageEvaluation;
use crate::market::SellerState;

/// A buyer-seller pair eligible for clearing; the evaluation's margin is
/// strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePair {
    pub buyer_id: usize,
    pub seller_id: usize,
    pub evaluation: PackageEvaluation,
}

/// Accepted pairs for one round, their total margin, and the per-seller
/// residual real resources, aligned with the seller slice passed to
/// [`quantize_resources`].
#[derive(Debug, Clone)]
pub struct ClearingOutcome {
    pub accepted: Vec<CandidatePair>,
    pub welfare: f64,
    pub residual: Vec<(f64, f64)>,
}

/// Keep exactly the pairs with strictly positive margin, in deterministic
/// (buyer_id, seller_id) order.
pub fn build_candidate_set(
    evaluations: impl IntoIterator<Item = (usize, usize, PackageEvaluation)>,
) -> Vec<CandidatePair> {
    let mut pairs: Vec<CandidatePair> = evaluations
        .into_iter()
        .filter(|(_, _, e)| e.margin > 0.0)
        .map(|(buyer_id, seller_id, evaluation)| CandidatePair { buyer_id, seller_id, evaluation })
        .collect();
    pairs.sort_by_key(|p| (p.buyer_id, p.seller_id));
    pairs
}

// ---------------------------------------------------------------------------
// Quantization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct PairOption {
    pair: CandidatePair,
    seller_idx: usize,
    demand_q: (u32, u32),
    margin: f64,
}

#[derive(Debug, Clone)]
struct BuyerOptions {
    options: Vec<PairOption>,
}

/// A clearing instance with demands rounded up and capacities rounded down to
/// whole quanta. Pairs whose rounded demand cannot fit an empty seller are
/// dropped and counted in `dropped`.
#[derive(Debug, Clone)]
pub struct QuantizedInstance {
    buyers: Vec<BuyerOptions>,
    capacities_q: Vec<(u32, u32)>,
    real_capacities: Vec<(f64, f64)>,
    pub dropped: usize,
}

/// Borrowed view of one quantized pair.
#[derive(Debug, Clone, Copy)]
pub struct PairView<'a> {
    pub pair: &'a CandidatePair,
    /// Index into the instance's seller slice.
    pub seller_idx: usize,
    pub demand_quanta: (u32, u32),
}

impl QuantizedInstance {
    /// Number of pairs surviving quantization.
    pub fn num_pairs(&self) -> usize {
        self.buyers.iter().map(|b| b.options.len()).sum()
    }

    pub fn num_buyers(&self) -> usize {
        self.buyers.len()
    }

    pub fn num_sellers(&self) -> usize {
        self.capacities_q.len()
    }

    /// All surviving pairs in (buyer, seller) order.
    pub fn pair_views(&self) -> impl Iterator<Item = PairView<'_>> {
        self.buyers.iter().flat_map(|b| {
            b.options.iter().map(|o| PairView {
                pair: &o.pair,
                seller_idx: o.seller_idx,
                demand_quanta: o.demand_q,
            })
        })
    }

    /// Quantized (floored) per-seller capacities.
    pub fn capacities_q(&self) -> &[(u32, u32)] {
        &self.capacities_q
    }

    /// Real per-seller capacities, aligned with `capacities_q`.
    pub fn real_capacities(&self) -> &[(f64, f64)] {
        &self.real_capacities
    }
}

// Tolerances keep exactly-on-grid quantities exact under float noise while
// still rounding in the safe direction for anything meaningfully off grid.
fn quanta_ceil(amount: f64, quantum: f64) -> f64 {
    (amount / quantum - 1e-9).ceil().max(1.0)
}

fn quanta_floor(amount: f64, quantum: f64) -> f64 {
    (amount / quantum + 1e-9).floor().max(0.0)
}

/// Discretize an instance: seller capacities round down to whole quanta,
/// package demands round up, so any quantized-feasible solution is feasible
/// against the real capacities.
pub fn quantize_resources(
    pairs: &[CandidatePair],
    sellers: &[SellerState],
    quantum: (f64, f64),
) -> Result<QuantizedInstance> {
    if quantum.0 <= 0.0 || quantum.1 <= 0.0 || !quantum.0.is_finite() || !quantum.1.is_finite() {
        return Err(Error::config("resource quantum components must be > 0"));
    }

    let mut capacities_q = Vec::with_capacity(sellers.len());
    let mut real_capacities = Vec::with_capacity(sellers.len());
    for s in sellers {
        let bq = quanta_floor(s.bandwidth_mhz, quantum.0);
        let fq = quanta_floor(s.compute_gcps, quantum.1);
        if bq > u32::MAX as f64 || fq > u32::MAX as f64 {
            return Err(Error::config("resource quantum too fine for the configured capacities"));
        }
        capacities_q.push((bq as u32, fq as u32));
        real_capacities.push((s.bandwidth_mhz, s.compute_gcps));
    }

    let seller_index = |seller_id: usize| -> Result<usize> {
        sellers
            .iter()
            .position(|s| s.seller_id == seller_id)
            .ok_or_else(|| Error::domain(format!("candidate pair references unknown seller {seller_id}")))
    };

    let mut buyers: Vec<BuyerOptions> = Vec::new();
    let mut dropped = 0usize;
    let mut current_buyer: Option<usize> = None;
    for pair in pairs {
        debug_assert!(pair.evaluation.margin > 0.0, "candidate pairs must have positive margin");
        let seller_idx = seller_index(pair.seller_id)?;
        let db = quanta_ceil(pair.evaluation.package.bandwidth_mhz, quantum.0);
        let df = quanta_ceil(pair.evaluation.package.compute_gcps, quantum.1);
        if db > u32::MAX as f64 || df > u32::MAX as f64 {
            return Err(Error::config("resource quantum too fine for the requested demands"));
        }
        let demand_q = (db as u32, df as u32);
        let cap = capacities_q[seller_idx];
        if demand_q.0 > cap.0 || demand_q.1 > cap.1 {
            dropped += 1;
            continue;
        }
        if current_buyer != Some(pair.buyer_id) {
            buyers.push(BuyerOptions { options: Vec::new() });
            current_buyer = Some(pair.buyer_id);
        }
        buyers.last_mut().unwrap().options.push(PairOption {
            pair: pair.clone(),
            seller_idx,
            demand_q,
            margin: pair.evaluation.margin,
        });
    }

    Ok(QuantizedInstance { buyers, capacities_q, real_capacities, dropped })
}

// ---------------------------------------------------------------------------
// Dynamic-programming clearing
// ---------------------------------------------------------------------------

/// Multiply-rotate hasher for the DP memo; deterministic and fast on the
/// packed residual keys.
#[derive(Default)]
struct MemoHasher {
    hash: u64,
}

impl Hasher for MemoHasher {
    fn finish(&self) -> u64 {
        self.hash
    }

    fn write(&mut self, bytes: &[u8]) {
        for chunk in bytes.chunks(8) {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            self.write_u64(u64::from_le_bytes(buf));
        }
    }

    fn write_u64(&mut self, n: u64) {
        self.hash = (self.hash.rotate_left(5) ^ n).wrapping_mul(0x517c_c1b7_2722_0a95);
    }

    fn write_u128(&mut self, n: u128) {
        self.write_u64(n as u64);
        self.write_u64((n >> 64) as u64);
    }

    fn write_usize(&mut self, n: usize) {
        self.write_u64(n as u64);
    }
}

type MemoMap<K> = HashMap<K, MemoEntry, BuildHasherDefault<MemoHasher>>;

#[derive(Clone, Copy)]
struct MemoEntry {
    value: f64,
    /// 0 = skip this buyer; k > 0 = accept option k-1.
    decision: u16,
}

/// Solver statistics, exposed for complexity measurements.
#[derive(Debug, Clone, Copy, Default)]
pub struct DpStats {
    /// Distinct memoized states.
    pub states: usize,
}

/// The instance as the solver sees it: flattened capacities and per-buyer
/// options, after exact slack-dimension elimination. For each seller, when
/// one resource dimension provably can never bind (the largest possible
/// demand sum over any subset the other dimension admits already fits), that
/// component is zeroed out of capacities and demands, shrinking the state
/// space without changing any value or decision.
struct SolveShape {
    /// Flattened `[b0, f0, b1, f1, ...]` capacities with slack components 0.
    caps: Vec<u32>,
    /// Per buyer level, options aligned index-for-index with the instance's.
    buyers: Vec<Vec<ShapeOption>>,
}

#[derive(Clone, Copy)]
struct ShapeOption {
    seller_idx: usize,
    demand: (u32, u32),
    margin: f64,
}

impl SolveShape {
    fn build(instance: &QuantizedInstance) -> SolveShape {
        let num_sellers = instance.capacities_q.len();
        // Max cardinality a demand list admits under a capacity: greedy over
        // ascending demands.
        let max_cardinality = |mut demands: Vec<u32>, cap: u32| -> usize {
            demands.sort_unstable();
            let mut total = 0u64;
            let mut count = 0usize;
            for d in demands {
                total += d as u64;
                if total > cap as u64 {
                    break;
                }
                count += 1;
            }
            count
        };
        // Largest possible sum over any subset of at most `k` demands.
        let worst_sum = |mut demands: Vec<u32>, k: usize| -> u64 {
            demands.sort_unstable_by(|a, b| b.cmp(a));
            demands.iter().take(k).map(|&d| d as u64).sum()
        };

        let mut drop_f = vec![false; num_sellers];
        let mut drop_b = vec![false; num_sellers];
        for seller_idx in 0..num_sellers {
            let (cap_b, cap_f) = instance.capacities_q[seller_idx];
            let demands: Vec<(u32, u32)> = instance
                .buyers
                .iter()
                .flat_map(|b| b.options.iter())
                .filter(|o| o.seller_idx == seller_idx)
                .map(|o| o.demand_q)
                .collect();
            let k_b = max_cardinality(demands.iter().map(|d| d.0).collect(), cap_b);
            if worst_sum(demands.iter().map(|d| d.1).collect(), k_b) <= cap_f as u64 {
                drop_f[seller_idx] = true;
                continue;
            }
            let k_f = max_cardinality(demands.iter().map(|d| d.1).collect(), cap_f);
            if worst_sum(demands.iter().map(|d| d.0).collect(), k_f) <= cap_b as u64 {
                drop_b[seller_idx] = true;
            }
        }

        let mut caps = flatten_capacities(&instance.capacities_q);
        for seller_idx in 0..num_sellers {
            if drop_b[seller_idx] {
                caps[2 * seller_idx] = 0;
            }
            if drop_f[seller_idx] {
                caps[2 * seller_idx + 1] = 0;
            }
        }
        let buyers = instance
            .buyers
            .iter()
            .map(|b| {
                b.options
                    .iter()
                    .map(|o| ShapeOption {
                        seller_idx: o.seller_idx,
                        demand: (
                            if drop_b[o.seller_idx] { 0 } else { o.demand_q.0 },
                            if drop_f[o.seller_idx] { 0 } else { o.demand_q.1 },
                        ),
                        margin: o.margin,
                    })
                    .collect()
            })
            .collect();
        SolveShape { caps, buyers }
    }
}

/// Per-level, per-component sorted subset sums of the demands still ahead of
/// the scan, capped at capacity. A residual component influences the future
/// only through which of these sums it covers, so clamping it down to the
/// largest covered sum is an exact state-space reduction: equivalent
/// residuals collapse onto one memo key.
struct ReachableSums {
    /// `table[level][component * stride + residual]` = largest reachable sum
    /// of still-pending demands on that component that is <= residual.
    table: Vec<Vec<u32>>,
    stride: usize,
}

impl ReachableSums {
    fn build(shape: &SolveShape) -> ReachableSums {
        let components = shape.caps.len();
        let caps = &shape.caps;
        let levels = shape.buyers.len();
        let stride = caps.iter().map(|&c| c as usize).max().unwrap_or(0) + 1;

        // Sorted subset-sum lists per level, built back to front.
        let mut sums: Vec<Vec<Vec<u32>>> = Vec::with_capacity(levels + 1);
        sums.push(vec![vec![0]; components]);
        for level in (0..levels).rev() {
            let prev = &sums[sums.len() - 1];
            let mut next = prev.clone();
            for opt in &shape.buyers[level] {
                for (comp, demand) in [
                    (2 * opt.seller_idx, opt.demand.0),
                    (2 * opt.seller_idx + 1, opt.demand.1),
                ] {
                    if demand == 0 {
                        continue;
                    }
                    let base = &next[comp];
                    let mut merged = Vec::with_capacity(base.len() * 2);
                    let shifted = base.iter().filter_map(|&s| {
                        let v = s.saturating_add(demand);
                        (v <= caps[comp]).then_some(v)
                    });
                    let mut a = base.iter().copied().peekable();
                    let mut b = shifted.peekable();
                    while let (Some(&x), Some(&y)) = (a.peek(), b.peek()) {
                        let v = if x <= y { a.next().unwrap() } else { b.next().unwrap() };
                        if merged.last() != Some(&v) {
                            merged.push(v);
                        }
                    }
                    for v in a.chain(b) {
                        if merged.last() != Some(&v) {
                            merged.push(v);
                        }
                    }
                    next[comp] = merged;
                }
            }
            sums.push(next);
        }
        sums.reverse();

        // Flatten into O(1) lookup tables.
        let table = sums
            .iter()
            .map(|level_sums| {
                let mut row = vec![0u32; components * stride];
                for (comp, list) in level_sums.iter().enumerate() {
                    let base = comp * stride;
                    let mut idx = 0usize;
                    let mut current = 0u32;
                    for r in 0..stride as u32 {
                        while idx < list.len() && list[idx] <= r {
                            current = list[idx];
                            idx += 1;
                        }
                        row[base + r as usize] = current;
                    }
                }
                row
            })
            .collect();
        ReachableSums { table, stride }
    }

    #[inline]
    fn clamp_all(&self, level: usize, residual: &[u32], out: &mut [u32]) {
        let row = &self.table[level];
        for (comp, &r) in residual.iter().enumerate() {
            out[comp] = row[comp * self.stride + r as usize];
        }
    }
}

/// Per-level saturation data: each remaining buyer's first maximum-margin
/// option, the componentwise load of taking them all, and their margin sum.
/// When that joint load fits a state's residual, the value from the state is
/// exactly the margin sum (the capacity-free upper bound, achieved), and the
/// plain DP's own tie-breaks would pick exactly these options; the whole
/// subtree collapses into one memo entry.
struct SaturationPlan {
    /// Option index of the first max-margin option per level.
    best_option: Vec<u16>,
    /// `load[level][component]`: joint demand of levels >= level.
    load: Vec<Vec<u64>>,
    /// Margin sum of levels >= level, summed in level order.
    value: Vec<f64>,
}

impl SaturationPlan {
    fn build(shape: &SolveShape) -> SaturationPlan {
        let components = shape.caps.len();
        let levels = shape.buyers.len();
        let mut best_option = vec![0u16; levels];
        let mut load = vec![vec![0u64; components]; levels + 1];
        let mut value = vec![0.0f64; levels + 1];
        for level in (0..levels).rev() {
            let options = &shape.buyers[level];
            let mut best = 0usize;
            for (k, opt) in options.iter().enumerate() {
                if opt.margin > options[best].margin {
                    best = k;
                }
            }
            best_option[level] = best as u16;
            let opt = &options[best];
            let mut row = load[level + 1].clone();
            row[2 * opt.seller_idx] += opt.demand.0 as u64;
            row[2 * opt.seller_idx + 1] += opt.demand.1 as u64;
            load[level] = row;
            value[level] = opt.margin + value[level + 1];
        }
        SaturationPlan { best_option, load, value }
    }

    fn fits(&self, level: usize, residual: &[u32]) -> bool {
        self.load[level].iter().zip(residual).all(|(&need, &have)| need <= have as u64)
    }
}

/// Memo decision marking a saturated state: take the max-margin option here
/// and at every level below.
const DECISION_SATURATED: u16 = u16::MAX;

struct DpSolver<'a, K, F> {
    instance: &'a QuantizedInstance,
    shape: &'a SolveShape,
    reachable: &'a ReachableSums,
    saturation: &'a SaturationPlan,
    memo: Vec<MemoMap<K>>,
    pack: F,
    state_cap: usize,
    states: usize,
    clamp_buf: Vec<u32>,
}

impl<'a, K, F> DpSolver<'a, K, F>
where
    K: std::hash::Hash + Eq,
    F: Fn(&[u32]) -> K,
{
    fn key_for(&mut self, level: usize, residual: &[u32]) -> K {
        self.reachable.clamp_all(level, residual, &mut self.clamp_buf);
        (self.pack)(&self.clamp_buf)
    }

    fn solve(&mut self, level: usize, residual: &mut [u32]) -> Result<f64> {
        if level == self.shape.buyers.len() {
            return Ok(0.0);
        }
        let key = self.key_for(level, residual);
        if let Some(entry) = self.memo[level].get(&key) {
            return Ok(entry.value);
        }

        if self.saturation.fits(level, residual) {
            let value = self.saturation.value[level];
            self.bump_states()?;
            self.memo[level].insert(key, MemoEntry { value, decision: DECISION_SATURATED });
            return Ok(value);
        }

        // Initializing with the skip branch and replacing only on strictly
        // greater value ties toward skip, then toward the lowest seller.
        let mut best = self.solve(level + 1, residual)?;
        let mut decision = 0u16;
        for k in 0..self.shape.buyers[level].len() {
            let opt = self.shape.buyers[level][k];
            let (bi, fi) = (2 * opt.seller_idx, 2 * opt.seller_idx + 1);
            if opt.demand.0 <= residual[bi] && opt.demand.1 <= residual[fi] {
                residual[bi] -= opt.demand.0;
                residual[fi] -= opt.demand.1;
                let value = opt.margin + self.solve(level + 1, residual)?;
                residual[bi] += opt.demand.0;
                residual[fi] += opt.demand.1;
                if value > best {
                    best = value;
                    decision = (k + 1) as u16;
                }
            }
        }

        self.bump_states()?;
        self.memo[level].insert(key, MemoEntry { value: best, decision });
        Ok(best)
    }

    fn bump_states(&mut self) -> Result<()> {
        self.states += 1;
        if self.states > self.state_cap {
            return Err(Error::InstanceTooLarge { states: self.states, cap: self.state_cap });
        }
        Ok(())
    }

    fn reconstruct(&mut self) -> Vec<(CandidatePair, usize)> {
        let mut residual = self.shape.caps.clone();
        let mut accepted = Vec::new();
        let mut level = 0;
        while level < self.shape.buyers.len() {
            let key = self.key_for(level, &residual);
            let entry = *self.memo[level].get(&key).expect("solved state missing from memo");
            if entry.decision == DECISION_SATURATED {
                for tail in level..self.shape.buyers.len() {
                    let k = self.saturation.best_option[tail] as usize;
                    let opt = &self.instance.buyers[tail].options[k];
                    accepted.push((opt.pair.clone(), opt.seller_idx));
                }
                break;
            }
            if entry.decision > 0 {
                let k = (entry.decision - 1) as usize;
                let opt = &self.instance.buyers[level].options[k];
                accepted.push((opt.pair.clone(), opt.seller_idx));
                let shape_opt = self.shape.buyers[level][k];
                residual[2 * opt.seller_idx] -= shape_opt.demand.0;
                residual[2 * opt.seller_idx + 1] -= shape_opt.demand.1;
            }
            level += 1;
        }
        accepted
    }
}

fn flatten_capacities(caps: &[(u32, u32)]) -> Vec<u32> {
    let mut v = Vec::with_capacity(caps.len() * 2);
    for &(b, f) in caps {
        v.push(b);
        v.push(f);
    }
    v
}

/// Maximize total margin over the quantized feasible set. The scan processes
/// buyers in ascending id; value-equal states tie-break toward skipping the
/// buyer, then toward the lowest seller id. Exceeding `state_cap` memoized
/// states aborts with [`Error::InstanceTooLarge`].
pub fn dp_clear(instance: &QuantizedInstance, state_cap: usize) -> Result<ClearingOutcome> {
    dp_clear_with_stats(instance, state_cap).map(|(outcome, _)| outcome)
}

/// [`dp_clear`] plus solver statistics.
pub fn dp_clear_with_stats(
    instance: &QuantizedInstance,
    state_cap: usize,
) -> Result<(ClearingOutcome, DpStats)> {
    let components = instance.capacities_q.len() * 2;
    let shape = SolveShape::build(instance);
    let mut residual = shape.caps.clone();
    let reachable = ReachableSums::build(&shape);
    let saturation = SaturationPlan::build(&shape);

    // Pack the residual vector into a u128 when the capacity bit widths fit;
    // wider instances fall back to boxed-slice keys.
    let mut total_bits = 0u32;
    let mut widths = Vec::with_capacity(components);
    for &cap in &shape.caps {
        let bits = (32 - cap.leading_zeros()).max(1);
        widths.push(bits);
        total_bits += bits;
    }

    let accepted = if total_bits <= 128 {
        let pack = move |residual: &[u32]| -> u128 {
            let mut key: u128 = 0;
            for (i, &r) in residual.iter().enumerate() {
                key = (key << widths[i]) | r as u128;
            }
            key
        };
        let mut solver = DpSolver {
            instance,
            shape: &shape,
            reachable: &reachable,
            saturation: &saturation,
            memo: (0..instance.buyers.len()).map(|_| MemoMap::default()).collect(),
            pack,
            state_cap,
            states: 0,
            clamp_buf: vec![0; components],
        };
        solver.solve(0, &mut residual)?;
        let accepted = solver.reconstruct();
        (accepted, solver.states)
    } else {
        let pack = |residual: &[u32]| -> Box<[u32]> { residual.to_vec().into_boxed_slice() };
        let mut solver = DpSolver {
            instance,
            shape: &shape,
            reachable: &reachable,
            saturation: &saturation,
            memo: (0..instance.buyers.len()).map(|_| MemoMap::default()).collect(),
            pack,
            state_cap,
            states: 0,
            clamp_buf: vec![0; components],
        };
        solver.solve(0, &mut residual)?;
        let accepted = solver.reconstruct();
        (accepted, solver.states)
    };

    let (accepted, states) = accepted;
    let mut residual = instance.real_capacities.clone();
    for (pair, seller_idx) in &accepted {
        residual[*seller_idx].0 -= pair.evaluation.package.bandwidth_mhz;
        residual[*seller_idx].1 -= pair.evaluation.package.compute_gcps;
    }
    let accepted: Vec<CandidatePair> = accepted.into_iter().map(|(pair, _)| pair).collect();
    let welfare: f64 = accepted.iter().map(|p| p.evaluation.margin).sum();
    Ok((ClearingOutcome { accepted, welfare, residual }, DpStats { states }))
}

// ---------------------------------------------------------------------------
// Brute-force oracle
// ---------------------------------------------------------------------------

const BRUTE_FORCE_PAIR_GUARD: usize = 20;

/// Enumerate every buyer-to-(seller-or-none) assignment, filter by exact
/// real-valued capacities, and return the maximum-welfare outcome with the
/// same tie-break as [`dp_clear`] (skip first, then lowest seller id).
/// Refuses instances with more than 20 pairs.
pub fn brute_force_clear(pairs: &[CandidatePair], sellers: &[SellerState]) -> Result<ClearingOutcome> {
    if pairs.len() > BRUTE_FORCE_PAIR_GUARD {
        return Err(Error::OracleGuard(format!(
            "brute-force clearing is limited to {BRUTE_FORCE_PAIR_GUARD} pairs, got {}",
            pairs.len()
        )));
    }

    // Group by buyer in ascending order; options ascending by seller.
    let mut sorted = pairs.to_vec();
    sorted.sort_by_key(|p| (p.buyer_id, p.seller_id));
    let mut groups: Vec<Vec<&CandidatePair>> = Vec::new();
    let mut current: Option<usize> = None;
    for pair in &sorted {
        if current != Some(pair.buyer_id) {
            groups.push(Vec::new());
            current = Some(pair.buyer_id);
        }
        groups.last_mut().unwrap().push(pair);
    }

    let seller_idx: HashMap<usize, usize> =
        sellers.iter().enumerate().map(|(i, s)| (s.seller_id, i)).collect();

    struct Search<'a> {
        groups: &'a [Vec<&'a CandidatePair>],
        seller_idx: &'a HashMap<usize, usize>,
        best_welfare: f64,
        best: Vec<CandidatePair>,
        chosen: Vec<CandidatePair>,
    }

    impl Search<'_> {
        fn run(&mut self, level: usize, residual: &mut [(f64, f64)]) {
            if level == self.groups.len() {
                // Sum in buyer order; replace only on strictly greater welfare
                // so the first optimum in preference order is retained.
                let welfare: f64 = self.chosen.iter().map(|p| p.evaluation.margin).sum();
                if welfare > self.best_welfare {
                    self.best_welfare = welfare;
                    self.best = self.chosen.clone();
                }
                return;
            }
            self.run(level + 1, residual);
            for pair in &self.groups[level] {
                let idx = self.seller_idx[&pair.seller_id];
                let (db, df) =
                    (pair.evaluation.package.bandwidth_mhz, pair.evaluation.package.compute_gcps);
                if db <= residual[idx].0 && df <= residual[idx].1 {
                    residual[idx].0 -= db;
                    residual[idx].1 -= df;
                    self.chosen.push((*pair).clone());
                    self.run(level + 1, residual);
                    self.chosen.pop();
                    residual[idx].0 += db;
                    residual[idx].1 += df;
                }
            }
        }
    }

    let mut residual: Vec<(f64, f64)> =
        sellers.iter().map(|s| (s.bandwidth_mhz, s.compute_gcps)).collect();
    let mut search = Search {
        groups: &groups,
        seller_idx: &seller_idx,
        best_welfare: 0.0,
        best: Vec::new(),
        chosen: Vec::new(),
    };
    search.run(0, &mut residual);

    let mut residual: Vec<(f64, f64)> =
        sellers.iter().map(|s| (s.bandwidth_mhz, s.compute_gcps)).collect();
    for pair in &search.best {
        let idx = seller_idx[&pair.seller_id];
        residual[idx].0 -= pair.evaluation.package.bandwidth_mhz;
        residual[idx].1 -= pair.evaluation.package.compute_gcps;
    }
    Ok(ClearingOutcome { accepted: search.best, welfare: search.best_welfare, residual })
}

// ---------------------------------------------------------------------------
// Random on-grid instance generation for differential testing
// ---------------------------------------------------------------------------

/// Generate a random clearing instance whose demands and capacities sit
/// exactly on the unit quantization grid and whose margins are dyadic, so the
/// DP and the brute-force oracle must agree bit for bit.
pub fn random_grid_instance<R: Rng>(
    rng: &mut R,
    max_buyers: usize,
    max_sellers: usize,
) -> (Vec<CandidatePair>, Vec<SellerState>) {
    let num_buyers = rng.gen_range(1..=max_buyers);
    let num_sellers = rng.gen_range(1..=max_sellers);

    let sellers: Vec<SellerState> = (0..num_sellers)
        .map(|seller_id| SellerState {
            seller_id,
            bandwidth_mhz: rng.gen_range(4..=10) as f64,
            compute_gcps: rng.gen_range(4..=10) as f64,
            posture: 0.7,
            verification_levels: vec![0.3, 0.6, 0.9],
            base_ask: 1.0,
            unit_bandwidth_cost: 0.1,
            unit_compute_cost: 0.1,
        })
        .collect();

    let mut evals = Vec::new();
    for buyer_id in 0..num_buyers {
        for seller in &sellers {
            // Leave some pairs out to vary the instance shape.
            if rng.gen_bool(0.2) {
                continue;
            }
            let margin = rng.gen_range(1..=160) as f64 / 8.0;
            let demand_b = rng.gen_range(1..=6) as f64;
            let demand_f = rng.gen_range(1..=6) as f64;
            let evaluation = PackageEvaluation {
                package: crate::market::Package {
                    bandwidth_mhz: demand_b,
                    compute_gcps: demand_f,
                    verification: 0.6,
                },
                rate_mbps: 10.0,
                delay_s: 0.5,
                compliance_score: 0.65,
                privacy_risk: 0.1,
                zt_cost: 0.4,
                effective_valuation: margin + 5.0,
                effective_ask: 5.0,
                margin,
                feasible: true,
            };
            evals.push((buyer_id, seller.seller_id, evaluation));
        }
    }
    (build_candidate_set(evals), sellers)
}
