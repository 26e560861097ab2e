//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers (visible under `cargo test -- --nocapture`).
//!
//! Criteria 4-6 share one mechanism x pool-size sweep of 50 seeded episodes
//! per cell, computed once.

use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use zebris_core::clearing::{
    brute_force_clear, build_candidate_set, dp_clear, dp_clear_with_stats, quantize_resources,
    random_grid_instance, CandidatePair,
};
use zebris_core::eval::PackageEvaluation;
use zebris_core::harness::{run_episode, run_episode_observed, AuditRow};
use zebris_core::invariants::{check_budget, check_midpoint_split, check_seller_floor};
use zebris_core::market::{ActivationConfig, Package, ScenarioConfig, SellerState};
use zebris_core::mechanism::{ask_first_clear, MechanismSpec};
use zebris_core::metrics::{aggregate_episodes, EpisodeCell, SummaryRow};
use zebris_core::seed::episode_seed;

const EPISODES: usize = 50;
const POOL_SIZES: [usize; 5] = [10, 15, 20, 25, 30];
const BASE_SEED: u64 = 20240801;

// ---------------------------------------------------------------------------
// Criterion 1: settlement guarantees over 50 seeded episodes
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_settlement_guarantees() {
    let start = Instant::now();
    let scenario = ScenarioConfig::default();
    let spec = MechanismSpec::zebris();

    let mut trades_checked = 0usize;
    let mut posture_checks = 0usize;
    for episode in 0..EPISODES {
        let seed = episode_seed(BASE_SEED, scenario.buyer_pool_size, episode);
        let result = run_episode(&spec, &scenario, seed).unwrap();

        let rows: Vec<AuditRow> = result
            .trades
            .iter()
            .flat_map(|(round, trades)| {
                trades.iter().map(|t| AuditRow::from_trade("zebris", 20, episode, *round, t))
            })
            .collect();
        trades_checked += rows.len();

        let p1 = check_midpoint_split(&rows);
        assert!(p1.is_empty(), "episode {episode}: {}", p1[0]);
        let p2 = check_seller_floor(&rows, scenario.mechanism.deposit_cap_ratio);
        assert!(p2.is_empty(), "episode {episode}: {}", p2[0]);
        let b = check_budget(&rows);
        assert!(b.is_empty(), "episode {episode}: {}", b[0]);

        // Posture sign law: the update moves strictly toward the refund
        // reference whenever they differ measurably.
        let mut previous = result.initial_postures.clone();
        let mut by_round = result.postures.clone();
        by_round.sort_by_key(|p| (p.round, p.seller_id));
        for record in by_round {
            let before = previous[record.seller_id];
            let after = record.posture;
            if record.avg_refund - before > 1e-9 {
                assert!(after > before, "round {}: posture should rise", record.round);
            } else if before - record.avg_refund > 1e-9 {
                assert!(after < before, "round {}: posture should fall", record.round);
            } else {
                assert!((after - before).abs() < 1e-9);
            }
            posture_checks += 1;
            previous[record.seller_id] = after;
        }
    }

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "settlement suite took {elapsed:.1}s, budget is 120s");
    assert!(trades_checked > 1000, "suite only saw {trades_checked} trades");
    println!(
        "[criterion 1] PASS: zero violations over {EPISODES} episodes \
         ({trades_checked} trades, {posture_checks} posture updates) in {elapsed:.1}s"
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: DP equals brute force exactly on on-grid instances
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let instances = 500;
    for index in 0..instances {
        let (pairs, sellers) = random_grid_instance(&mut rng, 5, 3);
        let quantized = quantize_resources(&pairs, &sellers, (1.0, 1.0)).unwrap();
        let dp = dp_clear(&quantized, 10_000_000).unwrap();
        let brute = brute_force_clear(&pairs, &sellers).unwrap();
        assert_eq!(
            dp.welfare, brute.welfare,
            "instance {index}: dp {} vs brute {}",
            dp.welfare, brute.welfare
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "oracle run took {elapsed:.1}s, budget is 60s");
    println!("[criterion 2] PASS: {instances} on-grid instances agree exactly in {elapsed:.1}s");
}

// ---------------------------------------------------------------------------
// Criterion 3: DP dominates the ask-first greedy on identical instances
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_clearing_dominance() {
    let spec = MechanismSpec::zebris();
    let mut rounds = 0usize;
    let mut strict = 0usize;

    // Default-scenario episodes plus a congested variant where seller
    // capacity genuinely contends; dominance must hold on every round.
    let scenarios = [
        ScenarioConfig::default(),
        ScenarioConfig {
            buyer_pool_size: 30,
            activation: ActivationConfig::constant(0.5),
            horizon: 60,
            ..ScenarioConfig::default()
        },
    ];
    for (which, scenario) in scenarios.iter().enumerate() {
        for episode in 0..8u64 {
            let seed = episode_seed(BASE_SEED ^ 3, scenario.buyer_pool_size, episode as usize);
            run_episode_observed(&spec, scenario, seed, |_, result| {
                let greedy = ask_first_clear(&result.instance);
                assert!(
                    result.outcome.welfare >= greedy.welfare - 1e-9,
                    "scenario {which}: dp {} below greedy {}",
                    result.outcome.welfare,
                    greedy.welfare
                );
                rounds += 1;
                if result.outcome.welfare > greedy.welfare + 1e-9 {
                    strict += 1;
                }
            })
            .unwrap();
        }
    }
    assert!(strict >= 1, "no strictly dominated round among {rounds}");
    println!(
        "[criterion 3] PASS: dp >= greedy on all {rounds} rounds, strict on {strict} of them"
    );
}

// ---------------------------------------------------------------------------
// Criteria 4-6: trend reproduction over the shared sweep
// ---------------------------------------------------------------------------

struct Sweep {
    rows: Vec<SummaryRow>,
}

impl Sweep {
    fn get(&self, mechanism: &str, pool: usize, metric: &str) -> &SummaryRow {
        self.rows
            .iter()
            .find(|r| r.mechanism == mechanism && r.buyer_pool_size == pool && r.metric == metric)
            .unwrap_or_else(|| panic!("missing summary row {mechanism}/{pool}/{metric}"))
    }
}

fn sweep() -> &'static Sweep {
    static SWEEP: OnceLock<Sweep> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let scenario = ScenarioConfig::default();
        let mut cells = Vec::new();
        for spec in MechanismSpec::all() {
            for &pool in &POOL_SIZES {
                let cell_scenario = ScenarioConfig { buyer_pool_size: pool, ..scenario.clone() };
                for episode in 0..EPISODES {
                    let seed = episode_seed(BASE_SEED, pool, episode);
                    let result = run_episode(&spec, &cell_scenario, seed).unwrap();
                    cells.push(EpisodeCell {
                        mechanism: spec.name.clone(),
                        buyer_pool_size: pool,
                        metrics: result.summary,
                    });
                }
            }
        }
        Sweep { rows: aggregate_episodes(&cells) }
    })
}

const BASELINES: [&str; 5] = ["zebris-s", "ztonly", "paware", "askfirst", "resonly"];
const ALL_MECHANISMS: [&str; 6] = ["zebris", "zebris-s", "ztonly", "paware", "askfirst", "resonly"];

#[test]
fn criterion_4_welfare_trend() {
    let sweep = sweep();

    // Non-decreasing in pool size.
    let mut last = f64::MIN;
    for &pool in &POOL_SIZES {
        let sw = sweep.get("zebris", pool, "sw").mean;
        assert!(sw >= last, "zebris SW decreased at pool {pool}: {sw} < {last}");
        last = sw;
    }

    // Dominates every baseline at every size; the resource-only gap must
    // clear both confidence half-widths.
    for &pool in &POOL_SIZES {
        let zebris = sweep.get("zebris", pool, "sw");
        for baseline in BASELINES {
            let other = sweep.get(baseline, pool, "sw");
            assert!(
                zebris.mean > other.mean,
                "pool {pool}: zebris SW {} not above {baseline} {}",
                zebris.mean,
                other.mean
            );
        }
        let resonly = sweep.get("resonly", pool, "sw");
        let gap = zebris.mean - resonly.mean;
        let widths = zebris.ci95_half_width + resonly.ci95_half_width;
        assert!(
            gap > widths,
            "pool {pool}: zebris-resonly SW gap {gap:.3} within CI widths {widths:.3}"
        );
    }
    let lo = sweep.get("zebris", POOL_SIZES[0], "sw").mean;
    let hi = sweep.get("zebris", *POOL_SIZES.last().unwrap(), "sw").mean;
    println!(
        "[criterion 4] PASS: zebris SW rises {lo:.2} -> {hi:.2} across pools and tops every \
         baseline with CI-separated resonly gaps"
    );
}

#[test]
fn criterion_5_quality_trends() {
    let sweep = sweep();
    for &pool in &POOL_SIZES {
        for mech in ALL_MECHANISMS {
            if mech == "zebris" {
                continue;
            }
            let acs_z = sweep.get("zebris", pool, "acs").mean;
            let acs_m = sweep.get(mech, pool, "acs").mean;
            assert!(acs_z >= acs_m, "pool {pool}: ACS zebris {acs_z} below {mech} {acs_m}");

            let aed_z = sweep.get("zebris", pool, "aed").mean;
            let aed_m = sweep.get(mech, pool, "aed").mean;
            assert!(aed_z <= aed_m, "pool {pool}: AED zebris {aed_z} above {mech} {aed_m}");

            let aprc_z = sweep.get("zebris", pool, "aprc").mean;
            let aprc_m = sweep.get(mech, pool, "aprc").mean;
            assert!(aprc_z <= aprc_m, "pool {pool}: APRC zebris {aprc_z} above {mech} {aprc_m}");
        }
        for mech in ALL_MECHANISMS {
            if mech == "resonly" {
                continue;
            }
            let atr_r = sweep.get("resonly", pool, "atr").mean;
            let atr_m = sweep.get(mech, pool, "atr").mean;
            assert!(atr_r >= atr_m, "pool {pool}: ATR resonly {atr_r} below {mech} {atr_m}");
        }
    }
    println!(
        "[criterion 5] PASS: zebris has the best ACS/AED/APRC and resonly the highest ATR at \
         every pool size"
    );
}

#[test]
fn criterion_6_posture_ablation() {
    let sweep = sweep();
    for &pool in &POOL_SIZES {
        let z = sweep.get("zebris", pool, "acs").mean;
        let s = sweep.get("zebris-s", pool, "acs").mean;
        assert!(z >= s, "pool {pool}: ACS zebris {z} below zebris-s {s} on paired seeds");
    }
    let z20 = sweep.get("zebris", 20, "acs").mean;
    let s20 = sweep.get("zebris-s", 20, "acs").mean;
    println!(
        "[criterion 6] PASS: paired-seed mean ACS zebris >= zebris-s at every pool \
         (e.g. {z20:.4} vs {s20:.4} at pool 20)"
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: clearing time approximately linear in the number of buyers
// ---------------------------------------------------------------------------

/// Synthetic congested instance with a bounded resource-state space: every
/// buyer has an option on every seller, demands are uniform so the residual
/// lattice saturates within the first few scan levels, and total capacity is
/// far below demand so clearing stays contended at every size. Time then
/// isolates the per-buyer factor of the state-space complexity.
fn complexity_instance(num_buyers: usize, rng: &mut ChaCha8Rng) -> (Vec<CandidatePair>, Vec<SellerState>) {
    let sellers: Vec<SellerState> = (0..6)
        .map(|seller_id| SellerState {
            seller_id,
            bandwidth_mhz: 12.0,
            compute_gcps: 12.0,
            posture: 0.7,
            verification_levels: vec![0.3, 0.6, 0.9],
            base_ask: 1.0,
            unit_bandwidth_cost: 0.1,
            unit_compute_cost: 0.1,
        })
        .collect();
    let mut evals = Vec::new();
    for buyer in 0..num_buyers {
        for seller in 0..6usize {
            // Concentrating every buyer's best margin on seller 0 keeps the
            // clearing contended at each scan level, so the measurement sees
            // the full state-space factor rather than a collapsed tail.
            let margin = if seller == 0 {
                rng.gen_range(161..=320) as f64 / 8.0
            } else {
                rng.gen_range(1..=160) as f64 / 8.0
            };
            let evaluation = PackageEvaluation {
                package: Package { bandwidth_mhz: 7.0, compute_gcps: 7.0, verification: 0.6 },
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
            evals.push((buyer, seller, evaluation));
        }
    }
    (build_candidate_set(evals), sellers)
}

#[test]
fn criterion_7_complexity_scaling() {
    let sizes = [10usize, 16, 22, 31, 40];

    // Wall-clock noise is one-sided, so each point takes the minimum of
    // repeated runs, and the whole fit repeats with the median slope kept.
    let measure_slope = || -> (f64, Vec<(f64, f64)>) {
        let mut points = Vec::new();
        for &num_buyers in &sizes {
            let mut rng = ChaCha8Rng::seed_from_u64(700 + num_buyers as u64);
            let (pairs, sellers) = complexity_instance(num_buyers, &mut rng);
            let quantized = quantize_resources(&pairs, &sellers, (1.0, 1.0)).unwrap();
            dp_clear_with_stats(&quantized, 100_000_000).unwrap();
            let mut best = f64::INFINITY;
            for _ in 0..15 {
                let start = Instant::now();
                let (_, stats) = dp_clear_with_stats(&quantized, 100_000_000).unwrap();
                best = best.min(start.elapsed().as_secs_f64());
                assert!(stats.states > 0);
            }
            points.push((num_buyers as f64, best));
        }
        let logs: Vec<(f64, f64)> = points.iter().map(|&(n, t)| (n.ln(), t.ln())).collect();
        let n = logs.len() as f64;
        let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
        let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum::<f64>()
            / logs.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum::<f64>();
        (slope, points)
    };

    let mut samples: Vec<(f64, Vec<(f64, f64)>)> = (0..3).map(|_| measure_slope()).collect();
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (slope, points) = &samples[1];

    assert!(
        (slope - 1.0).abs() <= 0.3,
        "log-log slope {slope:.3} outside 1.0 +/- 0.3; points: {points:?}"
    );
    println!(
        "[criterion 7] PASS: dp_clear time scales with log-log slope {slope:.2} over |U| in \
         {sizes:?} at fixed |E|=6"
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: plan-level determinism
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_plan_determinism() {
    use zebris_core::harness::{run_plan, AuditMode, RunPlan};

    let dir = tempfile::tempdir().unwrap();
    let scenario = ScenarioConfig { horizon: 30, ..ScenarioConfig::default() };
    let mut plan = RunPlan {
        scenario,
        mechanisms: vec!["zebris".into(), "askfirst".into(), "resonly".into()],
        buyer_pool_sizes: vec![10, 20],
        episodes_per_cell: 3,
        base_seed: 4242,
        output_dir: dir.path().join("first"),
        audit: AuditMode::Full,
    };
    run_plan(&plan).unwrap();
    plan.output_dir = dir.path().join("second");
    run_plan(&plan).unwrap();

    let mut checked = 0usize;
    for file in ["summary.csv", "summary.json", "trades_audit.csv", "postures.csv"] {
        let a = std::fs::read(dir.path().join("first").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("second").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical plan runs");
        checked += a.len();
    }
    println!("[criterion 8] PASS: reruns byte-identical across {checked} bytes of outputs");
}

// ---------------------------------------------------------------------------
// Episode wall-clock regression gate at default scale
// ---------------------------------------------------------------------------

#[test]
fn episode_wall_clock_gate() {
    let scenario = ScenarioConfig { buyer_pool_size: 30, ..ScenarioConfig::default() };
    // Warm-up outside the measurement.
    run_episode(&MechanismSpec::zebris(), &scenario, 0).unwrap();
    let start = Instant::now();
    run_episode(&MechanismSpec::zebris(), &scenario, 1).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 5.0, "default-scale episode took {elapsed:.2}s, gate is 5s");
    println!("[perf gate] PASS: 180-round episode at pool 30 ran in {elapsed:.2}s");
}
