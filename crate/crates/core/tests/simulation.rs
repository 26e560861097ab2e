//! Cross-module integration tests over full episodes.

use std::collections::BTreeMap;
use std::path::Path;

use zebris_core::harness::{run_episode, AuditRow, RunPlan};
use zebris_core::invariants;
use zebris_core::market::{ActivationConfig, ScenarioConfig};
use zebris_core::mechanism::MechanismSpec;

fn quick_scenario() -> ScenarioConfig {
    ScenarioConfig {
        buyer_pool_size: 10,
        num_sellers: 4,
        horizon: 40,
        activation: ActivationConfig::constant(0.5),
        ..ScenarioConfig::default()
    }
}

fn audit_rows(mechanism: &MechanismSpec, scenario: &ScenarioConfig, seed: u64) -> Vec<AuditRow> {
    let result = run_episode(mechanism, scenario, seed).unwrap();
    result
        .trades
        .iter()
        .flat_map(|(round, trades)| {
            trades
                .iter()
                .map(|t| AuditRow::from_trade(&mechanism.name, scenario.buyer_pool_size, 0, *round, t))
        })
        .collect()
}

#[test]
fn per_round_money_flows_balance() {
    let scenario = quick_scenario();
    let rows = audit_rows(&MechanismSpec::zebris(), &scenario, 11);
    assert!(!rows.is_empty());
    let mut by_round: BTreeMap<usize, Vec<&AuditRow>> = BTreeMap::new();
    for row in &rows {
        by_round.entry(row.round).or_default().push(row);
    }
    for (round, trades) in by_round {
        let payments: f64 = trades.iter().map(|t| t.price).sum();
        let receipts: f64 = trades.iter().map(|t| t.price - t.forfeited).sum();
        let compensation: f64 = trades.iter().map(|t| t.buyer_compensation).sum();
        let platform: f64 = trades.iter().map(|t| t.platform_cut).sum();
        assert!(
            (payments - (receipts + compensation + platform)).abs() < 1e-9,
            "round {round}: {payments} vs {}",
            receipts + compensation + platform
        );
        assert!(platform >= 0.0);
    }
}

#[test]
fn zebris_audit_passes_the_invariant_suite() {
    let scenario = quick_scenario();
    for seed in [1u64, 2, 3] {
        let rows = audit_rows(&MechanismSpec::zebris(), &scenario, seed);
        let violations = invariants::check_all(&rows, scenario.mechanism.deposit_cap_ratio, true);
        assert!(violations.is_empty(), "seed {seed}: {:?}", violations.first());
    }
}

#[test]
fn deposit_free_mechanisms_produce_zero_deposit_logs() {
    let scenario = quick_scenario();
    for spec in [MechanismSpec::zt_only(), MechanismSpec::p_aware(), MechanismSpec::ask_first()] {
        let rows = audit_rows(&spec, &scenario, 5);
        assert!(!rows.is_empty(), "{}", spec.name);
        for row in &rows {
            assert_eq!(row.deposit, 0.0, "{}", spec.name);
            assert_eq!(row.platform_cut, 0.0, "{}", spec.name);
            assert_eq!(row.buyer_compensation, 0.0, "{}", spec.name);
        }
    }
}

#[test]
fn deposits_raise_measured_compliance() {
    // The incentive loop end to end: with deposits escrowed, effort rises,
    // so measured refund ratios are higher on paired seeds.
    let scenario = quick_scenario();
    let mut with_deposit = 0.0;
    let mut without = 0.0;
    let mut n = 0usize;
    for seed in 0..6u64 {
        let z = run_episode(&MechanismSpec::zebris_static(), &scenario, seed).unwrap();
        let t = run_episode(&MechanismSpec::zt_only(), &scenario, seed).unwrap();
        let mean = |r: &zebris_core::harness::EpisodeResult| {
            r.summary.avg_compliance.expect("episodes trade under these settings")
        };
        with_deposit += mean(&z);
        without += mean(&t);
        n += 1;
    }
    with_deposit /= n as f64;
    without /= n as f64;
    assert!(
        with_deposit > without,
        "deposit-backed compliance {with_deposit} should exceed deposit-free {without}"
    );
}

#[test]
fn posture_feedback_lifts_low_sellers() {
    // Sellers starting from a weak posture should drift upward under the
    // full mechanism once they trade.
    let scenario = ScenarioConfig {
        seller_ranges: zebris_core::market::SellerRanges {
            initial_posture: zebris_core::market::Interval(0.5, 0.6),
            ..Default::default()
        },
        ..quick_scenario()
    };
    let result = run_episode(&MechanismSpec::zebris(), &scenario, 9).unwrap();
    let final_round = scenario.horizon - 1;
    let finals: Vec<f64> = result
        .postures
        .iter()
        .filter(|p| p.round == final_round)
        .map(|p| p.posture)
        .collect();
    assert_eq!(finals.len(), scenario.num_sellers);
    let mean_final = finals.iter().sum::<f64>() / finals.len() as f64;
    let mean_initial =
        result.initial_postures.iter().sum::<f64>() / result.initial_postures.len() as f64;
    assert!(
        mean_final > mean_initial + 0.05,
        "posture should rise from {mean_initial} but ended at {mean_final}"
    );
}

#[test]
fn scenario_file_with_activation_profile_runs() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("activation.csv");
    std::fs::write(&profile, "0.9\n0.1\n").unwrap();
    let scenario_path = dir.path().join("scenario.toml");
    std::fs::write(
        &scenario_path,
        r#"
num_sellers = 3
horizon = 20
buyer_pool_size = 6

[activation]
file = "activation.csv"
"#,
    )
    .unwrap();
    let scenario = ScenarioConfig::load(&scenario_path).unwrap();
    assert_eq!(
        scenario.activation.probabilities,
        Some(vec![0.9, 0.1]),
        "file contents should be inlined"
    );
    let result = run_episode(&MechanismSpec::zebris(), &scenario, 3).unwrap();
    assert_eq!(result.rounds.len(), 20);
}

#[test]
fn shipped_configs_parse_and_match_builtin_defaults() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let scenario = ScenarioConfig::load(&root.join("default_scenario.toml")).unwrap();
    assert_eq!(scenario, ScenarioConfig::default(), "default_scenario.toml drifted");

    let plan = RunPlan::load(&root.join("default_plan.toml")).unwrap();
    assert_eq!(plan.scenario, ScenarioConfig::default());
    assert_eq!(plan.episodes_per_cell, 50);
    assert_eq!(plan.buyer_pool_sizes, vec![10, 15, 20, 25, 30]);
    assert_eq!(plan.mechanisms.len(), 6);

    let probs = zebris_core::market::load_activation_profile(&root.join("activation_example.csv")).unwrap();
    assert_eq!(probs.len(), 10);
}

#[test]
fn mean_seller_utility_respects_the_deposit_cap_bound() {
    // Per-trade ex-post seller rationality lifted to the round mean: with
    // deposits on, mean seller utility stays above (1/2 - lambda) times the
    // mean accepted margin.
    let scenario = quick_scenario();
    let lambda = scenario.mechanism.deposit_cap_ratio;
    for seed in [4u64, 8, 15] {
        let result = run_episode(&MechanismSpec::zebris(), &scenario, seed).unwrap();
        for (round, trades) in &result.trades {
            if trades.is_empty() {
                continue;
            }
            let mean_su: f64 =
                trades.iter().map(|t| t.settlement.seller_utility).sum::<f64>() / trades.len() as f64;
            let mean_margin: f64 =
                trades.iter().map(|t| t.evaluation.margin).sum::<f64>() / trades.len() as f64;
            assert!(
                mean_su >= (0.5 - lambda) * mean_margin - 1e-9,
                "round {round}: mean SU {mean_su} below bound"
            );
        }
    }
}

#[test]
fn tiny_state_cap_aborts_the_episode_with_a_diagnostic() {
    let scenario = ScenarioConfig { state_cap: 3, ..quick_scenario() };
    let err = run_episode(&MechanismSpec::zebris(), &scenario, 1).unwrap_err();
    let message = err.to_string();
    assert!(message.contains("coarser"), "unexpected diagnostic: {message}");
}

#[test]
fn plan_base_seed_defaults_to_scenario_rng_seed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plan.toml");
    std::fs::write(
        &path,
        "mechanisms = [\"zebris\"]\nbuyer_pool_sizes = [5]\nepisodes_per_cell = 1\n\n[scenario]\nrng_seed = 777\n",
    )
    .unwrap();
    let plan = RunPlan::load(&path).unwrap();
    assert_eq!(plan.base_seed, 777);
}

#[test]
fn audit_round_trip_preserves_checks() {
    // Write an audit CSV through the plan runner and re-check it from disk.
    let dir = tempfile::tempdir().unwrap();
    let plan = RunPlan {
        scenario: quick_scenario(),
        mechanisms: vec!["zebris".into(), "resonly".into()],
        buyer_pool_sizes: vec![8],
        episodes_per_cell: 2,
        base_seed: 77,
        output_dir: dir.path().to_path_buf(),
        audit: zebris_core::harness::AuditMode::Full,
    };
    let report = zebris_core::harness::run_plan(&plan).unwrap();
    let audit = report.audit_csv.unwrap();
    let violations = invariants::check_file(&audit, 0.4, false).unwrap();
    assert!(violations.is_empty(), "{:?}", violations.first());
    // Midpoint checks do flag the raw-priced baseline when forced on.
    let all = invariants::check_file(&audit, 0.4, true).unwrap();
    assert!(all.iter().any(|v| v.mechanism == "resonly"));
}
