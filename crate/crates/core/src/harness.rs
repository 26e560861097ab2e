//! Episode runner and experiment-plan machinery.
//!
//! An episode runs the round loop sequentially (posture feedback couples
//! rounds); a plan sweeps mechanism x buyer-pool-size cells over seeded Monte
//! Carlo episodes, possibly in parallel, and merges results through a single
//! deterministic writer. Episode seeds hash only the (pool size, episode)
//! cell key, so every mechanism replays the same market realizations and
//! cross-mechanism comparisons are paired.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{sample_round, EpisodeProfile, RoundInputs, ScenarioConfig};
use crate::mechanism::{run_round, MechanismSpec, RoundResult};
use crate::metrics::{
    aggregate_episodes, compute_round_metrics, summarize_episode, EpisodeCell, EpisodeMetrics,
    RoundMetrics, SummaryRow,
};
use crate::posture::{PostureLedger, PostureRecord};
use crate::seed::episode_seed;

/// Whether the plan writes the per-trade audit log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AuditMode {
    #[default]
    Full,
    None,
}

/// A resolved experiment plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunPlan {
    pub scenario: ScenarioConfig,
    pub mechanisms: Vec<String>,
    pub buyer_pool_sizes: Vec<usize>,
    pub episodes_per_cell: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    pub audit: AuditMode,
}

impl Default for RunPlan {
    fn default() -> Self {
        RunPlan {
            scenario: ScenarioConfig::default(),
            mechanisms: MechanismSpec::names().iter().map(|s| s.to_string()).collect(),
            buyer_pool_sizes: vec![10, 15, 20, 25, 30],
            episodes_per_cell: 50,
            base_seed: 20240801,
            output_dir: PathBuf::from("results"),
            audit: AuditMode::Full,
        }
    }
}

/// Plan-file shape: plan fields plus either an inline `[scenario]` table or a
/// `scenario_file` path (resolved relative to the plan file). An omitted
/// `base_seed` falls back to the scenario's `rng_seed`.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PlanFile {
    mechanisms: Vec<String>,
    buyer_pool_sizes: Vec<usize>,
    episodes_per_cell: usize,
    base_seed: Option<u64>,
    output_dir: PathBuf,
    audit: AuditMode,
    scenario_file: Option<PathBuf>,
    scenario: Option<ScenarioConfig>,
}

impl Default for PlanFile {
    fn default() -> Self {
        let plan = RunPlan::default();
        PlanFile {
            mechanisms: plan.mechanisms,
            buyer_pool_sizes: plan.buyer_pool_sizes,
            episodes_per_cell: plan.episodes_per_cell,
            base_seed: None,
            output_dir: plan.output_dir,
            audit: plan.audit,
            scenario_file: None,
            scenario: None,
        }
    }
}

impl RunPlan {
    pub fn load(path: &Path) -> Result<RunPlan> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: PlanFile = toml::from_str(&text)
            .map_err(|e| Error::Parse { path: path.into(), message: e.to_string() })?;
        let scenario = match (file.scenario, &file.scenario_file) {
            (Some(_), Some(_)) => {
                return Err(Error::config("set either `scenario` or `scenario_file`, not both"))
            }
            (Some(inline), None) => inline,
            (None, Some(rel)) => {
                let resolved = if rel.is_relative() {
                    path.parent().unwrap_or(Path::new(".")).join(rel)
                } else {
                    rel.clone()
                };
                ScenarioConfig::load(&resolved)?
            }
            (None, None) => ScenarioConfig::default(),
        };
        let base_seed = file.base_seed.unwrap_or(scenario.rng_seed);
        let plan = RunPlan {
            scenario,
            mechanisms: file.mechanisms,
            buyer_pool_sizes: file.buyer_pool_sizes,
            episodes_per_cell: file.episodes_per_cell,
            base_seed,
            output_dir: file.output_dir,
            audit: file.audit,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Validation runs before any episode: an unknown mechanism name rejects
    /// the whole plan.
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.episodes_per_cell == 0 {
            return Err(Error::config("episodes_per_cell must be >= 1"));
        }
        if self.mechanisms.is_empty() {
            return Err(Error::config("plan lists no mechanisms"));
        }
        for name in &self.mechanisms {
            MechanismSpec::by_name(name)?;
        }
        if self.buyer_pool_sizes.is_empty() || self.buyer_pool_sizes.contains(&0) {
            return Err(Error::config("buyer_pool_sizes must be non-empty and positive"));
        }
        Ok(())
    }
}

/// Everything one episode produced.
#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub initial_postures: Vec<f64>,
    pub rounds: Vec<RoundMetrics>,
    pub summary: EpisodeMetrics,
    /// Executed trades per round, in round order.
    pub trades: Vec<(usize, Vec<crate::mechanism::TradeRecord>)>,
    pub postures: Vec<PostureRecord>,
}

/// Run one seeded episode: T rounds of sample, clear, settle, and posture
/// feedback. Identical (mechanism, scenario, seed) triples reproduce the
/// result exactly.
pub fn run_episode(
    mechanism: &MechanismSpec,
    scenario: &ScenarioConfig,
    seed: u64,
) -> Result<EpisodeResult> {
    run_episode_observed(mechanism, scenario, seed, |_, _| {})
}

/// [`run_episode`] with a per-round observer, called after each round with
/// the sampled inputs and the mechanism's result. Used for shadow
/// comparisons and diagnostics.
pub fn run_episode_observed(
    mechanism: &MechanismSpec,
    scenario: &ScenarioConfig,
    seed: u64,
    mut observer: impl FnMut(&RoundInputs, &RoundResult),
) -> Result<EpisodeResult> {
    scenario.validate()?;
    let mut market_rng = ChaCha8Rng::seed_from_u64(seed);
    let profile = EpisodeProfile::generate(scenario, &mut market_rng)?;
    let initial_postures = profile.initial_postures.clone();
    let mut ledger = PostureLedger::new(initial_postures.clone());

    let mut rounds = Vec::with_capacity(scenario.horizon);
    let mut trades = Vec::with_capacity(scenario.horizon);
    for round in 0..scenario.horizon {
        let inputs = sample_round(scenario, &profile, ledger.postures(), &mut market_rng, round)?;
        let result = run_round(mechanism, &inputs, scenario, seed)?;
        ledger.apply_round(
            round,
            &result.avg_refunds,
            scenario.mechanism.posture_step,
            mechanism.posture_dynamic,
        );
        rounds.push(compute_round_metrics(&result.trades, inputs.buyers.len()));
        observer(&inputs, &result);
        trades.push((round, result.trades));
    }

    let summary = summarize_episode(&rounds);
    Ok(EpisodeResult {
        initial_postures,
        rounds,
        summary,
        trades,
        postures: ledger.history().to_vec(),
    })
}

/// One line of the per-trade audit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub mechanism: String,
    pub buyer_pool_size: usize,
    pub episode: usize,
    pub round: usize,
    pub buyer_id: usize,
    pub seller_id: usize,
    pub bandwidth_mhz: f64,
    pub compute_gcps: f64,
    pub verification: f64,
    pub effective_valuation: f64,
    pub effective_ask: f64,
    pub margin: f64,
    pub selection_margin: f64,
    pub price: f64,
    pub deposit: f64,
    pub auth_score: f64,
    pub policy_score: f64,
    pub sla_score: f64,
    pub refund_ratio: f64,
    pub refunded: f64,
    pub forfeited: f64,
    pub buyer_compensation: f64,
    pub platform_cut: f64,
    pub buyer_utility: f64,
    pub seller_utility: f64,
    pub planned_delay_s: f64,
    pub realized_delay_s: f64,
    pub privacy_penalty: f64,
}

impl AuditRow {
    pub fn from_trade(
        mechanism: &str,
        buyer_pool_size: usize,
        episode: usize,
        round: usize,
        trade: &crate::mechanism::TradeRecord,
    ) -> AuditRow {
        AuditRow {
            mechanism: mechanism.to_string(),
            buyer_pool_size,
            episode,
            round,
            buyer_id: trade.buyer_id,
            seller_id: trade.seller_id,
            bandwidth_mhz: trade.evaluation.package.bandwidth_mhz,
            compute_gcps: trade.evaluation.package.compute_gcps,
            verification: trade.evaluation.package.verification,
            effective_valuation: trade.evaluation.effective_valuation,
            effective_ask: trade.evaluation.effective_ask,
            margin: trade.evaluation.margin,
            selection_margin: trade.selection_margin,
            price: trade.settlement.price,
            deposit: trade.settlement.deposit,
            auth_score: trade.settlement.auth_score,
            policy_score: trade.settlement.policy_score,
            sla_score: trade.settlement.sla_score,
            refund_ratio: trade.settlement.refund_ratio,
            refunded: trade.settlement.refunded,
            forfeited: trade.settlement.forfeited,
            buyer_compensation: trade.settlement.buyer_compensation,
            platform_cut: trade.settlement.platform_cut,
            buyer_utility: trade.settlement.buyer_utility,
            seller_utility: trade.settlement.seller_utility,
            planned_delay_s: trade.evaluation.delay_s,
            realized_delay_s: trade.measurement.realized_delay_s,
            privacy_penalty: trade.privacy_penalty,
        }
    }
}

/// One line of the posture-trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostureRow {
    pub mechanism: String,
    pub buyer_pool_size: usize,
    pub episode: usize,
    pub round: usize,
    pub seller_id: usize,
    pub posture: f64,
    pub avg_refund: f64,
}

/// Paths and aggregates produced by [`run_plan`].
#[derive(Debug, Clone)]
pub struct PlanReport {
    pub summary: Vec<SummaryRow>,
    pub episodes_run: usize,
    pub summary_csv: PathBuf,
    pub summary_json: PathBuf,
    pub audit_csv: Option<PathBuf>,
    pub postures_csv: PathBuf,
    pub resolved_config: PathBuf,
}

#[derive(Serialize)]
struct ResolvedConfig<'a> {
    mechanisms: &'a [String],
    buyer_pool_sizes: &'a [usize],
    episodes_per_cell: usize,
    base_seed: u64,
    audit: AuditMode,
    scenario: &'a ScenarioConfig,
}

struct CellOutput {
    mechanism: String,
    pool: usize,
    metrics: EpisodeMetrics,
    audit: Vec<AuditRow>,
    postures: Vec<PostureRow>,
}

/// Run every (mechanism, pool size, episode) cell of the plan and write the
/// summary CSV/JSON, the per-trade audit log, the posture trajectories, and
/// an echo of the resolved configuration. Cells run in parallel; outputs are
/// merged in deterministic cell order, so reruns of the same plan produce
/// byte-identical files.
pub fn run_plan(plan: &RunPlan) -> Result<PlanReport> {
    plan.validate()?;
    let mechanisms: Vec<MechanismSpec> = plan
        .mechanisms
        .iter()
        .map(|name| MechanismSpec::by_name(name))
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    for spec in &mechanisms {
        for &pool in &plan.buyer_pool_sizes {
            for episode in 0..plan.episodes_per_cell {
                cells.push((spec.clone(), pool, episode));
            }
        }
    }

    let outputs: Vec<CellOutput> = cells
        .par_iter()
        .map(|(spec, pool, episode)| -> Result<CellOutput> {
            let scenario = ScenarioConfig { buyer_pool_size: *pool, ..plan.scenario.clone() };
            let seed = episode_seed(plan.base_seed, *pool, *episode);
            let result = run_episode(spec, &scenario, seed)?;

            let audit = match plan.audit {
                AuditMode::Full => result
                    .trades
                    .iter()
                    .flat_map(|(round, trades)| {
                        trades
                            .iter()
                            .map(|t| AuditRow::from_trade(&spec.name, *pool, *episode, *round, t))
                    })
                    .collect(),
                AuditMode::None => Vec::new(),
            };
            let postures = result
                .postures
                .iter()
                .map(|p| PostureRow {
                    mechanism: spec.name.clone(),
                    buyer_pool_size: *pool,
                    episode: *episode,
                    round: p.round,
                    seller_id: p.seller_id,
                    posture: p.posture,
                    avg_refund: p.avg_refund,
                })
                .collect();
            Ok(CellOutput {
                mechanism: spec.name.clone(),
                pool: *pool,
                metrics: result.summary,
                audit,
                postures,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let episode_cells: Vec<EpisodeCell> = outputs
        .iter()
        .map(|o| EpisodeCell {
            mechanism: o.mechanism.clone(),
            buyer_pool_size: o.pool,
            metrics: o.metrics,
        })
        .collect();
    let summary = aggregate_episodes(&episode_cells);

    std::fs::create_dir_all(&plan.output_dir).map_err(|e| Error::io(&plan.output_dir, e))?;
    let summary_csv = plan.output_dir.join("summary.csv");
    write_csv(&summary_csv, &summary)?;
    let summary_json = plan.output_dir.join("summary.json");
    let json_file = std::fs::File::create(&summary_json).map_err(|e| Error::io(&summary_json, e))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(json_file), &summary)
        .map_err(|e| Error::io(&summary_json, e.into()))?;

    let audit_csv = match plan.audit {
        AuditMode::Full => {
            let path = plan.output_dir.join("trades_audit.csv");
            let rows: Vec<&AuditRow> = outputs.iter().flat_map(|o| o.audit.iter()).collect();
            write_csv_refs(&path, &rows)?;
            Some(path)
        }
        AuditMode::None => None,
    };

    let postures_csv = plan.output_dir.join("postures.csv");
    let posture_rows: Vec<&PostureRow> = outputs.iter().flat_map(|o| o.postures.iter()).collect();
    write_csv_refs(&postures_csv, &posture_rows)?;

    let resolved_config = plan.output_dir.join("resolved_config.toml");
    let echo = ResolvedConfig {
        mechanisms: &plan.mechanisms,
        buyer_pool_sizes: &plan.buyer_pool_sizes,
        episodes_per_cell: plan.episodes_per_cell,
        base_seed: plan.base_seed,
        audit: plan.audit,
        scenario: &plan.scenario,
    };
    let echo_text = toml::to_string_pretty(&echo)
        .map_err(|e| Error::Parse { path: resolved_config.clone(), message: e.to_string() })?;
    std::fs::write(&resolved_config, echo_text).map_err(|e| Error::io(&resolved_config, e))?;

    Ok(PlanReport {
        summary,
        episodes_run: outputs.len(),
        summary_csv,
        summary_json,
        audit_csv,
        postures_csv,
        resolved_config,
    })
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(Error::Csv)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn write_csv_refs<T: Serialize>(path: &Path, rows: &[&T]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(Error::Csv)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Read an audit log back; used by the invariant checker CLI.
pub fn read_audit_csv(path: &Path) -> Result<Vec<AuditRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(Error::Csv)?;
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        rows.push(record?);
    }
    Ok(rows)
}
