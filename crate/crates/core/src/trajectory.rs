//! Trajectory data flywheel: adversarial task generation, sandboxed
//! (simulated) execution with a retry circuit breaker, and the relabeling
//! law that turns observed outcomes into training labels.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::backends::{
    chat_complete, ChatEndpoint, ChatMessage, CostLedger, LedgerEntry, ModelBackend, Outcome,
    PricingTable, TierBinding,
};
use crate::coldstart::TrainingSample;
use crate::error::{Error, Result};
use crate::features::{extract_meta, AgentRole, Embedder, RiskLexicon, ROLE_WEIGHTS_EASY, ROLE_WEIGHTS_HARD};
use crate::router::{predict_strong_probability, route_decision, ModelTier, RouterConfig, RouterParams};
use crate::rng::substream;
use crate::task::{Domain, TaskStep};

/// Difficulty stratum chosen per generated task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskMode {
    Normal,
    Hard,
}

/// One generated workflow task. `latent_difficulty` is simulation-side
/// ground truth; routing code never sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedTask {
    pub id: String,
    pub topic: String,
    pub text: String,
    pub domain: Domain,
    pub mode: TaskMode,
    pub constraints: Vec<String>,
    pub role: AgentRole,
    pub context_tokens: usize,
    latent_difficulty: f64,
}

impl GeneratedTask {
    /// Simulation-side ground truth. Not a routing feature.
    pub fn latent_difficulty(&self) -> f64 {
        self.latent_difficulty
    }

    /// The executable step view of this task.
    pub fn to_step(&self) -> TaskStep {
        TaskStep::new(
            &self.id,
            &self.text,
            self.role,
            self.context_tokens,
            self.domain,
            self.latent_difficulty,
        )
    }
}

/// Task-generation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskGenConfig {
    pub hard_mode_prob: f64,
    /// Sampling temperature forwarded to the external generator only.
    pub temperature: f64,
    pub history_window: usize,
    pub seed: u64,
}

impl Default for TaskGenConfig {
    fn default() -> Self {
        TaskGenConfig { hard_mode_prob: 0.7, temperature: 1.1, history_window: 3, seed: 42 }
    }
}

impl TaskGenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.hard_mode_prob) {
            return Err(Error::Config(format!(
                "taskgen: hard_mode_prob {} outside [0, 1]",
                self.hard_mode_prob
            )));
        }
        Ok(())
    }
}

/// Where generated task text comes from.
pub enum TaskGenerator {
    /// Hermetic template-based composition.
    Simulated,
    /// Remote chat model writes the task text; topic, constraints, and
    /// difficulty are still assigned locally so invariants stay enforceable.
    External { endpoint: ChatEndpoint, model: String },
}

const SOFTWARE_TOPICS: [&str; 12] = [
    "order checkout service",
    "inventory sync daemon",
    "notification dispatcher",
    "session token middleware",
    "report export worker",
    "feature flag service",
    "search indexing job",
    "payment reconciliation batch",
    "websocket presence hub",
    "migration dry-run tool",
    "plugin sandbox loader",
    "telemetry ingestion agent",
];

const DATA_TOPICS: [&str; 12] = [
    "churn prediction table",
    "ad spend attribution",
    "sensor quality dashboard",
    "warehouse sales cube",
    "clickstream sessionization",
    "supplier invoice ledger",
    "fleet maintenance records",
    "survey response panel",
    "pricing elasticity study",
    "inventory demand forecast",
    "support ticket triage corpus",
    "energy meter readings",
];

const SCIENCE_TOPICS: [&str; 12] = [
    "orbital transfer window",
    "protein folding energetics",
    "epidemic spread model",
    "battery discharge kinetics",
    "climate grid downscaling",
    "laser cavity stability",
    "groundwater diffusion plume",
    "pendulum chaos regime",
    "catalyst reaction network",
    "stellar spectrum fitting",
    "plasma confinement profile",
    "acoustic waveguide modes",
];

const SECURITY_TOPICS: [&str; 12] = [
    "login audit trail",
    "container escape report",
    "firmware update channel",
    "secrets vault rotation",
    "phishing triage queue",
    "api gateway hardening",
    "dependency vulnerability sweep",
    "insider threat detection",
    "ransomware tabletop exercise",
    "certificate expiry monitor",
    "bug bounty intake review",
    "network segmentation plan",
];

const SOFTWARE_HARD_CONSTRAINTS: [&str; 5] = [
    "must stay correct under concurrent access from 64 threads",
    "must recover from a mid-operation crash without losing acknowledged work",
    "must avoid deadlock while holding at most two locks",
    "must keep p99 latency under 50ms during failover",
    "must tolerate duplicated and reordered messages",
];

const DATA_HARD_CONSTRAINTS: [&str; 5] = [
    "input contains corrupted rows, mixed encodings, and shifted columns",
    "timestamps arrive in three inconsistent formats with gaps",
    "ids collide across sources and need probabilistic resolution",
    "30% of the key column is missing not at random",
    "numeric fields mix units and thousand separators",
];

const SCIENCE_HARD_CONSTRAINTS: [&str; 5] = [
    "system is stiff and requires an implicit or adaptive integrator",
    "energy drift must stay below 1e-6 over one million steps",
    "results must include a convergence study across step sizes",
    "boundary conditions are singular and need special treatment",
    "parameters are only identifiable from noisy sparse observations",
];

const SECURITY_HARD_CONSTRAINTS: [&str; 5] = [
    "produce both an attack narrative and a layered defense plan",
    "proof-of-concept must be contained to an isolated lab network",
    "mitigations must hold even if one control is bypassed",
    "exploit path analysis must cover privilege escalation chains",
    "detection rules must keep false positives under 1%",
];

const SOFTWARE_STANDARD_CONSTRAINTS: [&str; 4] = [
    "include unit tests for the main paths",
    "keep the public interface small and documented",
    "log actionable errors instead of panicking",
    "stay within the existing module layout",
];

const DATA_STANDARD_CONSTRAINTS: [&str; 4] = [
    "document every column you derive",
    "keep the pipeline re-runnable end to end",
    "report row counts before and after each stage",
    "use plain dataframes, no custom storage",
];

const SCIENCE_STANDARD_CONSTRAINTS: [&str; 4] = [
    "state the physical assumptions up front",
    "report uncertainty alongside every estimate",
    "include units in all reported quantities",
    "keep the computation reproducible with a fixed seed",
];

const SECURITY_STANDARD_CONSTRAINTS: [&str; 4] = [
    "follow least-privilege defaults throughout",
    "record every finding with severity and evidence",
    "avoid destructive checks against live systems",
    "keep credentials out of logs and output",
];

fn topics_for(domain: Domain) -> &'static [&'static str] {
    match domain {
        Domain::Software => &SOFTWARE_TOPICS,
        Domain::Data => &DATA_TOPICS,
        Domain::Science => &SCIENCE_TOPICS,
        Domain::Security => &SECURITY_TOPICS,
    }
}

fn hard_constraints_for(domain: Domain) -> &'static [&'static str] {
    match domain {
        Domain::Software => &SOFTWARE_HARD_CONSTRAINTS,
        Domain::Data => &DATA_HARD_CONSTRAINTS,
        Domain::Science => &SCIENCE_HARD_CONSTRAINTS,
        Domain::Security => &SECURITY_HARD_CONSTRAINTS,
    }
}

fn standard_constraints_for(domain: Domain) -> &'static [&'static str] {
    match domain {
        Domain::Software => &SOFTWARE_STANDARD_CONSTRAINTS,
        Domain::Data => &DATA_STANDARD_CONSTRAINTS,
        Domain::Science => &SCIENCE_STANDARD_CONSTRAINTS,
        Domain::Security => &SECURITY_STANDARD_CONSTRAINTS,
    }
}

fn action_for(domain: Domain, mode: TaskMode) -> &'static str {
    match (domain, mode) {
        (Domain::Software, TaskMode::Normal) => "implement a well-scoped change to",
        (Domain::Software, TaskMode::Hard) => "redesign and debug",
        (Domain::Data, TaskMode::Normal) => "prepare a clean summary of",
        (Domain::Data, TaskMode::Hard) => "rebuild the analysis pipeline for",
        (Domain::Science, TaskMode::Normal) => "compute reference values for",
        (Domain::Science, TaskMode::Hard) => "build a validated simulation of",
        (Domain::Security, TaskMode::Normal) => "run a routine review of",
        (Domain::Security, TaskMode::Hard) => "conduct a full adversarial assessment of",
    }
}

/// Draws a topic not seen in the trailing window, resampling at most 100
/// times before giving up with a diversity error.
fn draw_topic(
    domain: Domain,
    history: &[String],
    window: usize,
    rng: &mut impl Rng,
) -> Result<String> {
    let pool = topics_for(domain);
    let recent: &[String] =
        if window == 0 { &[] } else { &history[history.len().saturating_sub(window)..] };
    for _ in 0..100 {
        let topic = pool[rng.random_range(0..pool.len())];
        if !recent.iter().any(|t| t == topic) {
            return Ok(topic.to_string());
        }
    }
    Err(Error::Training(format!(
        "task generation: no topic outside the last {window} topics after 100 resamples"
    )))
}

fn draw_role(difficulty: f64, rng: &mut impl Rng) -> AgentRole {
    let r: f64 = rng.random();
    let mut cumulative = 0.0;
    for (i, role) in AgentRole::ALL.iter().enumerate() {
        cumulative += ROLE_WEIGHTS_EASY[i] + difficulty * (ROLE_WEIGHTS_HARD[i] - ROLE_WEIGHTS_EASY[i]);
        if r < cumulative {
            return *role;
        }
    }
    AgentRole::Reviewer
}

fn external_prompt(
    domain: Domain,
    mode: TaskMode,
    topic: &str,
    constraints: &[String],
    recent: &[String],
) -> String {
    let mode_line = match mode {
        TaskMode::Normal => "a routine task of ordinary difficulty",
        TaskMode::Hard => "a genuinely hard task that separates expert models from basic ones",
    };
    let mut prompt = format!(
        "Write {mode_line} for the {domain} domain about: {topic}.\nThe task must satisfy every constraint:\n"
    );
    for constraint in constraints {
        prompt.push_str("- ");
        prompt.push_str(constraint);
        prompt.push('\n');
    }
    if !recent.is_empty() {
        prompt.push_str(&format!("Avoid these recent topics: {}.\n", recent.join(", ")));
    }
    prompt.push_str("Reply with the task statement only.");
    prompt
}

/// Generates one task. Hard mode fires when a uniform draw lands below
/// `hard_mode_prob` and injects adversarial domain constraints; Normal
/// mode carries one standard constraint. The topic always differs from
/// the trailing `history_window` topics.
pub fn generate_task(
    cfg: &TaskGenConfig,
    history: &[String],
    domain: Domain,
    id: &str,
    rng: &mut impl Rng,
    generator: &TaskGenerator,
) -> Result<GeneratedTask> {
    cfg.validate()?;
    let r: f64 = rng.random();
    let mode = if r < cfg.hard_mode_prob { TaskMode::Hard } else { TaskMode::Normal };

    let topic = draw_topic(domain, history, cfg.history_window, rng)?;

    let mut constraints: Vec<String> = Vec::new();
    match mode {
        TaskMode::Hard => {
            let pool = hard_constraints_for(domain);
            let first = rng.random_range(0..pool.len());
            constraints.push(pool[first].to_string());
            if rng.random::<f64>() < 0.5 {
                let second = rng.random_range(0..pool.len() - 1);
                let second = if second >= first { second + 1 } else { second };
                constraints.push(pool[second].to_string());
            }
        }
        TaskMode::Normal => {
            let pool = standard_constraints_for(domain);
            constraints.push(pool[rng.random_range(0..pool.len())].to_string());
        }
    }

    let latent_difficulty = match mode {
        TaskMode::Hard => rng.random_range(0.6..1.0),
        TaskMode::Normal => rng.random_range(0.0..0.4),
    };
    let role = draw_role(latent_difficulty, rng);
    // Context grows with difficulty plus noise; hard tasks drag in designs,
    // dumps, or vulnerable code, normal ones stay short.
    let spread: f64 = rng.random();
    let context_tokens = (150.0 + 650.0 * spread + 9000.0 * latent_difficulty * spread) as usize;

    let text = match generator {
        TaskGenerator::Simulated => {
            let mut text =
                format!("In the {} workstream, {} the {topic}", domain, action_for(domain, mode));
            for constraint in &constraints {
                text.push_str("; ");
                text.push_str(constraint);
            }
            text.push('.');
            text
        }
        TaskGenerator::External { endpoint, model } => {
            let recent: &[String] = if cfg.history_window == 0 {
                &[]
            } else {
                &history[history.len().saturating_sub(cfg.history_window)..]
            };
            let prompt = external_prompt(domain, mode, &topic, &constraints, recent);
            let messages = [ChatMessage { role: "user".into(), content: prompt }];
            let completion = chat_complete(endpoint, model, &messages, Some(cfg.temperature))?;
            completion.text
        }
    };

    Ok(GeneratedTask {
        id: id.to_string(),
        topic,
        text,
        domain,
        mode,
        constraints,
        role,
        context_tokens,
        latent_difficulty,
    })
}

/// One executed trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub task: GeneratedTask,
    pub model_used: ModelTier,
    pub outcome: Outcome,
    pub retries: u32,
    pub cost_usd: f64,
    pub router_score: f64,
}

/// Prices backend token usage for a tier.
#[derive(Debug, Clone)]
pub struct CostModel {
    pub table: PricingTable,
    pub binding: TierBinding,
}

impl CostModel {
    pub fn new(table: PricingTable, binding: TierBinding) -> Result<Self> {
        binding.validate(&table)?;
        Ok(CostModel { table, binding })
    }

    pub fn price(&self, tier: ModelTier, tokens_in: u64, tokens_out: u64) -> Result<f64> {
        let model_ref = self.binding.model_for(tier);
        let rate = self.table.rate_for(&model_ref.provider, &model_ref.model)?;
        Ok(tokens_in as f64 * rate.input_usd_per_million / 1e6
            + tokens_out as f64 * rate.output_usd_per_million / 1e6)
    }
}

/// Executes a task on one tier with a retry circuit breaker: after
/// `breaker_max` rejected retries the failure is final. Every attempt is
/// billed into `ledger` as it completes, so a backend error mid-task
/// leaves the attempts that did run on the books.
pub fn execute_in_sandbox(
    task: &GeneratedTask,
    tier: ModelTier,
    router_score: f64,
    backend: &mut dyn ModelBackend,
    cost: &CostModel,
    breaker_max: u32,
    ledger: &mut CostLedger,
) -> Result<TrajectoryRecord> {
    assert!(breaker_max >= 1, "breaker_max must be at least 1, got {breaker_max}");
    let step = task.to_step();
    let model_ref = cost.binding.model_for(tier);
    let mut cost_usd = 0.0;
    let mut retries = 0u32;
    loop {
        let attempt = retries;
        let record = backend.execute(&step, tier, attempt, "")?;
        let usd = cost.price(tier, record.tokens_in, record.tokens_out)?;
        cost_usd += usd;
        ledger.push(LedgerEntry {
            step_id: task.id.clone(),
            tier,
            model: model_ref.model.clone(),
            tokens_in: record.tokens_in,
            tokens_out: record.tokens_out,
            usd,
        });
        match record.outcome {
            Outcome::Success => {
                return Ok(TrajectoryRecord {
                    task: task.clone(),
                    model_used: tier,
                    outcome: Outcome::Success,
                    retries,
                    cost_usd,
                    router_score,
                });
            }
            Outcome::Failure if retries < breaker_max => retries += 1,
            Outcome::Failure => {
                return Ok(TrajectoryRecord {
                    task: task.clone(),
                    model_used: tier,
                    outcome: Outcome::Failure,
                    retries,
                    cost_usd,
                    router_score,
                });
            }
        }
    }
}

/// Why a relabeled sample got its label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    CorrectedFailure,
    ReinforcedStrong,
    EncouragedWeak,
}

/// A trajectory converted back into a training sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelabeledSample {
    #[serde(flatten)]
    pub sample: TrainingSample,
    pub provenance: Provenance,
}

/// The outcome-to-label law. A weak failure is corrected to Strong, a
/// strong success reinforced, a weak success encouraged toward Weak, and
/// a strong failure discarded: no branch assigns it a label.
pub fn relabel_law(outcome: Outcome, tier: ModelTier) -> Option<(f64, Provenance)> {
    match (outcome, tier) {
        (Outcome::Failure, ModelTier::Weak) => Some((1.0, Provenance::CorrectedFailure)),
        (Outcome::Success, ModelTier::Strong) => Some((1.0, Provenance::ReinforcedStrong)),
        (Outcome::Success, ModelTier::Weak) => Some((0.0, Provenance::EncouragedWeak)),
        (Outcome::Failure, ModelTier::Strong) => None,
    }
}

/// Applies the relabel law to one record, rebuilding features from the
/// task exactly as the router saw them.
pub fn relabel(
    record: &TrajectoryRecord,
    embedder: &Embedder,
    lexicon: &RiskLexicon,
    context_cap: usize,
) -> Result<Option<RelabeledSample>> {
    let Some((label, provenance)) = relabel_law(record.outcome, record.model_used) else {
        return Ok(None);
    };
    let task = &record.task;
    let v_meta = extract_meta(task.role, task.context_tokens, &task.text, lexicon, context_cap);
    let x_sem = embedder.embed(&task.text)?;
    Ok(Some(RelabeledSample {
        sample: TrainingSample {
            text: task.text.clone(),
            label,
            v_meta,
            x_sem: Some(x_sem),
        },
        provenance,
    }))
}

/// How tiers are chosen while collecting trajectories.
pub enum CollectionPolicy<'a> {
    /// On-policy: the current router decides.
    Router { params: &'a RouterParams, cfg: &'a RouterConfig, threshold: f64 },
    /// Perfect-information reference policy.
    Oracle,
}

impl CollectionPolicy<'_> {
    fn decide(
        &self,
        task: &GeneratedTask,
        embedder: &Embedder,
        lexicon: &RiskLexicon,
        context_cap: usize,
    ) -> Result<(ModelTier, f64)> {
        match self {
            CollectionPolicy::Router { params, cfg, threshold } => {
                let x_sem = embedder.embed(&task.text)?;
                let v_meta =
                    extract_meta(task.role, task.context_tokens, &task.text, lexicon, context_cap);
                let score = predict_strong_probability(params, cfg, &x_sem, v_meta.as_slice());
                Ok((route_decision(score, *threshold), score))
            }
            CollectionPolicy::Oracle => {
                let step = task.to_step();
                // Report the hidden difficulty as the score, nudged inside
                // the open interval the sigmoid would produce.
                let score = task.latent_difficulty().clamp(1e-9, 1.0 - 1e-9);
                Ok((step.oracle_tier(), score))
            }
        }
    }
}

/// Everything trajectory collection needs besides the policy.
pub struct CollectionContext<'a> {
    pub gen_cfg: TaskGenConfig,
    pub generator: TaskGenerator,
    pub backend: &'a mut dyn ModelBackend,
    pub cost: CostModel,
    pub breaker_max: u32,
    pub embedder: &'a Embedder,
    pub lexicon: &'a RiskLexicon,
    pub context_cap: usize,
}

/// Collects exactly `target` trajectories: generate, route, execute,
/// append. Domains rotate uniformly at random; the topic history respects
/// the generator window across the whole run. On error the partial
/// dataset collected so far is flushed to `flush_path` when given.
pub fn accumulate_trajectories(
    ctx: &mut CollectionContext<'_>,
    policy: &CollectionPolicy<'_>,
    target: usize,
    flush_path: Option<&Path>,
) -> Result<Vec<TrajectoryRecord>> {
    assert!(target >= 1, "target must be at least 1, got {target}");
    let mut records: Vec<TrajectoryRecord> = Vec::with_capacity(target);
    let mut history: Vec<String> = Vec::new();
    let mut ledger = CostLedger::new();
    let flush_on_error = |records: &[TrajectoryRecord], err: Error| -> Error {
        if let Some(path) = flush_path {
            if let Err(flush_err) = save_trajectories_jsonl(path, records) {
                return Error::Training(format!(
                    "{err}; flushing {} partial records also failed: {flush_err}",
                    records.len()
                ));
            }
        }
        err
    };
    for i in 0..target {
        let mut rng = substream(ctx.gen_cfg.seed, "trajectory", i as u64);
        let domain = Domain::ALL[rng.random_range(0..Domain::ALL.len())];
        let id = format!("traj-{i:05}");
        let task = match generate_task(&ctx.gen_cfg, &history, domain, &id, &mut rng, &ctx.generator)
        {
            Ok(task) => task,
            Err(err) => return Err(flush_on_error(&records, err)),
        };
        history.push(task.topic.clone());
        let (tier, score) = match policy.decide(&task, ctx.embedder, ctx.lexicon, ctx.context_cap) {
            Ok(decision) => decision,
            Err(err) => return Err(flush_on_error(&records, err)),
        };
        let record = match execute_in_sandbox(
            &task,
            tier,
            score,
            ctx.backend,
            &ctx.cost,
            ctx.breaker_max,
            &mut ledger,
        ) {
            Ok(record) => record,
            Err(err) => return Err(flush_on_error(&records, err)),
        };
        records.push(record);
    }
    Ok(records)
}

/// Writes trajectory records as JSON Lines.
pub fn save_trajectories_jsonl(path: impl AsRef<Path>, records: &[TrajectoryRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|err| Error::Format(format!("trajectory serialize: {err}")))?;
        out.push_str(&line);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|err| Error::io(path.display().to_string(), err))
}

/// Reads trajectory records from JSON Lines.
pub fn load_trajectories_jsonl(path: impl AsRef<Path>) -> Result<Vec<TrajectoryRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|err| Error::io(path.display().to_string(), err))?;
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: TrajectoryRecord = serde_json::from_str(line)
            .map_err(|err| Error::Format(format!("{} line {}: {err}", path.display(), idx + 1)))?;
        records.push(record);
    }
    Ok(records)
}

/// Writes relabeled samples as JSON Lines (TrainingSample schema plus a
/// `provenance` field).
pub fn save_relabeled_jsonl(path: impl AsRef<Path>, samples: &[RelabeledSample]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for sample in samples {
        let line = serde_json::to_string(sample)
            .map_err(|err| Error::Format(format!("relabeled serialize: {err}")))?;
        out.push_str(&line);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|err| Error::io(path.display().to_string(), err))
}

/// Reads relabeled samples from JSON Lines.
pub fn load_relabeled_jsonl(path: impl AsRef<Path>) -> Result<Vec<RelabeledSample>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|err| Error::io(path.display().to_string(), err))?;
    let mut samples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let sample: RelabeledSample = serde_json::from_str(line)
            .map_err(|err| Error::Format(format!("{} line {}: {err}", path.display(), idx + 1)))?;
        samples.push(sample);
    }
    Ok(samples)
}

/// Optional boundary filter: keeps records whose router score lies within
/// `margin` of the threshold. A selection heuristic, not part of the
/// relabel law.
pub fn boundary_filter(
    records: &[TrajectoryRecord],
    threshold: f64,
    margin: f64,
) -> Vec<&TrajectoryRecord> {
    records.iter().filter(|r| (r.router_score - threshold).abs() < margin).collect()
}
