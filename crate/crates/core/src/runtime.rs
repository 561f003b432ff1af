//! Deployed routing layer: per-step tier decisions under four strategies
//! (learned router, always-strong, always-weak, weak-then-escalate
//! cascade) plus a perfect-information oracle baseline, with shared
//! workflow context history and a per-step retry circuit breaker.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backends::{ExecRecord, ModelBackend, Outcome};
use crate::error::{Error, Result};
use crate::features::{approx_token_count, extract_meta, history_tail, Embedder, RiskLexicon};
use crate::router::{predict_strong_probability, route_decision, ModelTier, RouterConfig, RouterParams};
use crate::task::TaskStep;
use crate::trajectory::CostModel;

/// Rolling (task text, action text) workflow memory with a running token
/// total that always equals a recount over the members.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContextHistory {
    entries: Vec<(String, String)>,
    token_count: usize,
    rendered: String,
}

impl ContextHistory {
    pub fn new() -> Self {
        ContextHistory::default()
    }

    pub fn append(&mut self, task_text: &str, action_text: &str) {
        self.token_count += approx_token_count(task_text) + approx_token_count(action_text);
        if !self.rendered.is_empty() {
            self.rendered.push('\n');
        }
        self.rendered.push_str(task_text);
        self.rendered.push('\n');
        self.rendered.push_str(action_text);
        self.entries.push((task_text.to_string(), action_text.to_string()));
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }

    /// Independent recount over the members; equals `token_count`.
    pub fn recount(&self) -> usize {
        self.entries
            .iter()
            .map(|(t, a)| approx_token_count(t) + approx_token_count(a))
            .sum()
    }

    /// Trailing slice of the rendered history, at most `max_tokens` long.
    pub fn tail(&self, max_tokens: usize) -> &str {
        history_tail(&self.rendered, max_tokens)
    }
}

/// How Cascade judges a weak attempt. The simulation uses the execution
/// outcome itself; a learned acceptance scorer slots in here.
pub type AcceptRule = fn(&ExecRecord) -> bool;

/// Accepts exactly the successful attempts.
pub fn outcome_accepts(record: &ExecRecord) -> bool {
    record.outcome == Outcome::Success
}

/// Tier-selection strategy for a workflow run.
#[derive(Clone, Copy)]
pub enum RoutingStrategy<'a> {
    /// Learned router: score above the threshold goes Strong.
    Caster { params: &'a RouterParams, threshold: f64 },
    ForceStrong,
    ForceWeak,
    /// Weak first; on rejection escalate to Strong, billing both attempts.
    Cascade { accept: AcceptRule, max_escalations: u32 },
    /// Routes by hidden task difficulty. Reference policy for benchmarks;
    /// unavailable in deployment.
    Oracle,
}

impl<'a> RoutingStrategy<'a> {
    pub fn cascade() -> Self {
        RoutingStrategy::Cascade { accept: outcome_accepts, max_escalations: 1 }
    }

    pub fn kind(&self) -> StrategyKind {
        match self {
            RoutingStrategy::Caster { .. } => StrategyKind::Caster,
            RoutingStrategy::ForceStrong => StrategyKind::ForceStrong,
            RoutingStrategy::ForceWeak => StrategyKind::ForceWeak,
            RoutingStrategy::Cascade { .. } => StrategyKind::Cascade,
            RoutingStrategy::Oracle => StrategyKind::Oracle,
        }
    }
}

/// Strategy name, for CLI parsing and report labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Caster,
    ForceStrong,
    ForceWeak,
    Cascade,
    Oracle,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Caster,
        StrategyKind::ForceStrong,
        StrategyKind::ForceWeak,
        StrategyKind::Cascade,
        StrategyKind::Oracle,
    ];
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            StrategyKind::Caster => "caster",
            StrategyKind::ForceStrong => "strong",
            StrategyKind::ForceWeak => "weak",
            StrategyKind::Cascade => "cascade",
            StrategyKind::Oracle => "oracle",
        };
        f.write_str(name)
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "caster" => Ok(StrategyKind::Caster),
            "strong" => Ok(StrategyKind::ForceStrong),
            "weak" => Ok(StrategyKind::ForceWeak),
            "cascade" => Ok(StrategyKind::Cascade),
            "oracle" => Ok(StrategyKind::Oracle),
            other => Err(Error::Config(format!(
                "unknown strategy {other:?}; expected caster, strong, weak, cascade, or oracle"
            ))),
        }
    }
}

/// Shared machinery every strategy routes through.
pub struct RoutingContext<'a> {
    pub router_cfg: RouterConfig,
    pub embedder: &'a Embedder,
    pub lexicon: &'a RiskLexicon,
    pub cost: &'a CostModel,
    /// Context-length normalization cap for the meta vector.
    pub context_cap: usize,
    /// How much trailing history gets embedded alongside the task text.
    pub history_tail_tokens: usize,
}

/// What one workflow step produced, across all its attempts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub step_id: String,
    /// Tier of the final attempt.
    pub tier_used: ModelTier,
    pub attempts: u32,
    pub outcome: Outcome,
    pub cost_usd: f64,
    pub tokens_in: u64,
    pub tokens_out: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub router_score: Option<f64>,
}

/// Initial tier choice plus the router score when one was computed.
fn decide(
    strategy: &RoutingStrategy<'_>,
    ctx: &RoutingContext<'_>,
    task: &TaskStep,
    history: &ContextHistory,
) -> Result<(ModelTier, Option<f64>)> {
    match strategy {
        RoutingStrategy::Caster { params, threshold } => {
            let tail = history.tail(ctx.history_tail_tokens);
            let embed_text = if tail.is_empty() {
                task.text.clone()
            } else {
                format!("{}\n{tail}", task.text)
            };
            let x_sem = ctx.embedder.embed(&embed_text)?;
            let v_meta = extract_meta(
                task.role,
                task.context_tokens + history.token_count(),
                &task.text,
                ctx.lexicon,
                ctx.context_cap,
            );
            let score =
                predict_strong_probability(params, &ctx.router_cfg, &x_sem, v_meta.as_slice());
            Ok((route_decision(score, *threshold), Some(score)))
        }
        RoutingStrategy::ForceStrong => Ok((ModelTier::Strong, None)),
        RoutingStrategy::ForceWeak => Ok((ModelTier::Weak, None)),
        RoutingStrategy::Cascade { .. } => Ok((ModelTier::Weak, None)),
        RoutingStrategy::Oracle => Ok((task.oracle_tier(), None)),
    }
}

/// Runs attempts on one task until `keep_going` says stop, tracking
/// per-tier attempt ordinals so a tier's n-th attempt draws the same
/// simulated outcome regardless of which strategy reached it.
struct StepRun<'a> {
    task: &'a TaskStep,
    tokens_in: u64,
    tokens_out: u64,
    cost_usd: f64,
    attempts: u32,
    weak_attempts: u32,
    strong_attempts: u32,
    last: Option<ExecRecord>,
    last_tier: ModelTier,
}

impl<'a> StepRun<'a> {
    fn new(task: &'a TaskStep) -> Self {
        StepRun {
            task,
            tokens_in: 0,
            tokens_out: 0,
            cost_usd: 0.0,
            attempts: 0,
            weak_attempts: 0,
            strong_attempts: 0,
            last: None,
            last_tier: ModelTier::Weak,
        }
    }

    fn execute(
        &mut self,
        tier: ModelTier,
        ctx: &RoutingContext<'_>,
        backend: &mut dyn ModelBackend,
        context_tail: &str,
    ) -> Result<&ExecRecord> {
        let ordinal = match tier {
            ModelTier::Weak => {
                let n = self.weak_attempts;
                self.weak_attempts += 1;
                n
            }
            ModelTier::Strong => {
                let n = self.strong_attempts;
                self.strong_attempts += 1;
                n
            }
        };
        let record = backend.execute(self.task, tier, ordinal, context_tail)?;
        self.cost_usd += ctx.cost.price(tier, record.tokens_in, record.tokens_out)?;
        self.tokens_in += record.tokens_in;
        self.tokens_out += record.tokens_out;
        self.attempts += 1;
        self.last_tier = tier;
        self.last = Some(record);
        Ok(self.last.as_ref().expect("attempt just recorded"))
    }

    fn into_result(self, router_score: Option<f64>) -> (StepResult, ExecRecord) {
        let record = self.last.expect("at least one attempt ran");
        (
            StepResult {
                step_id: self.task.id.clone(),
                tier_used: self.last_tier,
                attempts: self.attempts,
                outcome: record.outcome,
                cost_usd: self.cost_usd,
                tokens_in: self.tokens_in,
                tokens_out: self.tokens_out,
                router_score,
            },
            record,
        )
    }
}

/// One single-shot routed step: the chosen tier executes once, except
/// Cascade which may escalate to Strong and bill both attempts. On
/// success the (task, final action) pair is appended to history; on any
/// backend error the history is left untouched.
pub fn route_step(
    strategy: &RoutingStrategy<'_>,
    ctx: &RoutingContext<'_>,
    task: &TaskStep,
    history: &mut ContextHistory,
    backend: &mut dyn ModelBackend,
) -> Result<StepResult> {
    let (tier, score) = decide(strategy, ctx, task, history)?;
    let tail = history.tail(ctx.history_tail_tokens).to_string();
    let mut run = StepRun::new(task);
    let record = run.execute(tier, ctx, backend, &tail)?;
    if let RoutingStrategy::Cascade { accept, max_escalations } = strategy {
        if !accept(record) && *max_escalations >= 1 {
            run.execute(ModelTier::Strong, ctx, backend, &tail)?;
        }
    }
    let (result, record) = run.into_result(score);
    history.append(&task.text, &record.action_text);
    Ok(result)
}

/// Next tier after a failed attempt: the router's adjusted strategy and
/// Cascade both move to Strong and stay there; fixed policies hold.
fn escalated(strategy: &RoutingStrategy<'_>, current: ModelTier) -> ModelTier {
    match strategy {
        RoutingStrategy::Caster { .. } | RoutingStrategy::Cascade { .. } => ModelTier::Strong,
        RoutingStrategy::ForceStrong => ModelTier::Strong,
        RoutingStrategy::ForceWeak => ModelTier::Weak,
        RoutingStrategy::Oracle => current,
    }
}

/// Sequential workflow execution with shared history and a per-step
/// circuit breaker: each step gets up to `breaker_max` retries, with the
/// step's attempt counters reset at the next step. Returns the completed
/// step results plus the error that stopped the run early, if any.
pub fn run_workflow(
    strategy: &RoutingStrategy<'_>,
    ctx: &RoutingContext<'_>,
    tasks: &[TaskStep],
    backend: &mut dyn ModelBackend,
    breaker_max: u32,
) -> (Vec<StepResult>, Option<Error>) {
    assert!(!tasks.is_empty(), "workflow has no tasks");
    let mut results = Vec::with_capacity(tasks.len());
    let mut history = ContextHistory::new();
    for task in tasks {
        let (initial_tier, score) = match decide(strategy, ctx, task, &history) {
            Ok(decision) => decision,
            Err(err) => return (results, Some(err)),
        };
        let tail = history.tail(ctx.history_tail_tokens).to_string();
        let mut run = StepRun::new(task);
        let mut tier = initial_tier;
        let mut escalations = 0u32;
        for retry in 0..=breaker_max {
            let record = match run.execute(tier, ctx, backend, &tail) {
                Ok(record) => record,
                Err(err) => return (results, Some(err)),
            };
            if record.outcome == Outcome::Success || retry == breaker_max {
                break;
            }
            let next = escalated(strategy, tier);
            if next != tier {
                if let RoutingStrategy::Cascade { max_escalations, .. } = strategy {
                    if escalations >= *max_escalations {
                        break;
                    }
                }
                escalations += 1;
            }
            tier = next;
        }
        let (result, record) = run.into_result(score);
        history.append(&task.text, &record.action_text);
        results.push(result);
    }
    (results, None)
}

/// Writes step results as JSON Lines.
pub fn save_results_jsonl(
    path: impl AsRef<std::path::Path>,
    results: &[StepResult],
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for result in results {
        let line = serde_json::to_string(result)
            .map_err(|err| Error::Format(format!("result serialize: {err}")))?;
        out.push_str(&line);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|err| Error::io(path.display().to_string(), err))
}
