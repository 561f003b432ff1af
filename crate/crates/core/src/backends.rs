//! Model-tier backends and cost accounting: the seeded simulation backend,
//! the JSON-over-HTTP chat connector, the provider pricing table, and the
//! per-workflow cost ledger.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::httpx::JsonClient;
use crate::rng::{index_of, substream};
use crate::router::ModelTier;
use crate::task::TaskStep;

/// Terminal verdict of one execution attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure,
}

/// What one backend call produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecRecord {
    pub outcome: Outcome,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub action_text: String,
}

/// Anything that can execute a task step on a given tier. `attempt` is the
/// 0-based retry ordinal for this (task, tier) pair; `context_tail` is the
/// trailing workflow history the step should see.
pub trait ModelBackend {
    fn execute(
        &mut self,
        task: &TaskStep,
        tier: ModelTier,
        attempt: u32,
        context_tail: &str,
    ) -> Result<ExecRecord>;
}

/// Success probability as a function of latent difficulty in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "curve", rename_all = "snake_case")]
pub enum SuccessCurve {
    /// `1 - 0.95 d^2`, floor-clamped at 0.05.
    QuadraticDrop,
    Constant { p: f64 },
    /// Deterministic split: certain success below the threshold, certain
    /// failure at or above it. Used by calibrated benchmark scenarios.
    Step { threshold: f64 },
}

impl SuccessCurve {
    pub fn probability(&self, difficulty: f64) -> f64 {
        match self {
            SuccessCurve::QuadraticDrop => (1.0 - 0.95 * difficulty * difficulty).max(0.05),
            SuccessCurve::Constant { p } => *p,
            SuccessCurve::Step { threshold } => {
                if difficulty < *threshold {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let SuccessCurve::Constant { p } = self {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::Config(format!("success probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Lognormal token-count model, parameterized by the log-space mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenModel {
    pub mu_ln: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierTokenModel {
    pub input: TokenModel,
    pub output: TokenModel,
}

impl Default for TierTokenModel {
    fn default() -> Self {
        TierTokenModel {
            input: TokenModel { mu_ln: 800f64.ln(), sigma: 0.5 },
            output: TokenModel { mu_ln: 600f64.ln(), sigma: 0.6 },
        }
    }
}

/// Simulated backend configuration. Token models default to the same
/// distribution on both tiers so cost ratios are purely pricing-driven.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimBackendConfig {
    pub weak_success: SuccessCurve,
    pub strong_success: SuccessCurve,
    #[serde(default)]
    pub strong_tokens: TierTokenModel,
    #[serde(default)]
    pub weak_tokens: TierTokenModel,
    pub seed: u64,
}

impl SimBackendConfig {
    pub fn with_seed(seed: u64) -> Self {
        SimBackendConfig {
            weak_success: SuccessCurve::QuadraticDrop,
            strong_success: SuccessCurve::Constant { p: 0.98 },
            strong_tokens: TierTokenModel::default(),
            weak_tokens: TierTokenModel::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.weak_success.validate()?;
        self.strong_success.validate()
    }

    fn success_curve(&self, tier: ModelTier) -> &SuccessCurve {
        match tier {
            ModelTier::Strong => &self.strong_success,
            ModelTier::Weak => &self.weak_success,
        }
    }

    fn token_model(&self, tier: ModelTier) -> &TierTokenModel {
        match tier {
            ModelTier::Strong => &self.strong_tokens,
            ModelTier::Weak => &self.weak_tokens,
        }
    }
}

/// Standard normal draw via Box-Muller from the stream's next two uniforms.
pub(crate) fn standard_normal(rng: &mut impl rand::Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

fn lognormal_count(model: &TokenModel, z: f64) -> u64 {
    (model.mu_ln + model.sigma * z).exp().round().max(1.0) as u64
}

/// Executes one simulated attempt.
///
/// Draws are keyed, not sequential: token counts depend on (seed, task,
/// direction) only, so the same task costs the same tokens on every tier
/// and every retry (common random numbers across strategies); outcomes
/// depend on (seed, task, tier, attempt) so retries re-roll.
pub fn sim_execute(
    cfg: &SimBackendConfig,
    task: &TaskStep,
    tier: ModelTier,
    attempt: u32,
) -> ExecRecord {
    let difficulty = task.latent_difficulty();
    let p = cfg.success_curve(tier).probability(difficulty);
    let mut outcome_rng =
        substream(cfg.seed, "sim-outcome", index_of(&format!("{}|{tier}|{attempt}", task.id)));
    let outcome = if outcome_rng.random::<f64>() < p { Outcome::Success } else { Outcome::Failure };

    let tokens = cfg.token_model(tier);
    let mut in_rng = substream(cfg.seed, "sim-tokens", index_of(&format!("{}|in", task.id)));
    let mut out_rng = substream(cfg.seed, "sim-tokens", index_of(&format!("{}|out", task.id)));
    let tokens_in = lognormal_count(&tokens.input, standard_normal(&mut in_rng));
    let tokens_out = lognormal_count(&tokens.output, standard_normal(&mut out_rng));

    let verdict = match outcome {
        Outcome::Success => "completed",
        Outcome::Failure => "rejected by review",
    };
    let action_text = format!("[sim {tier}] step {} attempt {attempt}: {verdict}", task.id);
    ExecRecord { outcome, tokens_in, tokens_out, action_text }
}

/// Seeded simulation backend.
#[derive(Debug, Clone)]
pub struct SimBackend {
    pub cfg: SimBackendConfig,
}

impl SimBackend {
    pub fn new(cfg: SimBackendConfig) -> Self {
        SimBackend { cfg }
    }
}

impl ModelBackend for SimBackend {
    fn execute(
        &mut self,
        task: &TaskStep,
        tier: ModelTier,
        attempt: u32,
        _context_tail: &str,
    ) -> Result<ExecRecord> {
        Ok(sim_execute(&self.cfg, task, tier, attempt))
    }
}

/// Remote chat-completions endpoint configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatEndpoint {
    pub endpoint: String,
    /// Env var holding the bearer token. Tokens never travel via flags.
    pub auth_env: String,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_backoff_ms() -> u64 {
    500
}

fn default_timeout_ms() -> u64 {
    60_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatCompletion {
    pub text: String,
    pub tokens_in: u64,
    pub tokens_out: u64,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    #[serde(skip_serializing_if = "Option::is_none")]
    temperature: Option<f64>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    usage: Option<ChatUsage>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    content: String,
}

#[derive(Deserialize)]
struct ChatUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

/// One chat completion over HTTP. Transport failures and 5xx responses are
/// retried 3 times with exponential backoff; 4xx and malformed bodies fail
/// immediately. `temperature` is omitted from the request when `None`.
pub fn chat_complete(
    cfg: &ChatEndpoint,
    model: &str,
    messages: &[ChatMessage],
    temperature: Option<f64>,
) -> Result<ChatCompletion> {
    let token = std::env::var(&cfg.auth_env)
        .map_err(|_| Error::Config(format!("chat auth env var {} is not set", cfg.auth_env)))?;
    let client = JsonClient::new(
        4,
        Duration::from_millis(cfg.backoff_ms),
        Duration::from_millis(cfg.timeout_ms),
    );
    let response: ChatResponse = client.post_json(
        &cfg.endpoint,
        &[("authorization", format!("Bearer {token}"))],
        &ChatRequest { model, messages, temperature },
    )?;
    let usage = response
        .usage
        .ok_or_else(|| Error::Protocol("chat response is missing the usage block".into()))?;
    let choice = response
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| Error::Protocol("chat response has no choices".into()))?;
    Ok(ChatCompletion {
        text: choice.message.content,
        tokens_in: usage.prompt_tokens,
        tokens_out: usage.completion_tokens,
    })
}

/// Chat-backed execution. Every completed call reports `Success`: remote
/// mode has no automatic verdict, review happens downstream.
pub struct HttpBackend {
    pub chat: ChatEndpoint,
    pub binding: TierBinding,
}

impl ModelBackend for HttpBackend {
    fn execute(
        &mut self,
        task: &TaskStep,
        tier: ModelTier,
        _attempt: u32,
        context_tail: &str,
    ) -> Result<ExecRecord> {
        let content = if context_tail.is_empty() {
            task.text.clone()
        } else {
            format!("{context_tail}\n\n{}", task.text)
        };
        let messages = [ChatMessage { role: "user".into(), content }];
        let completion =
            chat_complete(&self.chat, &self.binding.model_for(tier).model, &messages, None)?;
        Ok(ExecRecord {
            outcome: Outcome::Success,
            tokens_in: completion.tokens_in,
            tokens_out: completion.tokens_out,
            action_text: completion.text,
        })
    }
}

/// A `(provider, model)` pair as it appears in the pricing table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelRef {
    pub provider: String,
    pub model: String,
}

impl ModelRef {
    pub fn new(provider: impl Into<String>, model: impl Into<String>) -> Self {
        ModelRef { provider: provider.into(), model: model.into() }
    }
}

/// Which concrete models the two tiers bill as.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierBinding {
    pub strong: ModelRef,
    pub weak: ModelRef,
}

impl Default for TierBinding {
    fn default() -> Self {
        TierBinding {
            strong: ModelRef::new("openai", "gpt-4o"),
            weak: ModelRef::new("openai", "gpt-4o-mini"),
        }
    }
}

impl TierBinding {
    pub fn model_for(&self, tier: ModelTier) -> &ModelRef {
        match tier {
            ModelTier::Strong => &self.strong,
            ModelTier::Weak => &self.weak,
        }
    }

    pub fn validate(&self, table: &PricingTable) -> Result<()> {
        for model_ref in [&self.strong, &self.weak] {
            table.rate_for(&model_ref.provider, &model_ref.model)?;
        }
        Ok(())
    }
}

/// Per-million-token rates. The decimal strings from the source file are
/// kept verbatim so the table round-trips without float drift.
#[derive(Debug, Clone, PartialEq)]
pub struct Rate {
    pub input_usd_per_million: f64,
    pub output_usd_per_million: f64,
    input_raw: String,
    output_raw: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RateFile {
    input: String,
    output: String,
}

/// Provider pricing, keyed by (provider, model).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PricingTable {
    rows: BTreeMap<String, BTreeMap<String, Rate>>,
}

/// The ten shipped rows: USD per million tokens per provider and model.
const BUILTIN_PRICING: [(&str, &str, &str, &str); 10] = [
    ("openai", "gpt-4o", "3.750", "15.000"),
    ("openai", "gpt-4o-mini", "0.225", "0.900"),
    ("anthropic", "claude-sonnet-4-5", "4.500", "22.500"),
    ("anthropic", "claude-3-5-haiku-20241022", "1.500", "7.500"),
    ("google", "gemini-2.5-pro", "1.875", "15.000"),
    ("google", "gemini-2.5-flash", "0.450", "3.750"),
    ("deepseek", "deepseek-reasoner", "0.825", "2.550"),
    ("deepseek", "deepseek-chat", "0.825", "2.550"),
    ("alibaba", "qwen3-max", "0.440", "1.780"),
    ("alibaba", "qwen-plus", "0.110", "0.280"),
];

impl PricingTable {
    /// The shipped provider table.
    pub fn builtin() -> Self {
        let mut table = PricingTable::default();
        for (provider, model, input, output) in BUILTIN_PRICING {
            table
                .insert(provider, model, input, output)
                .expect("builtin pricing rows are well-formed");
        }
        table
    }

    pub fn insert(&mut self, provider: &str, model: &str, input: &str, output: &str) -> Result<()> {
        let parse = |raw: &str, which: &str| -> Result<f64> {
            let value: f64 = raw.trim().parse().map_err(|_| {
                Error::Format(format!("rate {raw:?} for {provider}/{model} {which} is not a number"))
            })?;
            if value.is_nan() || value < 0.0 {
                return Err(Error::Format(format!(
                    "rate {raw:?} for {provider}/{model} {which} is negative"
                )));
            }
            Ok(value)
        };
        let rate = Rate {
            input_usd_per_million: parse(input, "input")?,
            output_usd_per_million: parse(output, "output")?,
            input_raw: input.trim().to_string(),
            output_raw: output.trim().to_string(),
        };
        self.rows.entry(provider.to_string()).or_default().insert(model.to_string(), rate);
        Ok(())
    }

    pub fn rate_for(&self, provider: &str, model: &str) -> Result<&Rate> {
        self.rows
            .get(provider)
            .and_then(|models| models.get(model))
            .ok_or_else(|| Error::Config(format!("no pricing row for {provider}/{model}")))
    }

    /// Looks a model up across providers. Unknown models are an error,
    /// never a silent zero.
    pub fn rate_for_model(&self, model: &str) -> Result<&Rate> {
        self.rows
            .values()
            .find_map(|models| models.get(model))
            .ok_or_else(|| Error::Config(format!("no pricing row for model {model}")))
    }

    pub fn models(&self) -> impl Iterator<Item = (&str, &str, &Rate)> {
        self.rows.iter().flat_map(|(provider, models)| {
            models.iter().map(move |(model, rate)| (provider.as_str(), model.as_str(), rate))
        })
    }

    pub fn to_json(&self) -> String {
        let file: BTreeMap<&str, BTreeMap<&str, RateFile>> = self
            .rows
            .iter()
            .map(|(provider, models)| {
                (
                    provider.as_str(),
                    models
                        .iter()
                        .map(|(model, rate)| {
                            (
                                model.as_str(),
                                RateFile {
                                    input: rate.input_raw.clone(),
                                    output: rate.output_raw.clone(),
                                },
                            )
                        })
                        .collect(),
                )
            })
            .collect();
        let mut json = serde_json::to_string_pretty(&file).expect("pricing serializes");
        json.push('\n');
        json
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: BTreeMap<String, BTreeMap<String, RateFile>> = serde_json::from_str(json)
            .map_err(|err| Error::Format(format!("pricing parse: {err}")))?;
        let mut table = PricingTable::default();
        for (provider, models) in &file {
            for (model, rate) in models {
                table.insert(provider, model, &rate.input, &rate.output)?;
            }
        }
        Ok(table)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json())
            .map_err(|err| Error::io(path.display().to_string(), err))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path)
            .map_err(|err| Error::io(path.display().to_string(), err))?;
        PricingTable::from_json(&json)
    }
}

/// USD for one call: `tokens_in * in_rate/1e6 + tokens_out * out_rate/1e6`.
pub fn price_call(
    table: &PricingTable,
    model: &str,
    tokens_in: u64,
    tokens_out: u64,
) -> Result<f64> {
    let rate = table.rate_for_model(model)?;
    Ok(tokens_in as f64 * rate.input_usd_per_million / 1e6
        + tokens_out as f64 * rate.output_usd_per_million / 1e6)
}

/// One billed call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub step_id: String,
    pub tier: ModelTier,
    pub model: String,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub usd: f64,
}

/// Append-only cost ledger with running totals. Totals accumulate
/// left-to-right in push order, so a recount over the entries reproduces
/// them exactly.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    entries: Vec<LedgerEntry>,
    total_strong: f64,
    total_weak: f64,
    grand_total: f64,
}

impl CostLedger {
    pub fn new() -> Self {
        CostLedger::default()
    }

    pub fn push(&mut self, entry: LedgerEntry) {
        match entry.tier {
            ModelTier::Strong => self.total_strong += entry.usd,
            ModelTier::Weak => self.total_weak += entry.usd,
        }
        self.grand_total += entry.usd;
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn grand_total(&self) -> f64 {
        self.grand_total
    }

    pub fn total_for(&self, tier: ModelTier) -> f64 {
        match tier {
            ModelTier::Strong => self.total_strong,
            ModelTier::Weak => self.total_weak,
        }
    }

    /// Left-to-right recount over the entries. Bitwise equal to
    /// `grand_total` by construction.
    pub fn recount(&self) -> f64 {
        let mut total = 0.0;
        for entry in &self.entries {
            total += entry.usd;
        }
        total
    }
}
