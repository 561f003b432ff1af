//! Feature extraction: semantic embeddings and the structured metadata
//! vector consumed by the router.
//!
//! The metadata vector is 6-dimensional: a 4-way agent-role one-hot, a
//! context-length fraction, and a risk-keyword flag. Semantic embeddings come
//! either from a local hashing embedder (character n-grams, signed hashing,
//! L2 normalization) or from a remote embeddings endpoint.

use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::httpx::JsonClient;

/// Dimension of the metadata vector.
pub const META_DIM: usize = 6;

/// Default context window used to normalize context length.
pub const DEFAULT_CONTEXT_CAP: usize = 8192;

/// Crude token estimate: one token per 4 bytes of UTF-8, rounded up.
pub fn approx_token_count(text: &str) -> usize {
    text.len().div_ceil(4)
}

/// Returns the suffix of `text` holding roughly the last `max_tokens`
/// tokens, respecting char boundaries.
pub fn history_tail(text: &str, max_tokens: usize) -> &str {
    let max_bytes = max_tokens.saturating_mul(4);
    if text.len() <= max_bytes {
        return text;
    }
    let mut start = text.len() - max_bytes;
    while !text.is_char_boundary(start) {
        start += 1;
    }
    &text[start..]
}

/// Workflow roles, one-hot encoded in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    ProductManager,
    Architect,
    Engineer,
    Reviewer,
}

impl AgentRole {
    pub const ALL: [AgentRole; 4] = [
        AgentRole::ProductManager,
        AgentRole::Architect,
        AgentRole::Engineer,
        AgentRole::Reviewer,
    ];

    pub fn index(self) -> usize {
        match self {
            AgentRole::ProductManager => 0,
            AgentRole::Architect => 1,
            AgentRole::Engineer => 2,
            AgentRole::Reviewer => 3,
        }
    }
}

/// Structured metadata features: `[role one-hot x4, context_len_norm,
/// risk_flag]`. Constructed values always satisfy the invariants: the role
/// block is exactly one-hot, the length fraction is in `[0, 1]`, and the
/// risk flag is 0 or 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; META_DIM]", into = "[f64; META_DIM]")]
pub struct MetaVector {
    values: [f64; META_DIM],
}

impl MetaVector {
    pub fn new(role: AgentRole, context_len_norm: f64, risk_flag: bool) -> Self {
        assert!(
            (0.0..=1.0).contains(&context_len_norm),
            "context_len_norm {context_len_norm} outside [0, 1]"
        );
        let mut values = [0.0; META_DIM];
        values[role.index()] = 1.0;
        values[4] = context_len_norm;
        values[5] = if risk_flag { 1.0 } else { 0.0 };
        MetaVector { values }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn role(&self) -> AgentRole {
        AgentRole::ALL[self.values.iter().position(|&v| v == 1.0).expect("one-hot role")]
    }

    pub fn context_len_norm(&self) -> f64 {
        self.values[4]
    }

    pub fn risk_flag(&self) -> bool {
        self.values[5] == 1.0
    }
}

impl TryFrom<[f64; META_DIM]> for MetaVector {
    type Error = String;

    fn try_from(values: [f64; META_DIM]) -> std::result::Result<Self, String> {
        let ones = values[..4].iter().filter(|&&v| v == 1.0).count();
        let zeros = values[..4].iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || ones + zeros != 4 {
            return Err(format!("role block {:?} is not one-hot", &values[..4]));
        }
        if !(0.0..=1.0).contains(&values[4]) {
            return Err(format!("context_len_norm {} outside [0, 1]", values[4]));
        }
        if values[5] != 0.0 && values[5] != 1.0 {
            return Err(format!("risk_flag {} is not 0 or 1", values[5]));
        }
        Ok(MetaVector { values })
    }
}

impl From<MetaVector> for [f64; META_DIM] {
    fn from(meta: MetaVector) -> [f64; META_DIM] {
        meta.values
    }
}

/// Keyword list that trips the risk flag. Matching is a case-insensitive
/// substring test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiskLexicon {
    keywords: Vec<String>,
}

impl Default for RiskLexicon {
    fn default() -> Self {
        RiskLexicon::new(
            [
                "thread",
                "async",
                "asyncio",
                "race condition",
                "distributed",
                "bayesian",
                "buffer overflow",
                "exploit",
                "runge-kutta",
                "hamiltonian",
            ]
            .into_iter()
            .map(str::to_string),
        )
    }
}

impl RiskLexicon {
    pub fn new(keywords: impl IntoIterator<Item = String>) -> Self {
        RiskLexicon { keywords: keywords.into_iter().map(|k| k.to_lowercase()).collect() }
    }

    pub fn matches(&self, text: &str) -> bool {
        let lower = text.to_lowercase();
        self.keywords.iter().any(|k| lower.contains(k))
    }
}

/// Builds the metadata vector from observable runtime facts.
pub fn extract_meta(
    role: AgentRole,
    context_tokens: usize,
    text: &str,
    lexicon: &RiskLexicon,
    context_cap: usize,
) -> MetaVector {
    assert!(context_cap > 0, "context_cap must be positive");
    let norm = context_tokens.min(context_cap) as f64 / context_cap as f64;
    MetaVector::new(role, norm, lexicon.matches(text))
}

/// Role mix at difficulty 0. Order follows [`AgentRole::ALL`].
pub const ROLE_WEIGHTS_EASY: [f64; 4] = [0.35, 0.30, 0.25, 0.10];
/// Role mix at difficulty 1: execution-heavy roles dominate.
pub const ROLE_WEIGHTS_HARD: [f64; 4] = [0.05, 0.15, 0.45, 0.35];

/// Samples a plausible metadata vector for a synthetic task of the given
/// difficulty. Harder tasks skew toward execution roles, longer contexts,
/// and risk-flagged content; keyword hits in `text` always set the flag.
pub fn simulate_meta(
    difficulty: f64,
    text: &str,
    lexicon: &RiskLexicon,
    rng: &mut impl Rng,
) -> MetaVector {
    assert!((0.0..=1.0).contains(&difficulty), "difficulty {difficulty} outside [0, 1]");
    let weights: Vec<f64> = ROLE_WEIGHTS_EASY
        .iter()
        .zip(ROLE_WEIGHTS_HARD)
        .map(|(easy, hard)| easy + difficulty * (hard - easy))
        .collect();
    let mut pick = rng.random::<f64>() * weights.iter().sum::<f64>();
    let mut role = AgentRole::Reviewer;
    for (candidate, w) in AgentRole::ALL.into_iter().zip(&weights) {
        if pick < *w {
            role = candidate;
            break;
        }
        pick -= w;
    }
    // Easy tasks sit below 0.3 of the window; hard ones land in (0.5, 1.0].
    let context = 0.05
        + 0.25 * rng.random::<f64>()
        + difficulty * (0.45 + 0.25 * rng.random::<f64>());
    let risk = lexicon.matches(text) || rng.random::<f64>() < 0.5 * difficulty;
    MetaVector::new(role, context.clamp(0.0, 1.0), risk)
}

/// Semantic embedder selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedderSpec {
    /// Local, dependency-free embedder: signed hashing of character
    /// n-grams. Deterministic for a fixed seed.
    Hashing {
        dimension: usize,
        #[serde(default = "default_ngram")]
        ngram: usize,
        #[serde(default)]
        seed: u64,
    },
    /// Remote embeddings endpoint speaking `{model, input} ->
    /// {data: [{embedding}]}`. The bearer token is read from `auth_env`.
    External {
        endpoint: String,
        model: String,
        dimension: usize,
        auth_env: String,
        #[serde(default = "default_backoff_ms")]
        backoff_ms: u64,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
    },
}

fn default_ngram() -> usize {
    3
}

fn default_backoff_ms() -> u64 {
    500
}

fn default_timeout_ms() -> u64 {
    30_000
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        EmbedderSpec::Hashing { dimension: 1536, ngram: default_ngram(), seed: 0 }
    }
}

impl EmbedderSpec {
    pub fn dimension(&self) -> usize {
        match self {
            EmbedderSpec::Hashing { dimension, .. } => *dimension,
            EmbedderSpec::External { dimension, .. } => *dimension,
        }
    }
}

/// Ready-to-use embedder built from an [`EmbedderSpec`].
pub enum Embedder {
    Hashing { dimension: usize, ngram: usize, seed: u64 },
    External(ExternalEmbedder),
}

pub struct ExternalEmbedder {
    client: JsonClient,
    endpoint: String,
    model: String,
    dimension: usize,
    token: String,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: Vec<&'a str>,
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedRow>,
}

#[derive(Deserialize)]
struct EmbedRow {
    embedding: Vec<f64>,
}

impl Embedder {
    pub fn from_spec(spec: &EmbedderSpec) -> Result<Self> {
        match spec {
            EmbedderSpec::Hashing { dimension, ngram, seed } => {
                if *dimension == 0 {
                    return Err(Error::Config("embedder dimension must be positive".into()));
                }
                if *ngram == 0 {
                    return Err(Error::Config("embedder ngram must be positive".into()));
                }
                Ok(Embedder::Hashing { dimension: *dimension, ngram: *ngram, seed: *seed })
            }
            EmbedderSpec::External {
                endpoint,
                model,
                dimension,
                auth_env,
                backoff_ms,
                timeout_ms,
            } => {
                let token = std::env::var(auth_env).map_err(|_| {
                    Error::Config(format!("embedder auth env var {auth_env} is not set"))
                })?;
                Ok(Embedder::External(ExternalEmbedder {
                    client: JsonClient::new(
                        3,
                        Duration::from_millis(*backoff_ms),
                        Duration::from_millis(*timeout_ms),
                    ),
                    endpoint: endpoint.clone(),
                    model: model.clone(),
                    dimension: *dimension,
                    token,
                }))
            }
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Embedder::Hashing { dimension, .. } => *dimension,
            Embedder::External(ext) => ext.dimension,
        }
    }

    /// Embeds `text` into a unit-norm vector of `dimension()` entries. The
    /// zero text embeds to the zero vector.
    pub fn embed(&self, text: &str) -> Result<Vec<f64>> {
        match self {
            Embedder::Hashing { dimension, ngram, seed } => {
                Ok(hashing_embed(text, *dimension, *ngram, *seed))
            }
            Embedder::External(ext) => ext.embed(text),
        }
    }
}

impl ExternalEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let request = EmbedRequest { model: &self.model, input: vec![text] };
        let response: EmbedResponse = self.client.post_json(
            &self.endpoint,
            &[("authorization", format!("Bearer {}", self.token))],
            &request,
        )?;
        let row = response
            .data
            .into_iter()
            .next()
            .ok_or_else(|| Error::Protocol("embeddings response has no rows".into()))?;
        if row.embedding.len() != self.dimension {
            return Err(Error::Protocol(format!(
                "embedding length {} does not match configured dimension {}",
                row.embedding.len(),
                self.dimension
            )));
        }
        Ok(row.embedding)
    }
}

/// FNV-1a over the seed and the gram bytes.
fn gram_hash(seed: u64, gram: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for b in seed.to_le_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    for &b in gram {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn hashing_embed(text: &str, dimension: usize, ngram: usize, seed: u64) -> Vec<f64> {
    let mut out = vec![0.0; dimension];
    let lower = text.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    if chars.is_empty() {
        return out;
    }
    let mut gram = String::new();
    let add = |gram: &str, out: &mut Vec<f64>| {
        let h = gram_hash(seed, gram.as_bytes());
        let bucket = (h % dimension as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        out[bucket] += sign;
    };
    if chars.len() < ngram {
        add(&lower, &mut out);
    } else {
        for window in chars.windows(ngram) {
            gram.clear();
            gram.extend(window.iter());
            add(&gram, &mut out);
        }
    }
    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut out {
            *v /= norm;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::httpx::mock::MockServer;
    use crate::rng::stream;

    #[test]
    fn token_count_rounds_up() {
        assert_eq!(approx_token_count(""), 0);
        assert_eq!(approx_token_count("abcd"), 1);
        assert_eq!(approx_token_count("hello"), 2);
        // Multibyte chars count by bytes, not chars.
        assert_eq!(approx_token_count("日本語"), 3);
    }

    #[test]
    fn history_tail_keeps_suffix() {
        let text = "0123456789".repeat(100);
        let tail = history_tail(&text, 5);
        assert_eq!(tail.len(), 20);
        assert!(text.ends_with(tail));
        assert_eq!(history_tail("short", 100), "short");
    }

    #[test]
    fn history_tail_respects_char_boundaries() {
        let text = format!("{}見", "語".repeat(50));
        let tail = history_tail(&text, 1);
        assert!(tail.chars().count() >= 1);
        assert!(text.ends_with(tail));
    }

    #[test]
    fn meta_vector_layout() {
        let meta = MetaVector::new(AgentRole::Engineer, 0.25, true);
        assert_eq!(meta.as_slice(), &[0.0, 0.0, 1.0, 0.0, 0.25, 1.0]);
        assert_eq!(meta.role(), AgentRole::Engineer);
        assert!(meta.risk_flag());
    }

    #[test]
    fn meta_vector_rejects_broken_one_hot() {
        assert!(MetaVector::try_from([1.0, 1.0, 0.0, 0.0, 0.0, 0.0]).is_err());
        assert!(MetaVector::try_from([0.0, 0.0, 0.0, 0.0, 0.5, 0.0]).is_err());
        assert!(MetaVector::try_from([0.0, 1.0, 0.0, 0.0, 1.5, 0.0]).is_err());
        assert!(MetaVector::try_from([0.0, 1.0, 0.0, 0.0, 0.5, 0.3]).is_err());
        assert!(MetaVector::try_from([0.0, 1.0, 0.0, 0.0, 0.5, 1.0]).is_ok());
    }

    #[test]
    fn meta_vector_serializes_as_array() {
        let meta = MetaVector::new(AgentRole::Architect, 0.5, false);
        let json = serde_json::to_string(&meta).unwrap();
        assert_eq!(json, "[0.0,1.0,0.0,0.0,0.5,0.0]");
        let back: MetaVector = serde_json::from_str(&json).unwrap();
        assert_eq!(back, meta);
    }

    #[test]
    fn extract_meta_known_case() {
        let lex = RiskLexicon::default();
        let meta = extract_meta(
            AgentRole::Engineer,
            4000,
            "debug the asyncio crawler",
            &lex,
            DEFAULT_CONTEXT_CAP,
        );
        assert_eq!(meta.as_slice(), &[0.0, 0.0, 1.0, 0.0, 0.48828125, 1.0]);
    }

    #[test]
    fn extract_meta_saturates_at_cap() {
        let lex = RiskLexicon::default();
        let meta = extract_meta(AgentRole::Reviewer, 20_000, "plain text", &lex, 8192);
        assert_eq!(meta.context_len_norm(), 1.0);
        assert!(!meta.risk_flag());
    }

    #[test]
    fn risk_match_is_case_insensitive() {
        let lex = RiskLexicon::default();
        assert!(lex.matches("found a RACE CONDITION in the queue"));
        assert!(lex.matches("Runge-Kutta integration"));
        assert!(!lex.matches("sort a list of names"));
    }

    #[test]
    fn simulate_meta_outputs_are_valid() {
        let lex = RiskLexicon::default();
        let mut rng = stream(9, "simulate");
        for i in 0..10_000 {
            let d = (i % 11) as f64 / 10.0;
            let meta = simulate_meta(d, "task text", &lex, &mut rng);
            let arr: [f64; META_DIM] = meta.clone().into();
            assert!(MetaVector::try_from(arr).is_ok());
        }
    }

    #[test]
    fn simulate_meta_easy_contexts_stay_short() {
        let lex = RiskLexicon::default();
        let mut rng = stream(10, "simulate");
        let mut contexts: Vec<f64> = (0..1000)
            .map(|_| simulate_meta(0.0, "task", &lex, &mut rng).context_len_norm())
            .collect();
        contexts.sort_by(f64::total_cmp);
        assert!(contexts[989] < 0.3, "p99 = {}", contexts[989]);
    }

    #[test]
    fn simulate_meta_scales_with_difficulty() {
        let lex = RiskLexicon::default();
        let mut rng = stream(11, "simulate");
        let stats = |d: f64, rng: &mut rand_chacha::ChaCha8Rng| {
            let mut ctx = 0.0;
            let mut risk = 0.0;
            let mut exec_roles = 0.0;
            for _ in 0..2000 {
                let m = simulate_meta(d, "task", &lex, rng);
                ctx += m.context_len_norm();
                risk += if m.risk_flag() { 1.0 } else { 0.0 };
                if matches!(m.role(), AgentRole::Engineer | AgentRole::Reviewer) {
                    exec_roles += 1.0;
                }
            }
            (ctx / 2000.0, risk / 2000.0, exec_roles / 2000.0)
        };
        let (ctx_easy, risk_easy, exec_easy) = stats(0.1, &mut rng);
        let (ctx_hard, risk_hard, exec_hard) = stats(0.9, &mut rng);
        assert!(ctx_hard > ctx_easy + 0.2, "{ctx_easy} vs {ctx_hard}");
        assert!(risk_hard > risk_easy + 0.2, "{risk_easy} vs {risk_hard}");
        assert!(exec_hard > exec_easy + 0.2, "{exec_easy} vs {exec_hard}");
    }

    #[test]
    fn simulate_meta_keyword_always_flags() {
        let lex = RiskLexicon::default();
        let mut rng = stream(12, "simulate");
        let meta = simulate_meta(1.0, "fix the RACE CONDITION", &lex, &mut rng);
        assert!(meta.risk_flag());
    }

    #[test]
    fn hashing_embedder_is_unit_norm_and_deterministic() {
        let spec = EmbedderSpec::Hashing { dimension: 256, ngram: 3, seed: 7 };
        let embedder = Embedder::from_spec(&spec).unwrap();
        let a = embedder.embed("implement a web crawler").unwrap();
        let b = embedder.embed("implement a web crawler").unwrap();
        assert_eq!(a, b);
        let norm: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        assert_eq!(a.len(), 256);
    }

    #[test]
    fn hashing_embedder_separates_texts() {
        let embedder = Embedder::from_spec(&EmbedderSpec::default()).unwrap();
        let cos = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let aaa = embedder.embed("aaaa aaa aaaa").unwrap();
        let bbb = embedder.embed("bbbb bbb bbbb").unwrap();
        assert!(cos(&aaa, &bbb) < 0.99);
        let fwd = embedder.embed("alpha beta").unwrap();
        let rev = embedder.embed("beta alpha").unwrap();
        assert!(cos(&fwd, &rev) < 0.99);
    }

    #[test]
    fn hashing_embedder_handles_degenerate_text() {
        let embedder = Embedder::from_spec(&EmbedderSpec::default()).unwrap();
        let empty = embedder.embed("").unwrap();
        assert!(empty.iter().all(|&v| v == 0.0));
        let short = embedder.embed("ab").unwrap();
        let norm: f64 = short.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn external_embedder_round_trip() {
        let embedding: Vec<f64> = (0..8).map(|i| i as f64 / 10.0).collect();
        let body = serde_json::json!({ "data": [ { "embedding": embedding } ] }).to_string();
        let server = MockServer::serve(vec![(200, body)]);
        std::env::set_var("TEST_EMBED_TOKEN", "sekrit");
        let spec = EmbedderSpec::External {
            endpoint: server.url.clone(),
            model: "embed-small".into(),
            dimension: 8,
            auth_env: "TEST_EMBED_TOKEN".into(),
            backoff_ms: 1,
            timeout_ms: 5000,
        };
        let embedder = Embedder::from_spec(&spec).unwrap();
        let out = embedder.embed("hello").unwrap();
        assert_eq!(out.len(), 8);
        assert_eq!(out[3], 0.3);
        let reqs = server.join();
        assert!(reqs[0].head.to_lowercase().contains("authorization: bearer sekrit"));
        let body: serde_json::Value = serde_json::from_str(&reqs[0].body).unwrap();
        assert_eq!(body["model"], "embed-small");
        assert_eq!(body["input"][0], "hello");
    }

    #[test]
    fn external_embedder_retries_then_succeeds() {
        let body = serde_json::json!({ "data": [ { "embedding": [1.0, 0.0] } ] }).to_string();
        let server = MockServer::serve(vec![(500, "err".into()), (200, body)]);
        std::env::set_var("TEST_EMBED_TOKEN2", "x");
        let spec = EmbedderSpec::External {
            endpoint: server.url.clone(),
            model: "m".into(),
            dimension: 2,
            auth_env: "TEST_EMBED_TOKEN2".into(),
            backoff_ms: 1,
            timeout_ms: 5000,
        };
        let embedder = Embedder::from_spec(&spec).unwrap();
        assert_eq!(embedder.embed("x").unwrap(), vec![1.0, 0.0]);
        assert_eq!(server.join().len(), 2);
    }

    #[test]
    fn external_embedder_rejects_wrong_dimension() {
        let body = serde_json::json!({ "data": [ { "embedding": [1.0, 0.0] } ] }).to_string();
        let server = MockServer::serve(vec![(200, body)]);
        std::env::set_var("TEST_EMBED_TOKEN3", "x");
        let spec = EmbedderSpec::External {
            endpoint: server.url.clone(),
            model: "m".into(),
            dimension: 4,
            auth_env: "TEST_EMBED_TOKEN3".into(),
            backoff_ms: 1,
            timeout_ms: 5000,
        };
        let err = Embedder::from_spec(&spec).unwrap().embed("x").unwrap_err();
        assert!(matches!(err, Error::Protocol(_)), "got {err:?}");
        server.join();
    }

    #[test]
    fn external_embedder_requires_token_env() {
        std::env::remove_var("TEST_EMBED_MISSING");
        let spec = EmbedderSpec::External {
            endpoint: "http://127.0.0.1:1/".into(),
            model: "m".into(),
            dimension: 4,
            auth_env: "TEST_EMBED_MISSING".into(),
            backoff_ms: 1,
            timeout_ms: 100,
        };
        assert!(matches!(Embedder::from_spec(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn embedder_spec_default_shape() {
        let spec = EmbedderSpec::default();
        assert_eq!(spec.dimension(), 1536);
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"kind\":\"hashing\""), "{json}");
    }
}
