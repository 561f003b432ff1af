//! Layered run configuration: built-in defaults, then a JSON config file,
//! then `CASTER_*` environment variables, then namespaced flags. Unknown
//! keys are rejected at every layer with a nearest-key hint.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use caster_core::backends::{ChatEndpoint, ModelRef, PricingTable, SimBackendConfig, TierBinding};
use caster_core::coldstart::AugmentationConfig;
use caster_core::features::{Embedder, EmbedderSpec, RiskLexicon};
use caster_core::router::RouterConfig;
use caster_core::training::TrainConfig;
use caster_core::trajectory::TaskGenConfig;
use caster_core::{Error, Result};

/// Scalar type a configuration key accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    U64,
    U32,
    Usize,
    F64,
    Str,
}

/// Every known key as (section, key, kind); section "" is top level.
/// Flags are `--section.key-in-kebab`, env vars `CASTER_SECTION_KEY`.
pub const REGISTRY: &[(&str, &str, Kind)] = &[
    ("", "seed", Kind::U64),
    ("router", "d_in", Kind::Usize),
    ("router", "d_meta", Kind::Usize),
    ("router", "d_sem", Kind::Usize),
    ("router", "d_struct", Kind::Usize),
    ("router", "d_fuse", Kind::Usize),
    ("router", "dropout_p", Kind::F64),
    ("router", "threshold", Kind::F64),
    ("train", "pretrain_epochs", Kind::U32),
    ("train", "pretrain_lr", Kind::F64),
    ("train", "finetune_epochs", Kind::U32),
    ("train", "finetune_lr", Kind::F64),
    ("train", "decay_factor", Kind::F64),
    ("train", "decay_every", Kind::U32),
    ("train", "batch_size", Kind::Usize),
    ("train", "replay_fraction", Kind::F64),
    ("taskgen", "hard_prob", Kind::F64),
    ("taskgen", "temperature", Kind::F64),
    ("taskgen", "history_window", Kind::Usize),
    ("augment", "min_variants", Kind::Usize),
    ("augment", "max_variants", Kind::Usize),
    ("augment", "noise_bound", Kind::F64),
    ("embedder", "kind", Kind::Str),
    ("embedder", "dimension", Kind::Usize),
    ("embedder", "ngram", Kind::Usize),
    ("embedder", "model", Kind::Str),
    ("embedder", "endpoint", Kind::Str),
    ("embedder", "auth_env", Kind::Str),
    ("backend", "kind", Kind::Str),
    ("backend", "endpoint", Kind::Str),
    ("backend", "auth_env", Kind::Str),
    ("backend", "backoff_ms", Kind::U64),
    ("backend", "timeout_ms", Kind::U64),
    ("binding", "strong", Kind::Str),
    ("binding", "weak", Kind::Str),
    ("runtime", "breaker_max", Kind::U32),
    ("runtime", "history_tail_tokens", Kind::Usize),
    ("runtime", "context_cap", Kind::Usize),
    ("pricing", "file", Kind::Str),
];

/// Flag name for a registry entry, e.g. `taskgen.hard-prob`.
pub fn flag_name(section: &str, key: &str) -> String {
    let kebab = key.replace('_', "-");
    if section.is_empty() {
        kebab
    } else {
        format!("{section}.{kebab}")
    }
}

/// Environment variable for a registry entry, e.g. `CASTER_TASKGEN_HARD_PROB`.
pub fn env_name(section: &str, key: &str) -> String {
    if section.is_empty() {
        format!("CASTER_{}", key.to_uppercase())
    } else {
        format!("CASTER_{}_{}", section.to_uppercase(), key.to_uppercase())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RouterSection {
    pub d_in: usize,
    pub d_meta: usize,
    pub d_sem: usize,
    pub d_struct: usize,
    pub d_fuse: usize,
    pub dropout_p: f64,
    pub threshold: f64,
}

impl Default for RouterSection {
    fn default() -> Self {
        let cfg = RouterConfig::default();
        RouterSection {
            d_in: cfg.d_in,
            d_meta: cfg.d_meta,
            d_sem: cfg.d_sem,
            d_struct: cfg.d_struct,
            d_fuse: cfg.d_fuse,
            dropout_p: cfg.dropout_p,
            threshold: cfg.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub pretrain_epochs: u32,
    pub pretrain_lr: f64,
    pub finetune_epochs: u32,
    pub finetune_lr: f64,
    pub decay_factor: f64,
    pub decay_every: u32,
    pub batch_size: usize,
    pub replay_fraction: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let cfg = TrainConfig::default();
        TrainSection {
            pretrain_epochs: cfg.pretrain_epochs,
            pretrain_lr: cfg.pretrain_lr,
            finetune_epochs: cfg.finetune_epochs,
            finetune_lr: cfg.finetune_lr,
            decay_factor: cfg.decay_factor,
            decay_every: cfg.decay_every,
            batch_size: cfg.batch_size,
            replay_fraction: cfg.replay_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskgenSection {
    pub hard_prob: f64,
    pub temperature: f64,
    pub history_window: usize,
}

impl Default for TaskgenSection {
    fn default() -> Self {
        let cfg = TaskGenConfig::default();
        TaskgenSection {
            hard_prob: cfg.hard_mode_prob,
            temperature: cfg.temperature,
            history_window: cfg.history_window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentSection {
    pub min_variants: usize,
    pub max_variants: usize,
    pub noise_bound: f64,
}

impl Default for AugmentSection {
    fn default() -> Self {
        let cfg = AugmentationConfig::default();
        AugmentSection {
            min_variants: cfg.min_variants,
            max_variants: cfg.max_variants,
            noise_bound: cfg.noise_bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbedderSection {
    /// "hashing" or "external".
    pub kind: String,
    /// 0 means: follow the router's input dimension.
    pub dimension: usize,
    pub ngram: usize,
    pub model: String,
    pub endpoint: String,
    pub auth_env: String,
}

impl Default for EmbedderSection {
    fn default() -> Self {
        EmbedderSection {
            kind: "hashing".into(),
            dimension: 0,
            ngram: 3,
            model: "text-embedding-3-small".into(),
            endpoint: String::new(),
            auth_env: "EMBEDDER_API_KEY".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendSection {
    /// "sim" or "http".
    pub kind: String,
    pub endpoint: String,
    pub auth_env: String,
    pub backoff_ms: u64,
    pub timeout_ms: u64,
}

impl Default for BackendSection {
    fn default() -> Self {
        BackendSection {
            kind: "sim".into(),
            endpoint: String::new(),
            auth_env: "CHAT_API_KEY".into(),
            backoff_ms: 500,
            timeout_ms: 60_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BindingSection {
    /// "provider/model" for the strong tier.
    pub strong: String,
    /// "provider/model" for the weak tier.
    pub weak: String,
}

impl Default for BindingSection {
    fn default() -> Self {
        BindingSection { strong: "openai/gpt-4o".into(), weak: "openai/gpt-4o-mini".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RuntimeSection {
    pub breaker_max: u32,
    pub history_tail_tokens: usize,
    pub context_cap: usize,
}

impl Default for RuntimeSection {
    fn default() -> Self {
        RuntimeSection { breaker_max: 3, history_tail_tokens: 2000, context_cap: 8192 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PricingSection {
    /// Path to a pricing JSON file; empty uses the built-in table.
    pub file: String,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct AppConfig {
    pub seed: Seed,
    pub router: RouterSection,
    pub train: TrainSection,
    pub taskgen: TaskgenSection,
    pub augment: AugmentSection,
    pub embedder: EmbedderSection,
    pub backend: BackendSection,
    pub binding: BindingSection,
    pub runtime: RuntimeSection,
    pub pricing: PricingSection,
}

/// Newtype so the top-level default is 42, not 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Default for Seed {
    fn default() -> Self {
        Seed(42)
    }
}

impl AppConfig {
    pub fn seed(&self) -> u64 {
        self.seed.0
    }

    pub fn router_config(&self) -> RouterConfig {
        RouterConfig {
            d_in: self.router.d_in,
            d_meta: self.router.d_meta,
            d_sem: self.router.d_sem,
            d_struct: self.router.d_struct,
            d_fuse: self.router.d_fuse,
            dropout_p: self.router.dropout_p,
            threshold: self.router.threshold,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            pretrain_epochs: self.train.pretrain_epochs,
            pretrain_lr: self.train.pretrain_lr,
            finetune_epochs: self.train.finetune_epochs,
            finetune_lr: self.train.finetune_lr,
            decay_factor: self.train.decay_factor,
            decay_every: self.train.decay_every,
            batch_size: self.train.batch_size,
            replay_fraction: self.train.replay_fraction,
            seed: self.seed(),
        }
    }

    pub fn taskgen_config(&self) -> TaskGenConfig {
        TaskGenConfig {
            hard_mode_prob: self.taskgen.hard_prob,
            temperature: self.taskgen.temperature,
            history_window: self.taskgen.history_window,
            seed: self.seed(),
        }
    }

    pub fn augmentation(&self) -> AugmentationConfig {
        AugmentationConfig {
            min_variants: self.augment.min_variants,
            max_variants: self.augment.max_variants,
            noise_bound: self.augment.noise_bound,
            seed: self.seed(),
            ..AugmentationConfig::default()
        }
    }

    /// Embedder sized for `d_in` (normally the checkpoint's or the
    /// configured router's input dimension).
    pub fn embedder_for(&self, d_in: usize) -> Result<Embedder> {
        let dimension = if self.embedder.dimension == 0 { d_in } else { self.embedder.dimension };
        if dimension != d_in {
            return Err(Error::Config(format!(
                "embedder dimension {dimension} does not match the router input dimension {d_in}"
            )));
        }
        let spec = match self.embedder.kind.as_str() {
            "hashing" => EmbedderSpec::Hashing {
                dimension,
                ngram: self.embedder.ngram,
                seed: self.seed(),
            },
            "external" => {
                if self.embedder.endpoint.is_empty() {
                    return Err(Error::Config(
                        "embedder.kind is \"external\" but embedder.endpoint is empty".into(),
                    ));
                }
                EmbedderSpec::External {
                    endpoint: self.embedder.endpoint.clone(),
                    model: self.embedder.model.clone(),
                    dimension,
                    auth_env: self.embedder.auth_env.clone(),
                    backoff_ms: self.backend.backoff_ms,
                    timeout_ms: self.backend.timeout_ms,
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown embedder.kind {other:?}; expected hashing or external"
                )))
            }
        };
        Embedder::from_spec(&spec)
    }

    pub fn chat_endpoint(&self) -> Result<ChatEndpoint> {
        if self.backend.endpoint.is_empty() {
            return Err(Error::Config(
                "backend.kind is \"http\" but backend.endpoint is empty".into(),
            ));
        }
        Ok(ChatEndpoint {
            endpoint: self.backend.endpoint.clone(),
            auth_env: self.backend.auth_env.clone(),
            backoff_ms: self.backend.backoff_ms,
            timeout_ms: self.backend.timeout_ms,
        })
    }

    pub fn binding(&self) -> Result<TierBinding> {
        let parse = |label: &str, raw: &str| -> Result<ModelRef> {
            match raw.split_once('/') {
                Some((provider, model)) if !provider.is_empty() && !model.is_empty() => {
                    Ok(ModelRef::new(provider, model))
                }
                _ => Err(Error::Config(format!(
                    "binding.{label} {raw:?} must look like \"provider/model\""
                ))),
            }
        };
        Ok(TierBinding {
            strong: parse("strong", &self.binding.strong)?,
            weak: parse("weak", &self.binding.weak)?,
        })
    }

    pub fn pricing(&self) -> Result<PricingTable> {
        if self.pricing.file.is_empty() {
            Ok(PricingTable::builtin())
        } else {
            PricingTable::load(&self.pricing.file)
        }
    }

    pub fn sim_config(&self) -> SimBackendConfig {
        SimBackendConfig::with_seed(self.seed())
    }

    pub fn lexicon(&self) -> RiskLexicon {
        RiskLexicon::default()
    }

    /// Hash of the resolved configuration, recorded in run manifests.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        hex::encode(hasher.finalize())
    }
}

/// Levenshtein edit distance, for near-miss suggestions.
fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut row = vec![i + 1];
        for (j, cb) in b.iter().enumerate() {
            let cost = if ca == cb { 0 } else { 1 };
            row.push((prev[j] + cost).min(prev[j + 1] + 1).min(row[j] + 1));
        }
        prev = row;
    }
    prev[b.len()]
}

/// Closest candidate within an edit distance worth suggesting.
fn nearest<'a>(unknown: &str, candidates: impl Iterator<Item = &'a str>) -> Option<&'a str> {
    candidates
        .map(|c| (edit_distance(unknown, c), c))
        .min()
        .filter(|(d, _)| *d <= 3)
        .map(|(_, c)| c)
}

fn unknown_key_error(path: &str, candidates: impl Iterator<Item = String>) -> Error {
    let owned: Vec<String> = candidates.collect();
    let short = path.rsplit('.').next().unwrap_or(path);
    match nearest(short, owned.iter().map(|s| s.rsplit('.').next().unwrap_or(s))) {
        Some(hit) => {
            let full = owned
                .iter()
                .find(|c| c.rsplit('.').next().unwrap_or(c) == hit)
                .cloned()
                .unwrap_or_else(|| hit.to_string());
            Error::Config(format!("unknown config key \"{path}\"; did you mean \"{full}\"?"))
        }
        None => Error::Config(format!("unknown config key \"{path}\"")),
    }
}

fn sections() -> Vec<&'static str> {
    let mut out: Vec<&'static str> = Vec::new();
    for (section, _, _) in REGISTRY {
        if !section.is_empty() && !out.contains(section) {
            out.push(section);
        }
    }
    out
}

fn keys_in(section: &str) -> impl Iterator<Item = &'static str> + '_ {
    REGISTRY.iter().filter(move |(s, _, _)| *s == section).map(|(_, k, _)| *k)
}

/// Validates a parsed config file against the registry before merging.
fn check_file_keys(root: &Value) -> Result<()> {
    let Some(obj) = root.as_object() else {
        return Err(Error::Config("config file must hold a JSON object".into()));
    };
    let top: Vec<String> = keys_in("")
        .map(str::to_string)
        .chain(sections().into_iter().map(str::to_string))
        .collect();
    for (key, value) in obj {
        if keys_in("").any(|k| k == key) {
            continue;
        }
        if !sections().contains(&key.as_str()) {
            return Err(unknown_key_error(key, top.iter().cloned()));
        }
        let Some(section_obj) = value.as_object() else {
            return Err(Error::Config(format!("config section \"{key}\" must be an object")));
        };
        for sub in section_obj.keys() {
            if !keys_in(key).any(|k| k == sub) {
                let candidates = keys_in(key).map(|k| format!("{key}.{k}"));
                return Err(unknown_key_error(&format!("{key}.{sub}"), candidates));
            }
        }
    }
    Ok(())
}

fn merge(base: &mut Value, layer: &Value) {
    if let (Some(base_obj), Some(layer_obj)) = (base.as_object_mut(), layer.as_object()) {
        for (key, value) in layer_obj {
            match base_obj.get_mut(key) {
                Some(slot) if slot.is_object() && value.is_object() => merge(slot, value),
                Some(slot) => *slot = value.clone(),
                None => {
                    base_obj.insert(key.clone(), value.clone());
                }
            }
        }
    }
}

fn parse_scalar(kind: Kind, raw: &str, path: &str) -> Result<Value> {
    let bad = |what: &str| {
        Error::Config(format!("config key \"{path}\": {raw:?} is not a valid {what}"))
    };
    Ok(match kind {
        Kind::U64 | Kind::U32 | Kind::Usize => {
            Value::from(raw.parse::<u64>().map_err(|_| bad("non-negative integer"))?)
        }
        Kind::F64 => {
            let v: f64 = raw.parse().map_err(|_| bad("number"))?;
            Value::from(v)
        }
        Kind::Str => Value::String(raw.to_string()),
    })
}

fn set_key(base: &mut Value, section: &str, key: &str, value: Value) {
    if section.is_empty() {
        base[key] = value;
    } else {
        base[section][key] = value;
    }
}

/// Pure resolution core. `file` is (display name, contents); `env` and
/// `flags` are raw key/value pairs (env uses `CASTER_*` names, flags use
/// `section.key-in-kebab` names).
pub fn resolve_layers(
    file: Option<(&str, &str)>,
    env: &[(String, String)],
    flags: &[(String, String)],
) -> Result<AppConfig> {
    let mut base = serde_json::to_value(AppConfig::default()).expect("defaults serialize");

    if let Some((name, contents)) = file {
        let parsed: Value = serde_json::from_str(contents)
            .map_err(|err| Error::Format(format!("config file {name}: {err}")))?;
        check_file_keys(&parsed)?;
        merge(&mut base, &parsed);
    }

    for (var, raw) in env {
        let entry = REGISTRY.iter().find(|(s, k, _)| env_name(s, k) == *var);
        match entry {
            Some((section, key, kind)) => {
                let value = parse_scalar(*kind, raw, var)?;
                set_key(&mut base, section, key, value);
            }
            None => {
                let candidates = REGISTRY.iter().map(|(s, k, _)| env_name(s, k));
                return Err(unknown_key_error(var, candidates));
            }
        }
    }

    for (flag, raw) in flags {
        let entry = REGISTRY.iter().find(|(s, k, _)| flag_name(s, k) == *flag);
        match entry {
            Some((section, key, kind)) => {
                let value = parse_scalar(*kind, raw, flag)?;
                set_key(&mut base, section, key, value);
            }
            None => {
                let candidates = REGISTRY.iter().map(|(s, k, _)| flag_name(s, k));
                return Err(unknown_key_error(flag, candidates));
            }
        }
    }

    serde_json::from_value(base).map_err(|err| Error::Config(format!("config: {err}")))
}

/// Gathers the real file/env/flag layers and resolves them.
pub fn resolve(
    config_flag: Option<&str>,
    flag_values: &[(String, String)],
) -> Result<AppConfig> {
    let file_path = config_flag
        .map(str::to_string)
        .or_else(|| std::env::var("CASTER_CONFIG").ok().filter(|v| !v.is_empty()));
    let file_text = match &file_path {
        Some(path) => Some((
            path.clone(),
            std::fs::read_to_string(Path::new(path))
                .map_err(|err| Error::io(path.clone(), err))?,
        )),
        None => None,
    };

    let mut env_pairs: Vec<(String, String)> = std::env::vars()
        .filter(|(name, _)| name.starts_with("CASTER_") && name != "CASTER_CONFIG")
        .collect();
    env_pairs.sort();

    resolve_layers(
        file_text.as_ref().map(|(name, text)| (name.as_str(), text.as_str())),
        &env_pairs,
        flag_values,
    )
}

/// Documented default configuration as pretty JSON (for `--help` docs and
/// the README schema).
pub fn default_config_json() -> String {
    let mut text =
        serde_json::to_string_pretty(&AppConfig::default()).expect("defaults serialize");
    text.push('\n');
    text
}

/// Known config keys mapped to their flag spellings, for CLI construction.
pub fn flag_registry() -> Vec<(String, Kind)> {
    REGISTRY.iter().map(|(s, k, kind)| (flag_name(s, k), *kind)).collect()
}

/// Human-readable digest map type used by manifests.
pub type DigestMap = BTreeMap<String, String>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_published_constants() {
        let cfg = AppConfig::default();
        assert_eq!(cfg.seed(), 42);
        assert_eq!(cfg.router.threshold, 0.5);
        assert_eq!(cfg.taskgen.hard_prob, 0.7);
        assert_eq!(cfg.train.decay_factor, 0.5);
        assert_eq!(cfg.train.decay_every, 50);
        assert_eq!(cfg.train.pretrain_lr, 1e-3);
        assert_eq!(cfg.train.finetune_lr, 1e-4);
        assert_eq!(cfg.router.d_in, 1536);
        assert_eq!(cfg.runtime.history_tail_tokens, 2000);
        let resolved = resolve_layers(None, &[], &[]).unwrap();
        assert_eq!(resolved, cfg);
    }

    #[test]
    fn precedence_is_flags_over_env_over_file() {
        let file = r#"{"router": {"threshold": 0.4}, "seed": 7}"#;
        let cfg = resolve_layers(Some(("test.json", file)), &[], &[]).unwrap();
        assert_eq!(cfg.router.threshold, 0.4);
        assert_eq!(cfg.seed(), 7);

        let env = vec![("CASTER_ROUTER_THRESHOLD".to_string(), "0.55".to_string())];
        let cfg = resolve_layers(Some(("test.json", file)), &env, &[]).unwrap();
        assert_eq!(cfg.router.threshold, 0.55);

        let flags = vec![("router.threshold".to_string(), "0.6".to_string())];
        let cfg = resolve_layers(Some(("test.json", file)), &env, &flags).unwrap();
        assert_eq!(cfg.router.threshold, 0.6);
        assert_eq!(cfg.seed(), 7, "untouched keys keep the file layer");
    }

    #[test]
    fn unknown_file_key_suggests_the_nearest() {
        let file = r#"{"router": {"treshold": 0.4}}"#;
        let err = resolve_layers(Some(("c.json", file)), &[], &[]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("router.treshold"), "{msg}");
        assert!(msg.contains("router.threshold"), "{msg}");

        let file = r#"{"ruter": {"threshold": 0.4}}"#;
        let err = resolve_layers(Some(("c.json", file)), &[], &[]).unwrap_err();
        assert!(err.to_string().contains("router"), "{err}");
    }

    #[test]
    fn unknown_env_and_flag_keys_are_rejected() {
        let env = vec![("CASTER_ROUTER_TRESHOLD".to_string(), "0.5".to_string())];
        let err = resolve_layers(None, &env, &[]).unwrap_err();
        assert!(err.to_string().contains("CASTER_ROUTER_THRESHOLD"), "{err}");

        let flags = vec![("router.treshold".to_string(), "0.5".to_string())];
        let err = resolve_layers(None, &[], &flags).unwrap_err();
        assert!(err.to_string().contains("router.threshold"), "{err}");
    }

    #[test]
    fn type_mismatches_name_the_key() {
        let flags = vec![("train.batch-size".to_string(), "lots".to_string())];
        let err = resolve_layers(None, &[], &flags).unwrap_err();
        assert!(err.to_string().contains("train.batch-size"), "{err}");
        assert!(matches!(err, Error::Config(_)));

        let file = r#"{"train": {"batch_size": "lots"}}"#;
        let err = resolve_layers(Some(("c.json", file)), &[], &[]).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn resolution_is_pure() {
        let file = r#"{"taskgen": {"hard_prob": 0.9}}"#;
        let env = vec![("CASTER_SEED".to_string(), "9".to_string())];
        let flags = vec![("train.pretrain-epochs".to_string(), "5".to_string())];
        let a = resolve_layers(Some(("c.json", file)), &env, &flags).unwrap();
        let b = resolve_layers(Some(("c.json", file)), &env, &flags).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.taskgen.hard_prob, 0.9);
        assert_eq!(a.seed(), 9);
        assert_eq!(a.train.pretrain_epochs, 5);
        assert_eq!(a.config_hash(), b.config_hash());
        assert_ne!(a.config_hash(), AppConfig::default().config_hash());
    }

    #[test]
    fn binding_strings_parse_to_model_refs() {
        let cfg = AppConfig::default();
        let binding = cfg.binding().unwrap();
        assert_eq!(binding.strong.provider, "openai");
        assert_eq!(binding.strong.model, "gpt-4o");

        let mut cfg = AppConfig::default();
        cfg.binding.weak = "qwen-plus".into();
        assert!(cfg.binding().is_err());
    }

    #[test]
    fn embedder_dimension_follows_or_checks_d_in() {
        let cfg = AppConfig::default();
        let embedder = cfg.embedder_for(64).unwrap();
        assert_eq!(embedder.dimension(), 64);

        let mut pinned = AppConfig::default();
        pinned.embedder.dimension = 32;
        assert!(pinned.embedder_for(64).is_err());
        assert_eq!(pinned.embedder_for(32).unwrap().dimension(), 32);

        let mut external = AppConfig::default();
        external.embedder.kind = "external".into();
        assert!(external.embedder_for(16).is_err(), "external needs an endpoint");
        external.embedder.endpoint = "http://127.0.0.1:1/v1/embeddings".into();
        std::env::set_var("EMBEDDER_API_KEY", "test-token");
        assert!(external.embedder_for(16).is_ok());
        std::env::remove_var("EMBEDDER_API_KEY");
    }

    #[test]
    fn registry_names_are_unique_and_well_formed() {
        let mut flags: Vec<String> = Vec::new();
        let mut envs: Vec<String> = Vec::new();
        for (section, key, _) in REGISTRY {
            let flag = flag_name(section, key);
            let env = env_name(section, key);
            assert!(!flags.contains(&flag), "duplicate flag {flag}");
            assert!(!envs.contains(&env), "duplicate env {env}");
            flags.push(flag);
            envs.push(env);
        }
        assert!(flags.contains(&"taskgen.hard-prob".to_string()));
        assert!(flags.contains(&"router.threshold".to_string()));
        assert!(flags.contains(&"backend.kind".to_string()));
    }
}
