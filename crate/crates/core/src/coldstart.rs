//! Pretraining dataset construction: tiered seed tasks, phrasing
//! augmentation with uniform label noise, simulated metadata, and the
//! shipped seed corpus.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use rand::seq::index::sample as index_sample;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{simulate_meta, Embedder, MetaVector, RiskLexicon};
use crate::rng::{stream, substream};
use crate::task::Domain;

/// Difficulty tier of a seed task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Easy,
    Medium,
    Hard,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Easy, Tier::Medium, Tier::Hard];

    /// Soft routing label for the tier: Easy 0.1, Medium 0.5, Hard 0.9.
    pub fn base_label(&self) -> f64 {
        match self {
            Tier::Easy => 0.1,
            Tier::Medium => 0.5,
            Tier::Hard => 0.9,
        }
    }

    /// Difficulty fed to metadata simulation; same scale as the label.
    pub fn difficulty(&self) -> f64 {
        self.base_label()
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Tier::Easy => "easy",
            Tier::Medium => "medium",
            Tier::Hard => "hard",
        };
        f.write_str(name)
    }
}

/// One authored seed task. `base_label` is pinned to the tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SeedTaskWire", into = "SeedTaskWire")]
pub struct SeedTask {
    pub text: String,
    pub tier: Tier,
    base_label: f64,
    pub domain: Domain,
}

impl SeedTask {
    pub fn new(text: impl Into<String>, tier: Tier, domain: Domain) -> Self {
        SeedTask { text: text.into(), tier, base_label: tier.base_label(), domain }
    }

    pub fn base_label(&self) -> f64 {
        self.base_label
    }
}

#[derive(Clone, Serialize, Deserialize)]
struct SeedTaskWire {
    text: String,
    tier: Tier,
    base_label: f64,
    domain: Domain,
}

impl TryFrom<SeedTaskWire> for SeedTask {
    type Error = String;

    fn try_from(wire: SeedTaskWire) -> std::result::Result<Self, String> {
        if wire.base_label != wire.tier.base_label() {
            return Err(format!(
                "seed {:?}: base_label {} does not match tier {} (expected {})",
                wire.text,
                wire.base_label,
                wire.tier,
                wire.tier.base_label()
            ));
        }
        Ok(SeedTask {
            text: wire.text,
            tier: wire.tier,
            base_label: wire.base_label,
            domain: wire.domain,
        })
    }
}

impl From<SeedTask> for SeedTaskWire {
    fn from(seed: SeedTask) -> Self {
        SeedTaskWire {
            text: seed.text,
            tier: seed.tier,
            base_label: seed.base_label,
            domain: seed.domain,
        }
    }
}

/// One labeled training sample. The embedding is optional on disk so
/// datasets can be stored text-only and embedded lazily.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub text: String,
    pub label: f64,
    #[serde(rename = "meta")]
    pub v_meta: MetaVector,
    #[serde(rename = "embedding", default, skip_serializing_if = "Option::is_none")]
    pub x_sem: Option<Vec<f64>>,
}

/// Phrasing-augmentation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationConfig {
    pub min_variants: usize,
    pub max_variants: usize,
    pub prefixes: Vec<String>,
    pub suffixes: Vec<String>,
    pub noise_bound: f64,
    pub seed: u64,
}

const DEFAULT_PREFIXES: [&str; 6] = [
    "Write a Python script to",
    "Implement a small program that will",
    "Put together a working solution to",
    "As the assigned engineer, handle this request:",
    "Complete the following task:",
    "We need you to",
];

const DEFAULT_SUFFIXES: [&str; 6] = [
    "and include unit tests.",
    "with clear error handling.",
    "and explain the approach briefly.",
    "keeping the code easy to review.",
    "without adding external dependencies.",
    "and note any edge cases.",
];

impl Default for AugmentationConfig {
    fn default() -> Self {
        AugmentationConfig {
            min_variants: 4,
            max_variants: 6,
            prefixes: DEFAULT_PREFIXES.iter().map(|s| s.to_string()).collect(),
            suffixes: DEFAULT_SUFFIXES.iter().map(|s| s.to_string()).collect(),
            noise_bound: 0.05,
            seed: 42,
        }
    }
}

impl AugmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_variants == 0 || self.min_variants > self.max_variants {
            return Err(Error::Config(format!(
                "augmentation: variant range [{}, {}] is invalid",
                self.min_variants, self.max_variants
            )));
        }
        if self.prefixes.is_empty() || self.suffixes.is_empty() {
            return Err(Error::Config("augmentation: prefix and suffix pools must be non-empty".into()));
        }
        if self.noise_bound.is_nan() || self.noise_bound <= 0.0 {
            return Err(Error::Config(format!(
                "augmentation: noise_bound {} must be positive",
                self.noise_bound
            )));
        }
        Ok(())
    }
}

/// Expands one seed into 4..=6 rephrased samples with noisy labels.
///
/// Each variant picks a distinct (prefix, suffix) pair, keeps the seed
/// text verbatim in the middle, perturbs the tier label by U(-b, b), and
/// clamps to [0, 1].
pub fn augment_seed(
    seed: &SeedTask,
    cfg: &AugmentationConfig,
    embedder: &Embedder,
    lexicon: &RiskLexicon,
    rng: &mut impl Rng,
) -> Result<Vec<TrainingSample>> {
    cfg.validate()?;
    let k = rng.random_range(cfg.min_variants..=cfg.max_variants);
    let pool = cfg.prefixes.len() * cfg.suffixes.len();
    if pool < k {
        return Err(Error::Config(format!(
            "augmentation: only {pool} distinct (prefix, suffix) pairs available but {k} variants requested"
        )));
    }
    let picks = index_sample(rng, pool, k);
    let mut samples = Vec::with_capacity(k);
    for pick in picks {
        let prefix = &cfg.prefixes[pick / cfg.suffixes.len()];
        let suffix = &cfg.suffixes[pick % cfg.suffixes.len()];
        let text = format!("{prefix} {} {suffix}", seed.text);
        let noise = rng.random_range(-cfg.noise_bound..cfg.noise_bound);
        let label = (seed.base_label() + noise).clamp(0.0, 1.0);
        let v_meta = simulate_meta(seed.tier.difficulty(), &text, lexicon, rng);
        let x_sem = embedder.embed(&text)?;
        samples.push(TrainingSample { text, label, v_meta, x_sem: Some(x_sem) });
    }
    Ok(samples)
}

/// Per-tier sample counts of a built dataset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierSummary {
    pub easy: usize,
    pub medium: usize,
    pub hard: usize,
}

impl TierSummary {
    pub fn count_for(&self, tier: Tier) -> usize {
        match tier {
            Tier::Easy => self.easy,
            Tier::Medium => self.medium,
            Tier::Hard => self.hard,
        }
    }

    pub fn total(&self) -> usize {
        self.easy + self.medium + self.hard
    }
}

impl fmt::Display for TierSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "easy: {}, medium: {}, hard: {} (total {})",
            self.easy,
            self.medium,
            self.hard,
            self.total()
        )
    }
}

/// A built pretraining dataset plus its tier-count summary.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainSet {
    pub samples: Vec<TrainingSample>,
    pub summary: TierSummary,
}

/// Builds the pretraining set: every seed augmented on its own derived
/// stream, then one global shuffle. Pure function of (seeds, cfg).
pub fn build_pretrain_set(
    seeds: &[SeedTask],
    cfg: &AugmentationConfig,
    embedder: &Embedder,
    lexicon: &RiskLexicon,
) -> Result<PretrainSet> {
    cfg.validate()?;
    if seeds.is_empty() {
        return Err(Error::Config("seed corpus is empty".into()));
    }
    let present: BTreeSet<Tier> = seeds.iter().map(|s| s.tier).collect();
    for tier in Tier::ALL {
        if !present.contains(&tier) {
            return Err(Error::Config(format!(
                "seed corpus has no {tier} seeds; all three tiers are required for a usable decision boundary"
            )));
        }
    }

    let mut samples = Vec::new();
    let mut summary = TierSummary::default();
    for (i, seed) in seeds.iter().enumerate() {
        let mut rng = substream(cfg.seed, "augment", i as u64);
        let variants = augment_seed(seed, cfg, embedder, lexicon, &mut rng)?;
        match seed.tier {
            Tier::Easy => summary.easy += variants.len(),
            Tier::Medium => summary.medium += variants.len(),
            Tier::Hard => summary.hard += variants.len(),
        }
        samples.extend(variants);
    }
    samples.shuffle(&mut stream(cfg.seed, "pretrain-shuffle"));
    Ok(PretrainSet { samples, summary })
}

/// Writes samples as JSON Lines. `include_embeddings: false` drops the
/// embedding field for lazy re-embedding from text.
pub fn save_samples_jsonl(
    path: impl AsRef<Path>,
    samples: &[TrainingSample],
    include_embeddings: bool,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for sample in samples {
        let line = if include_embeddings {
            serde_json::to_string(sample)
        } else {
            serde_json::to_string(&TrainingSample { x_sem: None, ..sample.clone() })
        }
        .map_err(|err| Error::Format(format!("sample serialize: {err}")))?;
        out.push_str(&line);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|err| Error::io(path.display().to_string(), err))
}

/// Reads a JSON Lines sample file. Blank lines are skipped; malformed
/// lines report their 1-based line number.
pub fn load_samples_jsonl(path: impl AsRef<Path>) -> Result<Vec<TrainingSample>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|err| Error::io(path.display().to_string(), err))?;
    parse_samples_jsonl(&text, &path.display().to_string())
}

fn parse_samples_jsonl(text: &str, origin: &str) -> Result<Vec<TrainingSample>> {
    let mut samples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let sample: TrainingSample = serde_json::from_str(line)
            .map_err(|err| Error::Format(format!("{origin} line {}: {err}", idx + 1)))?;
        samples.push(sample);
    }
    Ok(samples)
}

/// Writes a seed corpus as JSON Lines.
pub fn save_seeds_jsonl(path: impl AsRef<Path>, seeds: &[SeedTask]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for seed in seeds {
        let line = serde_json::to_string(seed)
            .map_err(|err| Error::Format(format!("seed serialize: {err}")))?;
        out.push_str(&line);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|err| Error::io(path.display().to_string(), err))
}

/// Reads a seed corpus from JSON Lines, enforcing the tier/label pinning.
pub fn load_seeds_jsonl(path: impl AsRef<Path>) -> Result<Vec<SeedTask>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|err| Error::io(path.display().to_string(), err))?;
    let mut seeds = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let seed: SeedTask = serde_json::from_str(line)
            .map_err(|err| Error::Format(format!("{} line {}: {err}", path.display(), idx + 1)))?;
        seeds.push(seed);
    }
    Ok(seeds)
}

/// Ensures every sample carries an embedding, computing missing ones.
pub fn ensure_embeddings(samples: &mut [TrainingSample], embedder: &Embedder) -> Result<()> {
    for sample in samples.iter_mut() {
        if sample.x_sem.is_none() {
            sample.x_sem = Some(embedder.embed(&sample.text)?);
        }
    }
    Ok(())
}

const SOFTWARE_EASY: [&str; 10] = [
    "reverse the characters in a string",
    "count the vowels in a sentence",
    "convert a temperature from celsius to fahrenheit",
    "check whether a year is a leap year",
    "compute the sum of integers from 1 to n",
    "swap the values of two variables",
    "find the largest element in a list",
    "concatenate two lists into one",
    "test whether a word is a palindrome",
    "format a full name from first and last parts",
];

const SOFTWARE_MEDIUM: [&str; 10] = [
    "implement binary search over a sorted array",
    "merge two sorted linked lists",
    "parse a log file and count error lines",
    "implement an LRU cache with a fixed capacity",
    "topologically sort a small dependency graph",
    "serialize a binary tree to a string and back",
    "find the longest common prefix among file paths",
    "implement a rate limiter using a sliding window",
    "detect a cycle in a singly linked list",
    "balance parentheses checking in an expression parser",
];

const SOFTWARE_HARD: [&str; 10] = [
    "debug a deadlock between two mutexes in a thread pool",
    "design a distributed job queue with at-least-once delivery",
    "fix a race condition in a concurrent hash map resize",
    "implement leader election for a three-node cluster",
    "diagnose starvation in an async task scheduler",
    "design a sharded write-ahead log with crash recovery",
    "eliminate priority inversion in a realtime thread scheduler",
    "implement two-phase commit across three services",
    "repair a livelock in a retry storm between microservices",
    "design backpressure for a distributed stream processor",
];

const DATA_EASY: [&str; 10] = [
    "compute the mean of a numeric column",
    "drop duplicate rows from a small table",
    "rename the columns of a csv file",
    "filter rows where the price column is positive",
    "count the distinct values in a categorical column",
    "sort a table by date ascending",
    "convert a column of strings to lowercase",
    "select the top ten rows by score",
    "join two tables on a shared id column",
    "fill blank cells in a column with zero",
];

const DATA_MEDIUM: [&str; 10] = [
    "impute missing ages with the median per group",
    "normalize inconsistent date formats across a dataset",
    "deduplicate customer records with fuzzy name matching",
    "pivot a long table of sensor readings into wide form",
    "detect and cap outliers using the interquartile range",
    "reconcile currency columns mixing symbols and codes",
    "validate a csv file against an expected schema",
    "standardize free-text country names to ISO codes",
    "aggregate daily sales into weekly totals with windows",
    "strip html artifacts from a scraped text column",
];

const DATA_HARD: [&str; 10] = [
    "design a streaming ETL pipeline with exactly-once semantics",
    "backfill a partitioned warehouse table without blocking readers",
    "debug skewed joins causing stragglers in a distributed dataframe job",
    "design incremental deduplication across a billion-row event stream",
    "implement change data capture with schema evolution handling",
    "repair a corrupted parquet dataset while preserving lineage",
    "optimize a shuffle-heavy aggregation across a spark cluster",
    "build a bayesian model for missing-not-at-random imputation",
    "reconcile eventually consistent replicas of a feature store",
    "architect a late-arriving data strategy for hourly dashboards",
];

const SCIENCE_EASY: [&str; 10] = [
    "convert kilometers to miles for a results table",
    "compute the area of a circle from its radius",
    "evaluate a polynomial at a given point",
    "compute the sample mean of trial measurements",
    "convert an angle between degrees and radians",
    "apply the ideal gas law to find pressure",
    "compute kinetic energy from mass and velocity",
    "tabulate powers of two up to an exponent",
    "compute the hypotenuse of a right triangle",
    "average three sensor temperature readings",
];

const SCIENCE_MEDIUM: [&str; 10] = [
    "fit a least-squares line to noisy measurements",
    "numerically integrate a function with the trapezoid rule",
    "find a root of a nonlinear equation by bisection",
    "simulate projectile motion with air resistance",
    "compute eigenvalues of a small symmetric matrix",
    "propagate measurement uncertainty through a formula",
    "smooth a noisy signal with a moving average",
    "estimate pi with a monte carlo method",
    "solve a tridiagonal linear system efficiently",
    "interpolate tabulated data with cubic splines",
];

const SCIENCE_HARD: [&str; 10] = [
    "integrate a stiff ODE system with an adaptive runge-kutta scheme",
    "derive hamiltonian dynamics for a double pendulum and simulate chaos",
    "calibrate a bayesian hierarchical model with convergence diagnostics",
    "solve a reaction-diffusion PDE with operator splitting",
    "quantify uncertainty in an inverse problem with regularization",
    "simulate n-body gravitational dynamics with symplectic integration",
    "fit a nonlinear mixed-effects pharmacokinetic model",
    "design a spectral solver for turbulent flow statistics",
    "infer parameters of a stochastic differential equation from sparse data",
    "stabilize a shooting method for a boundary value problem",
];

const SECURITY_EASY: [&str; 10] = [
    "check a password against minimum length rules",
    "hash a file and print its checksum",
    "mask all but the last four digits of a card number",
    "validate an email address with a simple pattern",
    "list file permissions for a directory",
    "generate a random token for a session id",
    "escape html entities in user-supplied text",
    "compare two version strings for a patch check",
    "redact phone numbers from a log excerpt",
    "verify a url uses https before fetching",
];

const SECURITY_MEDIUM: [&str; 10] = [
    "audit a web form for common injection mistakes",
    "implement rate limiting to slow credential stuffing",
    "rotate api keys without breaking active clients",
    "parse an auth log and flag repeated failed logins",
    "harden a dockerfile by dropping root privileges",
    "add csrf tokens to a legacy form workflow",
    "scan dependencies for known vulnerable versions",
    "enforce least privilege on a shared storage bucket",
    "configure tls with modern cipher suites only",
    "sanitize file uploads with type and size checks",
];

const SECURITY_HARD: [&str; 10] = [
    "triage a suspected buffer overflow in a packet parser",
    "design a zero-trust service mesh for a distributed fleet",
    "analyze a reported exploit chain and draft mitigations",
    "contain a race condition enabling privilege escalation in a setuid helper",
    "architect key rotation for a multi-region secrets service",
    "model threat paths through a cluster with permission gaps",
    "design tamper-evident audit logging across distributed services",
    "remediate a deserialization exploit in a message broker",
    "coordinate incident response for a compromised build pipeline",
    "isolate a suspicious async callback exfiltrating telemetry",
];

/// The shipped seed corpus: 10 seeds per tier per domain (120 total).
pub fn builtin_seeds() -> Vec<SeedTask> {
    let blocks: [(Domain, Tier, &[&str; 10]); 12] = [
        (Domain::Software, Tier::Easy, &SOFTWARE_EASY),
        (Domain::Software, Tier::Medium, &SOFTWARE_MEDIUM),
        (Domain::Software, Tier::Hard, &SOFTWARE_HARD),
        (Domain::Data, Tier::Easy, &DATA_EASY),
        (Domain::Data, Tier::Medium, &DATA_MEDIUM),
        (Domain::Data, Tier::Hard, &DATA_HARD),
        (Domain::Science, Tier::Easy, &SCIENCE_EASY),
        (Domain::Science, Tier::Medium, &SCIENCE_MEDIUM),
        (Domain::Science, Tier::Hard, &SCIENCE_HARD),
        (Domain::Security, Tier::Easy, &SECURITY_EASY),
        (Domain::Security, Tier::Medium, &SECURITY_MEDIUM),
        (Domain::Security, Tier::Hard, &SECURITY_HARD),
    ];
    let mut seeds = Vec::with_capacity(120);
    for (domain, tier, texts) in blocks {
        for text in texts {
            seeds.push(SeedTask::new(*text, tier, domain));
        }
    }
    seeds
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::EmbedderSpec;
    use crate::rng::stream;
    use std::collections::BTreeMap;

    fn small_embedder() -> Embedder {
        Embedder::from_spec(&EmbedderSpec::Hashing { dimension: 32, ngram: 3, seed: 0 }).unwrap()
    }

    #[test]
    fn tier_labels_are_pinned() {
        assert_eq!(Tier::Easy.base_label(), 0.1);
        assert_eq!(Tier::Medium.base_label(), 0.5);
        assert_eq!(Tier::Hard.base_label(), 0.9);
    }

    #[test]
    fn augment_produces_four_to_six_verbatim_variants() {
        let seed = SeedTask::new("reverse the characters in a string", Tier::Easy, Domain::Software);
        let cfg = AugmentationConfig::default();
        let embedder = small_embedder();
        let lexicon = RiskLexicon::default();
        for run in 0..50u64 {
            let mut rng = stream(run, "augment-test");
            let samples = augment_seed(&seed, &cfg, &embedder, &lexicon, &mut rng).unwrap();
            assert!((4..=6).contains(&samples.len()), "{} variants", samples.len());
            let mut texts = BTreeSet::new();
            for s in &samples {
                assert!(s.text.contains(&seed.text), "seed text must survive verbatim");
                assert!((0.05..=0.15).contains(&s.label), "label {}", s.label);
                assert_eq!(s.x_sem.as_ref().unwrap().len(), 32);
                texts.insert(s.text.clone());
            }
            assert_eq!(texts.len(), samples.len(), "variant texts must be distinct");
        }
    }

    #[test]
    fn augment_is_deterministic() {
        let seed = SeedTask::new("merge two sorted linked lists", Tier::Medium, Domain::Software);
        let cfg = AugmentationConfig::default();
        let embedder = small_embedder();
        let lexicon = RiskLexicon::default();
        let a = augment_seed(&seed, &cfg, &embedder, &lexicon, &mut stream(9, "aug")).unwrap();
        let b = augment_seed(&seed, &cfg, &embedder, &lexicon, &mut stream(9, "aug")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hard_label_noise_is_uniform_and_bounded() {
        let seed =
            SeedTask::new("debug a deadlock between two mutexes", Tier::Hard, Domain::Software);
        let cfg = AugmentationConfig::default();
        let embedder = small_embedder();
        let lexicon = RiskLexicon::default();
        let mut labels = Vec::new();
        let mut idx = 0u64;
        while labels.len() < 10_000 {
            let mut rng = substream(7, "noise-test", idx);
            for s in augment_seed(&seed, &cfg, &embedder, &lexicon, &mut rng).unwrap() {
                labels.push(s.label);
            }
            idx += 1;
        }
        let mean: f64 = labels.iter().sum::<f64>() / labels.len() as f64;
        assert!((mean - 0.9).abs() <= 0.005, "mean {mean}");
        assert!(labels.iter().all(|l| (0.85..=0.95).contains(l)));
    }

    #[test]
    fn augment_rejects_undersized_pair_pool() {
        let seed = SeedTask::new("task", Tier::Easy, Domain::Data);
        let cfg = AugmentationConfig {
            prefixes: vec!["Do".into()],
            suffixes: vec!["now.".into(), "soon.".into(), "today.".into()],
            ..AugmentationConfig::default()
        };
        let embedder = small_embedder();
        let lexicon = RiskLexicon::default();
        let err =
            augment_seed(&seed, &cfg, &embedder, &lexicon, &mut stream(1, "aug")).unwrap_err();
        assert!(err.to_string().contains("pairs"), "{err}");
    }

    #[test]
    fn build_requires_seeds_and_all_tiers() {
        let embedder = small_embedder();
        let lexicon = RiskLexicon::default();
        let cfg = AugmentationConfig::default();
        assert!(build_pretrain_set(&[], &cfg, &embedder, &lexicon).is_err());

        let two_tiers = vec![
            SeedTask::new("a", Tier::Easy, Domain::Software),
            SeedTask::new("b", Tier::Hard, Domain::Software),
        ];
        let err = build_pretrain_set(&two_tiers, &cfg, &embedder, &lexicon).unwrap_err();
        assert!(err.to_string().contains("medium"), "{err}");
    }

    #[test]
    fn build_size_and_histogram_respect_multiplier_bounds() {
        let embedder = small_embedder();
        let lexicon = RiskLexicon::default();
        let cfg = AugmentationConfig::default();
        let mut seeds = Vec::new();
        for i in 0..10 {
            seeds.push(SeedTask::new(format!("easy {i}"), Tier::Easy, Domain::Data));
            seeds.push(SeedTask::new(format!("medium {i}"), Tier::Medium, Domain::Data));
            seeds.push(SeedTask::new(format!("hard {i}"), Tier::Hard, Domain::Data));
        }
        let set = build_pretrain_set(&seeds, &cfg, &embedder, &lexicon).unwrap();
        assert!((120..=180).contains(&set.samples.len()), "{}", set.samples.len());
        assert_eq!(set.summary.total(), set.samples.len());
        for tier in Tier::ALL {
            let count = set.summary.count_for(tier);
            assert!((40..=60).contains(&count), "{tier}: {count}");
        }
    }

    #[test]
    fn build_is_a_pure_function_of_inputs() {
        let embedder = small_embedder();
        let lexicon = RiskLexicon::default();
        let cfg = AugmentationConfig::default();
        let seeds = vec![
            SeedTask::new("x", Tier::Easy, Domain::Science),
            SeedTask::new("y", Tier::Medium, Domain::Science),
            SeedTask::new("z", Tier::Hard, Domain::Science),
        ];
        let a = build_pretrain_set(&seeds, &cfg, &embedder, &lexicon).unwrap();
        let b = build_pretrain_set(&seeds, &cfg, &embedder, &lexicon).unwrap();
        assert_eq!(a, b);
        let other_seed = AugmentationConfig { seed: 43, ..cfg };
        let c = build_pretrain_set(&seeds, &other_seed, &embedder, &lexicon).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn builtin_corpus_is_balanced() {
        let seeds = builtin_seeds();
        assert_eq!(seeds.len(), 120);
        let mut counts: BTreeMap<(Domain, Tier), usize> = BTreeMap::new();
        let mut texts = BTreeSet::new();
        for seed in &seeds {
            *counts.entry((seed.domain, seed.tier)).or_default() += 1;
            texts.insert(seed.text.clone());
            assert_eq!(seed.base_label(), seed.tier.base_label());
        }
        assert_eq!(texts.len(), 120, "seed texts must be unique");
        assert_eq!(counts.len(), 12);
        assert!(counts.values().all(|&c| c == 10));
    }

    #[test]
    fn sample_jsonl_round_trips_bitwise() {
        let embedder = small_embedder();
        let lexicon = RiskLexicon::default();
        let cfg = AugmentationConfig::default();
        let seeds = vec![
            SeedTask::new("alpha", Tier::Easy, Domain::Security),
            SeedTask::new("beta", Tier::Medium, Domain::Security),
            SeedTask::new("gamma", Tier::Hard, Domain::Security),
        ];
        let set = build_pretrain_set(&seeds, &cfg, &embedder, &lexicon).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("samples.jsonl");
        save_samples_jsonl(&path, &set.samples, true).unwrap();
        let loaded = load_samples_jsonl(&path).unwrap();
        assert_eq!(loaded, set.samples);
    }

    #[test]
    fn no_embed_mode_strips_and_reembeds_exactly() {
        let embedder = small_embedder();
        let lexicon = RiskLexicon::default();
        let cfg = AugmentationConfig::default();
        let seeds = vec![
            SeedTask::new("one", Tier::Easy, Domain::Data),
            SeedTask::new("two", Tier::Medium, Domain::Data),
            SeedTask::new("three", Tier::Hard, Domain::Data),
        ];
        let set = build_pretrain_set(&seeds, &cfg, &embedder, &lexicon).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("samples.jsonl");
        save_samples_jsonl(&path, &set.samples, false).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.contains("embedding"));
        let mut loaded = load_samples_jsonl(&path).unwrap();
        assert!(loaded.iter().all(|s| s.x_sem.is_none()));
        ensure_embeddings(&mut loaded, &embedder).unwrap();
        assert_eq!(loaded, set.samples);
    }

    #[test]
    fn malformed_jsonl_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"text\": \"t\", \"label\": 0.1, \"meta\": [1,0,0,0,0.5,0]}\nnot json\n").unwrap();
        let err = load_samples_jsonl(&path).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn seed_file_rejects_mismatched_base_label() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seeds.jsonl");
        save_seeds_jsonl(&path, &builtin_seeds()).unwrap();
        let loaded = load_seeds_jsonl(&path).unwrap();
        assert_eq!(loaded, builtin_seeds());

        let bad = "{\"text\":\"t\",\"tier\":\"easy\",\"base_label\":0.9,\"domain\":\"software\"}\n";
        std::fs::write(&path, bad).unwrap();
        let err = load_seeds_jsonl(&path).unwrap_err();
        assert!(err.to_string().contains("does not match tier"), "{err}");
    }
}
