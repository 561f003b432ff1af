//! Side-of-threshold regression tests against the committed reference
//! checkpoint (256-dim hashing embedder, 200 pretraining epochs, seed 42,
//! built-in corpus). The exact scores float with any retraining; what must
//! stay stable is which side of the 0.5 threshold each fixture lands on.

use caster_core::backends::SimBackend;
use caster_core::checkpoint::Checkpoint;
use caster_core::features::{extract_meta, AgentRole, Embedder, EmbedderSpec, RiskLexicon};
use caster_core::router::predict_strong_probability;
use caster_core::runtime::{route_step, ContextHistory, RoutingContext, RoutingStrategy};
use caster_core::task::{Domain, TaskStep};
use caster_core::trajectory::CostModel;
use caster_core::ModelTier;

const CHECKPOINT_JSON: &str = include_str!("fixtures/reference-checkpoint.json");

/// Trivial print-style request: the weak tier handles these.
fn trivial_task() -> TaskStep {
    TaskStep::new(
        "hello-world",
        "Complete the following task: write a function that prints hello world \
         and note any edge cases.",
        AgentRole::Engineer,
        120,
        Domain::Software,
        0.05,
    )
}

/// Concurrency-heavy crawler request with a large carried context: the
/// strong tier handles these.
fn crawler_task() -> TaskStep {
    TaskStep::new(
        "multi-thread-crawler",
        "implement a multi-thread web crawler with asyncio workers and fix the \
         race condition in the shared URL frontier before the next crawl",
        AgentRole::Engineer,
        4500,
        Domain::Software,
        0.9,
    )
}

fn fixture() -> (Checkpoint, Embedder, RiskLexicon) {
    let checkpoint = Checkpoint::from_json(CHECKPOINT_JSON).expect("fixture parses");
    let embedder = Embedder::from_spec(&EmbedderSpec::Hashing {
        dimension: checkpoint.config.d_in,
        ngram: 3,
        seed: 42,
    })
    .expect("hashing embedder builds");
    (checkpoint, embedder, RiskLexicon::default())
}

fn score(task: &TaskStep) -> f64 {
    let (checkpoint, embedder, lexicon) = fixture();
    let params = checkpoint.params().expect("fixture shapes are valid");
    let x_sem = embedder.embed(&task.text).unwrap();
    let v_meta = extract_meta(task.role, task.context_tokens, &task.text, &lexicon, 8192);
    predict_strong_probability(&params, &checkpoint.config, &x_sem, v_meta.as_slice())
}

#[test]
fn fixture_checkpoint_has_the_expected_shape() {
    let (checkpoint, _, _) = fixture();
    assert_eq!(checkpoint.config.d_in, 256);
    assert_eq!(checkpoint.config.d_meta, 6);
    assert_eq!(checkpoint.epoch, 200);
    assert_eq!(checkpoint.config.threshold, 0.5);
    checkpoint.params().unwrap();
}

#[test]
fn trivial_prompt_scores_below_threshold() {
    let s = score(&trivial_task());
    assert!(s < 0.5, "trivial prompt scored {s}, expected the weak side of 0.5");
}

#[test]
fn concurrency_crawler_scores_above_threshold() {
    let s = score(&crawler_task());
    assert!(s > 0.5, "crawler prompt scored {s}, expected the strong side of 0.5");
}

#[test]
fn routed_steps_land_on_matching_tiers() {
    let (checkpoint, embedder, lexicon) = fixture();
    let params = checkpoint.params().unwrap();
    let cost = CostModel::new(
        caster_core::backends::PricingTable::builtin(),
        caster_core::backends::TierBinding::default(),
    )
    .unwrap();
    let ctx = RoutingContext {
        router_cfg: checkpoint.config,
        embedder: &embedder,
        lexicon: &lexicon,
        cost: &cost,
        context_cap: 8192,
        history_tail_tokens: 2000,
    };
    let strategy = RoutingStrategy::Caster { params: &params, threshold: 0.5 };
    let mut backend = SimBackend::new(caster_core::backends::SimBackendConfig::with_seed(42));

    let mut history = ContextHistory::new();
    let result = route_step(&strategy, &ctx, &crawler_task(), &mut history, &mut backend).unwrap();
    assert_eq!(result.tier_used, ModelTier::Strong);
    assert!(result.router_score.unwrap() > 0.5);

    let mut history = ContextHistory::new();
    let result = route_step(&strategy, &ctx, &trivial_task(), &mut history, &mut backend).unwrap();
    assert_eq!(result.tier_used, ModelTier::Weak);
    assert!(result.router_score.unwrap() < 0.5);
}
