//! Strategy-comparison harness: runs each routing strategy over an
//! identical task suite with paired random draws, aggregates cost
//! statistics and quality scores, and emits machine- and human-readable
//! reports. Quality scores come from a deterministic simulated judge and
//! are labeled as synthetic in every report.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backends::{
    standard_normal, Outcome, PricingTable, SimBackend, SimBackendConfig, TierBinding,
};
use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::features::{Embedder, RiskLexicon, DEFAULT_CONTEXT_CAP};
use crate::rng::{index_of, substream};
use crate::router::ModelTier;
use crate::runtime::{run_workflow, RoutingContext, RoutingStrategy, StepResult, StrategyKind};
use crate::task::{Domain, TaskStep};
use crate::trajectory::{generate_task, CostModel, TaskGenConfig, TaskGenerator};

/// Provenance label stamped into every report's quality section.
pub const SCORE_SOURCE: &str = "synthetic simulated judge";

/// Default deduction when a CSV artifact misses too many values.
pub const DEFAULT_MISSING_PENALTY: f64 = 15.0;

/// Missing-value ratio above which the CSV penalty applies.
pub const MISSING_RATIO_LIMIT: f64 = 0.10;

fn check_component(name: &str, value: f64, cap: f64) -> Result<()> {
    if !value.is_finite() || !(0.0..=cap).contains(&value) {
        return Err(Error::Config(format!(
            "score component {name} = {value} outside [0, {cap}]"
        )));
    }
    Ok(())
}

/// Domain-specific quality components, each bounded by its cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "snake_case")]
pub enum ScoreCard {
    Software { correctness: f64, robustness: f64, engineering: f64, style: f64 },
    Science { param_accuracy: f64, validity: f64, robustness: f64, code_quality: f64 },
    Security { efficacy: f64, compliance: f64, automation: f64, cleanliness: f64 },
    Data { code: f64, csv: f64, image: f64 },
}

impl ScoreCard {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ScoreCard::Software { correctness, robustness, engineering, style } => {
                check_component("correctness", correctness, 40.0)?;
                check_component("robustness", robustness, 30.0)?;
                check_component("engineering", engineering, 20.0)?;
                check_component("style", style, 10.0)
            }
            ScoreCard::Science { param_accuracy, validity, robustness, code_quality } => {
                check_component("param_accuracy", param_accuracy, 40.0)?;
                check_component("validity", validity, 30.0)?;
                check_component("robustness", robustness, 20.0)?;
                check_component("code_quality", code_quality, 10.0)
            }
            ScoreCard::Security { efficacy, compliance, automation, cleanliness } => {
                check_component("efficacy", efficacy, 40.0)?;
                check_component("compliance", compliance, 30.0)?;
                check_component("automation", automation, 20.0)?;
                check_component("cleanliness", cleanliness, 10.0)
            }
            ScoreCard::Data { code, csv, image } => {
                check_component("code", code, 100.0)?;
                check_component("csv", csv, 100.0)?;
                check_component("image", image, 100.0)
            }
        }
    }

    /// Overall score in [0, 100] for any domain's card.
    pub fn aggregate(&self) -> Result<f64> {
        self.validate()?;
        Ok(match *self {
            ScoreCard::Software { correctness, robustness, engineering, style } => {
                correctness + robustness + engineering + style
            }
            ScoreCard::Science { param_accuracy, validity, robustness, code_quality } => {
                param_accuracy + validity + robustness + code_quality
            }
            ScoreCard::Security { efficacy, compliance, automation, cleanliness } => {
                efficacy + compliance + automation + cleanliness
            }
            ScoreCard::Data { code, csv, image } => aggregate_data_score(code, csv, image)?,
        })
    }

    /// Splits an overall score across a domain's components in proportion
    /// to their caps, so `aggregate` returns the input again.
    pub fn proportional(domain: Domain, overall: f64) -> Self {
        assert!((0.0..=100.0).contains(&overall), "overall score {overall} outside [0, 100]");
        let q = overall / 100.0;
        match domain {
            Domain::Software => ScoreCard::Software {
                correctness: 40.0 * q,
                robustness: 30.0 * q,
                engineering: 20.0 * q,
                style: 10.0 * q,
            },
            Domain::Science => ScoreCard::Science {
                param_accuracy: 40.0 * q,
                validity: 30.0 * q,
                robustness: 20.0 * q,
                code_quality: 10.0 * q,
            },
            Domain::Security => ScoreCard::Security {
                efficacy: 40.0 * q,
                compliance: 30.0 * q,
                automation: 20.0 * q,
                cleanliness: 10.0 * q,
            },
            Domain::Data => ScoreCard::Data { code: overall, csv: overall, image: overall },
        }
    }
}

/// Sum of the four software components (caps 40/30/20/10).
pub fn aggregate_software_score(card: &ScoreCard) -> Result<f64> {
    match card {
        ScoreCard::Software { .. } => card.aggregate(),
        other => Err(Error::Config(format!(
            "expected a software score card, got {other:?}"
        ))),
    }
}

/// CSV artifact quality: base 40 plus 3 points per realism/integrity
/// point, with `penalty` deducted above the missing-ratio limit.
pub fn csv_quality_score_with_penalty(
    realism: f64,
    integrity: f64,
    missing_ratio: f64,
    penalty: f64,
) -> Result<f64> {
    check_component("realism", realism, 10.0)?;
    check_component("integrity", integrity, 10.0)?;
    if !(0.0..=1.0).contains(&missing_ratio) {
        return Err(Error::Config(format!(
            "missing_ratio {missing_ratio} outside [0, 1]"
        )));
    }
    let mut score = 40.0 + 3.0 * (realism + integrity);
    if missing_ratio > MISSING_RATIO_LIMIT {
        score -= penalty;
    }
    Ok(score.clamp(0.0, 100.0))
}

/// `csv_quality_score_with_penalty` at the default penalty.
pub fn csv_quality_score(realism: f64, integrity: f64, missing_ratio: f64) -> Result<f64> {
    csv_quality_score_with_penalty(realism, integrity, missing_ratio, DEFAULT_MISSING_PENALTY)
}

/// Data-domain blend: 0.4 code + 0.3 csv + 0.3 image.
pub fn aggregate_data_score(code: f64, csv: f64, image: f64) -> Result<f64> {
    check_component("code", code, 100.0)?;
    check_component("csv", csv, 100.0)?;
    check_component("image", image, 100.0)?;
    Ok(0.4 * code + 0.3 * csv + 0.3 * image)
}

/// Distribution summary of per-step costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostStats {
    pub total: f64,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    /// Sample standard deviation (n−1); 0 for a single element.
    pub std: f64,
    /// Prefix sums; the last element equals `total`.
    pub cumulative: Vec<f64>,
}

pub fn compute_cost_stats(costs: &[f64]) -> Result<CostStats> {
    if costs.is_empty() {
        return Err(Error::Config("cost list is empty".into()));
    }
    for (i, c) in costs.iter().enumerate() {
        if !c.is_finite() || *c < 0.0 {
            return Err(Error::Config(format!("cost[{i}] = {c} is not a finite non-negative value")));
        }
    }
    let n = costs.len();
    let total: f64 = costs.iter().sum();
    let mean = total / n as f64;
    let mut sorted = costs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite costs"));
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let std = if n == 1 {
        0.0
    } else {
        let ss: f64 = costs.iter().map(|c| (c - mean) * (c - mean)).sum();
        (ss / (n as f64 - 1.0)).sqrt()
    };
    let mut cumulative = Vec::with_capacity(n);
    let mut running = 0.0;
    for c in costs {
        running += c;
        cumulative.push(running);
    }
    Ok(CostStats { total, mean, median, min: sorted[0], max: sorted[n - 1], std, cumulative })
}

/// Percent saved against the always-strong baseline; negative when the
/// strategy out-costs it (cost inversion).
pub fn reduction_pct(strategy_cost: f64, strong_cost: f64) -> Result<f64> {
    if strong_cost.is_nan() || strong_cost <= 0.0 {
        return Err(Error::Config(format!(
            "strong baseline cost {strong_cost} must be positive"
        )));
    }
    Ok((1.0 - strategy_cost / strong_cost) * 100.0)
}

/// Task-suite shape: counts of easy (routine) and hard (escalation-worthy)
/// steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuitePlan {
    /// 10 easy + 10 hard.
    Standard20,
    /// 10 hard, the cascade stress suite.
    Hard10,
    /// 5 easy + 5 hard.
    Mixed10,
}

impl SuitePlan {
    /// (easy, hard) task counts.
    pub fn counts(&self) -> (usize, usize) {
        match self {
            SuitePlan::Standard20 => (10, 10),
            SuitePlan::Hard10 => (0, 10),
            SuitePlan::Mixed10 => (5, 5),
        }
    }
}

impl fmt::Display for SuitePlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SuitePlan::Standard20 => "standard20",
            SuitePlan::Hard10 => "hard10",
            SuitePlan::Mixed10 => "mixed10",
        };
        f.write_str(name)
    }
}

impl FromStr for SuitePlan {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard20" => Ok(SuitePlan::Standard20),
            "hard10" => Ok(SuitePlan::Hard10),
            "mixed10" => Ok(SuitePlan::Mixed10),
            other => Err(Error::Config(format!(
                "unknown suite {other:?}; expected standard20, hard10, or mixed10"
            ))),
        }
    }
}

/// Builds the benchmark task suite deterministically from the seed: easy
/// steps first, then hard, with topics deduplicated across the suite.
pub fn build_suite(plan: SuitePlan, domain: Domain, seed: u64) -> Result<Vec<TaskStep>> {
    let (easy, hard) = plan.counts();
    let base = TaskGenConfig { seed, ..TaskGenConfig::default() };
    let mut history: Vec<String> = Vec::new();
    let mut tasks = Vec::with_capacity(easy + hard);
    for i in 0..easy + hard {
        let cfg = TaskGenConfig {
            hard_mode_prob: if i < easy { 0.0 } else { 1.0 },
            ..base.clone()
        };
        let mut rng = substream(seed, "bench-suite", i as u64);
        let task = generate_task(
            &cfg,
            &history,
            domain,
            &format!("bench-{i:02}"),
            &mut rng,
            &TaskGenerator::Simulated,
        )?;
        history.push(task.topic.clone());
        tasks.push(task.to_step());
    }
    Ok(tasks)
}

/// Mean quality of a successful attempt; the strong tier's mean dominates
/// the weak tier's at every difficulty.
fn quality_mean(tier: ModelTier, difficulty: f64) -> f64 {
    match tier {
        ModelTier::Strong => 90.0 - 5.0 * difficulty,
        ModelTier::Weak => 85.0 - 30.0 * difficulty,
    }
}

/// Deterministic synthetic judge. Keyed by (task, tier) so every strategy
/// sees the same draw for the same final tier.
pub fn simulated_quality(seed: u64, task: &TaskStep, tier: ModelTier, outcome: Outcome) -> f64 {
    let mut rng = substream(seed, "sim-score", index_of(&format!("{}|{tier}", task.id)));
    let z = standard_normal(&mut rng);
    let (mean, sd) = match outcome {
        Outcome::Success => (quality_mean(tier, task.latent_difficulty()), 3.0),
        Outcome::Failure => (25.0, 6.0),
    };
    (mean + sd * z).clamp(0.0, 100.0)
}

fn default_breaker_max() -> u32 {
    3
}

/// What to run: suite shape, strategies, pricing binding, and the
/// simulated-backend curves. The spec seed overrides the sim seed so one
/// number pins the whole run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub domain: Domain,
    pub suite: SuitePlan,
    pub strategies: Vec<StrategyKind>,
    #[serde(default)]
    pub binding: TierBinding,
    pub seed: u64,
    #[serde(default = "default_breaker_max")]
    pub breaker_max: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimBackendConfig>,
}

impl BenchmarkSpec {
    pub fn new(domain: Domain, suite: SuitePlan, strategies: Vec<StrategyKind>, seed: u64) -> Self {
        BenchmarkSpec {
            domain,
            suite,
            strategies,
            binding: TierBinding::default(),
            seed,
            breaker_max: default_breaker_max(),
            sim: None,
        }
    }

    pub fn validate(&self, has_checkpoint: bool) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::Config("benchmark spec lists no strategies".into()));
        }
        for (i, kind) in self.strategies.iter().enumerate() {
            if self.strategies[..i].contains(kind) {
                return Err(Error::Config(format!("strategy {kind} listed twice")));
            }
        }
        if self.strategies.contains(&StrategyKind::Caster) && !has_checkpoint {
            return Err(Error::Config(
                "caster strategy requires a router checkpoint".into(),
            ));
        }
        if let Some(sim) = &self.sim {
            sim.validate()?;
        }
        Ok(())
    }

    /// Backend curves with the spec seed stamped in.
    pub fn effective_sim(&self) -> SimBackendConfig {
        let mut cfg = self.sim.clone().unwrap_or_else(|| SimBackendConfig::with_seed(self.seed));
        cfg.seed = self.seed;
        cfg
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|err| Error::Format(format!("benchmark spec serialize: {err}")))?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|err| Error::Format(format!("benchmark spec parse: {err}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|err| Error::io(path.display().to_string(), err))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?)
            .map_err(|err| Error::io(path.display().to_string(), err))
    }
}

/// One step plus its synthetic quality score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredStep {
    #[serde(flatten)]
    pub step: StepResult,
    pub quality: f64,
}

/// Everything one strategy produced over the suite.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyReport {
    pub strategy: StrategyKind,
    pub cost: CostStats,
    pub mean_quality: f64,
    pub success_rate: f64,
    pub score_card: ScoreCard,
    /// Percent saved vs the ForceStrong run; present when it ran.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduction_vs_strong: Option<f64>,
    pub steps: Vec<ScoredStep>,
}

/// Full paired-comparison result set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub domain: Domain,
    pub suite: SuitePlan,
    pub seed: u64,
    /// Where quality numbers come from; always the synthetic judge.
    pub score_source: String,
    pub strategies: Vec<StrategyReport>,
}

impl BenchmarkReport {
    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|err| Error::Format(format!("report serialize: {err}")))?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|err| Error::Format(format!("report parse: {err}")))
    }

    pub fn strategy(&self, kind: StrategyKind) -> Option<&StrategyReport> {
        self.strategies.iter().find(|s| s.strategy == kind)
    }

    /// The `step,strategy,tier,tokens_in,tokens_out,usd` table.
    pub fn costs_csv(&self) -> String {
        let mut out = String::from("step,strategy,tier,tokens_in,tokens_out,usd\n");
        for report in &self.strategies {
            for scored in &report.steps {
                let s = &scored.step;
                out.push_str(&format!(
                    "{},{},{},{},{},{:.6}\n",
                    s.step_id, report.strategy, s.tier_used, s.tokens_in, s.tokens_out, s.cost_usd
                ));
            }
        }
        out
    }

    /// Aligned text table for humans.
    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "benchmark: domain={} suite={} seed={} (quality: {})\n\n",
            self.domain, self.suite, self.seed, self.score_source
        ));
        out.push_str(&format!(
            "{:<10} {:>12} {:>12} {:>12} {:>12} {:>10} {:>9} {:>8}\n",
            "strategy", "total_usd", "mean_usd", "median_usd", "std_usd", "reduction", "quality", "success"
        ));
        for report in &self.strategies {
            let reduction = report
                .reduction_vs_strong
                .map(|r| format!("{r:.1}%"))
                .unwrap_or_else(|| "-".to_string());
            out.push_str(&format!(
                "{:<10} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>10} {:>9.2} {:>7.0}%\n",
                report.strategy.to_string(),
                report.cost.total,
                report.cost.mean,
                report.cost.median,
                report.cost.std,
                reduction,
                report.mean_quality,
                report.success_rate * 100.0,
            ));
        }
        out
    }
}

/// Writes `report.json`, `costs.csv`, and `summary.txt` under `dir`.
pub fn write_report(report: &BenchmarkReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|err| Error::io(dir.display().to_string(), err))?;
    let write = |name: &str, contents: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|err| Error::io(path.display().to_string(), err))
    };
    write("report.json", report.to_json()?)?;
    write("costs.csv", report.costs_csv())?;
    write("summary.txt", report.summary_text())
}

/// Runs every requested strategy over the identical suite with paired
/// draws. When `flush_dir` is given, strategies completed before an error
/// are written there as a partial report before the error propagates.
pub fn run_benchmark(
    spec: &BenchmarkSpec,
    table: &PricingTable,
    checkpoint: Option<&Checkpoint>,
    embedder: &Embedder,
    lexicon: &RiskLexicon,
    flush_dir: Option<&Path>,
) -> Result<BenchmarkReport> {
    spec.validate(checkpoint.is_some())?;
    let tasks = build_suite(spec.suite, spec.domain, spec.seed)?;
    let sim_cfg = spec.effective_sim();
    let cost_model = CostModel::new(table.clone(), spec.binding.clone())?;
    let router_cfg = checkpoint.map(|c| c.config).unwrap_or_default();
    let router_params = match checkpoint {
        Some(ckpt) => Some(ckpt.params()?),
        None => None,
    };
    let ctx = RoutingContext {
        router_cfg,
        embedder,
        lexicon,
        cost: &cost_model,
        context_cap: DEFAULT_CONTEXT_CAP,
        history_tail_tokens: 2000,
    };
    let mut report = BenchmarkReport {
        domain: spec.domain,
        suite: spec.suite,
        seed: spec.seed,
        score_source: SCORE_SOURCE.to_string(),
        strategies: Vec::with_capacity(spec.strategies.len()),
    };
    for kind in &spec.strategies {
        let strategy = match kind {
            StrategyKind::Caster => {
                let params = router_params.as_ref().expect("validated above");
                RoutingStrategy::Caster { params, threshold: ctx.router_cfg.threshold }
            }
            StrategyKind::ForceStrong => RoutingStrategy::ForceStrong,
            StrategyKind::ForceWeak => RoutingStrategy::ForceWeak,
            StrategyKind::Cascade => RoutingStrategy::cascade(),
            StrategyKind::Oracle => RoutingStrategy::Oracle,
        };
        let mut backend = SimBackend::new(sim_cfg.clone());
        let (steps, err) = run_workflow(&strategy, &ctx, &tasks, &mut backend, spec.breaker_max);
        if let Some(err) = err {
            if let Some(dir) = flush_dir {
                write_report(&report, dir)?;
            }
            return Err(err);
        }
        let scored: Vec<ScoredStep> = steps
            .into_iter()
            .zip(&tasks)
            .map(|(step, task)| {
                let quality = simulated_quality(spec.seed, task, step.tier_used, step.outcome);
                ScoredStep { step, quality }
            })
            .collect();
        let costs: Vec<f64> = scored.iter().map(|s| s.step.cost_usd).collect();
        let cost = compute_cost_stats(&costs)?;
        let mean_quality =
            scored.iter().map(|s| s.quality).sum::<f64>() / scored.len() as f64;
        let successes =
            scored.iter().filter(|s| s.step.outcome == Outcome::Success).count();
        report.strategies.push(StrategyReport {
            strategy: *kind,
            cost,
            mean_quality,
            success_rate: successes as f64 / scored.len() as f64,
            score_card: ScoreCard::proportional(spec.domain, mean_quality),
            reduction_vs_strong: None,
            steps: scored,
        });
    }
    if let Some(strong_total) =
        report.strategy(StrategyKind::ForceStrong).map(|s| s.cost.total)
    {
        for strategy in &mut report.strategies {
            strategy.reduction_vs_strong =
                Some(reduction_pct(strategy.cost.total, strong_total)?);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{sim_execute, SuccessCurve};
    use crate::features::EmbedderSpec;
    use crate::rng::stream;
    use crate::router::{RouterConfig, RouterParams};
    use rand::Rng;

    #[test]
    fn software_score_sums_components() {
        let max = ScoreCard::Software {
            correctness: 40.0,
            robustness: 30.0,
            engineering: 20.0,
            style: 10.0,
        };
        assert_eq!(aggregate_software_score(&max).unwrap(), 100.0);
        let strong_row = ScoreCard::Software {
            correctness: 35.2,
            robustness: 26.0,
            engineering: 17.8,
            style: 8.5,
        };
        assert!((aggregate_software_score(&strong_row).unwrap() - 87.5).abs() < 1e-12);
        let zero =
            ScoreCard::Software { correctness: 0.0, robustness: 0.0, engineering: 0.0, style: 0.0 };
        assert_eq!(aggregate_software_score(&zero).unwrap(), 0.0);
    }

    #[test]
    fn score_cards_reject_overflowing_components() {
        let bad = ScoreCard::Software {
            correctness: 40.1,
            robustness: 0.0,
            engineering: 0.0,
            style: 0.0,
        };
        assert!(bad.validate().is_err());
        let bad = ScoreCard::Science {
            param_accuracy: 10.0,
            validity: 31.0,
            robustness: 5.0,
            code_quality: 5.0,
        };
        assert!(bad.validate().is_err());
        let bad = ScoreCard::Security {
            efficacy: 10.0,
            compliance: 10.0,
            automation: 10.0,
            cleanliness: -0.5,
        };
        assert!(bad.validate().is_err());
        let bad = ScoreCard::Data { code: 100.5, csv: 50.0, image: 50.0 };
        assert!(bad.validate().is_err());
        assert!(aggregate_software_score(&bad).is_err());
    }

    #[test]
    fn csv_score_formula_and_penalty() {
        assert_eq!(csv_quality_score(10.0, 10.0, 0.0).unwrap(), 100.0);
        assert_eq!(csv_quality_score(0.0, 0.0, 0.0).unwrap(), 40.0);
        assert_eq!(csv_quality_score(10.0, 10.0, 0.2).unwrap(), 85.0);
        // At the limit exactly, no penalty.
        assert_eq!(csv_quality_score(10.0, 10.0, 0.10).unwrap(), 100.0);
        // Clamp floor engages with a heavy configured penalty.
        assert_eq!(csv_quality_score_with_penalty(0.0, 0.0, 0.5, 60.0).unwrap(), 0.0);
        assert!(csv_quality_score(10.5, 0.0, 0.0).is_err());
        assert!(csv_quality_score(5.0, 5.0, 1.5).is_err());
    }

    #[test]
    fn data_score_is_the_pinned_blend() {
        assert_eq!(aggregate_data_score(100.0, 100.0, 100.0).unwrap(), 100.0);
        assert!((aggregate_data_score(92.0, 93.5, 45.4).unwrap() - 78.47).abs() < 1e-12);
        assert!(aggregate_data_score(101.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn data_score_is_convex_on_fuzzed_inputs() {
        let mut rng = stream(9, "fuzz");
        for _ in 0..1000 {
            let code = rng.random_range(0.0..=100.0);
            let csv = rng.random_range(0.0..=100.0);
            let image = rng.random_range(0.0..=100.0);
            let blended = aggregate_data_score(code, csv, image).unwrap();
            let lo = code.min(csv).min(image);
            let hi = code.max(csv).max(image);
            assert!(blended >= lo - 1e-12 && blended <= hi + 1e-12);
        }
    }

    #[test]
    fn proportional_cards_invert_aggregate() {
        let mut rng = stream(10, "fuzz");
        for domain in Domain::ALL {
            for _ in 0..50 {
                let overall: f64 = rng.random_range(0.0..=100.0);
                let card = ScoreCard::proportional(domain, overall);
                assert!((card.aggregate().unwrap() - overall).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cost_stats_match_hand_computation() {
        let stats = compute_cost_stats(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(stats.total, 15.0);
        assert_eq!(stats.mean, 3.0);
        assert_eq!(stats.median, 3.0);
        assert_eq!(stats.min, 1.0);
        assert_eq!(stats.max, 5.0);
        assert!((stats.std - 2.5f64.sqrt()).abs() < 1e-12);
        assert!((stats.std - 1.5811).abs() < 1e-4);
        assert_eq!(stats.cumulative, vec![1.0, 3.0, 6.0, 10.0, 15.0]);

        let single = compute_cost_stats(&[0.7]).unwrap();
        assert_eq!((single.std, single.median, single.total), (0.0, 0.7, 0.7));

        let even = compute_cost_stats(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(even.median, 2.5);

        assert!(compute_cost_stats(&[]).is_err());
        assert!(compute_cost_stats(&[1.0, f64::NAN]).is_err());
        assert!(compute_cost_stats(&[-0.1]).is_err());
    }

    #[test]
    fn cost_stats_match_brute_force_recount() {
        let mut rng = stream(11, "fuzz");
        for _ in 0..1000 {
            let n = rng.random_range(1..40);
            let costs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
            let stats = compute_cost_stats(&costs).unwrap();
            let total: f64 = costs.iter().sum();
            assert!((stats.total - total).abs() <= 1e-10 * total.max(1.0));
            let mut prev = 0.0;
            for (i, c) in stats.cumulative.iter().enumerate() {
                assert!(*c >= prev);
                let recount: f64 = costs[..=i].iter().sum();
                assert!((c - recount).abs() <= 1e-10);
                prev = *c;
            }
            assert!(stats.min <= stats.median && stats.median <= stats.max);
        }
    }

    #[test]
    fn reduction_reproduces_published_percentages() {
        let software = reduction_pct(0.4052, 1.4658).unwrap();
        assert!((software - 72.4).abs() < 0.05, "got {software}");
        let inversion = reduction_pct(0.1118, 0.0983).unwrap();
        assert!((inversion - -13.7).abs() < 0.05, "got {inversion}");
        assert_eq!(reduction_pct(2.5, 2.5).unwrap(), 0.0);
        assert!(reduction_pct(1.0, 0.0).is_err());
        assert!(reduction_pct(1.0, -2.0).is_err());
    }

    #[test]
    fn suites_have_the_declared_difficulty_split() {
        for (plan, easy, hard) in [
            (SuitePlan::Standard20, 10, 10),
            (SuitePlan::Hard10, 0, 10),
            (SuitePlan::Mixed10, 5, 5),
        ] {
            let tasks = build_suite(plan, Domain::Software, 42).unwrap();
            assert_eq!(tasks.len(), easy + hard);
            let observed_easy =
                tasks.iter().filter(|t| t.latent_difficulty() < 0.4).count();
            let observed_hard =
                tasks.iter().filter(|t| t.latent_difficulty() >= 0.6).count();
            assert_eq!((observed_easy, observed_hard), (easy, hard));
        }
        let a = build_suite(SuitePlan::Standard20, Domain::Data, 7).unwrap();
        let b = build_suite(SuitePlan::Standard20, Domain::Data, 7).unwrap();
        assert_eq!(a, b, "suite generation must be deterministic");
    }

    #[test]
    fn synthetic_judge_favors_strong_on_hard_tasks() {
        let mut strong_sum = 0.0;
        let mut weak_sum = 0.0;
        let n = 300;
        for i in 0..n {
            let task = TaskStep::new(
                format!("q{i}"),
                "hard task",
                crate::features::AgentRole::Engineer,
                1000,
                Domain::Software,
                0.9,
            );
            strong_sum += simulated_quality(5, &task, ModelTier::Strong, Outcome::Success);
            weak_sum += simulated_quality(5, &task, ModelTier::Weak, Outcome::Success);
        }
        let (strong_mean, weak_mean) = (strong_sum / n as f64, weak_sum / n as f64);
        assert!(strong_mean > weak_mean + 10.0, "{strong_mean} vs {weak_mean}");
        // Failures score far below successes.
        let task =
            TaskStep::new("qf", "task", crate::features::AgentRole::Engineer, 100, Domain::Software, 0.5);
        let fail = simulated_quality(5, &task, ModelTier::Weak, Outcome::Failure);
        assert!(fail < 50.0);
        // Same key, same draw.
        assert_eq!(
            simulated_quality(5, &task, ModelTier::Weak, Outcome::Failure),
            simulated_quality(5, &task, ModelTier::Weak, Outcome::Failure),
        );
    }

    fn bench_bits() -> (Embedder, RiskLexicon, PricingTable) {
        (
            Embedder::from_spec(&EmbedderSpec::Hashing { dimension: 16, ngram: 3, seed: 0 })
                .unwrap(),
            RiskLexicon::default(),
            PricingTable::builtin(),
        )
    }

    /// Weak fails above 0.5 latent difficulty, strong never fails.
    fn split_sim(seed: u64) -> SimBackendConfig {
        SimBackendConfig {
            weak_success: SuccessCurve::Step { threshold: 0.5 },
            strong_success: SuccessCurve::Constant { p: 1.0 },
            ..SimBackendConfig::with_seed(seed)
        }
    }

    #[test]
    fn spec_validation_catches_misconfigurations() {
        let mut spec = BenchmarkSpec::new(
            Domain::Software,
            SuitePlan::Mixed10,
            vec![StrategyKind::ForceStrong, StrategyKind::ForceStrong],
            1,
        );
        assert!(spec.validate(false).is_err(), "duplicate strategies");
        spec.strategies = vec![];
        assert!(spec.validate(false).is_err(), "no strategies");
        spec.strategies = vec![StrategyKind::Caster];
        assert!(spec.validate(false).is_err(), "caster without checkpoint");
        assert!(spec.validate(true).is_ok());
    }

    #[test]
    fn paired_draws_make_weak_cheaper_than_strong() {
        let (embedder, lexicon, table) = bench_bits();
        let mut spec = BenchmarkSpec::new(
            Domain::Software,
            SuitePlan::Standard20,
            vec![StrategyKind::ForceStrong, StrategyKind::ForceWeak],
            42,
        );
        spec.sim = Some(SimBackendConfig {
            weak_success: SuccessCurve::Constant { p: 1.0 },
            strong_success: SuccessCurve::Constant { p: 1.0 },
            ..SimBackendConfig::with_seed(0)
        });
        let report =
            run_benchmark(&spec, &table, None, &embedder, &lexicon, None).unwrap();
        let strong = report.strategy(StrategyKind::ForceStrong).unwrap();
        let weak = report.strategy(StrategyKind::ForceWeak).unwrap();
        assert!(weak.cost.total < strong.cost.total);
        assert_eq!(strong.reduction_vs_strong, Some(0.0));
        assert!(weak.reduction_vs_strong.unwrap() > 0.0);
        // Identical token draws per task: the per-step ratio equals the
        // pricing ratio exactly (both all-succeed, single attempt).
        for (w, s) in weak.steps.iter().zip(&strong.steps) {
            assert_eq!(w.step.tokens_in, s.step.tokens_in);
            assert_eq!(w.step.tokens_out, s.step.tokens_out);
        }
        // ForceWeak's cumulative trace stays pointwise under ForceStrong's.
        for (w, s) in weak.cost.cumulative.iter().zip(&strong.cost.cumulative) {
            assert!(w <= s);
        }
    }

    #[test]
    fn oracle_total_matches_closed_form_ledger() {
        let (embedder, lexicon, table) = bench_bits();
        let mut spec = BenchmarkSpec::new(
            Domain::Science,
            SuitePlan::Mixed10,
            vec![StrategyKind::Oracle],
            42,
        );
        spec.sim = Some(split_sim(0));
        let report =
            run_benchmark(&spec, &table, None, &embedder, &lexicon, None).unwrap();
        let oracle = report.strategy(StrategyKind::Oracle).unwrap();

        // Recompute from the shared draws: easy tasks run weak once, hard
        // tasks run strong once.
        let tasks = build_suite(SuitePlan::Mixed10, Domain::Science, 42).unwrap();
        let sim = spec.effective_sim();
        let cost = CostModel::new(table.clone(), TierBinding::default()).unwrap();
        let mut expected = 0.0;
        for task in &tasks {
            let tier = task.oracle_tier();
            let rec = sim_execute(&sim, task, tier, 0);
            assert_eq!(rec.outcome, Outcome::Success);
            expected += cost.price(tier, rec.tokens_in, rec.tokens_out).unwrap();
        }
        assert!((oracle.cost.total - expected).abs() < 1e-12);
        assert!(oracle.steps.iter().all(|s| s.step.attempts == 1));
    }

    #[test]
    fn report_is_deterministic_and_serializable() {
        let (embedder, lexicon, table) = bench_bits();
        let router_cfg =
            RouterConfig { d_in: 16, d_sem: 8, d_struct: 4, d_fuse: 6, ..RouterConfig::default() };
        let params = RouterParams::init(&router_cfg, &mut stream(3, "init"));
        let ckpt = Checkpoint::new(router_cfg, &params, None, 0);
        let mut spec = BenchmarkSpec::new(
            Domain::Security,
            SuitePlan::Mixed10,
            vec![
                StrategyKind::Caster,
                StrategyKind::ForceStrong,
                StrategyKind::ForceWeak,
                StrategyKind::Cascade,
                StrategyKind::Oracle,
            ],
            7,
        );
        spec.sim = Some(split_sim(0));
        let run = || {
            run_benchmark(&spec, &table, Some(&ckpt), &embedder, &lexicon, None)
                .unwrap()
                .to_json()
                .unwrap()
        };
        let first = run();
        assert_eq!(first, run(), "same seed must reproduce the report byte for byte");
        let parsed = BenchmarkReport::from_json(&first).unwrap();
        assert_eq!(parsed.strategies.len(), 5);
        assert_eq!(parsed.score_source, SCORE_SOURCE);

        // Cascade double-bills hard steps, so it must cost more than oracle.
        let cascade = parsed.strategy(StrategyKind::Cascade).unwrap();
        let oracle = parsed.strategy(StrategyKind::Oracle).unwrap();
        assert!(cascade.cost.total > oracle.cost.total);
    }

    #[test]
    fn report_files_land_on_disk() {
        let (embedder, lexicon, table) = bench_bits();
        let mut spec = BenchmarkSpec::new(
            Domain::Data,
            SuitePlan::Mixed10,
            vec![StrategyKind::ForceStrong, StrategyKind::ForceWeak],
            3,
        );
        spec.sim = Some(split_sim(0));
        let report =
            run_benchmark(&spec, &table, None, &embedder, &lexicon, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("report");
        write_report(&report, &out).unwrap();
        let csv = std::fs::read_to_string(out.join("costs.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("step,strategy,tier,tokens_in,tokens_out,usd"));
        assert_eq!(csv.lines().count(), 1 + 2 * 10);
        let first = lines.next().unwrap();
        assert!(first.starts_with("bench-00,strong,"), "{first}");
        let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
        assert!(summary.contains("synthetic simulated judge"));
        assert!(summary.contains("strong"));
        let json = std::fs::read_to_string(out.join("report.json")).unwrap();
        assert!(json.ends_with('\n'));
        BenchmarkReport::from_json(&json).unwrap();
    }

    #[test]
    fn spec_file_round_trips() {
        let spec = BenchmarkSpec::new(
            Domain::Software,
            SuitePlan::Standard20,
            vec![StrategyKind::ForceStrong, StrategyKind::Cascade],
            42,
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spec.json");
        spec.save(&path).unwrap();
        let loaded = BenchmarkSpec::load(&path).unwrap();
        assert_eq!(loaded.to_json().unwrap(), spec.to_json().unwrap());
        assert_eq!(loaded.breaker_max, 3);
    }
}
