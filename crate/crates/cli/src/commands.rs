//! The seven subcommands. Each takes the resolved [`AppConfig`] plus its
//! own plain-typed arguments, does the work through the core crate, and
//! writes a run manifest beside whatever it produced.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use caster_core::backends::{HttpBackend, ModelBackend, Outcome, SimBackend};
use caster_core::bench::{
    run_benchmark, write_report, BenchmarkReport, BenchmarkSpec, SuitePlan,
};
use caster_core::checkpoint::Checkpoint;
use caster_core::coldstart::{
    build_pretrain_set, builtin_seeds, ensure_embeddings, load_samples_jsonl, load_seeds_jsonl,
    save_samples_jsonl, Tier,
};
use caster_core::router::RouterParams;
use caster_core::runtime::{
    run_workflow, save_results_jsonl, RoutingContext, RoutingStrategy, StrategyKind,
};
use caster_core::task::{load_tasks_jsonl, Domain};
use caster_core::training;
use caster_core::trajectory::{
    accumulate_trajectories, load_trajectories_jsonl, relabel, save_relabeled_jsonl,
    save_trajectories_jsonl, CollectionContext, CollectionPolicy, CostModel, Provenance,
    RelabeledSample, TaskGenerator,
};
use caster_core::{Error, ModelTier, Result};

use crate::config::AppConfig;
use crate::manifest::{manifest_dir, RunManifest};

fn save_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|err| Error::Format(format!("serialize {}: {err}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|err| Error::io(path.display().to_string(), err))
}

/// Execution backend selected by `backend.kind`.
fn build_backend(cfg: &AppConfig) -> Result<Box<dyn ModelBackend>> {
    match cfg.backend.kind.as_str() {
        "sim" => Ok(Box::new(SimBackend::new(cfg.sim_config()))),
        "http" => {
            Ok(Box::new(HttpBackend { chat: cfg.chat_endpoint()?, binding: cfg.binding()? }))
        }
        other => Err(Error::Config(format!(
            "unknown backend.kind {other:?}; expected sim or http"
        ))),
    }
}

/// Task-text source matching the execution backend: hermetic templates
/// for the simulator, the strong chat model when running remote.
fn build_generator(cfg: &AppConfig) -> Result<TaskGenerator> {
    match cfg.backend.kind.as_str() {
        "http" => Ok(TaskGenerator::External {
            endpoint: cfg.chat_endpoint()?,
            model: cfg.binding()?.strong.model,
        }),
        _ => Ok(TaskGenerator::Simulated),
    }
}

fn load_checkpoint(
    path: &Path,
    manifest: &mut RunManifest,
) -> Result<Checkpoint> {
    manifest.add_input(path)?;
    Checkpoint::load(path)
}

pub struct PretrainArgs {
    pub seeds: Option<PathBuf>,
    pub out: PathBuf,
    pub dump_data: Option<PathBuf>,
    pub no_embed: bool,
}

pub fn pretrain_cmd(cfg: &AppConfig, args: &PretrainArgs) -> Result<()> {
    let started = Instant::now();
    let mut manifest = RunManifest::new("pretrain", cfg);

    let seeds = match &args.seeds {
        Some(path) => {
            manifest.add_input(path)?;
            load_seeds_jsonl(path)?
        }
        None => builtin_seeds(),
    };
    let router_cfg = cfg.router_config();
    let embedder = cfg.embedder_for(router_cfg.d_in)?;
    let lexicon = cfg.lexicon();
    let set = build_pretrain_set(&seeds, &cfg.augmentation(), &embedder, &lexicon)?;
    println!(
        "augmented {} seeds into {} samples (easy {}, medium {}, hard {})",
        seeds.len(),
        set.summary.total(),
        set.summary.count_for(Tier::Easy),
        set.summary.count_for(Tier::Medium),
        set.summary.count_for(Tier::Hard),
    );

    let train_cfg = cfg.train_config();
    let (params, mut report) = training::pretrain(&set.samples, &router_cfg, &train_cfg)?;
    let checkpoint = Checkpoint::new(router_cfg, &params, None, train_cfg.pretrain_epochs);
    checkpoint.save(&args.out)?;
    manifest.add_output(&args.out)?;

    report.checkpoint_path = Some(args.out.display().to_string());
    let report_path = args.out.with_extension("report.json");
    save_json_pretty(&report_path, &report)?;
    manifest.add_output(&report_path)?;

    if let Some(dump) = &args.dump_data {
        save_samples_jsonl(dump, &set.samples, !args.no_embed)?;
        manifest.add_output(dump)?;
        println!("training data dumped to {}", dump.display());
    }

    let manifest_path = manifest.write(manifest_dir(&args.out), started)?;
    println!(
        "pretrained {} epochs, final accuracy {:.4}; checkpoint {} ({} parameters)",
        train_cfg.pretrain_epochs,
        report.final_accuracy,
        args.out.display(),
        params.param_count(),
    );
    println!("manifest {}", manifest_path.display());
    Ok(())
}

pub struct GenTrajArgs {
    pub out: PathBuf,
    pub count: usize,
    pub ckpt: Option<PathBuf>,
    pub relabeled: Option<PathBuf>,
}

pub fn gen_traj_cmd(cfg: &AppConfig, args: &GenTrajArgs) -> Result<()> {
    let started = Instant::now();
    let mut manifest = RunManifest::new("gen-traj", cfg);
    if args.count == 0 {
        return Err(Error::Config("gen-traj: --count must be at least 1".into()));
    }

    let checkpoint = match &args.ckpt {
        Some(path) => Some(load_checkpoint(path, &mut manifest)?),
        None => None,
    };
    let params = checkpoint.as_ref().map(|c| c.params()).transpose()?;
    let d_in = checkpoint.as_ref().map(|c| c.config.d_in).unwrap_or(cfg.router.d_in);
    let embedder = cfg.embedder_for(d_in)?;
    let lexicon = cfg.lexicon();
    let policy = match (&checkpoint, &params) {
        (Some(ckpt), Some(params)) => {
            println!(
                "collecting on-policy with the epoch-{} checkpoint (threshold {})",
                ckpt.epoch, ckpt.config.threshold
            );
            CollectionPolicy::Router {
                params,
                cfg: &ckpt.config,
                threshold: ckpt.config.threshold,
            }
        }
        _ => {
            println!("collecting with the oracle reference policy (no checkpoint given)");
            CollectionPolicy::Oracle
        }
    };

    let mut backend = build_backend(cfg)?;
    let mut ctx = CollectionContext {
        gen_cfg: cfg.taskgen_config(),
        generator: build_generator(cfg)?,
        backend: backend.as_mut(),
        cost: CostModel::new(cfg.pricing()?, cfg.binding()?)?,
        breaker_max: cfg.runtime.breaker_max,
        embedder: &embedder,
        lexicon: &lexicon,
        context_cap: cfg.runtime.context_cap,
    };
    let records = accumulate_trajectories(&mut ctx, &policy, args.count, Some(&args.out))?;
    save_trajectories_jsonl(&args.out, &records)?;
    manifest.add_output(&args.out)?;

    let strong = records.iter().filter(|r| r.model_used == ModelTier::Strong).count();
    let failures = records.iter().filter(|r| r.outcome == Outcome::Failure).count();
    let total: f64 = records.iter().map(|r| r.cost_usd).sum();
    println!(
        "collected {} trajectories ({} strong, {} weak, {} failures), total ${:.4}",
        records.len(),
        strong,
        records.len() - strong,
        failures,
        total,
    );
    println!("trajectories {}", args.out.display());

    if let Some(path) = &args.relabeled {
        let (samples, discarded) = relabel_records(&records, cfg, &embedder)?;
        save_relabeled_jsonl(path, &samples)?;
        manifest.add_output(path)?;
        println!(
            "relabeled {} of {} records ({} strong failures discarded) into {}",
            samples.len(),
            records.len(),
            discarded,
            path.display(),
        );
    }

    let manifest_path = manifest.write(manifest_dir(&args.out), started)?;
    println!("manifest {}", manifest_path.display());
    Ok(())
}

fn relabel_records(
    records: &[caster_core::trajectory::TrajectoryRecord],
    cfg: &AppConfig,
    embedder: &caster_core::features::Embedder,
) -> Result<(Vec<RelabeledSample>, usize)> {
    let lexicon = cfg.lexicon();
    let mut samples = Vec::new();
    let mut discarded = 0usize;
    for record in records {
        match relabel(record, embedder, &lexicon, cfg.runtime.context_cap)? {
            Some(sample) => samples.push(sample),
            None => discarded += 1,
        }
    }
    Ok((samples, discarded))
}

pub struct FinetuneArgs {
    pub ckpt: PathBuf,
    pub traj: PathBuf,
    pub out: PathBuf,
    pub replay: Option<PathBuf>,
}

pub fn finetune_cmd(cfg: &AppConfig, args: &FinetuneArgs) -> Result<()> {
    let started = Instant::now();
    let mut manifest = RunManifest::new("finetune", cfg);

    let checkpoint = load_checkpoint(&args.ckpt, &mut manifest)?;
    let params = checkpoint.params()?;
    let embedder = cfg.embedder_for(checkpoint.config.d_in)?;

    manifest.add_input(&args.traj)?;
    let records = load_trajectories_jsonl(&args.traj)?;
    let (relabeled, discarded) = relabel_records(&records, cfg, &embedder)?;
    let corrected =
        relabeled.iter().filter(|s| s.provenance == Provenance::CorrectedFailure).count();
    let reinforced =
        relabeled.iter().filter(|s| s.provenance == Provenance::ReinforcedStrong).count();
    let encouraged =
        relabeled.iter().filter(|s| s.provenance == Provenance::EncouragedWeak).count();
    println!(
        "relabeled {} of {} trajectories ({} corrected failures, {} reinforced strong, \
         {} encouraged weak, {} strong failures discarded)",
        relabeled.len(),
        records.len(),
        corrected,
        reinforced,
        encouraged,
        discarded,
    );

    let replay_pool = match &args.replay {
        Some(path) => {
            manifest.add_input(path)?;
            let mut samples = load_samples_jsonl(path)?;
            ensure_embeddings(&mut samples, &embedder)?;
            println!("replaying from {} pretraining samples", samples.len());
            samples
        }
        None => Vec::new(),
    };

    let train_cfg = cfg.train_config();
    let (tuned, mut report) =
        training::finetune(&params, &relabeled, &replay_pool, &checkpoint.config, &train_cfg)?;
    let epoch = checkpoint.epoch + train_cfg.finetune_epochs;
    let tuned_checkpoint = Checkpoint::new(checkpoint.config, &tuned, None, epoch);
    tuned_checkpoint.save(&args.out)?;
    manifest.add_output(&args.out)?;

    report.checkpoint_path = Some(args.out.display().to_string());
    let report_path = args.out.with_extension("report.json");
    save_json_pretty(&report_path, &report)?;
    manifest.add_output(&report_path)?;

    let manifest_path = manifest.write(manifest_dir(&args.out), started)?;
    println!(
        "fine-tuned {} epochs (lr {} halving every {}), final accuracy {:.4}; checkpoint {}",
        train_cfg.finetune_epochs,
        train_cfg.finetune_lr,
        train_cfg.decay_every,
        report.final_accuracy,
        args.out.display(),
    );
    println!("manifest {}", manifest_path.display());
    Ok(())
}

pub struct RouteArgs {
    pub strategy: String,
    pub tasks: PathBuf,
    pub out: PathBuf,
    pub ckpt: Option<PathBuf>,
}

pub fn route_cmd(cfg: &AppConfig, args: &RouteArgs) -> Result<()> {
    let started = Instant::now();
    let mut manifest = RunManifest::new("route", cfg);

    let kind: StrategyKind = args.strategy.parse()?;
    manifest.add_input(&args.tasks)?;
    let tasks = load_tasks_jsonl(&args.tasks)?;
    if tasks.is_empty() {
        return Err(Error::Config(format!("no tasks in {}", args.tasks.display())));
    }

    let checkpoint = match &args.ckpt {
        Some(path) => Some(load_checkpoint(path, &mut manifest)?),
        None => None,
    };
    if kind == StrategyKind::Caster && checkpoint.is_none() {
        return Err(Error::Config("route --strategy caster requires --ckpt".into()));
    }
    let router_cfg =
        checkpoint.as_ref().map(|c| c.config).unwrap_or_else(|| cfg.router_config());
    let params = checkpoint.as_ref().map(|c| c.params()).transpose()?;
    let embedder = cfg.embedder_for(router_cfg.d_in)?;
    let lexicon = cfg.lexicon();
    let cost_model = CostModel::new(cfg.pricing()?, cfg.binding()?)?;
    let threshold = router_cfg.threshold;
    let ctx = RoutingContext {
        router_cfg,
        embedder: &embedder,
        lexicon: &lexicon,
        cost: &cost_model,
        context_cap: cfg.runtime.context_cap,
        history_tail_tokens: cfg.runtime.history_tail_tokens,
    };
    let strategy = match kind {
        StrategyKind::Caster => RoutingStrategy::Caster {
            params: params.as_ref().expect("checked above"),
            threshold,
        },
        StrategyKind::ForceStrong => RoutingStrategy::ForceStrong,
        StrategyKind::ForceWeak => RoutingStrategy::ForceWeak,
        StrategyKind::Cascade => RoutingStrategy::cascade(),
        StrategyKind::Oracle => RoutingStrategy::Oracle,
    };

    let mut backend = build_backend(cfg)?;
    let (results, halted) =
        run_workflow(&strategy, &ctx, &tasks, backend.as_mut(), cfg.runtime.breaker_max);
    save_results_jsonl(&args.out, &results)?;
    if let Some(err) = halted {
        eprintln!(
            "workflow stopped after {} of {} steps; partial results saved to {}",
            results.len(),
            tasks.len(),
            args.out.display(),
        );
        return Err(err);
    }
    manifest.add_output(&args.out)?;

    let strong = results.iter().filter(|r| r.tier_used == ModelTier::Strong).count();
    let failures = results.iter().filter(|r| r.outcome == Outcome::Failure).count();
    let total: f64 = results.iter().map(|r| r.cost_usd).sum();
    println!(
        "routed {} steps with {}: {} strong / {} weak, {} failures, total ${:.4}",
        results.len(),
        kind,
        strong,
        results.len() - strong,
        failures,
        total,
    );
    println!("results {}", args.out.display());

    let manifest_path = manifest.write(manifest_dir(&args.out), started)?;
    println!("manifest {}", manifest_path.display());
    Ok(())
}

pub struct BenchArgs {
    pub spec: Option<PathBuf>,
    pub ckpt: Option<PathBuf>,
    pub out: PathBuf,
}

/// The spec a bare `bench` runs: the full strategy lineup over the
/// standard software suite, seeded and priced from the config.
fn default_bench_spec(cfg: &AppConfig, has_checkpoint: bool) -> Result<BenchmarkSpec> {
    let mut strategies = Vec::new();
    if has_checkpoint {
        strategies.push(StrategyKind::Caster);
    }
    strategies.extend([
        StrategyKind::ForceStrong,
        StrategyKind::ForceWeak,
        StrategyKind::Cascade,
        StrategyKind::Oracle,
    ]);
    let mut spec =
        BenchmarkSpec::new(Domain::Software, SuitePlan::Standard20, strategies, cfg.seed());
    spec.binding = cfg.binding()?;
    spec.breaker_max = cfg.runtime.breaker_max;
    Ok(spec)
}

pub fn bench_cmd(cfg: &AppConfig, args: &BenchArgs) -> Result<()> {
    let started = Instant::now();
    let mut manifest = RunManifest::new("bench", cfg);

    let checkpoint = match &args.ckpt {
        Some(path) => Some(load_checkpoint(path, &mut manifest)?),
        None => None,
    };
    let spec = match &args.spec {
        Some(path) => {
            manifest.add_input(path)?;
            BenchmarkSpec::load(path)?
        }
        None => default_bench_spec(cfg, checkpoint.is_some())?,
    };

    let d_in = checkpoint.as_ref().map(|c| c.config.d_in).unwrap_or(cfg.router.d_in);
    let embedder = cfg.embedder_for(d_in)?;
    let lexicon = cfg.lexicon();
    let table = cfg.pricing()?;
    let report = run_benchmark(
        &spec,
        &table,
        checkpoint.as_ref(),
        &embedder,
        &lexicon,
        Some(&args.out),
    )?;

    write_report(&report, &args.out)?;
    spec.save(args.out.join("spec.json"))?;
    for name in ["report.json", "costs.csv", "summary.txt", "spec.json"] {
        manifest.add_output(args.out.join(name))?;
    }
    let manifest_path = manifest.write(&args.out, started)?;

    print!("{}", report.summary_text());
    println!("\nreport files in {}", args.out.display());
    println!("manifest {}", manifest_path.display());
    Ok(())
}

pub struct ReportArgs {
    pub report: PathBuf,
    pub out: Option<PathBuf>,
}

pub fn report_cmd(cfg: &AppConfig, args: &ReportArgs) -> Result<()> {
    let started = Instant::now();
    let text = std::fs::read_to_string(&args.report)
        .map_err(|err| Error::io(args.report.display().to_string(), err))?;
    let report = BenchmarkReport::from_json(&text)?;
    print!("{}", report.summary_text());

    if let Some(out) = &args.out {
        let mut manifest = RunManifest::new("report", cfg);
        manifest.add_input(&args.report)?;
        write_report(&report, out)?;
        for name in ["report.json", "costs.csv", "summary.txt"] {
            manifest.add_output(out.join(name))?;
        }
        let manifest_path = manifest.write(out, started)?;
        println!("\nreport files in {}", out.display());
        println!("manifest {}", manifest_path.display());
    }
    Ok(())
}

pub struct RouterInfoArgs {
    pub ckpt: Option<PathBuf>,
}

pub fn router_info_cmd(cfg: &AppConfig, args: &RouterInfoArgs) -> Result<()> {
    let (router_cfg, params, epoch, source) = match &args.ckpt {
        Some(path) => {
            let checkpoint = Checkpoint::load(path)?;
            let params = checkpoint.params()?;
            (checkpoint.config, params, checkpoint.epoch, Some(path.display().to_string()))
        }
        None => {
            let router_cfg = cfg.router_config();
            let params = RouterParams::zeros(&router_cfg);
            (router_cfg, params, 0, None)
        }
    };
    let info = serde_json::json!({
        "checkpoint": source,
        "epoch": epoch,
        "config": router_cfg,
        "parameters": params.param_count(),
        "layers": [
            {"name": "text_layer", "output": router_cfg.d_sem, "input": router_cfg.d_in},
            {"name": "meta_layer", "output": router_cfg.d_struct, "input": router_cfg.d_meta},
            {"name": "fuse_layer", "output": router_cfg.d_fuse, "input": router_cfg.d_joint()},
            {"name": "out_head", "output": 1, "input": router_cfg.d_fuse},
        ],
    });
    let text = serde_json::to_string_pretty(&info)
        .map_err(|err| Error::Format(format!("router info serialize: {err}")))?;
    println!("{text}");
    Ok(())
}
