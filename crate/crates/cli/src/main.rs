//! `caster` — cost-aware routing for multi-step agent workflows.
//!
//! Subcommands cover the full loop: pretrain a router from the built-in
//! (or a custom) seed corpus, collect execution trajectories, fine-tune
//! on their outcome-derived labels, route task files, and benchmark
//! routing strategies against each other on identical suites.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;

use clap::{Arg, ArgAction, ArgMatches, Command};

use caster_core::Result;

use commands::{
    bench_cmd, finetune_cmd, gen_traj_cmd, pretrain_cmd, report_cmd, route_cmd, router_info_cmd,
    BenchArgs, FinetuneArgs, GenTrajArgs, PretrainArgs, ReportArgs, RouteArgs, RouterInfoArgs,
};
use config::Kind;

fn path_arg(name: &'static str, help: &'static str, required: bool) -> Arg {
    Arg::new(name)
        .long(name)
        .value_name("PATH")
        .value_parser(clap::value_parser!(PathBuf))
        .required(required)
        .help(help)
}

fn build_cli() -> Command {
    let mut cli = Command::new("caster")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Cost-aware routing engine for multi-step agent workflows")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_name("FILE")
                .help("JSON config file (also read from CASTER_CONFIG)"),
        );
    for (flag, kind) in config::flag_registry() {
        let value_name = match kind {
            Kind::U64 | Kind::U32 | Kind::Usize => "N",
            Kind::F64 => "X",
            Kind::Str => "VALUE",
        };
        cli = cli.arg(
            Arg::new(flag.clone())
                .long(flag.clone())
                .global(true)
                .value_name(value_name)
                .hide(true)
                .help(format!("override config key {flag}")),
        );
    }
    cli.after_help(
        "Any config key can be overridden with --<section>.<key> flags \
         (see `caster config` for the full schema) or CASTER_* environment \
         variables; flags beat environment variables beat the config file.",
    )
    .subcommand(
        Command::new("pretrain")
            .about("Train a router from a seed corpus and save a checkpoint")
            .arg(path_arg("seeds", "Seed corpus JSONL (defaults to the built-in corpus)", false))
            .arg(path_arg("out", "Checkpoint output path", true))
            .arg(path_arg("dump-data", "Also write the augmented training set as JSONL", false))
            .arg(
                Arg::new("no-embed")
                    .long("no-embed")
                    .action(ArgAction::SetTrue)
                    .help("Drop embeddings from --dump-data output (re-embedded on load)"),
            ),
    )
    .subcommand(
        Command::new("gen-traj")
            .about("Generate tasks, route and execute them, and record trajectories")
            .arg(path_arg("out", "Trajectory JSONL output path", true))
            .arg(
                Arg::new("count")
                    .long("count")
                    .value_name("N")
                    .value_parser(clap::value_parser!(usize))
                    .default_value("20")
                    .help("How many trajectories to collect"),
            )
            .arg(path_arg("ckpt", "Route with this checkpoint (default: oracle policy)", false))
            .arg(path_arg("relabeled", "Also write outcome-relabeled samples as JSONL", false)),
    )
    .subcommand(
        Command::new("finetune")
            .about("Fine-tune a checkpoint on relabeled trajectories")
            .arg(path_arg("ckpt", "Checkpoint to start from", true))
            .arg(path_arg("traj", "Trajectory JSONL to relabel and train on", true))
            .arg(path_arg("out", "Tuned checkpoint output path", true))
            .arg(path_arg("replay", "Pretraining-sample JSONL replayed during tuning", false)),
    )
    .subcommand(
        Command::new("route")
            .about("Route a task file through one strategy and save step results")
            .arg(
                Arg::new("strategy")
                    .long("strategy")
                    .value_name("NAME")
                    .required(true)
                    .help("caster, strong, weak, cascade, or oracle"),
            )
            .arg(path_arg("tasks", "Task JSONL to execute in order", true))
            .arg(path_arg("out", "Step-result JSONL output path", true))
            .arg(path_arg("ckpt", "Router checkpoint (required for --strategy caster)", false)),
    )
    .subcommand(
        Command::new("bench")
            .about("Run strategies over an identical suite and write a cost/quality report")
            .arg(path_arg("spec", "Benchmark spec JSON (default: standard suite from config)", false))
            .arg(path_arg("ckpt", "Router checkpoint for the caster strategy", false))
            .arg(path_arg("out", "Report output directory", true)),
    )
    .subcommand(
        Command::new("report")
            .about("Render a saved benchmark report; optionally rewrite its file set")
            .arg(path_arg("report", "Path to a report.json", true))
            .arg(path_arg("out", "Directory to rewrite report files into", false)),
    )
    .subcommand(
        Command::new("router-info")
            .about("Print router architecture and parameter counts as JSON")
            .arg(path_arg("ckpt", "Checkpoint to inspect (default: configured architecture)", false)),
    )
    .subcommand(
        Command::new("config")
            .about("Print the fully resolved configuration as JSON")
            .arg(
                Arg::new("defaults")
                    .long("defaults")
                    .action(ArgAction::SetTrue)
                    .help("Print the built-in defaults instead of the resolved config"),
            ),
    )
}

fn path_of(matches: &ArgMatches, name: &str) -> Option<PathBuf> {
    matches.get_one::<PathBuf>(name).cloned()
}

fn run(matches: &ArgMatches) -> Result<()> {
    let (name, sub) = matches.subcommand().expect("subcommand is required");

    let flags: Vec<(String, String)> = config::flag_registry()
        .into_iter()
        .filter_map(|(flag, _)| {
            sub.get_one::<String>(&flag).map(|value| (flag.clone(), value.clone()))
        })
        .collect();
    let config_flag = sub.get_one::<String>("config").cloned();
    let cfg = config::resolve(config_flag.as_deref(), &flags)?;

    match name {
        "pretrain" => pretrain_cmd(
            &cfg,
            &PretrainArgs {
                seeds: path_of(sub, "seeds"),
                out: path_of(sub, "out").expect("required"),
                dump_data: path_of(sub, "dump-data"),
                no_embed: sub.get_flag("no-embed"),
            },
        ),
        "gen-traj" => gen_traj_cmd(
            &cfg,
            &GenTrajArgs {
                out: path_of(sub, "out").expect("required"),
                count: *sub.get_one::<usize>("count").expect("defaulted"),
                ckpt: path_of(sub, "ckpt"),
                relabeled: path_of(sub, "relabeled"),
            },
        ),
        "finetune" => finetune_cmd(
            &cfg,
            &FinetuneArgs {
                ckpt: path_of(sub, "ckpt").expect("required"),
                traj: path_of(sub, "traj").expect("required"),
                out: path_of(sub, "out").expect("required"),
                replay: path_of(sub, "replay"),
            },
        ),
        "route" => route_cmd(
            &cfg,
            &RouteArgs {
                strategy: sub.get_one::<String>("strategy").expect("required").clone(),
                tasks: path_of(sub, "tasks").expect("required"),
                out: path_of(sub, "out").expect("required"),
                ckpt: path_of(sub, "ckpt"),
            },
        ),
        "bench" => bench_cmd(
            &cfg,
            &BenchArgs {
                spec: path_of(sub, "spec"),
                ckpt: path_of(sub, "ckpt"),
                out: path_of(sub, "out").expect("required"),
            },
        ),
        "report" => report_cmd(
            &cfg,
            &ReportArgs {
                report: path_of(sub, "report").expect("required"),
                out: path_of(sub, "out"),
            },
        ),
        "router-info" => router_info_cmd(&cfg, &RouterInfoArgs { ckpt: path_of(sub, "ckpt") }),
        "config" => {
            if sub.get_flag("defaults") {
                print!("{}", config::default_config_json());
            } else {
                let mut text = serde_json::to_string_pretty(&cfg)
                    .map_err(|err| caster_core::Error::Format(format!("config: {err}")))?;
                text.push('\n');
                print!("{text}");
            }
            Ok(())
        }
        other => unreachable!("unknown subcommand {other}"),
    }
}

/// Dying on SIGPIPE like any other filter keeps `caster ... | head` quiet;
/// Rust's default ignore turns the closed pipe into a stdout panic.
#[cfg(unix)]
fn reset_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn reset_sigpipe() {}

fn main() {
    reset_sigpipe();
    // clap itself exits with code 2 on usage errors, matching the
    // configuration-error class below.
    let matches = build_cli().get_matches();
    if let Err(err) = run(&matches) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
