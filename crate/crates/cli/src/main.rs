//! `biaslab` command-line entry point.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use biaslab::agents::scripted::Strategy;
use biaslab::agents::AgentSpec;
use biaslab::catalog::{Protocol, Split};
use biaslab::judge::adapter::LlmJudgeConfig;
use biaslab::runner::{self, RunConfig, RunnerError};
use biaslab::stats::{Alternative, DEFAULT_PERMUTATIONS};

const EXIT_OTHER: u8 = 1;
const EXIT_VALIDATION: u8 = 2;

#[derive(Parser)]
#[command(name = "biaslab", version, about = "Rule-discovery environments, agents, judges and bias metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write Wason and blicket episode datasets and print feasible-set sizes.
    Generate {
        #[arg(long, default_value = "data")]
        out: PathBuf,
        #[arg(long, default_value_t = 1337)]
        seed: u64,
        /// Restrict Wason datasets to these rule groups (comma separated).
        #[arg(long, value_delimiter = ',')]
        groups: Option<Vec<u32>>,
    },
    /// Play every episode of a dataset and write transcripts.
    Run(RunArgs),
    /// Label announcements and probes of a run.
    Judge {
        #[arg(long)]
        run: PathBuf,
        /// TOML file configuring the optional LLM judge adapter.
        #[arg(long)]
        judge_config: Option<PathBuf>,
    },
    /// Compute metrics of a judged run.
    Metrics {
        #[arg(long)]
        run: PathBuf,
        /// Print the JSON report instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Paired permutation tests between two judged runs (B minus A).
    Stats {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
        permutations: u64,
        #[arg(long, default_value_t = 1337)]
        seed: u64,
        #[arg(long)]
        two_sided: bool,
    },
    /// Export next-turn training records from teacher transcripts.
    ExportDistill {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// train, validation or test; all splits when omitted.
        #[arg(long, value_parser = parse_serde::<Split>)]
        split: Option<Split>,
    },
    /// Print a transcript and verify its feedback.
    Replay {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        episode: String,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// baseline, dual_goal or think_in_opposites.
    #[arg(long, value_parser = parse_serde::<Protocol>)]
    protocol: Option<Protocol>,
    /// Scripted strategy: confirm, falsify or elimination.
    #[arg(long)]
    agent: Option<Strategy>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    retry_cap: Option<u32>,
    #[arg(long)]
    turn_budget: Option<u32>,
    #[arg(long)]
    limit: Option<usize>,
    /// Keep finished transcripts written under the same configuration.
    #[arg(long)]
    resume: bool,
}

fn parse_serde<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T, RunnerError> {
    let text = std::fs::read_to_string(path).map_err(|_| RunnerError::Missing(path.display().to_string()))?;
    toml::from_str(&text).map_err(|e| RunnerError::Config(format!("{}: {e}", path.display())))
}

fn run_config(args: RunArgs) -> Result<(RunConfig, bool), RunnerError> {
    let mut config = match &args.config {
        Some(p) => read_toml::<RunConfig>(p)?,
        None => RunConfig {
            dataset: args
                .dataset
                .clone()
                .ok_or_else(|| RunnerError::Config("--dataset or --config is required".into()))?,
            output: args
                .output
                .clone()
                .ok_or_else(|| RunnerError::Config("--output or --config is required".into()))?,
            protocol: None,
            seed: 1337,
            turn_budget: biaslab::catalog::TURN_BUDGET,
            retry_cap: biaslab::engine::DEFAULT_RETRY_CAP,
            workers: 4,
            max_episode_tokens: None,
            limit: None,
            agent: AgentSpec::scripted(
                args.agent
                    .ok_or_else(|| RunnerError::Config("--agent or --config is required".into()))?,
            ),
        },
    };
    if let Some(v) = args.dataset {
        config.dataset = v;
    }
    if let Some(v) = args.output {
        config.output = v;
    }
    if let Some(v) = args.protocol {
        config.protocol = Some(v);
    }
    if let Some(s) = args.agent {
        config.agent = AgentSpec::scripted(s);
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.workers {
        config.workers = v;
    }
    if let Some(v) = args.retry_cap {
        config.retry_cap = v;
    }
    if let Some(v) = args.turn_budget {
        config.turn_budget = v;
    }
    if let Some(v) = args.limit {
        config.limit = Some(v);
    }
    Ok((config, args.resume))
}

fn execute(command: Command) -> Result<u8, RunnerError> {
    match command {
        Command::Generate { out, seed, groups } => {
            let s = runner::generate(&out, seed, groups.as_deref())?;
            for (file, n) in &s.files {
                println!("{file:<24} {n:>6} episodes");
            }
            println!("\ngroup  feasible");
            for (g, n) in &s.feasible {
                println!("{g:>5}  {n:>8}");
            }
            Ok(0)
        }
        Command::Run(args) => {
            let (config, resume) = run_config(args)?;
            let s = runner::run(&config, resume)?;
            println!("config {}", s.config_hash);
            println!("episodes {} (reused {})", s.episodes, s.reused);
            for (status, n) in &s.statuses {
                println!("  {status:<18} {n}");
            }
            Ok(s.exit_code() as u8)
        }
        Command::Judge { run, judge_config } => {
            let adapter = judge_config.as_deref().map(read_toml::<LlmJudgeConfig>).transpose()?;
            let judged = runner::judge_run(&run, adapter.as_ref())?;
            let solved = judged.iter().filter(|e| e.solved()).count();
            println!("judged {} episodes ({solved} solved)", judged.len());
            Ok(0)
        }
        Command::Metrics { run, json } => {
            let r = runner::metrics_run(&run)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&r).expect("serializes"));
            } else {
                println!("{r}");
            }
            Ok(0)
        }
        Command::Stats {
            a,
            b,
            permutations,
            seed,
            two_sided,
        } => {
            let alt = if two_sided { Alternative::TwoSided } else { Alternative::Greater };
            let (n, rows) = runner::compare(&runner::load_judged(&a)?, &runner::load_judged(&b)?, permutations, seed, alt)?;
            println!("{n} paired episodes, {permutations} permutations, {alt:?}");
            println!("{:<16} {:>10} {:>10}", "metric", "delta", "p");
            for row in rows {
                match (row.result, row.note) {
                    (Some(r), _) => println!("{:<16} {:>10.4} {:>10.5}", row.metric.name(), r.delta_obs, r.p_value),
                    (None, note) => println!("{:<16} {:>10} {:>10}  {}", row.metric.name(), "--", "--", note.unwrap_or_default()),
                }
            }
            Ok(0)
        }
        Command::ExportDistill { run, out, split } => {
            let c = runner::export_run(&run, split, &out)?;
            println!("{} records from {} episodes ({} incomplete skipped)", c.records, c.episodes, c.skipped);
            Ok(0)
        }
        Command::Replay { run, episode } => {
            let (text, issues) = runner::replay_episode(&run, &episode)?;
            print!("{text}");
            Ok(if issues.is_empty() { 0 } else { EXIT_OTHER })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { EXIT_VALIDATION } else { EXIT_OTHER })
        }
    }
}
