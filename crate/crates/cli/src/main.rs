use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stepfix::reward::LossKind;
use stepfix::Status;
use stepfix_cli::commands::{
    cmd_curate, cmd_evaluate, cmd_judge, cmd_repair, cmd_rl_toy, cmd_train_rm, CurateArgs, RepairArgs, RlArgs,
    TrainRmArgs,
};
use stepfix_cli::{CliError, HarnessConfig};

#[derive(Parser)]
#[command(name = "stepfix", version, about = "Iterative program repair experiments")]
struct Cli {
    /// Harness config (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured worker count.
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the actor-critic repair loop over a corpus slice.
    Repair {
        /// Name of the run; logs go to <runs>/<run-id>.
        #[arg(long)]
        run_id: String,
        /// Repair records (JSONL). Defaults to paths.corpus.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Records taken per problem, in corpus order.
        #[arg(long, default_value_t = 1)]
        records_per_problem: usize,
    },
    /// Judge one program; exits 0 only on AC.
    Judge {
        /// Source file to run.
        program: PathBuf,
        /// Problem id under paths.problems.
        #[arg(long)]
        problem: String,
    },
    /// Train the ranking reward model from status comparisons.
    TrainRm {
        /// Repair records (JSONL). Defaults to paths.corpus.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Parameter file to write. Defaults to <reports>/ranker.txt.
        #[arg(long)]
        out: Option<PathBuf>,
        /// pair, point or list.
        #[arg(long)]
        loss: Option<LossKind>,
    },
    /// Re-judge a run's returned programs and report pass@k per tier.
    Evaluate {
        /// Run written by `repair`.
        #[arg(long)]
        run_id: String,
    },
    /// Filter raw submissions into repair records and export the split.
    Curate {
        /// CSV with submission_id,user_id,problem_id,timestamp,claimed_status,path.
        #[arg(long)]
        metadata: PathBuf,
        /// Folder the CSV's paths are relative to. Defaults to the CSV's folder.
        #[arg(long)]
        sources: Option<PathBuf>,
        /// Output folder for records, split files and filter reports.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the tabular toy repair policy.
    RlToy {
        /// Output folder. Defaults to <reports>/rl_toy.
        #[arg(long)]
        out: Option<PathBuf>,
        /// KL penalty weight; overrides rl_toy.beta.
        #[arg(long)]
        beta: Option<f64>,
        /// Training episodes; overrides rl_toy.episodes.
        #[arg(long)]
        episodes: Option<usize>,
        /// Episodes used to score the trained and untrained policies.
        #[arg(long, default_value_t = 2000)]
        eval_episodes: usize,
    },
}

fn load_config(cli: &Cli) -> Result<HarnessConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => HarnessConfig::load(path)?,
        None => {
            let mut cfg = HarnessConfig::default();
            cfg.resolve_paths(&std::env::current_dir()?);
            cfg
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.rl_toy.seed = seed;
    }
    if let Some(p) = cli.parallelism {
        cfg.parallelism = p;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let cfg = load_config(&cli)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Repair {
            run_id,
            corpus,
            records_per_problem,
        } => {
            cmd_repair(
                &cfg,
                &RepairArgs {
                    run_id,
                    corpus,
                    records_per_problem,
                },
                &mut out,
            )?;
        }
        Command::Judge { program, problem } => {
            let verdict = cmd_judge(&cfg, &program, &problem, &mut out)?;
            if verdict.status != Status::Accepted {
                return Ok(ExitCode::from(1));
            }
        }
        Command::TrainRm { corpus, out: path, loss } => {
            cmd_train_rm(&cfg, &TrainRmArgs { corpus, out: path, loss }, &mut out)?;
        }
        Command::Evaluate { run_id } => {
            cmd_evaluate(&cfg, &run_id, &mut out)?;
        }
        Command::Curate { metadata, sources, out: dir } => {
            cmd_curate(
                &cfg,
                &CurateArgs {
                    metadata,
                    sources,
                    out_dir: dir,
                },
                &mut out,
            )?;
        }
        Command::RlToy {
            out: dir,
            beta,
            episodes,
            eval_episodes,
        } => {
            cmd_rl_toy(
                &cfg,
                &RlArgs {
                    out_dir: dir,
                    beta,
                    episodes,
                    eval_episodes,
                },
                &mut out,
            )?;
        }
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
