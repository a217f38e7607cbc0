use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use satmarl_cli::config::resolve_output;
use satmarl_cli::error::{CliError, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK};
use satmarl_cli::{cmd_eval, cmd_report, cmd_train, scenarios, EvalOptions, TrainOptions};

#[derive(Parser)]
#[command(name = "satmarl", version, about = "Train and evaluate multi-satellite Earth-observation policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed listed in a config file
    Train {
        config: PathBuf,
        /// Seeds trained in parallel (0 = all cores)
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Output directory, replacing the config's `output_dir`
        #[arg(long)]
        output: Option<PathBuf>,
        /// Replace an existing run in the output directory
        #[arg(long)]
        force: bool,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Greedy evaluation of a trained run
    Eval {
        run_dir: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Only evaluate the checkpoint of this training seed
        #[arg(long)]
        train_seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Merge learning curves of runs on the same scenario
    Report {
        #[arg(required = true)]
        run_dirs: Vec<PathBuf>,
        #[arg(long, default_value = "report")]
        output: PathBuf,
    },
    /// List built-in scenarios, or print one as a config file
    Scenarios {
        #[arg(long)]
        show: Option<String>,
        /// With --show: 200 targets over one orbit
        #[arg(long, requires = "show")]
        reduced: bool,
    },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Train { config, workers, output, force, quiet } => {
            let opts = TrainOptions { workers, output_dir: output, force, quiet };
            let out = cmd_train(&config, &opts)?;
            println!("{}", out.run_dir.display());
            if out.manifest.aborted() {
                eprintln!("training aborted on a numeric failure; partial outputs kept");
                return Ok(EXIT_NUMERIC);
            }
            let s = &out.manifest.summary.final_mean_return;
            eprintln!("final mean return {:.3} +/- {:.3} over {} seeds", s.mean, s.std, s.n);
        }
        Command::Eval { run_dir, episodes, seed, train_seed, output } => {
            let opts = EvalOptions { episodes, seed, train_seed, output_dir: output };
            let out = cmd_eval(&run_dir, &opts)?;
            println!("{}", out.out_dir.display());
            let r = &out.report;
            eprintln!(
                "mean return {:.3}, capture reward {:.3}, unique captures {:.2}, failures {}",
                r.mean_return, r.mean_capture_reward, r.mean_unique_captures, r.total_failures
            );
        }
        Command::Report { run_dirs, output } => {
            let out = cmd_report(&run_dirs, &resolve_output(&output))?;
            println!("{}", out.out_dir.display());
        }
        Command::Scenarios { show: Some(name), reduced } => {
            let cfg = scenarios::get(&name).ok_or_else(|| CliError::config(format!("unknown scenario `{name}`")))?;
            let cfg = if reduced { cfg.reduced() } else { cfg };
            print!("{}", cfg.to_toml());
        }
        Command::Scenarios { show: None, .. } => {
            for (info, cfg) in scenarios::CATALOG.iter().zip(scenarios::all()) {
                println!("{:<24} {:<6} {:<12} {}", info.name, cfg.n_sats(), cfg.algorithm.to_string(), info.description);
            }
        }
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(code)) => code,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        Err(_) => EXIT_NUMERIC,
    };
    ExitCode::from(code as u8)
}
