use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use mmv2x_cli::{cmd_gen_scenario, cmd_run, cmd_sweep, RunOptions, SweepOptions};

#[derive(Parser)]
#[command(name = "mmv2x", version, about = "mmWave V2X topology planning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write timeline.csv and summary.json.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Run configuration (JSON); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Leave out wall-clock metadata.
        #[arg(long)]
        test_mode: bool,
        /// Also write every planned connection graph to graphs.jsonl.
        #[arg(long)]
        dump_graphs: bool,
    },
    /// Run a parameter sweep and write sweep.csv and sweep_summary.csv.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        /// Base run configuration (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        test_mode: bool,
    },
    /// Generate an intersection scenario file.
    GenScenario {
        /// Scenario generator configuration (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { scenario, config, seed, out, test_mode, dump_graphs } => {
            let opts = RunOptions { seed, test_mode, dump_graphs };
            let s = cmd_run(&scenario, config.as_deref(), &out, &opts)?;
            match s.connectivity {
                Some(c) => println!("{}: connectivity {c:.4} over {} vehicle-timesteps", s.method, s.cv_total),
                None => println!("{}: no connected vehicles", s.method),
            }
        }
        Command::Sweep { spec, config, out, jobs, test_mode } => {
            let rows = cmd_sweep(&spec, config.as_deref(), &out, &SweepOptions { jobs, test_mode })?;
            for r in rows {
                let c = r.connectivity_mean.map_or_else(|| "-".to_string(), |c| format!("{c:.4}"));
                println!("{}={} {}: connectivity {c} ({} runs, {} failed)", r.parameter, r.value, r.method, r.runs, r.failures);
            }
        }
        Command::GenScenario { config, seed, out } => {
            let counts = cmd_gen_scenario(config.as_deref(), seed, &out)?;
            println!("wrote {}; {counts}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
