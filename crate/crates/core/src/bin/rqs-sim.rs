use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use rqs_gossip::harness::{self, ParsedConfig, SweepSpec};
use rqs_gossip::SimConfig;

#[derive(Parser)]
#[command(
    name = "rqs-sim",
    version,
    about = "Simulate gossip-based detection of random query string DoS attacks"
)]
struct Cli {
    /// Comma-separated seeds replacing the ones in the config or preset.
    #[arg(long, global = true, value_delimiter = ',')]
    seed_list: Option<Vec<u64>>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single configuration and print or write its raw CSV row.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every configuration of a sweep file over all seeds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_raw: Option<PathBuf>,
        #[arg(long)]
        out_agg: Option<PathBuf>,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run a built-in experiment grid: fig2, fig3 or false_positive.
    Preset {
        #[arg(long)]
        name: String,
        #[arg(long)]
        out_raw: PathBuf,
        #[arg(long)]
        out_agg: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn load(path: &Path) -> Result<ParsedConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    harness::parse_config(&text).with_context(|| format!("in {}", path.display()))
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn execute(spec: &SweepSpec, jobs: Option<usize>, out_raw: &Path, out_agg: &Path) -> Result<()> {
    let result = harness::sweep(spec, jobs.unwrap_or_else(default_jobs))?;
    harness::write_raw(&result.raw, out_raw)?;
    harness::write_aggregate(&result.aggregate, out_agg)?;
    eprintln!(
        "{} runs, {} configurations -> {}, {}",
        result.raw.len(),
        result.aggregate.len(),
        out_raw.display(),
        out_agg.display()
    );
    Ok(())
}

fn real_main(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg: SimConfig = match load(&config)? {
                ParsedConfig::Single(cfg) => cfg,
                ParsedConfig::Sweep(_) => bail!(
                    "{} describes a sweep; `run` needs single values and a seed (use `sweep`)",
                    config.display()
                ),
            };
            let mut spec = SweepSpec::single(cfg);
            if let Some(seeds) = cli.seed_list {
                spec.seeds = seeds;
            }
            let result = harness::sweep(&spec, 1)?;
            let csv = harness::raw_csv(&result.raw);
            match out {
                Some(path) => fs::write(&path, csv).with_context(|| format!("cannot write {}", path.display()))?,
                None => print!("{csv}"),
            }
        }
        Command::Sweep {
            config,
            out_raw,
            out_agg,
            jobs,
        } => {
            let mut spec = load(&config)?.into_sweep();
            if let Some(seeds) = cli.seed_list {
                spec.seeds = seeds;
            }
            let out_raw = out_raw
                .or_else(|| spec.out_raw.clone())
                .ok_or_else(|| anyhow!("no raw output path (--out-raw or out_raw=)"))?;
            let out_agg = out_agg
                .or_else(|| spec.out_agg.clone())
                .ok_or_else(|| anyhow!("no aggregate output path (--out-agg or out_agg=)"))?;
            execute(&spec, jobs, &out_raw, &out_agg)?;
        }
        Command::Preset {
            name,
            out_raw,
            out_agg,
            jobs,
        } => {
            let mut spec = harness::preset(&name)?;
            if let Some(seeds) = cli.seed_list {
                spec.seeds = seeds;
            }
            execute(&spec, jobs, &out_raw, &out_agg)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
