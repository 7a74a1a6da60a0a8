use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ringflight::feasibility::{generate_dataset, write_jsonl, DatasetConfig};
use ringflight::par::Exec;
use ringflight::runner::{run_batch_logged, run_scenario, BatchKind, BatchSummary, ScenarioConfig};
use ringflight::service::{ServeOptions, Server};

#[derive(Parser)]
#[command(name = "ringflight", version, about = "Language-commanded flight through a moving ring, simulated")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario headless and write its logs.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Log directory.
        #[arg(long, default_value = "out/run")]
        out: PathBuf,
    },
    /// Run randomised scenarios and print the summary table.
    Batch {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 40)]
        n: usize,
        /// Draw leads too short to be flown; every run should be rejected.
        #[arg(long)]
        infeasible: bool,
        /// Write per-run logs and summary.json here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
    /// Serve live telemetry and accept operator commands over TCP.
    Serve {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "127.0.0.1:7878")]
        bind: String,
        /// Simulated seconds per wall-clock second; 0 runs unpaced.
        #[arg(long, default_value_t = 1.0)]
        pace: f64,
        /// Stop after this many runs; by default a new run starts when one ends.
        #[arg(long)]
        episodes: Option<u64>,
        /// Keep the config's scripted commands instead of waiting for an operator.
        #[arg(long)]
        scripted: bool,
        /// Start the first run immediately instead of on the first hello.
        #[arg(long)]
        no_wait: bool,
    },
    /// Write the labelled go/no-go dataset as JSON lines.
    GenDataset {
        #[arg(long, default_value_t = 5000)]
        train_n: usize,
        #[arg(long, default_value_t = 1000)]
        test_n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "dataset")]
        out: PathBuf,
        #[arg(long)]
        sequential: bool,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// TOML scenario file; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<(ScenarioConfig, u64)> {
        let cfg = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        cfg.validate()?;
        let seed = self.seed.unwrap_or(cfg.seed);
        Ok((cfg, seed))
    }
}

fn exec(sequential: bool) -> Exec {
    if sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    }
}

fn write_summary(path: &Path, value: &BatchSummary) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { scenario, out } => {
            let (cfg, seed) = scenario.load()?;
            let mut run = run_scenario(&cfg, seed)?;
            run.write_to(&out).with_context(|| format!("writing logs to {}", out.display()))?;
            let r = &run.result;
            println!("outcome   {}", r.outcome.name());
            println!("response  {}", r.response_text.as_deref().unwrap_or("-"));
            println!("energy    {:.1} J", r.energy);
            println!("duration  {:.2} s", r.duration);
            for c in &r.phase_timeline {
                println!("phase     {:>6.2} s  {}", c.at, c.to.name());
            }
            for d in &r.diagnostics {
                println!("note      {d}");
            }
            println!("logs      {}", out.display());
        }
        Command::Batch {
            scenario,
            n,
            infeasible,
            out,
            sequential,
        } => {
            let (mut cfg, seed) = scenario.load()?;
            if infeasible {
                cfg.batch.kind = BatchKind::Infeasible;
            }
            anyhow::ensure!(n >= 1, "--n must be at least 1");
            let summary = run_batch_logged(&cfg, n, seed, exec(sequential), out.as_deref())?;
            print!("{}", summary.table());
            if let Some(dir) = out {
                write_summary(&dir.join("summary.json"), &summary)?;
            }
        }
        Command::Serve {
            scenario,
            bind,
            pace,
            episodes,
            scripted,
            no_wait,
        } => {
            let (mut cfg, seed) = scenario.load()?;
            if !scripted {
                cfg.commands.clear();
            }
            anyhow::ensure!(pace >= 0.0 && pace.is_finite(), "--pace must be a non-negative number");
            let opts = ServeOptions {
                pace,
                episodes,
                wait_for_client: !no_wait,
                ..ServeOptions::default()
            };
            let handle = Server::bind(&cfg, seed, &bind, opts)?.spawn()?;
            eprintln!("ringflight: serving on {}", handle.local_addr());
            match episodes {
                Some(_) => {
                    handle.wait_episodes()?;
                    // let writers flush the final messages
                    std::thread::sleep(std::time::Duration::from_millis(500));
                    handle.shutdown()?;
                }
                None => handle.join()?,
            }
        }
        Command::GenDataset {
            train_n,
            test_n,
            seed,
            out,
            sequential,
        } => {
            let cfg = DatasetConfig {
                train_n,
                test_n,
                ..DatasetConfig::default()
            };
            let split = generate_dataset(&cfg, seed, exec(sequential))?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for (name, samples) in [("train.jsonl", &split.train), ("test.jsonl", &split.test)] {
                let path = out.join(name);
                let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                write_jsonl(BufWriter::new(file), samples)?;
                println!("{} samples -> {}", samples.len(), path.display());
            }
        }
    }
    Ok(())
}
