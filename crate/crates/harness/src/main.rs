use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pregate_core::model::{model_stats, preset};
use pregate_harness::{run_experiment, ExperimentConfig, HarnessError, Outcome, Report, Result, Sweep};

#[derive(Parser)]
#[command(name = "pregate", version, about = "Pre-gated MoE offloading experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured strategy and write the CSV report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        include_first_block: bool,
        /// Also replay each schedule in real time.
        #[arg(long)]
        wallclock: bool,
    },
    /// Print parameter and FLOP counts of a full-size preset.
    Stats {
        #[arg(long)]
        preset: String,
    },
    /// Run the config once per value of one axis.
    Sweep {
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn print_report(report: &Report) {
    println!("{:<10} {:<20} {:<10} {:>16} {:>14} {:>16}", "model", "strategy", "sweep", "block_lat_ms", "tokens/s", "peak_GB");
    for r in &report.rows {
        match &r.outcome {
            Outcome::Oom => println!("{:<10} {:<20} {:<10} {:>16}", r.model, r.strategy, r.sweep_value, "OOM"),
            Outcome::Ok { avg_block_latency, tokens_per_sec, peak_bytes, cache_hit_rate } => {
                print!(
                    "{:<10} {:<20} {:<10} {:>16.4} {:>14.2} {:>16.3}",
                    r.model,
                    r.strategy,
                    r.sweep_value,
                    avg_block_latency * 1e3,
                    tokens_per_sec,
                    *peak_bytes as f64 / 1e9
                );
                if let Some(h) = cache_hit_rate {
                    print!("  hit {:.1}%", h * 100.0);
                }
                if let Some(w) = r.wallclock {
                    print!("  wall {:.3}s", w.as_secs_f64());
                }
                println!();
            }
        }
    }
}

fn execute(cfg: ExperimentConfig, out: Option<PathBuf>) -> Result<()> {
    let report = run_experiment(&cfg)?;
    let dir = out.or(cfg.out.clone()).unwrap_or_else(|| PathBuf::from("results"));
    report.write_csvs(&dir)?;
    report.write_timelines(&dir)?;
    print_report(&report);
    println!("wrote {}", dir.display());
    if report.all_oom() {
        return Err(HarnessError::OomOnly);
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out, seed, include_first_block, wallclock } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
                cfg.model.full.seed = seed;
                cfg.model.toy.seed = seed;
            }
            cfg.include_first_block |= include_first_block;
            cfg.wallclock |= wallclock;
            execute(cfg, out)
        }
        Command::Stats { preset: name } => {
            let p = preset(&name).map_err(|e| HarnessError::Config(e.to_string()))?;
            let s = model_stats(&p.full);
            println!("preset                  {}", p.name);
            println!("params_total            {}", s.params_total);
            println!("params_moe              {}", s.params_moe);
            println!("params_experts          {}", s.params_experts);
            println!("params_non_moe          {}", s.params_non_moe);
            println!("flops_per_token         {}", s.flops_per_token);
            println!("router_flops_per_token  {}", s.router_flops_per_token);
            Ok(())
        }
        Command::Sweep { axis, values, config, out } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            cfg.sweep = Some(Sweep {
                axis: axis.parse()?,
                values: values.split(',').map(str::trim).filter(|v| !v.is_empty()).map(str::to_string).collect(),
            });
            cfg.validate()?;
            execute(cfg, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
