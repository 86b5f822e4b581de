use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ric_cmf::scenario::stats::CategoryStats;
use ric_cmf::scenario::{
    export_csv, run, run_experiment, ExportError, LabeledRun, Scenario, ScenarioError, CMF_LABEL,
    NO_CM_LABEL,
};

#[derive(Parser)]
#[command(
    name = "ric-cmf",
    version,
    about = "Near-RT RIC conflict mitigation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print per-UE statistics.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        cm: Option<Toggle>,
        /// Write samples.csv, dispositions.csv and summary.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run both arms (mitigation off / on) and compare throughput variability.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Replications per arm; defaults to run.replications.
        #[arg(long)]
        runs: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

enum Failure {
    Scenario(String),
    Io(String),
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Read { .. } => Failure::Io(e.to_string()),
            other => Failure::Scenario(other.to_string()),
        }
    }
}

impl From<ExportError> for Failure {
    fn from(e: ExportError) -> Self {
        match e {
            ExportError::Io { .. } | ExportError::Csv { .. } => Failure::Io(e.to_string()),
            other => Failure::Scenario(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Scenario(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run {
            config,
            seed,
            cm,
            out,
        } => {
            let mut scenario = Scenario::load(&config)?;
            if let Some(seed) = seed {
                scenario.seed = seed;
            }
            if let Some(cm) = cm {
                scenario.cm_enabled = matches!(cm, Toggle::On);
            }
            run_once(scenario, out.as_deref())
        }
        Command::Compare { config, runs, out } => {
            let scenario = Scenario::load(&config)?;
            let runs = runs.unwrap_or(scenario.replications);
            let exp = run_experiment(&scenario, runs)?;
            let files = export_csv(&exp.runs, &out)?;
            print_category(&exp.no_cm);
            print_category(&exp.cmf);
            match exp.sd_reduction {
                Some(pct) => println!(
                    "SD reduction: {pct:.1}% (No CM / CMF = {:.2}x)",
                    exp.no_cm.avg_sd / exp.cmf.avg_sd
                ),
                None => println!("SD reduction: n/a (baseline SD is zero)"),
            }
            println!("wrote {}", files.summary.parent().unwrap_or(&out).display());
            Ok(())
        }
        Command::Validate { config } => {
            let s = Scenario::load(&config)?;
            println!(
                "ok: {} PRBs, {} slices, {} xApps, {} events, {} ms",
                s.cell.total_prbs(),
                s.cell.slice_count(),
                s.xapps.len(),
                s.events.len(),
                s.duration_ms
            );
            Ok(())
        }
    }
}

fn run_once(scenario: Scenario, out: Option<&Path>) -> Result<(), Failure> {
    let label = if scenario.cm_enabled {
        CMF_LABEL
    } else {
        NO_CM_LABEL
    };
    let result = run(&scenario)?;
    println!("{label} run, seed {}", scenario.seed);
    for (ue, s) in &result.per_ue_stats {
        println!(
            "  {ue}: mean {:.3} Mbps, sd {:.3} Mbps ({} samples)",
            s.mean, s.sd, s.samples
        );
    }
    let stats = result.run_stats()?;
    println!(
        "  run: mean {:.3} Mbps, sd {:.3} Mbps",
        stats.mean, stats.sd
    );
    println!("  conflicts resolved: {}", result.conflicts.len());
    if let Some(dir) = out {
        let runs = [LabeledRun {
            category: label.to_owned(),
            run_id: 1,
            result,
        }];
        export_csv(&runs, dir)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn print_category(c: &CategoryStats) {
    println!("{}", c.category);
    for (i, (m, s)) in c.run_means.iter().zip(&c.run_sds).enumerate() {
        println!("  #{:<3} mean {m:>8.3}  sd {s:>7.3}", i + 1);
    }
    println!("  Average mean {:>8.3}  sd {:>7.3}", c.avg_mean, c.avg_sd);
}
