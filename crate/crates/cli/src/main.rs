use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use hoc_cli::config::ConfigErrors;
use hoc_cli::experiment::read_summary_csv;
use hoc_cli::{emit_plot, parse_config_file, run_experiment, run_verify, Metric};
use hoc_oracle::SuiteOptions;

// Writes to stdout, ignoring a closed pipe.
macro_rules! out {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(name = "hoc", version, about = "Hierarchical option-critic experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train agents described by a config file and write CSV results.
    Run {
        config: PathBuf,
        /// First seed; run i uses seed + i.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        runs: Option<usize>,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        /// Also write curve.svg.
        #[arg(long)]
        plot: bool,
    },
    /// Run the oracle verification suite.
    Verify {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "verify")]
        out: PathBuf,
        /// Smaller sample sizes.
        #[arg(long)]
        quick: bool,
    },
    /// Plot one or more summary.csv files on shared axes.
    Plot {
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
        #[arg(long, default_value = "plot.svg")]
        out: PathBuf,
        /// Label for the y axis.
        #[arg(long, default_value = "steps")]
        metric: String,
    },
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            seed,
            runs,
            out,
            parallel,
            plot,
        } => {
            let mut spec = parse_config_file(&config)?;
            if let Some(s) = seed {
                spec.base_seed = s;
            }
            if let Some(r) = runs {
                anyhow::ensure!(r > 0, "--runs must be at least 1");
                spec.num_runs = r;
            }
            if let Some(o) = out {
                spec.output_dir = o;
            }
            let summary = run_experiment(&spec, parallel)?;
            out!(
                "{} on {}: final {} {:.4} over {} runs",
                summary.label,
                spec.env.name(),
                summary.metric.name(),
                summary.final_performance,
                summary.runs
            );
            for (j, f) in summary.steps_per_switch().iter().enumerate() {
                out!("  level {}: {:.2} steps per switch", j + 1, f);
            }
            if plot {
                emit_plot(std::slice::from_ref(&summary), &spec.output_dir.join("curve.svg"))?;
            }
            out!("results in {}", spec.output_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { seed, out, quick } => {
            let mut opts = if quick { SuiteOptions::quick() } else { SuiteOptions::default() };
            if let Some(s) = seed {
                opts.seed = s;
            }
            let report = run_verify(&opts, &out)?;
            out!("{}", report.to_text().trim_end());
            if report.all_passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("failing checks: {}", report.failing().join(", "));
                Ok(ExitCode::from(1))
            }
        }
        Command::Plot { summaries, out, metric } => {
            let metric = match metric.as_str() {
                "steps" => Metric::Steps,
                "reward" => Metric::Reward,
                m => anyhow::bail!("unknown metric {m:?}"),
            };
            let loaded = summaries
                .iter()
                .map(|p| {
                    let label = p
                        .parent()
                        .and_then(|d| d.file_name())
                        .or_else(|| p.file_stem())
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| p.display().to_string());
                    read_summary_csv(p, &label, metric)
                })
                .collect::<Result<Vec<_>>>()?;
            let data = emit_plot(&loaded, &out)?;
            out!("wrote {} and {}", out.display(), data.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigErrors>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
