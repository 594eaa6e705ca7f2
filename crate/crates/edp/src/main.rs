use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use edp::commands::{self, Report};
use edp::Result;

/// Enriched Dirichlet process mixtures of linear mixed models for
/// longitudinal outcomes.
#[derive(Parser)]
#[command(name = "edp", version, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with known clusters.
    Simulate {
        /// `key = value` settings of the data-generating process.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Overrides `seed` in the config.
        #[arg(long, env = "EDP_SEED")]
        seed: Option<u64>,
    },
    /// Run the Gibbs sampler and write trace, memberships and final state.
    Fit {
        /// Long-format `subject_id,time,y`.
        #[arg(long)]
        observations: PathBuf,
        /// Wide-format `subject_id,<covariates...>`.
        #[arg(long)]
        covariates: PathBuf,
        /// Lines `<name>:binary|continuous`.
        #[arg(long)]
        schema: PathBuf,
        /// Sampler, prior and spline settings; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, env = "EDP_SEED")]
        seed: Option<u64>,
        /// Divide all times by this value at ingestion (e.g. 365 for days).
        #[arg(long)]
        time_scale: Option<f64>,
    },
    /// Draw predictions for targets at the scheduled iterations of a fit.
    Impute {
        /// Output directory of `fit`.
        #[arg(long)]
        fit_dir: PathBuf,
        /// `subject_id,target_time`, times in the original units.
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Evenly spaced post-burn-in draws.
        #[arg(long)]
        n_imputations: Option<usize>,
        /// Explicit iterations, comma-separated.
        #[arg(long, value_delimiter = ',')]
        schedule: Option<Vec<usize>>,
    },
    /// Classify imputed values against a threshold and pool the incidence.
    Combine {
        #[arg(long)]
        imputations: PathBuf,
        /// `subject_id,event,person_time` for every cohort member.
        #[arg(long)]
        cohort: PathBuf,
        /// Observed values also counted against the threshold.
        #[arg(long)]
        observations: Option<PathBuf>,
        /// Outcome when a value is at least this.
        #[arg(long, allow_negative_numbers = true)]
        threshold: f64,
        /// Total person-time; defaults to the cohort column sum.
        #[arg(long)]
        person_time: Option<f64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Consensus clusters from the recorded memberships.
    SummarizeClusters {
        #[arg(long)]
        partition: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Compare EDP, DP and single-cluster fits on simulated scenarios.
    Study {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, env = "EDP_SEED")]
        seed: Option<u64>,
        /// Worker threads; all cores when omitted.
        #[arg(long, env = "EDP_THREADS")]
        threads: Option<usize>,
    },
}

fn run(cmd: Command) -> Result<Report> {
    match cmd {
        Command::Simulate { config, out_dir, seed } => commands::simulate(&commands::SimulateArgs { config, out_dir, seed }),
        Command::Fit {
            observations,
            covariates,
            schema,
            config,
            out_dir,
            seed,
            time_scale,
        } => commands::fit(&commands::FitArgs {
            observations,
            covariates,
            schema,
            config,
            out_dir,
            seed,
            time_scale,
        }),
        Command::Impute {
            fit_dir,
            targets,
            out_dir,
            n_imputations,
            schedule,
        } => commands::impute(&commands::ImputeArgs {
            fit_dir,
            targets,
            out_dir,
            n_imputations,
            schedule,
        }),
        Command::Combine {
            imputations,
            cohort,
            observations,
            threshold,
            person_time,
            out_dir,
        } => commands::combine(&commands::CombineArgs {
            imputations,
            cohort,
            observations,
            threshold,
            person_time,
            out_dir,
        }),
        Command::SummarizeClusters { partition, trace, out_dir } => {
            commands::summarize_clusters(&commands::SummarizeArgs { partition, trace, out_dir })
        }
        Command::Study {
            config,
            out_dir,
            seed,
            threads,
        } => commands::run_study(&commands::StudyArgs {
            config,
            out_dir,
            seed,
            threads,
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for p in &report.outputs {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
