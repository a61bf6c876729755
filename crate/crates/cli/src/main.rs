use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use minnorm::harness::sweep::format_summary;
use minnorm::harness::{emit_plots, run_suite, run_sweep, write_csv_file, FaceSubsetSelector, Suite, SuiteOptions, SweepConfig};

/// Minimum-norm problems in Nedelec and Raviart-Thomas spaces: sweeps,
/// plots and property checks.
#[derive(Parser)]
#[command(name = "minnorm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a randomized sweep and write one CSV row per solved problem.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the `output` entry of the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Sweep all sixteen face subsets instead of one per size.
        #[arg(long)]
        full_subsets: bool,
    },
    /// Write ratio-versus-degree series (TSV and SVG) from a sweep CSV.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run property suites; exits nonzero if any property is violated.
    Check {
        #[arg(long, default_value = "all")]
        suite: String,
        /// Small sample sizes, for a fast smoke run.
        #[arg(long)]
        quick: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn sweep(config: PathBuf, out: Option<PathBuf>, threads: Option<usize>, full_subsets: bool) -> Result<ExitCode> {
    let mut config = SweepConfig::load(&config)?;
    if full_subsets {
        config.face_subsets = FaceSubsetSelector::Named("all".into());
    }
    let Some(out) = out.or_else(|| config.output.clone()) else {
        bail!("no output path: pass --out or set `output` in the config");
    };
    let outcome = run_sweep(&config, threads)?;
    write_csv_file(&outcome.records, &out).with_context(|| format!("writing {}", out.display()))?;
    print!("{}", format_summary(&outcome.summary));
    println!(
        "{} records in {:.1} s -> {}",
        outcome.records.len(),
        outcome.elapsed_ms / 1e3,
        out.display()
    );
    let failed: Vec<_> = outcome
        .records
        .iter()
        .zip(&outcome.details)
        .filter_map(|(r, d)| d.error.as_ref().map(|e| (r, e)))
        .collect();
    if !failed.is_empty() {
        eprintln!("{} failed rows (written with NaN values):", failed.len());
        for (r, e) in failed {
            eprintln!(
                "  {} {} p={} faces={} trial={}: {e}",
                r.tet_id, r.problem_kind, r.p, r.face_subset, r.trial
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn plot(csv: PathBuf, out: PathBuf) -> Result<ExitCode> {
    let written = emit_plots(&csv, &out)?;
    println!("{} files written to {}", written.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn check(suite: &str, quick: bool, seed: Option<u64>) -> Result<ExitCode> {
    let suite: Suite = suite.parse()?;
    let mut options = if quick { SuiteOptions::quick() } else { SuiteOptions::default() };
    if let Some(seed) = seed {
        options.seed = seed;
    }
    let results = run_suite(suite, &options);
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        eprintln!("{failed} of {} checks failed", results.len());
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep {
            config,
            out,
            threads,
            full_subsets,
        } => sweep(config, out, threads, full_subsets),
        Command::Plot { csv, out } => plot(csv, out),
        Command::Check { suite, quick, seed } => check(&suite, quick, seed),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
