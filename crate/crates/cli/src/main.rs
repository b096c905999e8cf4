//! `mcqmc`: experiment runner.
//!
//! Exit codes: 0 success, 1 other failure, 2 config error, 3 numerical
//! certificate failure.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mcqmc_core::config::Config;
use mcqmc_core::csv::fmt17;
use mcqmc_core::experiments::{rescore_driver, run_bounds, run_converge, run_driver_search, run_kh_check, run_sphere};
use mcqmc_core::plot::{emit_plot, PlotKind};
use mcqmc_core::{DriverSequence, Error, Result};

#[derive(Parser)]
#[command(name = "mcqmc", version, about = "Discrepancy experiments for Markov chain quasi-Monte Carlo")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// INI config file, or any output file whose header echoes one.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `[experiment] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads; 0 picks the number of cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Best-of-K discrepancies and bounds over an n grid.
    Converge(Common),
    /// Best-of-K driver search at the first n of the grid.
    Search {
        #[command(flatten)]
        common: Common,
        /// Re-score this driver CSV instead of searching.
        #[arg(long)]
        driver: Option<PathBuf>,
    },
    /// Evaluate a bound over a list of n.
    Bounds(Common),
    /// Best-of-K point sets on the sphere.
    Sphere(Common),
    /// Koksma-Hlawka checks on random point sets.
    KhCheck(Common),
    /// Render a result CSV as SVG.
    Plot {
        /// Result CSV.
        csv: PathBuf,
        /// `loglog` or `bracket`.
        #[arg(long, default_value = "loglog")]
        kind: String,
        /// Output directory; the file is named after the CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(common: &Common) -> Result<Config> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config { line: 0, message: format!("cannot read {}: {e}", path.display()) })?;
            Config::parse_any(&text)?
        }
        None => Config::default(),
    };
    if let Some(seed) = common.seed {
        cfg.set("experiment", "seed", seed.to_string());
    }
    Ok(cfg)
}

fn setup(common: &Common) -> Result<Config> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads)
        .build_global()
        .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    fs::create_dir_all(&common.out)?;
    load_config(common)
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    let path = dir.join(name);
    let file = File::create(&path)?;
    Ok((path, BufWriter::new(file)))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Converge(common) => {
            let cfg = setup(&common)?;
            let (path, mut out) = create(&common.out, "converge.csv")?;
            let summary = run_converge(&cfg, &mut out)?;
            out.flush()?;
            println!("{} rows, slope {} -> {}", summary.rows.len(), fmt17(summary.slope), path.display());
        }
        Command::Search { common, driver } => {
            let cfg = setup(&common)?;
            if let Some(driver) = driver {
                let d = DriverSequence::from_csv(&fs::read_to_string(&driver)?)?;
                println!("{}", fmt17(rescore_driver(&cfg, &d)?));
                return Ok(());
            }
            let outcome = run_driver_search(&cfg)?;
            let scores = common.out.join("search_scores.csv");
            let best = common.out.join("best_driver.csv");
            fs::write(&scores, &outcome.scores_csv)?;
            fs::write(&best, &outcome.driver_csv)?;
            println!(
                "n={} best candidate {} score {} (median {}) -> {}, {}",
                outcome.n,
                outcome.selection.index,
                fmt17(outcome.selection.score),
                fmt17(outcome.selection.median_score()),
                scores.display(),
                best.display()
            );
        }
        Command::Bounds(common) => {
            let cfg = setup(&common)?;
            let (path, mut out) = create(&common.out, "bounds.csv")?;
            let values = run_bounds(&cfg, &mut out)?;
            out.flush()?;
            println!("{} values -> {}", values.len(), path.display());
        }
        Command::Sphere(common) => {
            let cfg = setup(&common)?;
            let (path, mut out) = create(&common.out, "sphere.csv")?;
            let summary = run_sphere(&cfg, &mut out)?;
            out.flush()?;
            println!(
                "{} rows, slope {}, report delta {} -> {}",
                summary.rows.len(),
                fmt17(summary.slope),
                fmt17(summary.report_delta),
                path.display()
            );
        }
        Command::KhCheck(common) => {
            let cfg = setup(&common)?;
            let (path, mut out) = create(&common.out, "kh.csv")?;
            let reports = run_kh_check(&cfg, &mut out)?;
            out.flush()?;
            println!("{} checks hold -> {}", reports.len(), path.display());
        }
        Command::Plot { csv, kind, out } => {
            let kind: PlotKind = kind.parse()?;
            let text = fs::read_to_string(&csv)?;
            let svg = emit_plot(&text, kind)?;
            let dir = match out {
                Some(d) => {
                    fs::create_dir_all(&d)?;
                    d
                }
                None => csv.parent().map(Path::to_path_buf).unwrap_or_default(),
            };
            let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
            let path = dir.join(format!("{stem}.svg"));
            fs::write(&path, svg)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config() {
        2
    } else if e.is_certificate_failure() {
        3
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config { line: 3, message: "x".into() }), 2);
        assert_eq!(exit_code(&Error::Schema("lower".into())), 2);
        assert_eq!(exit_code(&Error::CertificateFailure("mesh".into())), 3);
        let nested = Error::Candidate { index: 2, source: Box::new(Error::NoSandwich { witness: vec![0.5] }) };
        assert_eq!(exit_code(&nested), 3);
        assert_eq!(exit_code(&Error::Io("disk".into())), 1);
    }
}
