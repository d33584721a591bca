use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use qvi_cli::hjb::run_hjb;
use qvi_cli::regions::run_regions;
use qvi_cli::solve::run_solve;
use qvi_cli::verify::{run_verify, VerifyOptions};
use qvi_cli::{parse_list, run_table, Case, ExperimentConfig, OutputFormat, Overrides};

#[derive(Parser)]
#[command(name = "qvi", version, about = "Penalty solvers for switching QVIs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    case: Option<Case>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Comma-separated penalty parameters.
    #[arg(long, global = true, value_parser = parse_list_arg)]
    rho: Option<FloatList>,
    /// Comma-separated switching costs; fractions like 1/8 are accepted.
    #[arg(long, global = true, value_parser = parse_list_arg)]
    cost: Option<FloatList>,
    /// Newton relative-increment tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the first (c, rho) of the config.
    Solve,
    /// Sweep the full (c, rho) grid.
    Table,
    /// Switching regions as JSON.
    Regions {
        /// Region-width constant; estimated from a 2 rho solve when absent.
        #[arg(long)]
        c0: Option<f64>,
    },
    /// Run the property suites.
    Verify {
        #[arg(long, default_value_t = VerifyOptions::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = VerifyOptions::default().instances)]
        instances: usize,
    },
    /// Zero-cost limit over the rho schedule.
    Hjb,
}

/// A comma-separated list taken as one flag value (clap would treat a bare
/// `Vec` as repeated values).
#[derive(Clone, Debug)]
struct FloatList(Vec<f64>);

fn parse_list_arg(s: &str) -> Result<FloatList, String> {
    parse_list(s).map(FloatList).map_err(|e| format!("{e:#}"))
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let overrides = Overrides {
        case: common.case,
        rho_list: common.rho.clone().map(|l| l.0),
        cost_list: common.cost.clone().map(|l| l.0),
        tol: common.tol,
        output_path: common.out.clone(),
        format: common.format,
    };
    match &common.config {
        Some(path) => ExperimentConfig::load(path, &overrides),
        None => ExperimentConfig::from_overrides(&overrides),
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = load_config(&cli.common)?;
    let out = cfg.output_path.as_deref();
    match cli.command {
        Command::Solve => {
            let (run, single) = run_solve(&cfg)?;
            match cfg.format {
                OutputFormat::Csv => run.write_csv(sink(out)?)?,
                OutputFormat::Json => single.write_json(sink(out)?)?,
            }
            Ok(run.all_converged())
        }
        Command::Table => {
            let run = run_table(&cfg)?;
            match cfg.format {
                OutputFormat::Csv => run.write_csv(sink(out)?)?,
                OutputFormat::Json => run.write_json(sink(out)?)?,
            }
            Ok(run.all_converged())
        }
        Command::Regions { c0 } => {
            let run = run_regions(&cfg, c0)?;
            run.write_json(sink(out)?)?;
            Ok(run.ok())
        }
        Command::Verify { seed, instances } => {
            let summary = run_verify(&cfg, VerifyOptions { seed, instances })?;
            let mut w = sink(out)?;
            serde_json::to_writer_pretty(&mut w, &summary)?;
            writeln!(w)?;
            Ok(summary.passed)
        }
        Command::Hjb => {
            let run = run_hjb(&cfg)?;
            match cfg.format {
                OutputFormat::Csv => run.write_csv(sink(out)?)?,
                OutputFormat::Json => run.write_json(sink(out)?)?,
            }
            Ok(run.all_converged())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
