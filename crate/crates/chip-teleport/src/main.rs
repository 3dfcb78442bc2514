//! Thin command-line front end over the library. Exit codes: 0 success,
//! 2 validation failure, 3 numerical failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chip_teleport::characterization::{
    double_ratio_reflectivity, fit_crosstalk, heatercal_line, read_sweep_csv, PowerMatrix,
    DEFAULT_RESISTANCE,
};
use chip_teleport::circuit::parse_layout;
use chip_teleport::error::Error;
use chip_teleport::experiment::{
    budget_scan, budget_to_csv, emit_report, parse_report, run_experiment, write_corrections_json,
    BudgetGrid, ComplexMatrixParts, ExperimentConfig, OutputFormat,
};
use chip_teleport::protocol::optimal_corrections;
use chip_teleport::source::SourceModel;
use chip_teleport::tomography::{
    mle_reconstruct, read_counts_csv, LikelihoodModel, MeasurementModel,
};

#[derive(Parser)]
#[command(name = "chip-teleport", about = "Post-selected photonic teleportation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full virtual experiment from a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's layout path.
        #[arg(long)]
        layout: Option<PathBuf>,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
        /// Output format: json or csv.
        #[arg(long)]
        format: Option<String>,
    },
    /// Reconstruct states from a counts CSV, one per Bell outcome.
    Tomograph {
        /// Counts CSV (outcome_index,theta2,phi2,pass_counts,fail_counts).
        #[arg(long)]
        counts: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Element characterization: reflectivity from powers or cross-talk
    /// from a sweep CSV.
    Characterize {
        /// Four powers P00,P01,P10,P11 for the double-ratio estimator.
        #[arg(long, value_delimiter = ',')]
        powers: Option<Vec<f64>>,
        /// Sweep CSV (v_self,v_neighbor,power) for the cross-talk fit.
        #[arg(long)]
        sweep: Option<PathBuf>,
        /// Heater name for the emitted HEATERCAL line.
        #[arg(long, default_value = "heater")]
        name: String,
        #[arg(long, default_value_t = DEFAULT_RESISTANCE)]
        resistance: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Numerically optimized correction unitaries for a layout.
    Corrections {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Source config file providing the noise model (optional).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error-budget scan over noise axes.
    Budget {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 30)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-emit or summarize an existing JSON report.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        /// Output format: json or csv.
        #[arg(long, default_value = "csv")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_format(s: &str) -> Result<OutputFormat, Error> {
    match s {
        "json" => Ok(OutputFormat::Json),
        "csv" => Ok(OutputFormat::Csv),
        other => Err(Error::Config(format!("unknown format {other:?}"))),
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::NonConvergence(_)
        | Error::IllConditionedFit { .. }
        | Error::EstimatorDomain(_)
        | Error::ZeroProbabilityOutcome
        | Error::PhotonMismatch { .. } => 3,
        _ => 2,
    }
}

fn write_or_print(out: &Option<PathBuf>, body: &str) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, body).map_err(Error::from),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate { config, layout, seed, out, format } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(path) = layout {
                cfg.layout_path = path;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let format = match format {
                Some(s) => parse_format(&s)?,
                None => cfg.output_format,
            };
            let mut report = run_experiment(&cfg)?;
            report.metadata.timestamp = Some(now_utc());
            let files = emit_report(&report, format, &out)?;
            for f in files {
                eprintln!("wrote {}", f.display());
            }
            eprintln!(
                "overall mean fidelity: {:.4} (classical bound {:.4})",
                report.overall_mean_fidelity, report.classical_bound
            );
            Ok(())
        }
        Command::Tomograph { counts, out } => {
            let records = read_counts_csv(fs::read_to_string(&counts)?.as_bytes())?;
            let mut by_outcome: BTreeMap<usize, Vec<_>> = BTreeMap::new();
            for r in records {
                by_outcome.entry(r.outcome_index).or_default().push(r);
            }
            let mut states = BTreeMap::new();
            for (outcome, records) in by_outcome {
                let rho = mle_reconstruct(
                    &records,
                    &MeasurementModel::Ideal,
                    LikelihoodModel::Poisson,
                )?;
                states.insert(
                    outcome.to_string(),
                    ComplexMatrixParts::from_matrix(&rho.0),
                );
            }
            let mut body = serde_json::to_string_pretty(&states)?;
            body.push('\n');
            write_or_print(&out, &body)
        }
        Command::Characterize { powers, sweep, name, resistance, out } => {
            match (powers, sweep) {
                (Some(p), None) => {
                    if p.len() != 4 {
                        return Err(Error::Config(
                            "--powers needs four values P00,P01,P10,P11".into(),
                        ));
                    }
                    let matrix = PowerMatrix([[p[0], p[1]], [p[2], p[3]]]);
                    let eta = double_ratio_reflectivity(&matrix)?;
                    write_or_print(&out, &format!("eta = {eta}\n"))
                }
                (None, Some(path)) => {
                    let points = read_sweep_csv(fs::read_to_string(&path)?.as_bytes())?;
                    let fit = fit_crosstalk(&points, resistance)?;
                    let mut body = heatercal_line(&name, &fit.model);
                    body.push('\n');
                    body.push_str(&format!("# residual RMS {}\n", fit.residual_rms));
                    write_or_print(&out, &body)
                }
                _ => Err(Error::Config(
                    "characterize needs exactly one of --powers or --sweep".into(),
                )),
            }
        }
        Command::Corrections { layout, seed, config, samples, out } => {
            let parsed = parse_layout(&fs::read_to_string(&layout)?)?;
            let source = match config {
                Some(path) => ExperimentConfig::load(&path)?.source,
                None => SourceModel::ideal(),
            };
            let (set, achieved) = optimal_corrections(&parsed, &source, samples, seed)?;
            eprintln!("achieved mean fidelities: {achieved:?}");
            let mut body = write_corrections_json(&set);
            body.push('\n');
            write_or_print(&out, &body)
        }
        Command::Budget { layout, seed, samples, out } => {
            let parsed = parse_layout(&fs::read_to_string(&layout)?)?;
            let rows = budget_scan(&parsed, &BudgetGrid::default(), samples, seed)?;
            write_or_print(&out, &budget_to_csv(&rows))
        }
        Command::Report { input, format, out } => {
            let report = parse_report(&fs::read_to_string(&input)?)?;
            let format = parse_format(&format)?;
            match out {
                Some(path) => {
                    for f in emit_report(&report, format, &path)? {
                        eprintln!("wrote {}", f.display());
                    }
                    Ok(())
                }
                None => {
                    match format {
                        OutputFormat::Json => {
                            println!("{}", serde_json::to_string_pretty(&report)?)
                        }
                        OutputFormat::Csv => {
                            print!("{}", chip_teleport::experiment::report_to_csv(&report))
                        }
                    }
                    Ok(())
                }
            }
        }
    }
}

fn now_utc() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("{secs}")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
