//! Batch frontend: harmonize raw datasets into the unified store, audit a
//! store for bias, inject deterministic corruptions, validate a store.
//!
//! Exit codes: 0 success, 2 configuration, 3 input data, 4 validation,
//! 5 internal. Logs go to standard error, results to standard output.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mammoprep_core::adapters::{adapter_for, registry};
use mammoprep_core::config::RunConfig;
use mammoprep_core::inject::ExactFraction;
use mammoprep_core::run::{run_audit, run_harmonize, run_inject, run_validate, RunError};

#[derive(Parser)]
#[command(
    name = "mammoprep",
    about = "Harmonize heterogeneous mammography datasets into a unified store and quantify their biases",
    version
)]
struct Cli {
    /// Key-value config file (documented in the README).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a config key, e.g. --set workers=8. Repeatable; flags win
    /// over the file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, select, correct and store one dataset.
    Harmonize(HarmonizeArgs),
    /// Emit bias tables and corruption-prevalence rates for a store.
    Audit(AuditArgs),
    /// Write a deterministically corrupted copy of a store.
    Inject(InjectArgs),
    /// Check a store against its invariants.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct HarmonizeArgs {
    /// Source dataset: cbis, tompei, vindr, or store (re-run the pipeline
    /// over an existing store, e.g. a corrupted copy).
    #[arg(long)]
    dataset: String,

    /// Output store root; overrides output_root from the config file.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    /// Store to audit; defaults to the configured output_root.
    #[arg(long)]
    store: Option<PathBuf>,
}

#[derive(Args)]
struct InjectArgs {
    /// Clean source store.
    #[arg(long)]
    store: PathBuf,

    /// Where the corrupted copy goes.
    #[arg(long)]
    out: PathBuf,

    /// Fraction of patients whose images get inverted intensities.
    #[arg(long, default_value = "0")]
    p: String,

    /// Fraction of images that get mirrored.
    #[arg(long, default_value = "0")]
    q: String,

    /// Seed for the deterministic selection shuffle.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ValidateArgs {
    /// Store to validate; defaults to the configured output_root.
    #[arg(long)]
    store: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let category = err.category();
            eprintln!("error ({}): {err}", category.as_str());
            ExitCode::from(category.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, RunError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    for entry in &cli.overrides {
        let (key, value) = entry.split_once('=').ok_or_else(|| {
            RunError::Config(format!("--set expects KEY=VALUE, found {entry:?}"))
        })?;
        config.set(key.trim(), value.trim())?;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<(), RunError> {
    let mut config = load_config(&cli)?;

    match &cli.command {
        Command::Harmonize(args) => {
            let adapter = adapter_for(&args.dataset).ok_or_else(|| {
                let names: Vec<&str> = registry().iter().map(|a| a.name()).collect();
                RunError::Config(format!(
                    "unknown dataset {:?}; expected one of {}",
                    args.dataset,
                    names.join(", ")
                ))
            })?;
            if let Some(output) = &args.output {
                config.output_root = output.clone();
                config.validate()?;
            }

            log::info!("harmonizing {} into {}", adapter.name(), config.output_root.display());
            let summary = run_harmonize(&config, adapter)?;

            println!("dataset: {}", summary.dataset);
            println!(
                "rows read: {} (quarantined {}, excluded-by-flag {})",
                summary.adapter_report.rows_read,
                summary.adapter_report.rows_quarantined,
                summary.adapter_report.rows_excluded
            );
            println!(
                "exams: {} kept, {} excluded",
                summary.exams_kept, summary.exams_excluded
            );
            println!(
                "images: {} written, {} missing",
                summary.images_written, summary.images_missing
            );
            println!(
                "qc: laterality flip rate {:.4}, intensity flip rate {:.4}",
                summary.prevalence.laterality_flip_rate, summary.prevalence.intensity_flip_rate
            );
            println!(
                "store: {} (patients {}, images {}, config {})",
                summary.manifest.root.display(),
                summary.manifest.patients,
                summary.manifest.images,
                summary.manifest.config_fingerprint
            );
            for (file, line, message) in summary.adapter_report.warnings.iter().take(20) {
                log::warn!("{}:{line}: {message}", file.display());
            }
            let warning_count = summary.adapter_report.warnings.len();
            if warning_count > 20 {
                log::warn!("... and {} more warnings", warning_count - 20);
            }
            Ok(())
        }
        Command::Audit(args) => {
            let store = args.store.clone().unwrap_or_else(|| config.output_root.clone());
            let summary = run_audit(&config, &store)?;
            println!(
                "audited {} records; {} tables under {}",
                summary.records,
                summary.tables_written,
                summary.out_dir.display()
            );
            println!(
                "corruption prevalence: laterality {:.4}, intensity {:.4}",
                summary.prevalence.laterality_flip_rate, summary.prevalence.intensity_flip_rate
            );
            Ok(())
        }
        Command::Inject(args) => {
            let p: ExactFraction = args.p.parse().map_err(RunError::Inject)?;
            let q: ExactFraction = args.q.parse().map_err(RunError::Inject)?;
            let plan = run_inject(&args.store, &args.out, &p, &q, args.seed)?;
            println!(
                "injected: {} patients intensity-inverted, {} images mirrored (seed {})",
                plan.intensity_patients.len(),
                plan.laterality_images.len(),
                plan.seed
            );
            println!("corrupted store: {}", args.out.display());
            Ok(())
        }
        Command::Validate(args) => {
            let store = args.store.clone().unwrap_or_else(|| config.output_root.clone());
            let violations = run_validate(&config, &store);
            if violations.is_empty() {
                println!("store {} is valid", store.display());
                Ok(())
            } else {
                for violation in &violations {
                    println!("{violation}");
                }
                println!("{} violations", violations.len());
                Err(RunError::StoreInvalid(format!(
                    "{} violations in {}",
                    violations.len(),
                    store.display()
                )))
            }
        }
    }
}
