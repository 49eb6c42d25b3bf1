//! Subcommand orchestration: harmonize, audit, inject, validate. The CLI
//! binary stays a thin argument-parsing shell over these.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::adapters::{AdapterError, AdapterReport, DatasetAdapter, SourceSpec};
use crate::audit::{
    abnormality_summary, abnormality_table, breast_level, co_occurrence, corruption_prevalence,
    distribution, render_prevalence, render_report, AuditField, CorruptionPrevalence,
    ReportFormat,
};
use crate::config::{Granularity, RunConfig};
use crate::imgio::{apply_rescale, read_image, ImageIoError};
use crate::inject::{apply_injection, plan_injection, ExactFraction, InjectError, InjectionPlan};
use crate::model::{Dataset, UnifiedRecord, Violation};
use crate::pipeline::{process_image, QcReport};
use crate::selection::{select, write_selection_report, Outcome, SelectedExam};
use crate::store::{read_qc, read_records, validate_store, StoreError, StoreManifest, StoreWriter};

/// Stable exit-code taxonomy: 0 ok, 2 config, 3 input data, 4 validation,
/// 5 internal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    InputData,
    Validation,
    Internal,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::InputData => 3,
            ErrorCategory::Validation => 4,
            ErrorCategory::Internal => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Config => "config-error",
            ErrorCategory::InputData => "input-data-error",
            ErrorCategory::Validation => "validation-error",
            ErrorCategory::Internal => "internal-error",
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("[config] {0}")]
    Config(String),
    #[error("[config] {0}")]
    ConfigFile(#[from] crate::config::ConfigError),
    #[error("[dataset-adapters] {0}")]
    Adapter(#[from] AdapterError),
    #[error("[image-io] {0}")]
    Image(#[from] ImageIoError),
    #[error("[unified-store] {0}")]
    Store(#[from] StoreError),
    #[error("[corruption-injector] {0}")]
    Inject(#[from] InjectError),
    #[error("[unified-store] store is not usable: {0}")]
    StoreInvalid(String),
    #[error("[internal] {0}")]
    Internal(String),
}

impl RunError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            RunError::Config(_) | RunError::ConfigFile(_) => ErrorCategory::Config,
            RunError::Adapter(_) | RunError::Image(_) | RunError::Store(_) => {
                ErrorCategory::InputData
            }
            RunError::Inject(InjectError::BadFraction { .. }) => ErrorCategory::Config,
            RunError::Inject(_) => ErrorCategory::InputData,
            RunError::StoreInvalid(_) => ErrorCategory::Validation,
            RunError::Internal(_) => ErrorCategory::Internal,
        }
    }
}

#[derive(Debug)]
pub struct HarmonizeSummary {
    pub dataset: Dataset,
    pub adapter_report: AdapterReport,
    pub exams_kept: usize,
    pub exams_excluded: usize,
    pub images_written: u64,
    pub images_missing: u64,
    pub prevalence: CorruptionPrevalence,
    pub manifest: StoreManifest,
}

/// Full harmonize pass: parse, select, process every image, write the store.
pub fn run_harmonize(
    cfg: &RunConfig,
    adapter: &dyn DatasetAdapter,
) -> Result<HarmonizeSummary, RunError> {
    let root = cfg
        .dataset_roots
        .get(&adapter.dataset())
        .ok_or_else(|| {
            RunError::Config(format!(
                "no root configured for dataset {} (set {}_root)",
                adapter.name(),
                adapter.name()
            ))
        })?
        .clone();
    if !root.is_dir() {
        return Err(RunError::Config(format!(
            "dataset root {} is not a readable directory",
            root.display()
        )));
    }

    let source = SourceSpec {
        root,
        file_overrides: cfg.file_overrides.clone(),
    };
    let output = adapter.parse(&source)?;
    let mut adapter_report = output.report;

    let mut drafts = output.drafts;
    let mut images_missing = 0u64;
    if cfg.drop_missing_images {
        let before = drafts.len();
        drafts.retain(|draft| {
            let present = draft.image_source.exists();
            if !present {
                adapter_report.warn(
                    &draft.image_source,
                    0,
                    format!("source image missing, draft {} dropped", draft.record.key()),
                );
            }
            present
        });
        images_missing = (before - drafts.len()) as u64;
    }

    let (kept, decisions) = select(drafts, adapter.selection_policy());
    let exams_kept = kept.len();
    let exams_excluded = decisions
        .iter()
        .filter(|d| d.outcome == Outcome::Exclude)
        .count();

    let mut by_patient: BTreeMap<String, Vec<SelectedExam>> = BTreeMap::new();
    for exam in kept {
        by_patient
            .entry(exam.exam.patient_id.clone())
            .or_default()
            .push(exam);
    }
    let patients: Vec<(String, Vec<SelectedExam>)> = by_patient.into_iter().collect();

    let writer = StoreWriter::create(&cfg.output_root, output.dataset, cfg.fingerprint())?;

    struct PatientResult {
        records: Vec<UnifiedRecord>,
        qc: Vec<QcReport>,
        written: u64,
        missing: Vec<PathBuf>,
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| RunError::Internal(format!("cannot build worker pool: {e}")))?;

    let results: Result<Vec<PatientResult>, RunError> = pool.install(|| {
        patients
            .par_iter()
            .map(|(_, exams)| {
                let mut records = Vec::new();
                let mut qc = Vec::new();
                let mut to_write = Vec::new();
                let mut written = 0u64;
                let mut missing = Vec::new();

                for exam in exams {
                    for (view, source_path) in &exam.sources {
                        let mut record = exam
                            .exam
                            .record(*view)
                            .expect("selected exams carry their views")
                            .clone();
                        record.processed_path = record.canonical_processed_path();

                        if !source_path.exists() {
                            missing.push(source_path.clone());
                            records.push(record);
                            continue;
                        }
                        let (raw, meta) = read_image(source_path)?;
                        let (raw, rescaled) = match (cfg.apply_rescale, meta.rescale) {
                            (true, Some((slope, intercept)))
                                if (slope, intercept) != (1.0, 0.0) =>
                            {
                                (apply_rescale(raw, slope, intercept), true)
                            }
                            _ => (raw, false),
                        };
                        let (image, mut report) = process_image(
                            record.key(),
                            raw,
                            record.laterality,
                            &meta,
                            &cfg.detector,
                        );
                        if rescaled {
                            report.warnings.push("rescale-applied".to_string());
                        }
                        written += 1;
                        qc.push(report);
                        records.push(record.clone());
                        to_write.push((record, image));
                    }
                }
                writer.write_patient(&to_write)?;
                Ok(PatientResult {
                    records,
                    qc,
                    written,
                    missing,
                })
            })
            .collect()
    });
    let results = results?;

    let mut records = Vec::new();
    let mut qc = Vec::new();
    let mut images_written = 0u64;
    for result in results {
        records.extend(result.records);
        images_written += result.written;
        for path in result.missing {
            images_missing += 1;
            adapter_report.warn(&path, 0, "source image missing, kept in metadata");
        }
        qc.extend(result.qc);
    }

    let prevalence = corruption_prevalence(&qc);
    let manifest = writer.finalize(records, qc)?;
    write_selection_report(&decisions, &cfg.output_root.join("selection_report.csv")).map_err(
        |source| {
            RunError::Store(StoreError::Io {
                path: cfg.output_root.join("selection_report.csv"),
                source,
            })
        },
    )?;

    Ok(HarmonizeSummary {
        dataset: output.dataset,
        adapter_report,
        exams_kept,
        exams_excluded,
        images_written,
        images_missing,
        prevalence,
        manifest,
    })
}

#[derive(Debug)]
pub struct AuditSummary {
    pub out_dir: PathBuf,
    pub tables_written: usize,
    pub records: usize,
    pub prevalence: CorruptionPrevalence,
}

/// Emits every bias table in csv/json/markdown under
/// `<store>/audit/<dataset>/`. Distributions and the co-occurrence table
/// are emitted at both granularities; the abnormality tables follow the
/// configured one.
pub fn run_audit(cfg: &RunConfig, store_root: &Path) -> Result<AuditSummary, RunError> {
    let (records, manifest) =
        read_records(store_root).map_err(|e| RunError::StoreInvalid(e.to_string()))?;
    let qc = read_qc(store_root).map_err(|e| RunError::StoreInvalid(e.to_string()))?;

    let out_dir = store_root.join("audit").join(manifest.dataset.as_str());
    let formats = ReportFormat::ALL;
    let breast_records = breast_level(&records);
    let mut tables_written = 0usize;

    for (granularity, view) in [
        (Granularity::Image, &records),
        (Granularity::Breast, &breast_records),
    ] {
        for field in [AuditField::Diagnosis, AuditField::Birads, AuditField::Density] {
            let mut table = distribution(view, field);
            table.name = format!("{}_{}", table.name, granularity.as_str());
            render_report(&table, &out_dir, &formats).map_err(io_error(&out_dir))?;
            tables_written += 1;
        }
        let mut table = co_occurrence(view, AuditField::Diagnosis, AuditField::Birads);
        table.name = format!("{}_{}", table.name, granularity.as_str());
        render_report(&table, &out_dir, &formats).map_err(io_error(&out_dir))?;
        tables_written += 1;
    }

    let table_view = match cfg.counting_granularity {
        Granularity::Image => &records,
        Granularity::Breast => &breast_records,
    };
    let abnormality_tables = abnormality_table(table_view);
    for table in &abnormality_tables {
        render_report(table, &out_dir, &formats).map_err(io_error(&out_dir))?;
        tables_written += 1;
    }
    std::fs::write(
        out_dir.join("abnormality_summary.csv"),
        abnormality_summary(&abnormality_tables),
    )
    .map_err(|source| {
        RunError::Store(StoreError::Io {
            path: out_dir.join("abnormality_summary.csv"),
            source,
        })
    })?;
    tables_written += 1;

    let prevalence = corruption_prevalence(&qc);
    render_prevalence(&prevalence, &out_dir, &formats).map_err(io_error(&out_dir))?;
    tables_written += 1;

    Ok(AuditSummary {
        out_dir,
        tables_written,
        records: records.len(),
        prevalence,
    })
}

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> RunError + '_ {
    move |source| {
        RunError::Store(StoreError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Plans and applies a corruption pass, returning the plan that was written
/// next to the corrupted copy.
pub fn run_inject(
    src_root: &Path,
    dst_root: &Path,
    intensity_fraction: &ExactFraction,
    laterality_fraction: &ExactFraction,
    seed: u64,
) -> Result<InjectionPlan, RunError> {
    let (records, _) = read_records(src_root).map_err(|e| RunError::StoreInvalid(e.to_string()))?;
    let plan = plan_injection(&records, intensity_fraction, laterality_fraction, seed)?;
    apply_injection(src_root, &plan, dst_root)?;
    Ok(plan)
}

/// Store validation; violations are data, not errors.
pub fn run_validate(cfg: &RunConfig, store_root: &Path) -> Vec<Violation> {
    validate_store(store_root, &cfg.detector)
}
