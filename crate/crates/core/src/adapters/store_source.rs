//! Re-ingests a previously written unified store as a source, so the image
//! pipeline can be re-run over corrupted copies and the output compared
//! against the original. Records pass through unchanged (they keep the
//! dataset identity the store was built from); image sources point at the
//! stored PNGs.

use crate::adapters::{
    AdapterError, AdapterOutput, AdapterReport, DatasetAdapter, Draft, SourceSpec,
};
use crate::model::Dataset;
use crate::selection::{ExclusionRules, SelectionPolicy, SplitPolicy};
use crate::store::read_records;

pub struct StoreAdapter;

impl DatasetAdapter for StoreAdapter {
    fn name(&self) -> &'static str {
        "store"
    }

    fn dataset(&self) -> Dataset {
        Dataset::Store
    }

    fn parse(&self, source: &SourceSpec) -> Result<AdapterOutput, AdapterError> {
        let (records, manifest) =
            read_records(&source.root).map_err(|e| AdapterError::StoreSource {
                path: source.root.clone(),
                detail: e.to_string(),
            })?;

        let mut report = AdapterReport::default();
        let mut drafts = Vec::with_capacity(records.len());
        for mut record in records {
            report.rows_read += 1;
            if record.processed_path.is_empty() {
                report.rows_quarantined += 1;
                report.warn(
                    &source.root,
                    report.rows_read,
                    format!("{} has no stored image", record.key()),
                );
                continue;
            }
            let image_source = source.root.join(&record.processed_path);
            // The path is reassigned when the new store is written.
            record.processed_path = String::new();
            drafts.push(Draft {
                image_source,
                record,
            });
        }
        Ok(AdapterOutput {
            drafts,
            report,
            dataset: manifest.dataset,
        })
    }

    fn selection_policy(&self) -> SelectionPolicy {
        // Selection already happened when the store was built; splits pass
        // through and must stay consistent per exam.
        SelectionPolicy {
            exclusions: ExclusionRules::KeepAll,
            split: SplitPolicy::Retain,
        }
    }
}
