//! Batch toolkit that harmonizes heterogeneous mammography datasets into a
//! single standardized store: it corrects laterality and intensity-polarity
//! defects, normalizes dynamic range, applies case-selection rules, unifies
//! metadata, quantifies dataset bias, and can deterministically re-inject
//! the same defects for robustness experiments.

pub mod adapters;
pub mod audit;
pub mod config;
pub mod imgio;
pub mod inject;
pub mod model;
pub mod pipeline;
pub mod run;
pub mod selection;
pub mod store;
pub mod synth;
