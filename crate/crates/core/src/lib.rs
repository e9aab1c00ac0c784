//! Drug-drug interaction mining from publication abstracts.
//!
//! The pipeline filters a corpus with a drug lexicon, labels (cardiac,
//! other) drug pairs from an interaction catalog, splits abstracts and
//! pairs without cross-split leakage, turns each pair's abstracts into
//! sparse word-count or embedding features, fits logistic, L1-logistic and
//! hinge-loss linear models with AUC-tuned cross-validation, and scans medication administration
//! records for overlapping exposures of interacting drugs.

pub mod corpus;
pub mod eval;
pub mod features;
pub mod learn;
pub mod mar_alerts;
pub mod error;
pub mod labeling;
pub mod rng;
pub mod splitting;
pub mod synthetic;

pub use error::{Error, Result};
