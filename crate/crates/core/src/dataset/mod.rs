//! Category taxonomy and dataset preparation: annotation parsing, capping,
//! stratified splitting, balanced batch planning and sorting page images into
//! per-category directories.

mod annotations;
pub mod pageref;
mod sampler;
mod sort;
mod split;
mod taxonomy;

use thiserror::Error;

pub use annotations::{parse_annotations, AnnotationRecord};
pub use pageref::{parse_page_ref, parse_page_ref_lenient, PageRef, UnparseableName};
pub use sampler::{balanced_batches, batches_per_epoch, BatchPlan};
pub use sort::{sort_annotated_files, PageResolver, Resolved, SortIssue, SortMode, SortReport};
pub use split::{cap_per_category, eval_count, label_counts, stratified_split, DatasetSplit};
pub use taxonomy::{CategoryTaxonomy, Group};

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("annotation header lacks column {0}")]
    MissingColumn(String),
    #[error("row {row}: bad page number {value:?}")]
    BadPageNumber { row: usize, value: String },
    #[error("{}unknown category {label:?}", row.map(|r| format!("row {r}: ")).unwrap_or_default())]
    UnknownCategory { row: Option<usize>, label: String },
    #[error("duplicate label {0}")]
    DuplicateLabel(String),
    #[error("requested {requested} categories per batch but only {available} are present")]
    TooFewCategories { requested: usize, available: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed CSV: {0}")]
    Csv(String),
}

/// Anything that carries a category label.
pub trait Labeled {
    fn label(&self) -> &str;
}

impl Labeled for String {
    fn label(&self) -> &str {
        self
    }
}

impl Labeled for &str {
    fn label(&self) -> &str {
        self
    }
}
