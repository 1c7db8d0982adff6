//! Tabular data: schema manifests, CSV ingestion, binning of continuous
//! variables and two-level treatment subsets.

mod dataset;
mod pair;
mod schema;

pub use dataset::{bin_index, load_csv, load_csv_from, Column, CsvLoad, Dataset};
pub use pair::{split_treatment_pair, TreatmentPair};
pub use schema::{Kind, Role, Schema, VariableSpec};
