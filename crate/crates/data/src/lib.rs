//! Labeled image datasets: IDX and USPS ingestion, stratified subsets,
//! train/validation splits, class-mean prototypes and a binary cache.

pub mod cache;
pub mod dataset;
pub mod error;
pub mod idx;
pub mod mean;
pub mod subset;
pub mod usps;

pub use cache::{load_dataset, save_dataset};
pub use dataset::{LabeledDataset, PrototypeSet, PrototypeSource};
pub use error::{DataError, Result};
pub use idx::{load_idx, write_idx};
pub use mean::mean_image_per_class;
pub use subset::{allocate, stratified_subsample, subsample_positions, train_val_split, SubsetSize, SubsetSpec};
pub use usps::{load_usps, parse_usps};
