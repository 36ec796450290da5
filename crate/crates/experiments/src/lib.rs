//! Seeded experiment sweeps: training-set size, prototype augmentation count,
//! transfer depth and concurrent informed learning, with aggregation into
//! mean ± sample-std tables, CSV results and SVG charts.

pub mod chart;
pub mod config;
pub mod context;
pub mod error;
pub mod metrics;
pub mod record;
pub mod report;
pub mod runner;
pub mod scheme;
pub mod sweeps;

pub use config::Config;
pub use context::DataContext;
pub use error::{ExpError, Result};
pub use metrics::{half_gains, layer_gains, mean_std, Metric, MetricsRow, MetricsTable};
pub use record::{records_from_csv, records_to_csv, RunRecord};
pub use report::emit_report;
pub use runner::{repetition_seed, Experiment, RunSpec};
pub use scheme::Scheme;
pub use sweeps::{run_ood_eval, SweepKind, SweepResult, LENET5_PARAM_LAYERS};
