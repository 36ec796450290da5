//! Knowledge prototypes: graph skeletons rendered to rasters, random real
//! samples and class means as baselines, and label-preserving augmentation.

pub mod augment;
pub mod error;
pub mod graph;
pub mod render;
pub mod sample;

pub use augment::{augment, warp, AugmentMode, AugmentationConfig, Transform};
pub use error::{ProtoError, Result};
pub use graph::{parse_graph_specs, GraphPrototype};
pub use render::{builtin_digit_prototypes, render_graph, render_spec, templates_to_set, TemplatePrototype, DIGITS_SPEC};
pub use sample::random_sample_prototypes;
