use std::fmt;
use std::str::FromStr;

use crate::error::ExpError;

/// Initialization pipeline preceding (or accompanying) fine-tuning.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Default random initialization.
    None,
    /// Pre-train on one rendered prototype per class.
    Knowledge,
    /// Pre-train on augmented rendered prototypes.
    KnowledgeAug,
    /// Pre-train on one real sample per class from the fine-tuning subset.
    Sample,
    /// Pre-train on augmented real samples.
    SampleAug,
    /// Pre-train on per-class mean images of the fine-tuning subset.
    MeanImage,
    /// Supervised pre-training on the surrogate source dataset.
    DataSurrogate,
    /// Surrogate pre-training followed by augmented prototype pre-training.
    DataPlusKnowledge,
    /// Prototypes mixed into the fine-tuning stream.
    Concurrent,
    /// Prototype pre-training, then prototypes mixed into fine-tuning.
    PretrainPlusConcurrent,
}

impl Scheme {
    pub const ALL: [Scheme; 10] = [
        Scheme::None,
        Scheme::Knowledge,
        Scheme::KnowledgeAug,
        Scheme::Sample,
        Scheme::SampleAug,
        Scheme::MeanImage,
        Scheme::DataSurrogate,
        Scheme::DataPlusKnowledge,
        Scheme::Concurrent,
        Scheme::PretrainPlusConcurrent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::None => "none",
            Scheme::Knowledge => "knowledge",
            Scheme::KnowledgeAug => "knowledge_aug",
            Scheme::Sample => "sample",
            Scheme::SampleAug => "sample_aug",
            Scheme::MeanImage => "mean_image",
            Scheme::DataSurrogate => "data_surrogate",
            Scheme::DataPlusKnowledge => "data_plus_knowledge",
            Scheme::Concurrent => "concurrent",
            Scheme::PretrainPlusConcurrent => "pretrain_plus_concurrent",
        }
    }

    pub fn needs_surrogate(self) -> bool {
        matches!(self, Scheme::DataSurrogate | Scheme::DataPlusKnowledge)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = ExpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ExpError::Config(format!("unknown scheme `{s}`")))
    }
}
