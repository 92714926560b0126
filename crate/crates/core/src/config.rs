//! Model hyperparameters.

use serde::{Deserialize, Serialize};

use crate::corpus::{Limits, PosTag};
use crate::error::{Error, Result};

/// Convolution kernel widths over the question axis, each paired with the
/// max-pooling width applied to its feature map.
pub const KERNELS: [(usize, usize); 3] = [(5, 3), (10, 2), (15, 1)];

/// Component switches for ablation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablations {
    /// Drop the trainable element-wise attention weight.
    pub no_attention_weight: bool,
    /// Drop the candidate-side enriched representations; the cube is built
    /// from the candidate encoder output alone (two channels).
    pub no_enriched_representation: bool,
    /// Replace the convolutional summarizer with two fully connected layers
    /// per matching matrix.
    pub no_csa: bool,
}

impl Ablations {
    /// Parses a comma-separated flag list such as `no_csa,no_attention_weight`.
    pub fn parse(flags: &str) -> Result<Self> {
        let mut a = Ablations::default();
        for f in flags.split(',').map(str::trim).filter(|f| !f.is_empty()) {
            match f.replace('-', "_").as_str() {
                "no_attention_weight" => a.no_attention_weight = true,
                "no_enriched_representation" => a.no_enriched_representation = true,
                "no_csa" => a.no_csa = true,
                "none" => {}
                other => return Err(Error::Config(format!("unknown ablation `{other}`"))),
            }
        }
        Ok(a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Maximum passage length |P|.
    pub passage_len: usize,
    /// Maximum question length |Q|.
    pub question_len: usize,
    /// Maximum candidate length |C|.
    pub candidate_len: usize,
    pub word_dim: usize,
    /// Width of precomputed contextual vectors; 0 disables the slot.
    pub contextual_dim: usize,
    pub pos_dim: usize,
    /// Bi-LSTM output width h (both directions together).
    pub hidden: usize,
    pub attention_hidden: usize,
    /// Filters per convolution bank.
    pub filters: usize,
    /// relu between convolution and pooling.
    pub conv_relu: bool,
    pub dropout: f64,
    /// Give each of the two highway layers its own parameters.
    pub untie_highway: bool,
    /// Recompute the question-side enriched representations once per
    /// candidate instead of once per question.
    pub per_candidate_question_enrichment: bool,
    #[serde(flatten)]
    pub ablations: Ablations,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            passage_len: 300,
            question_len: 20,
            candidate_len: 10,
            word_dim: 100,
            contextual_dim: 0,
            pos_dim: 16,
            hidden: 250,
            attention_hidden: 80,
            filters: 32,
            conv_relu: true,
            dropout: 0.35,
            untie_highway: false,
            per_candidate_question_enrichment: false,
            ablations: Ablations::default(),
        }
    }
}

impl ModelConfig {
    /// Width e of the concatenated word representation.
    pub fn embedding_width(&self) -> usize {
        self.word_dim + self.contextual_dim + self.pos_dim + 2
    }

    pub fn pos_tags(&self) -> usize {
        PosTag::COUNT
    }

    pub fn limits(&self) -> Limits {
        Limits {
            passage: self.passage_len,
            question: self.question_len,
            candidate: self.candidate_len,
        }
    }

    /// Channels of the attention cube.
    pub fn cube_channels(&self) -> usize {
        if self.ablations.no_enriched_representation {
            2
        } else {
            6
        }
    }

    /// Pooled column count of each convolution bank.
    pub fn pooled_widths(&self) -> [usize; 3] {
        KERNELS.map(|(k, pool)| (self.question_len + 1).saturating_sub(k) / pool)
    }

    /// Length of the flattened [O1; O2; O3] feature vector.
    pub fn feature_len(&self) -> usize {
        self.filters * self.candidate_len * self.pooled_widths().iter().sum::<usize>()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("passage_len", self.passage_len),
            ("question_len", self.question_len),
            ("candidate_len", self.candidate_len),
            ("word_dim", self.word_dim),
            ("pos_dim", self.pos_dim),
            ("hidden", self.hidden),
            ("attention_hidden", self.attention_hidden),
            ("filters", self.filters),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.hidden % 2 != 0 {
            return Err(Error::Config(format!("hidden size {} must be even", self.hidden)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        let widest = KERNELS.iter().map(|k| k.0).max().unwrap_or(0);
        if !self.ablations.no_csa && self.question_len < widest {
            return Err(Error::Config(format!(
                "question_len {} is shorter than the widest convolution kernel ({widest})",
                self.question_len
            )));
        }
        Ok(())
    }

    /// The micro configuration used for gradient checking and fast tests.
    pub fn micro() -> Self {
        ModelConfig {
            passage_len: 12,
            question_len: 16,
            candidate_len: 5,
            word_dim: 6,
            contextual_dim: 0,
            pos_dim: 3,
            hidden: 8,
            attention_hidden: 6,
            filters: 2,
            dropout: 0.0,
            ..Default::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_dims_feature_lengths() {
        let c = ModelConfig::default();
        assert_eq!(c.pooled_widths(), [5, 5, 6]);
        assert_eq!(c.feature_len(), 1600 + 1600 + 1920);
        c.validate().unwrap();
    }

    #[test]
    fn short_question_rejected_unless_fc_head() {
        let mut c = ModelConfig {
            question_len: 14,
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.ablations.no_csa = true;
        c.validate().unwrap();
    }

    #[test]
    fn odd_hidden_and_bad_dropout() {
        let c = ModelConfig {
            hidden: 7,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = ModelConfig {
            dropout: 1.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn ablation_flags() {
        let a = Ablations::parse("no_csa, no-attention-weight").unwrap();
        assert!(a.no_csa && a.no_attention_weight && !a.no_enriched_representation);
        assert_eq!(Ablations::parse("").unwrap(), Ablations::default());
        assert!(Ablations::parse("bogus").is_err());
    }

    #[test]
    fn embedding_width() {
        let c = ModelConfig {
            word_dim: 4,
            pos_dim: 2,
            contextual_dim: 0,
            ..Default::default()
        };
        assert_eq!(c.embedding_width(), 8);
    }
}
