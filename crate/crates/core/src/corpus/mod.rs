//! Dataset ingestion, tokenization, vocabulary and embedding tables, and the
//! per-token lexical features (POS tags, exact match, fuzzy match).

mod dataset;
mod embeddings;
mod features;
mod instance;
mod pos;
mod tokenize;
mod vocab;

pub use dataset::{load_dataset, save_native_jsonl, DatasetFormat, Limits};
pub use embeddings::{load_embeddings, random_embeddings, save_embeddings, LoadedEmbeddings};
pub use features::{annotate, fuzzy_match, word_match, FeatureAnnotation, InstanceFeatures};
pub use instance::{McqInstance, QuestionType};
pub use pos::{ExternalTags, PosTag, PosTagger, StreamTags, SuffixTagger};
pub use tokenize::{tokenize, RuleTokenizer, Tokenizer};
pub use vocab::Vocabulary;
