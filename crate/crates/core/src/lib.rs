pub mod config;
pub mod corpus;
pub mod embedder;
pub mod encoder;
pub mod enrichment;
pub mod error;
pub mod head;
mod init;
pub mod model;
pub mod synthetic;
pub mod tensor;
pub mod trainer;
pub mod verify;

pub use config::{Ablations, ModelConfig};
pub use error::{Error, Result};
pub use model::{CsaModel, Network};
pub use trainer::{train, Checkpoint, TrainConfig};
