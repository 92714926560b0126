//! Loss, optimization, the epoch loop, evaluation, ensembling and
//! checkpoints.

mod adam;
mod checkpoint;
mod eval;

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use checkpoint::{checkpoint_precision, Checkpoint};
pub use eval::{ensemble_predict, ensemble_vote, evaluate, score_predictions, Evaluation, QtypeStats};

use crate::config::ModelConfig;
use crate::embedder::EncodedInstance;
use crate::error::{Error, Result};
use crate::model::CsaModel;
use crate::tensor::{Graph, Mode, ParamGrads, Precision, Real, Var};

/// Floor applied to the gold probability before taking its log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    #[serde(flatten)]
    pub model: ModelConfig,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            lr: 1e-3,
            batch_size: 32,
            max_epochs: 50,
            patience: 5,
            seed: 0,
            precision: Precision::F64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch_size and max_epochs must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// `−log(max(p[answer], 1e-12))` as a graph node.
pub fn nll<T: Real>(g: &mut Graph<'_, T>, probs: Var, answer: usize) -> Result<Var> {
    let p = g.index(probs, answer)?;
    if g.value(p).data()[0].as_f64() < PROB_FLOOR {
        log::warn!("gold probability below {PROB_FLOOR:e}; clamping in the loss");
    }
    let p = g.clamp_min(p, T::lit(PROB_FLOOR));
    let lp = g.log(p);
    Ok(g.scale(lp, -T::one()))
}

/// Mean negative log-likelihood of the gold candidates.
pub fn cross_entropy(batch: &[(&[f64], usize)]) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    let total: f64 = batch.iter().map(|(p, a)| -p[*a].max(PROB_FLOOR).ln()).sum();
    total / batch.len() as f64
}

/// Loss and parameter gradients for one instance.
pub fn instance_gradients<T: Real>(
    model: &CsaModel<T>,
    inst: &EncodedInstance<T>,
    mode: Mode,
) -> Result<(f64, ParamGrads<T>)> {
    let mut g = Graph::new(&model.params, mode);
    let out = model.net.forward(&mut g, &model.config, inst)?;
    let loss = nll(&mut g, out.probs, inst.answer)?;
    let value = g.value(loss).data()[0].as_f64();
    Ok((value, g.backward(loss)?.into_param_grads()))
}

/// Mean loss and gradient over a batch. Instances run in parallel; their
/// gradients are summed in batch order so the result is deterministic.
pub fn batch_gradients<T: Real>(
    model: &CsaModel<T>,
    batch: &[&EncodedInstance<T>],
    modes: &[Mode],
) -> Result<(f64, ParamGrads<T>)> {
    let parts: Vec<(f64, ParamGrads<T>)> = batch
        .par_iter()
        .zip(modes.par_iter())
        .map(|(inst, mode)| instance_gradients(model, inst, *mode))
        .collect::<Result<_>>()?;
    let mut grads = ParamGrads::empty(model.params.len());
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l;
        grads.merge(g);
    }
    let n = batch.len().max(1) as f64;
    grads.scale(T::lit(1.0 / n));
    Ok((loss / n, grads))
}

/// One line of the metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_acc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Model and optimizer state at the best dev epoch.
    pub best: Checkpoint<T>,
    pub history: Vec<EpochRecord>,
}

/// Deterministic 64-bit mix of a seed with two counters.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Trains with seeded shuffling and dropout, evaluating on `dev` after every
/// epoch. Stops after `patience` epochs without improvement, at
/// `max_epochs`, or when `observer` returns [`Control::Stop`]. Each epoch's
/// record is written to `metrics` as one JSON line.
pub fn train<T: Real>(
    mut model: CsaModel<T>,
    train_set: &[EncodedInstance<T>],
    dev_set: &[EncodedInstance<T>],
    cfg: &TrainConfig,
    mut metrics: Option<&mut dyn Write>,
    observer: &mut dyn FnMut(&EpochRecord, &CsaModel<T>) -> Control,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if train_set.is_empty() || dev_set.is_empty() {
        return Err(Error::Config("training and dev sets must be non-empty".into()));
    }
    if model.config != cfg.model {
        return Err(Error::Config("model was built with a different configuration".into()));
    }
    let mut adam = Adam::new(cfg.lr, model.params.len());
    let mut best = Checkpoint {
        config: cfg.clone(),
        model: model.clone(),
        optimizer: Some(adam.clone()),
        epoch: 0,
        dev_acc: f64::NEG_INFINITY,
    };
    let mut history = Vec::new();
    let mut stale = 0;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, epoch as u64, 0));
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&EncodedInstance<T>> = chunk.iter().map(|&i| &train_set[i]).collect();
            let modes: Vec<Mode> = chunk
                .iter()
                .map(|&i| Mode::Train {
                    seed: derive_seed(cfg.seed, epoch as u64, i as u64 + 1),
                })
                .collect();
            let (loss, grads) = batch_gradients(&model, &batch, &modes)?;
            loss_sum += loss * chunk.len() as f64;
            if let Err(e) = adam.step(&mut model.params, &grads) {
                match e {
                    Error::NonFiniteGradient(_) => {
                        log::warn!("epoch {epoch}: skipped update for batch starting at `{}`: {e}", batch[0].id)
                    }
                    other => return Err(other),
                }
            }
        }
        let dev_acc = evaluate(&model, dev_set)?.accuracy;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            dev_acc,
        };
        log::info!("epoch {epoch}: train_loss {:.6} dev_acc {:.4}", record.train_loss, dev_acc);
        if let Some(w) = metrics.as_deref_mut() {
            serde_json::to_writer(&mut *w, &record)?;
            writeln!(w)?;
        }
        history.push(record.clone());
        if dev_acc > best.dev_acc {
            best = Checkpoint {
                config: cfg.clone(),
                model: model.clone(),
                optimizer: Some(adam.clone()),
                epoch,
                dev_acc,
            };
            stale = 0;
        } else {
            stale += 1;
        }
        if observer(&record, &model) == Control::Stop {
            break;
        }
        if stale >= cfg.patience {
            log::info!("no dev improvement for {stale} epochs; stopping");
            break;
        }
    }
    Ok(TrainOutcome { best, history })
}
