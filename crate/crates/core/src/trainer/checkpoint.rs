//! Single-file checkpoint container.
//!
//! Layout: the 8-byte magic `CSACKPT\0`, a little-endian `u32` format
//! version, a little-endian `u64` header length, the JSON header, then raw
//! little-endian tensor data. Each header tensor entry gives its name, kind,
//! shape and byte offset into the data section.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Adam, TrainConfig};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::model::CsaModel;
use crate::tensor::{Precision, Real, Tensor};

const MAGIC: &[u8; 8] = b"CSACKPT\0";
const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint<T> {
    pub config: TrainConfig,
    pub model: CsaModel<T>,
    pub optimizer: Option<Adam<T>>,
    pub epoch: usize,
    pub dev_acc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum TensorKind {
    Param,
    AdamM,
    AdamV,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    kind: TensorKind,
    shape: Vec<usize>,
    offset: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct AdamHeader {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    precision: Precision,
    config: TrainConfig,
    vocabulary: Vocabulary,
    epoch: usize,
    dev_acc: f64,
    optimizer: Option<AdamHeader>,
    tensors: Vec<TensorEntry>,
}

fn read_header(bytes: &[u8]) -> Result<(Header, &[u8])> {
    let bad = |msg: &str| Error::Checkpoint(msg.to_string());
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let end = 20usize.checked_add(len).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(&bytes[20..end])?;
    Ok((header, &bytes[end..]))
}

/// Scalar precision recorded in a checkpoint.
pub fn checkpoint_precision(path: &Path) -> Result<Precision> {
    let mut f = fs::File::open(path)?;
    let mut head = [0u8; 20];
    f.read_exact(&mut head)
        .map_err(|_| Error::Checkpoint("not a checkpoint file".into()))?;
    let len = u64::from_le_bytes(head[12..20].try_into().expect("8 bytes")) as usize;
    let mut rest = vec![0u8; len];
    f.read_exact(&mut rest)
        .map_err(|_| Error::Checkpoint("truncated header".into()))?;
    let mut bytes = head.to_vec();
    bytes.extend(rest);
    Ok(read_header(&bytes)?.0.precision)
}

impl<T: Real> Checkpoint<T> {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut data = Vec::new();
        let mut tensors = Vec::new();
        let mut push = |name: &str, kind: TensorKind, t: &Tensor<T>, data: &mut Vec<u8>| {
            tensors.push(TensorEntry {
                name: name.to_string(),
                kind,
                shape: t.shape().to_vec(),
                offset: data.len() as u64,
            });
            for &v in t.data() {
                v.write_le(data);
            }
        };
        let params = &self.model.params;
        for id in params.ids() {
            push(params.name(id), TensorKind::Param, params.get(id), &mut data);
        }
        if let Some(adam) = &self.optimizer {
            for id in params.ids() {
                let i = id.index();
                if let Some(m) = &adam.m[i] {
                    push(params.name(id), TensorKind::AdamM, m, &mut data);
                }
                if let Some(v) = &adam.v[i] {
                    push(params.name(id), TensorKind::AdamV, v, &mut data);
                }
            }
        }
        let header = Header {
            precision: T::PRECISION,
            config: self.config.clone(),
            vocabulary: self.model.vocab.clone(),
            epoch: self.epoch,
            dev_acc: self.dev_acc,
            optimizer: self.optimizer.as_ref().map(|a| AdamHeader {
                lr: a.lr,
                beta1: a.beta1,
                beta2: a.beta2,
                eps: a.eps,
                step: a.step,
            }),
            tensors,
        };
        let json = serde_json::to_vec(&header)?;
        let mut w = BufWriter::new(fs::File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        w.write_all(&data)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let (header, data) = read_header(&bytes)?;
        if header.precision != T::PRECISION {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds {:?} scalars, requested {:?}",
                header.precision,
                T::PRECISION
            )));
        }
        let cfg = header.config;
        let width = T::PRECISION.byte_width();
        let placeholder = Tensor::zeros(&[header.vocabulary.len(), cfg.model.word_dim]);
        let mut model = CsaModel::new(cfg.model.clone(), header.vocabulary, placeholder, cfg.seed)?;
        let mut optimizer = header.optimizer.map(|a| {
            let mut adam = Adam::new(a.lr, model.params.len());
            adam.beta1 = a.beta1;
            adam.beta2 = a.beta2;
            adam.eps = a.eps;
            adam.step = a.step;
            adam
        });
        let mut seen = vec![false; model.params.len()];
        for e in &header.tensors {
            let id = model
                .params
                .lookup(&e.name)
                .ok_or_else(|| Error::Checkpoint(format!("unknown tensor `{}`", e.name)))?;
            let n: usize = e.shape.iter().product();
            let start = e.offset as usize;
            let end = start + n * width;
            let raw = data
                .get(start..end)
                .ok_or_else(|| Error::Checkpoint(format!("tensor `{}` runs past the end of the file", e.name)))?;
            let values = raw.chunks_exact(width).map(T::read_le).collect();
            let t = Tensor::new(e.shape.clone(), values)?;
            match e.kind {
                TensorKind::Param => {
                    model
                        .params
                        .set(id, t)
                        .map_err(|err| Error::Checkpoint(format!("tensor `{}`: {err}", e.name)))?;
                    seen[id.index()] = true;
                }
                TensorKind::AdamM | TensorKind::AdamV => {
                    let adam = optimizer
                        .as_mut()
                        .ok_or_else(|| Error::Checkpoint("moment buffers without optimizer state".into()))?;
                    let slot = if e.kind == TensorKind::AdamM { &mut adam.m } else { &mut adam.v };
                    slot[id.index()] = Some(t);
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            let id = model.params.ids().nth(i).expect("index in range");
            return Err(Error::Checkpoint(format!("missing tensor `{}`", model.params.name(id))));
        }
        Ok(Checkpoint {
            config: cfg,
            model,
            optimizer,
            epoch: header.epoch,
            dev_acc: header.dev_acc,
        })
    }
}
