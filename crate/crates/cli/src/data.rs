//! Data directory layout and the optional resources that live next to the
//! splits.
//!
//! A data directory holds `train`, `dev` and optionally `test` splits, each
//! as `<split>.jsonl`, `<split>.json` or a `<split>/` directory, plus these
//! optional files:
//!
//! - `embeddings.txt`: pretrained word vectors, one `token v1 … vd` per line
//! - `contextual.jsonl`: precomputed contextual vectors
//! - `pos.jsonl`: external part-of-speech tags

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use csa_core::corpus::{load_dataset, DatasetFormat, ExternalTags, Limits, McqInstance};
use csa_core::embedder::ContextualStore;
use csa_core::tensor::Real;

pub struct DataSource {
    pub root: PathBuf,
    pub format: DatasetFormat,
}

impl DataSource {
    pub fn new(root: &Path, format: DatasetFormat) -> Result<Self> {
        if !root.exists() {
            bail!("data path {} does not exist", root.display());
        }
        Ok(DataSource {
            root: root.to_path_buf(),
            format,
        })
    }

    fn is_dir(&self) -> bool {
        self.root.is_dir()
    }

    pub fn split_path(&self, split: &str) -> Option<PathBuf> {
        if !self.is_dir() {
            return None;
        }
        [format!("{split}.jsonl"), format!("{split}.json"), split.to_string()]
            .into_iter()
            .map(|name| self.root.join(name))
            .find(|p| p.exists())
    }

    pub fn load_split(&self, split: &str, limits: &Limits) -> Result<Vec<McqInstance>> {
        let path = self
            .split_path(split)
            .with_context(|| format!("no `{split}` split under {}", self.root.display()))?;
        load(&path, self.format, limits)
    }

    /// The named split, or for a file path the file itself. Without a name,
    /// `test` is preferred over `dev`.
    pub fn load_eval(&self, split: Option<&str>, limits: &Limits) -> Result<(String, Vec<McqInstance>)> {
        if !self.is_dir() {
            if let Some(s) = split {
                bail!("--split {s} needs a data directory, got the file {}", self.root.display());
            }
            return Ok((self.root.display().to_string(), load(&self.root, self.format, limits)?));
        }
        let name = match split {
            Some(s) => s.to_string(),
            None if self.split_path("test").is_some() => "test".into(),
            None => "dev".into(),
        };
        let data = self.load_split(&name, limits)?;
        Ok((name, data))
    }

    /// Every split that exists, in test, dev, train order.
    pub fn load_all(&self, limits: &Limits) -> Result<Vec<McqInstance>> {
        if !self.is_dir() {
            return load(&self.root, self.format, limits);
        }
        let mut out = Vec::new();
        for split in ["test", "dev", "train"] {
            if self.split_path(split).is_some() {
                out.extend(self.load_split(split, limits)?);
            }
        }
        Ok(out)
    }

    fn resource(&self, name: &str) -> Option<PathBuf> {
        let dir = if self.is_dir() { self.root.as_path() } else { self.root.parent()? };
        let p = dir.join(name);
        p.exists().then_some(p)
    }

    pub fn embeddings(&self) -> Option<PathBuf> {
        self.resource("embeddings.txt")
    }

    pub fn external_tags(&self) -> Result<Option<ExternalTags>> {
        self.resource("pos.jsonl")
            .map(|p| ExternalTags::load(&p).with_context(|| format!("reading {}", p.display())))
            .transpose()
    }

    /// Contextual vectors, required when the model has a contextual slot.
    pub fn contextual<T: Real>(&self, dim: usize) -> Result<Option<ContextualStore<T>>> {
        if dim == 0 {
            return Ok(None);
        }
        let path = self
            .resource("contextual.jsonl")
            .with_context(|| format!("contextual_dim = {dim} needs contextual.jsonl next to the data"))?;
        let store = ContextualStore::load(&path).with_context(|| format!("reading {}", path.display()))?;
        if let Some(d) = store.dim() {
            if d != dim {
                bail!("{} holds {d}-dimensional vectors; the model expects {dim}", path.display());
            }
        }
        Ok(Some(store))
    }
}

fn load(path: &Path, format: DatasetFormat, limits: &Limits) -> Result<Vec<McqInstance>> {
    let data = load_dataset(path, format, limits).with_context(|| format!("loading {}", path.display()))?;
    if data.is_empty() {
        bail!("{} holds no instances", path.display());
    }
    Ok(data)
}
