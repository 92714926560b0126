use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Vocabulary;
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

const INIT_RANGE: f64 = 0.05;

/// A word table built from a pretrained vector file.
#[derive(Debug, Clone)]
pub struct LoadedEmbeddings<T> {
    pub table: Tensor<T>,
    /// How many vocabulary entries were found in the file.
    pub found: usize,
}

/// Table of shape `[|V|×dim]` with every non-padding row drawn from
/// uniform(−0.05, 0.05) and a zero padding row.
pub fn random_embeddings<T: Real>(vocab: &Vocabulary, dim: usize, seed: u64) -> Tensor<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(&[vocab.len(), dim], |i| {
        // Draw for every slot so the sequence does not depend on which rows
        // the file covers.
        let v = rng.gen_range(-INIT_RANGE..INIT_RANGE);
        if i / dim == Vocabulary::PAD {
            T::zero()
        } else {
            T::lit(v)
        }
    })
}

/// Loads a text embedding file (`token v1 … vd` per line, optionally with a
/// `count dim` header line) into a table aligned with `vocab`.
///
/// Rows for tokens present in the file are copied; all other rows (including
/// `<unk>`) are drawn from uniform(−0.05, 0.05) with `seed`; the padding row
/// is zero.
pub fn load_embeddings<T: Real>(path: &Path, vocab: &Vocabulary, dim: usize, seed: u64) -> Result<LoadedEmbeddings<T>> {
    let mut table = random_embeddings::<T>(vocab, dim, seed);
    let reader = BufReader::new(fs::File::open(path)?);
    let mut file_dim: Option<usize> = None;
    let mut found = 0;
    let format_err = |line: usize, msg: String| Error::Format {
        path: path.to_path_buf(),
        line,
        msg,
    };
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let mut parts = line.split_ascii_whitespace();
        let Some(token) = parts.next() else { continue };
        let values: Vec<&str> = parts.collect();
        if line_no == 1 && values.len() == 1 && token.parse::<usize>().is_ok() && values[0].parse::<usize>().is_ok() {
            continue;
        }
        match file_dim {
            None => {
                if values.len() != dim {
                    return Err(format_err(
                        line_no,
                        format!("vectors have {} dimensions, expected {dim}", values.len()),
                    ));
                }
                file_dim = Some(values.len());
            }
            Some(d) if d != values.len() => {
                return Err(format_err(
                    line_no,
                    format!("inconsistent dimension: {} values after {d} on earlier lines", values.len()),
                ));
            }
            Some(_) => {}
        }
        let id = vocab.id(token);
        if id == Vocabulary::UNK && token != Vocabulary::UNK_TOKEN {
            continue;
        }
        if id == Vocabulary::PAD {
            continue;
        }
        let row = &mut table.data_mut()[id * dim..(id + 1) * dim];
        for (slot, v) in row.iter_mut().zip(&values) {
            let x: f64 = v
                .parse()
                .map_err(|e| format_err(line_no, format!("bad value `{v}`: {e}")))?;
            *slot = T::lit(x);
        }
        found += 1;
    }
    Ok(LoadedEmbeddings { table, found })
}

/// Writes the non-reserved rows of a table in the text format read by
/// [`load_embeddings`], using shortest round-trip float formatting.
pub fn save_embeddings<T: Real>(path: &Path, vocab: &Vocabulary, table: &Tensor<T>) -> Result<()> {
    if table.rank() != 2 || table.shape()[0] != vocab.len() {
        return Err(Error::dim("save_embeddings", table.shape(), &[vocab.len()]));
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    for (id, token) in vocab.entries() {
        write!(w, "{token}")?;
        for v in table.row(id) {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
