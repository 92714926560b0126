mod data;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use csa_core::corpus::{load_embeddings, random_embeddings, DatasetFormat, McqInstance, SuffixTagger, Vocabulary};
use csa_core::tensor::{GradCheckOptions, Precision, Real};
use csa_core::trainer::{checkpoint_precision, ensemble_vote, evaluate, score_predictions, Control, Evaluation};
use csa_core::verify::{model_gradcheck, MODEL_EPS};
use csa_core::{Ablations, Checkpoint, CsaModel, ModelConfig, TrainConfig};
use serde_json::json;

use data::DataSource;

/// Convolutional spatial attention reader for multiple-choice questions.
#[derive(Parser, Debug)]
#[command(name = "csa", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and save the checkpoint with the best dev accuracy.
    Train {
        /// TOML file with any TrainConfig fields; unset fields keep defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Data directory with train and dev splits.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated ablations, replacing those in the config:
        /// no_attention_weight, no_enriched_representation, no_csa.
        #[arg(long)]
        ablation: Option<String>,
        /// Per-epoch metrics; defaults to the checkpoint path with a
        /// `.metrics.jsonl` suffix.
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long, default_value = "native-jsonl")]
        format: DatasetFormat,
    },
    /// Accuracy of a checkpoint on a split (test if present, else dev) or file.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        split: Option<String>,
        /// Also report accuracy per question type.
        #[arg(long)]
        breakdown: bool,
        /// Print the result as JSON.
        #[arg(long)]
        json: bool,
        #[arg(long, default_value = "native-jsonl")]
        format: DatasetFormat,
    },
    /// Majority vote of several checkpoints.
    Ensemble {
        #[arg(long, num_args = 1.., required = true)]
        ckpts: Vec<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        breakdown: bool,
        #[arg(long)]
        json: bool,
        #[arg(long, default_value = "native-jsonl")]
        format: DatasetFormat,
    },
    /// Finite-difference check of every trainable parameter.
    Gradcheck {
        /// `tiny` for the built-in micro configuration, or a TOML file.
        #[arg(long, default_value = "tiny")]
        config: String,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = MODEL_EPS)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        ablation: Option<String>,
    },
    /// Write the attention cube of one instance as JSON lines, one per
    /// candidate.
    DumpCube {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        instance_id: String,
        /// Data directory or file holding the instance.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "native-jsonl")]
        format: DatasetFormat,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Train {
            config,
            data,
            out,
            seed,
            ablation,
            metrics,
            format,
        } => {
            let mut cfg = match &config {
                Some(p) => {
                    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    TrainConfig::from_toml(&text).with_context(|| format!("parsing {}", p.display()))?
                }
                None => TrainConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(a) = ablation {
                cfg.model.ablations = Ablations::parse(&a)?;
            }
            cfg.validate()?;
            let metrics = metrics.unwrap_or_else(|| suffixed(&out, ".metrics.jsonl"));
            let src = DataSource::new(&data, format)?;
            match cfg.precision {
                Precision::F32 => train::<f32>(&cfg, &src, &out, &metrics),
                Precision::F64 => train::<f64>(&cfg, &src, &out, &metrics),
            }
        }
        Command::Eval {
            ckpt,
            data,
            split,
            breakdown,
            json,
            format,
        } => {
            let src = DataSource::new(&data, format)?;
            let (limits, _) = peek(&ckpt)?;
            let (name, instances) = src.load_eval(split.as_deref(), &limits)?;
            let dists = distributions(&ckpt, &src, &instances)?;
            let preds = dists.iter().map(|d| argmax(d)).collect();
            report(&name, &score(preds, &instances), breakdown, json);
            Ok(())
        }
        Command::Ensemble {
            ckpts,
            data,
            split,
            breakdown,
            json,
            format,
        } => {
            let src = DataSource::new(&data, format)?;
            let (limits, _) = peek(&ckpts[0])?;
            for c in &ckpts[1..] {
                if peek(c)?.0 != limits {
                    bail!("{} was trained with different stream limits", c.display());
                }
            }
            let (name, instances) = src.load_eval(split.as_deref(), &limits)?;
            let mut members = Vec::with_capacity(ckpts.len());
            for c in &ckpts {
                let d = distributions(c, &src, &instances)?;
                let eval = score(d.iter().map(|x| argmax(x)).collect(), &instances);
                log::info!("{}: accuracy {:.4}", c.display(), eval.accuracy);
                members.push(d);
            }
            let preds = (0..instances.len())
                .map(|i| {
                    let votes: Vec<Vec<f64>> = members.iter().map(|m| m[i].clone()).collect();
                    ensemble_vote(&votes)
                })
                .collect::<csa_core::Result<Vec<usize>>>()?;
            report(&name, &score(preds, &instances), breakdown, json);
            Ok(())
        }
        Command::Gradcheck {
            config,
            tol,
            eps,
            seed,
            ablation,
        } => {
            let mut model = if config == "tiny" || config == "micro" {
                ModelConfig::micro()
            } else {
                let text = fs::read_to_string(&config).with_context(|| format!("reading {config}"))?;
                TrainConfig::from_toml(&text)?.model
            };
            if let Some(a) = ablation {
                model.ablations = Ablations::parse(&a)?;
            }
            let opts = GradCheckOptions {
                eps,
                tol,
                seed,
                ..Default::default()
            };
            let start = std::time::Instant::now();
            let report = model_gradcheck(&model, seed, opts)?;
            for p in &report.params {
                println!(
                    "{:<4} {:<32} {:>4} checked  max rel err {:.3e}  (analytic {:+.6e}, numeric {:+.6e})",
                    if p.pass { "ok" } else { "FAIL" },
                    p.name,
                    p.checked,
                    p.max_rel_error,
                    p.analytic,
                    p.numeric
                );
            }
            println!(
                "{} tensors, max relative error {:.3e}, tolerance {tol:e}, {:.1?}",
                report.params.len(),
                report.max_rel_error,
                start.elapsed()
            );
            if !report.pass {
                bail!("gradient check failed for {} tensor(s)", report.failing().count());
            }
            Ok(())
        }
        Command::DumpCube {
            ckpt,
            instance_id,
            data,
            out,
            format,
        } => {
            let src = DataSource::new(&data, format)?;
            let (limits, _) = peek(&ckpt)?;
            let inst = src
                .load_all(&limits)?
                .into_iter()
                .find(|i| i.id == instance_id)
                .with_context(|| format!("no instance with id `{instance_id}` in {}", data.display()))?;
            let mut w: Box<dyn Write> = match &out {
                Some(p) => Box::new(BufWriter::new(fs::File::create(p)?)),
                None => Box::new(BufWriter::new(io::stdout().lock())),
            };
            match checkpoint_precision(&ckpt)? {
                Precision::F32 => dump_cube::<f32>(&ckpt, &src, &inst, &mut w)?,
                Precision::F64 => dump_cube::<f64>(&ckpt, &src, &inst, &mut w)?,
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn argmax(xs: &[f64]) -> usize {
    csa_core::model::argmax(xs)
}

fn train<T: Real>(cfg: &TrainConfig, src: &DataSource, out: &Path, metrics_path: &Path) -> Result<()> {
    let limits = cfg.model.limits();
    let train_raw = src.load_split("train", &limits)?;
    let dev_raw = src.load_split("dev", &limits)?;
    log::info!("{} training and {} dev instances", train_raw.len(), dev_raw.len());
    let vocab = Vocabulary::build(train_raw.iter().chain(&dev_raw));
    let table = match src.embeddings() {
        Some(p) => {
            let loaded = load_embeddings::<T>(&p, &vocab, cfg.model.word_dim, cfg.seed)
                .with_context(|| format!("reading {}", p.display()))?;
            log::info!("{} of {} vocabulary entries found in {}", loaded.found, vocab.len(), p.display());
            loaded.table
        }
        None => random_embeddings(&vocab, cfg.model.word_dim, cfg.seed),
    };
    let model = CsaModel::<T>::new(cfg.model.clone(), vocab, table, cfg.seed)?;
    log::info!("{} trainable parameters", model.trainable_count());
    let tags = src.external_tags()?;
    let ctx = src.contextual::<T>(cfg.model.contextual_dim)?;
    let train_set = model.encode_all(&train_raw, &SuffixTagger, tags.as_ref(), ctx.as_ref())?;
    let dev_set = model.encode_all(&dev_raw, &SuffixTagger, tags.as_ref(), ctx.as_ref())?;
    let mut metrics = BufWriter::new(
        fs::File::create(metrics_path).with_context(|| format!("creating {}", metrics_path.display()))?,
    );
    let outcome = csa_core::train(model, &train_set, &dev_set, cfg, Some(&mut metrics), &mut |_, _| Control::Continue)?;
    metrics.flush()?;
    outcome.best.save(out).with_context(|| format!("writing {}", out.display()))?;
    log::info!(
        "best dev accuracy {:.4} at epoch {}; saved {}",
        outcome.best.dev_acc,
        outcome.best.epoch,
        out.display()
    );
    Ok(())
}

/// Stream limits and precision recorded in a checkpoint.
fn peek(ckpt: &Path) -> Result<(csa_core::corpus::Limits, Precision)> {
    let precision = checkpoint_precision(ckpt).with_context(|| format!("reading {}", ckpt.display()))?;
    let limits = match precision {
        Precision::F32 => load::<f32>(ckpt)?.model.config.limits(),
        Precision::F64 => load::<f64>(ckpt)?.model.config.limits(),
    };
    Ok((limits, precision))
}

fn load<T: Real>(ckpt: &Path) -> Result<Checkpoint<T>> {
    Checkpoint::load(ckpt).with_context(|| format!("reading {}", ckpt.display()))
}

/// Candidate distributions of one checkpoint over `instances`, in f64.
fn distributions(ckpt: &Path, src: &DataSource, instances: &[McqInstance]) -> Result<Vec<Vec<f64>>> {
    match checkpoint_precision(ckpt)? {
        Precision::F32 => distributions_in::<f32>(ckpt, src, instances),
        Precision::F64 => distributions_in::<f64>(ckpt, src, instances),
    }
}

fn distributions_in<T: Real>(ckpt: &Path, src: &DataSource, instances: &[McqInstance]) -> Result<Vec<Vec<f64>>> {
    let model = load::<T>(ckpt)?.model;
    let tags = src.external_tags()?;
    let ctx = src.contextual::<T>(model.config.contextual_dim)?;
    let encoded = model.encode_all(instances, &SuffixTagger, tags.as_ref(), ctx.as_ref())?;
    let eval = evaluate(&model, &encoded)?;
    log::debug!("{}: accuracy {:.4}", ckpt.display(), eval.accuracy);
    encoded
        .iter()
        .map(|e| Ok(model.predict(e)?.iter().map(|p| p.as_f64()).collect()))
        .collect()
}

fn score(predictions: Vec<usize>, instances: &[McqInstance]) -> Evaluation {
    let gold: Vec<_> = instances.iter().map(|i| (i.answer, i.qtype)).collect();
    score_predictions(predictions, &gold)
}

fn report(name: &str, eval: &Evaluation, breakdown: bool, as_json: bool) {
    if as_json {
        let mut v = json!({
            "data": name,
            "accuracy": eval.accuracy,
            "correct": eval.correct,
            "total": eval.total,
        });
        if breakdown {
            v["by_qtype"] = json!(eval.by_qtype);
        }
        println!("{v}");
        return;
    }
    println!("{name}: accuracy {:.4} ({}/{})", eval.accuracy, eval.correct, eval.total);
    if breakdown {
        for q in &eval.by_qtype {
            println!("  {:<6} {:.4} ({}/{})", q.qtype.as_str(), q.accuracy, q.correct, q.n);
        }
    }
}

fn dump_cube<T: Real>(ckpt: &Path, src: &DataSource, inst: &McqInstance, w: &mut dyn Write) -> Result<()> {
    let model = load::<T>(ckpt)?.model;
    let tags = src.external_tags()?;
    let ctx = src.contextual::<T>(model.config.contextual_dim)?;
    let enc = model.encode(inst, &SuffixTagger, tags.as_ref(), ctx.as_ref())?;
    let probs = model.predict(&enc)?;
    for (c, cube) in model.cubes(&enc)?.iter().enumerate() {
        let &[k, rows, cols] = cube.shape() else {
            bail!("unexpected cube shape {:?}", cube.shape());
        };
        let channels: Vec<Vec<Vec<f64>>> = (0..k)
            .map(|ch| {
                (0..rows)
                    .map(|r| (0..cols).map(|q| cube.at(&[ch, r, q]).as_f64()).collect())
                    .collect()
            })
            .collect();
        let line = json!({
            "id": inst.id,
            "candidate": c,
            "tokens": inst.candidates[c],
            "probability": probs[c].as_f64(),
            "shape": [k, rows, cols],
            "cube": channels,
        });
        serde_json::to_writer(&mut *w, &line)?;
        writeln!(w)?;
    }
    Ok(())
}
