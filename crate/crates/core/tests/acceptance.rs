//! Acceptance suite. Runs as a plain binary so every criterion prints its
//! verdict line even when it passes; exits non-zero if any criterion fails.

mod common;

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use csa_core::corpus::{load_dataset, DatasetFormat, Limits, McqInstance, QuestionType, SuffixTagger};
use csa_core::head::{build_cube, Head};
use csa_core::synthetic::lexical_overlap_dataset;
use csa_core::tensor::{GradCheckOptions, Graph, Mode, ParamStore, Tensor};
use csa_core::trainer::{ensemble_vote, evaluate, train, Control, EpochRecord, TrainConfig};
use csa_core::verify::{model_gradcheck, MODEL_EPS};
use csa_core::{Checkpoint, CsaModel, ModelConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{model_for, random_instances};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn gradient_integrity() -> Outcome {
    let start = Instant::now();
    let report = model_gradcheck(
        &ModelConfig::micro(),
        0,
        GradCheckOptions {
            eps: MODEL_EPS,
            tol: 1e-4,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let groups = [
        "embed.pos",
        "highway.",
        "enc.passage.",
        "enc.question.",
        "enc.candidate.",
        "att.cq.",
        "att.cp.",
        "att.qp.",
        "att.selfq.",
        "head.conv5.",
        "head.conv10.",
        "head.conv15.",
        "head.w",
    ];
    for g in groups {
        ensure(report.params.iter().any(|p| p.name.starts_with(g)), || format!("group {g} not checked"))?;
    }
    if !report.pass {
        let worst: Vec<String> = report
            .failing()
            .take(5)
            .map(|p| format!("{} {:.2e}", p.name, p.max_rel_error))
            .collect();
        return Err(format!("max relative error {:.3e}; failing {worst:?}", report.max_rel_error));
    }
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "max relative error {:.3e} over {} tensors, {:.1?}",
        report.max_rel_error,
        report.params.len(),
        elapsed
    ))
}

fn naive_matmul(a: &Tensor<f64>, b: &Tensor<f64>) -> Vec<f64> {
    let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            for t in 0..k {
                out[i * n + j] += a.data()[i * k + t] * b.data()[t * n + j];
            }
        }
    }
    out
}

fn oracle_equivalence() -> Outcome {
    let store = ParamStore::<f64>::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = [0.0f64; 4];
    for _ in 0..100 {
        let mut g = Graph::new(&store, Mode::Eval);

        let (m, k, n) = (rng.gen_range(1..8), rng.gen_range(1..8), rng.gen_range(1..8));
        let (a, b) = (rand_tensor(&mut rng, &[m, k]), rand_tensor(&mut rng, &[k, n]));
        let (va, vb) = (g.constant(a.clone()), g.constant(b.clone()));
        let y = g.matmul(va, vb).map_err(|e| e.to_string())?;
        worst[0] = worst[0].max(max_abs_diff(g.value(y).data(), &naive_matmul(&a, &b)));

        let (ch, rows, cols, f) = (rng.gen_range(1..7), rng.gen_range(1..6), rng.gen_range(1..20), rng.gen_range(1..4));
        let kw = rng.gen_range(1..=cols);
        let x = rand_tensor(&mut rng, &[ch, rows, cols]);
        let w = rand_tensor(&mut rng, &[f, ch, 1, kw]);
        let bias = rand_tensor(&mut rng, &[f]);
        let (vx, vw, vbias) = (g.constant(x.clone()), g.constant(w.clone()), g.constant(bias.clone()));
        let y = g.conv_rows(vx, vw, vbias).map_err(|e| e.to_string())?;
        let oc = cols - kw + 1;
        let mut expect = vec![0.0; f * rows * oc];
        for fi in 0..f {
            for r in 0..rows {
                for j in 0..oc {
                    let mut acc = bias.data()[fi];
                    for c in 0..ch {
                        for t in 0..kw {
                            acc += x.data()[(c * rows + r) * cols + j + t] * w.data()[(fi * ch + c) * kw + t];
                        }
                    }
                    expect[(fi * rows + r) * oc + j] = acc;
                }
            }
        }
        worst[1] = worst[1].max(max_abs_diff(g.value(y).data(), &expect));

        let width = rng.gen_range(1..=cols);
        let y = g.max_pool_rows(vx, width).map_err(|e| e.to_string())?;
        let pc = cols / width;
        let mut expect = Vec::new();
        for line in x.data().chunks(cols) {
            for j in 0..pc {
                expect.push(line[j * width..(j + 1) * width].iter().copied().fold(f64::NEG_INFINITY, f64::max));
            }
        }
        worst[2] = worst[2].max(max_abs_diff(g.value(y).data(), &expect));

        let (cl, ql, h) = (rng.gen_range(1..6), rng.gen_range(1..8), rng.gen_range(1..6));
        let cands: Vec<Tensor<f64>> = (0..3).map(|_| rand_tensor(&mut rng, &[cl, h])).collect();
        let quests: Vec<Tensor<f64>> = (0..2).map(|_| rand_tensor(&mut rng, &[ql, h])).collect();
        let cv: Vec<_> = cands.iter().map(|t| g.constant(t.clone())).collect();
        let qv: Vec<_> = quests.iter().map(|t| g.constant(t.clone())).collect();
        let cube = build_cube(&mut g, &cv, &qv).map_err(|e| e.to_string())?;
        ensure(cube.len() == 6, || format!("{} channels", cube.len()))?;
        let mut ch_idx = 0;
        for q in &quests {
            for c in &cands {
                let mut expect = vec![0.0; cl * ql];
                for i in 0..cl {
                    for j in 0..ql {
                        for t in 0..h {
                            expect[i * ql + j] += c.data()[i * h + t] * q.data()[j * h + t];
                        }
                    }
                }
                worst[3] = worst[3].max(max_abs_diff(g.value(cube[ch_idx]).data(), &expect));
                ch_idx += 1;
            }
        }
    }
    let max = worst.iter().copied().fold(0.0, f64::max);
    ensure(max <= 1e-12, || format!("max deviation (matmul, conv, pool, cube) = {worst:?}"))?;
    Ok(format!("100 cases each, max deviation {max:.1e}"))
}

fn shape_arithmetic() -> Outcome {
    let config = ModelConfig {
        question_len: 20,
        candidate_len: 10,
        filters: 32,
        hidden: 8,
        ..ModelConfig::default()
    };
    let mut store = ParamStore::<f64>::new();
    let head = Head::new(&mut store, &config, &mut ChaCha8Rng::seed_from_u64(0)).map_err(|e| e.to_string())?;
    let Head::Conv(conv) = head else {
        return Err("expected the convolutional head".into());
    };
    let mut g = Graph::new(&store, Mode::Eval);
    let cube = g.constant(rand_tensor(&mut ChaCha8Rng::seed_from_u64(1), &[6, 10, 20]));
    let feats = conv.summarize(&mut g, cube).map_err(|e| e.to_string())?;
    let lens: Vec<usize> = feats.iter().map(|&f| g.value(f).numel()).collect();
    let expect: Vec<usize> = [(5, 3), (10, 2), (15, 1)]
        .iter()
        .map(|&(k, width)| (20 - k + 1) / width * 10 * 32)
        .collect();
    ensure(lens == expect && lens == [1600, 1600, 1920], || format!("lengths {lens:?}"))?;

    let short = ModelConfig {
        question_len: 14,
        ..ModelConfig::micro()
    };
    let insts = random_instances(1, 3, 0, &ModelConfig::micro());
    let vocab = csa_core::corpus::Vocabulary::build(&insts);
    let table = csa_core::corpus::random_embeddings::<f64>(&vocab, short.word_dim, 0);
    ensure(CsaModel::new(short.clone(), vocab.clone(), table.clone(), 0).is_err(), || {
        "|Q|=14 accepted with the convolutional head".into()
    })?;
    let mut fc = short;
    fc.ablations.no_csa = true;
    ensure(CsaModel::new(fc, vocab, table, 0).is_ok(), || "|Q|=14 rejected under no_csa".into())?;
    Ok(format!("summarize lengths {lens:?}; |Q|=14 rejected"))
}

fn attention_normalization() -> Outcome {
    let config = ModelConfig::micro();
    let insts = random_instances(1000, 3, 4, &config);
    let model = model_for(&insts, config, 4);
    let mut rows = 0usize;
    let mut worst = 0.0f64;
    for inst in &insts {
        let enc = model.encode(inst, &SuffixTagger, None, None).map_err(|e| e.to_string())?;
        let mut g = Graph::new(&model.params, Mode::Eval);
        let out = model.net.forward(&mut g, &model.config, &enc).map_err(|e| e.to_string())?;
        ensure(out.attention.len() == 2 + 2 * 3, || format!("{} attention maps", out.attention.len()))?;
        for (att, keep) in &out.attention {
            let t = g.value(*att);
            let cols = t.shape()[1];
            ensure(cols == keep.len(), || format!("attention {:?} vs mask {}", t.shape(), keep.len()))?;
            for row in t.data().chunks(cols) {
                let sum: f64 = row.iter().sum();
                worst = worst.max((sum - 1.0).abs());
                for (v, &k) in row.iter().zip(keep) {
                    if !k && *v != 0.0 {
                        return Err(format!("instance {}: masked column carries {v:e}", inst.id));
                    }
                }
                rows += 1;
            }
        }
    }
    ensure(worst <= 1e-9, || format!("row sum deviates by {worst:e}"))?;
    Ok(format!("{rows} rows over 1000 instances, max |sum−1| {worst:.1e}"))
}

/// Trains the micro model until it fits the training set and reaches 90%
/// held-out accuracy; returns (epochs, train acc, held-out acc, initial held-out acc).
fn fit_synthetic(no_csa: bool) -> Result<(usize, f64, f64, f64), String> {
    let train_raw = lexical_overlap_dataset(200, 3, 11);
    let held_raw = lexical_overlap_dataset(200, 3, 12);
    let mut config = ModelConfig::micro();
    config.ablations.no_csa = no_csa;
    let all: Vec<McqInstance> = train_raw.iter().chain(&held_raw).cloned().collect();
    let model = model_for(&all, config.clone(), 3);
    let tr = model.encode_all(&train_raw, &SuffixTagger, None, None).map_err(|e| e.to_string())?;
    let held = model.encode_all(&held_raw, &SuffixTagger, None, None).map_err(|e| e.to_string())?;
    let initial = evaluate(&model, &held).map_err(|e| e.to_string())?.accuracy;
    let target = if no_csa { 0.8 } else { 0.9 };
    let cfg = TrainConfig {
        model: config,
        max_epochs: 200,
        patience: 200,
        seed: 5,
        ..Default::default()
    };
    let mut reached = None;
    let mut observer = |r: &EpochRecord, m: &CsaModel<f64>| {
        let acc = evaluate(m, &tr).map(|e| e.accuracy).unwrap_or(0.0);
        if acc == 1.0 && r.dev_acc >= target {
            reached = Some((r.epoch, acc, r.dev_acc));
            Control::Stop
        } else {
            Control::Continue
        }
    };
    train(model, &tr, &held, &cfg, None, &mut observer).map_err(|e| e.to_string())?;
    match reached {
        Some((epoch, acc, dev)) => Ok((epoch, acc, dev, initial)),
        None => Err(format!("did not reach 100% train and {target} held-out within 200 epochs")),
    }
}

fn learning_sanity() -> Outcome {
    let start = Instant::now();
    let (e1, t1, d1, i1) = fit_synthetic(false)?;
    let (e2, t2, d2, i2) = fit_synthetic(true).map_err(|e| format!("no_csa: {e}"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(600), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "CSA epoch {e1}: train {t1:.2} held-out {d1:.3} (untrained {i1:.3}); \
         no_csa epoch {e2}: train {t2:.2} held-out {d2:.3} (untrained {i2:.3}); {elapsed:.1?}"
    ))
}

fn ablation_audit() -> Outcome {
    let config = ModelConfig::micro();
    let insts = random_instances(20, 3, 6, &config);
    let with = model_for(&insts, config.clone(), 6);
    let mut ablated_cfg = config.clone();
    ablated_cfg.ablations.no_attention_weight = true;
    let without = model_for(&insts, ablated_cfg, 6);
    let (c, q, p) = (config.candidate_len, config.question_len, config.passage_len);
    let extents = c * q + c * p + q * p + q * q;
    let delta = with.trainable_count() - without.trainable_count();
    ensure(delta == extents, || format!("count changed by {delta}, W_elem extents sum to {extents}"))?;
    let site_sum: usize = with.net.sites().iter().map(|s| s.element_weight_len()).sum();
    ensure(site_sum == extents, || format!("sites report {site_sum}"))?;
    for inst in &insts {
        let a = with.predict(&with.encode(inst, &SuffixTagger, None, None).unwrap()).unwrap();
        let b = without.predict(&without.encode(inst, &SuffixTagger, None, None).unwrap()).unwrap();
        ensure(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()), || {
            format!("{}: {a:?} vs {b:?}", inst.id)
        })?;
    }
    Ok(format!("Δparams = {delta} = {c}·{q}+{c}·{p}+{q}·{p}+{q}·{q}; outputs identical at init on 20 instances"))
}

fn candidate_symmetry() -> Outcome {
    let config = ModelConfig::micro();
    let insts = random_instances(100, 3, 7, &config);
    let model = model_for(&insts, config, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for inst in &insts {
        let mut perm: Vec<usize> = (0..3).collect();
        while perm == [0, 1, 2] {
            perm.shuffle(&mut rng);
        }
        let mut permuted = inst.clone();
        permuted.candidates = perm.iter().map(|&i| inst.candidates[i].clone()).collect();
        permuted.answer = perm.iter().position(|&i| i == inst.answer).unwrap();
        let p = model.predict(&model.encode(inst, &SuffixTagger, None, None).unwrap()).unwrap();
        let pp = model.predict(&model.encode(&permuted, &SuffixTagger, None, None).unwrap()).unwrap();
        for (i, &src) in perm.iter().enumerate() {
            ensure(pp[i].to_bits() == p[src].to_bits(), || {
                format!("{}: permutation {perm:?} gives {pp:?} from {p:?}", inst.id)
            })?;
        }
    }
    Ok("100 instances, bit-exact".into())
}

fn determinism_and_persistence() -> Outcome {
    let train_raw = lexical_overlap_dataset(48, 3, 21);
    let dev_raw = lexical_overlap_dataset(16, 3, 22);
    let mut config = ModelConfig::micro();
    config.dropout = 0.35;
    let all: Vec<McqInstance> = train_raw.iter().chain(&dev_raw).cloned().collect();
    let cfg = TrainConfig {
        model: config.clone(),
        batch_size: 8,
        max_epochs: 3,
        patience: 10,
        seed: 9,
        ..Default::default()
    };
    let run = || -> Result<(Vec<u8>, Checkpoint<f64>), String> {
        let model = model_for(&all, config.clone(), 9);
        let tr = model.encode_all(&train_raw, &SuffixTagger, None, None).map_err(|e| e.to_string())?;
        let dv = model.encode_all(&dev_raw, &SuffixTagger, None, None).map_err(|e| e.to_string())?;
        let mut metrics = Vec::new();
        let out = train(model, &tr, &dv, &cfg, Some(&mut metrics), &mut |_, _| Control::Continue)
            .map_err(|e| e.to_string())?;
        Ok((metrics, out.best))
    };
    let (m1, best) = run()?;
    let (m2, best2) = run()?;
    ensure(!m1.is_empty() && m1 == m2, || "metrics differ between identical runs".into())?;
    let lines = m1.iter().filter(|&&b| b == b'\n').count();
    ensure(lines == 3, || format!("{lines} metric lines"))?;
    for id in best.model.params.ids() {
        let (a, b) = (best.model.params.get(id), best2.model.params.get(id));
        ensure(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()), || {
            format!("parameter {} differs", best.model.params.name(id))
        })?;
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("model.ckpt");
    best.save(&path).map_err(|e| e.to_string())?;
    let loaded = Checkpoint::<f64>::load(&path).map_err(|e| e.to_string())?;
    let probe = random_instances(30, 3, 23, &config);
    let probe: Vec<McqInstance> = probe.into_iter().chain(dev_raw.iter().cloned()).collect();
    for inst in &probe {
        let a = best.model.predict(&best.model.encode(inst, &SuffixTagger, None, None).unwrap()).unwrap();
        let b = loaded.model.predict(&loaded.model.encode(inst, &SuffixTagger, None, None).unwrap()).unwrap();
        ensure(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()), || {
            format!("{}: {a:?} vs {b:?} after reload", inst.id)
        })?;
    }

    // The same contract in 32-bit.
    let vocab = best.model.vocab.clone();
    let table = csa_core::corpus::random_embeddings::<f32>(&vocab, config.word_dim, 9);
    let model32 = CsaModel::<f32>::new(config.clone(), vocab, table, 9).map_err(|e| e.to_string())?;
    let ckpt32 = Checkpoint {
        config: TrainConfig {
            precision: csa_core::tensor::Precision::F32,
            ..cfg.clone()
        },
        model: model32,
        optimizer: None,
        epoch: 0,
        dev_acc: 0.0,
    };
    let path32 = dir.path().join("model32.ckpt");
    ckpt32.save(&path32).map_err(|e| e.to_string())?;
    let loaded32 = Checkpoint::<f32>::load(&path32).map_err(|e| e.to_string())?;
    for inst in &probe {
        let a = ckpt32.model.predict(&ckpt32.model.encode(inst, &SuffixTagger, None, None).unwrap()).unwrap();
        let b = loaded32.model.predict(&loaded32.model.encode(inst, &SuffixTagger, None, None).unwrap()).unwrap();
        ensure(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()), || {
            format!("f32 {}: {a:?} vs {b:?} after reload", inst.id)
        })?;
    }
    Ok(format!(
        "metrics byte-identical ({} bytes, 3 epochs, dropout 0.35); reload bit-identical on {} instances in f64 and f32",
        m1.len(),
        probe.len()
    ))
}

fn ensemble_logic() -> Outcome {
    let cases: [(&str, [[f64; 4]; 3], usize); 5] = [
        (
            "majority",
            [[0.1, 0.6, 0.2, 0.1], [0.2, 0.5, 0.2, 0.1], [0.7, 0.1, 0.1, 0.1]],
            1,
        ),
        (
            "majority over higher mean",
            [[0.3, 0.26, 0.24, 0.2], [0.3, 0.28, 0.22, 0.2], [0.0, 0.97, 0.01, 0.02]],
            0,
        ),
        (
            "tie, highest mean probability",
            [[0.5, 0.1, 0.3, 0.1], [0.1, 0.2, 0.6, 0.1], [0.0, 0.0, 0.45, 0.55]],
            2,
        ),
        (
            "tie, equal means, lowest index",
            [[0.5, 0.0, 0.25, 0.25], [0.25, 0.5, 0.0, 0.25], [0.25, 0.0, 0.25, 0.5]],
            0,
        ),
        (
            "unanimity",
            [[0.1, 0.1, 0.1, 0.7], [0.2, 0.1, 0.2, 0.5], [0.3, 0.0, 0.3, 0.4]],
            3,
        ),
    ];
    for (name, dists, expect) in cases {
        let d: Vec<Vec<f64>> = dists.iter().map(|r| r.to_vec()).collect();
        let got = ensemble_vote(&d).map_err(|e| e.to_string())?;
        ensure(got == expect, || format!("{name}: chose {got}, expected {expect}"))?;
    }
    ensure(ensemble_vote(&[]).is_err(), || "empty ensemble accepted".into())?;
    ensure(ensemble_vote(&[vec![0.5, 0.5], vec![1.0, 0.0, 0.0]]).is_err(), || {
        "mismatched candidate counts accepted".into()
    })?;
    Ok("majority, tie-by-mean, tie-by-index and unanimity cases resolve as specified".into())
}

const RACE_EXAMPLE: &str = r#"{"id": "race-breakfast", "passage": "Is it important to have breakfast every day? A short time ago, a test was given in the United States. People of different ages, from 12 to 83, were asked to have a test. During the test, these people were given all kinds of breakfast, and sometimes they got no breakfast at all.", "question": "What do the results show?", "candidates": ["They show that breakfast has affected on work and study.", "Breakfast has little to do with a person's work.", "A person will work better if he only has fruit and milk.", "They show that girl students should have less for breakfast."], "answer": "A"}"#;

const SEMEVAL_EXAMPLE: &str = r#"{"id": "semeval-tea", "passage": "I was thirsty so I decided to make a cup of tea. I looked through my box of teas and rifled through the assorted flavors. I settled on Earl Gray, which is a black tea flavored with bergamot orange. I filled the kettle with water and placed it on the stove, turning on the burner so that it would heat up and begin boiling.", "question": "Why did they use a kettle?", "candidates": ["to drink from", "to boil water"], "answer": "B"}"#;

fn data_pipeline() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut found = Vec::new();
    for (name, line, answer, qtype, n) in [
        ("race.jsonl", RACE_EXAMPLE, 0, QuestionType::What, 4),
        ("semeval.jsonl", SEMEVAL_EXAMPLE, 1, QuestionType::Why, 2),
    ] {
        let path = dir.path().join(name);
        let mut f = std::fs::File::create(&path).map_err(|e| e.to_string())?;
        writeln!(f, "{line}").map_err(|e| e.to_string())?;
        let insts = load_dataset(&path, DatasetFormat::NativeJsonl, &Limits::default()).map_err(|e| e.to_string())?;
        ensure(insts.len() == 1, || format!("{name}: {} instances", insts.len()))?;
        let inst = &insts[0];
        ensure(inst.answer == answer && inst.qtype == qtype && inst.num_candidates() == n, || {
            format!("{name}: answer {} qtype {} candidates {}", inst.answer, inst.qtype, inst.num_candidates())
        })?;
        found.push(format!("{} → answer {}, {}", inst.id, inst.answer, inst.qtype));
    }
    Ok(found.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("gradient integrity", gradient_integrity),
        ("oracle equivalence", oracle_equivalence),
        ("shape arithmetic", shape_arithmetic),
        ("attention normalization", attention_normalization),
        ("learning sanity", learning_sanity),
        ("ablation audits", ablation_audit),
        ("candidate symmetry", candidate_symmetry),
        ("determinism and persistence", determinism_and_persistence),
        ("ensemble logic", ensemble_logic),
        ("data pipeline", data_pipeline),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let label = format!("criterion {}: {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {label} ({:.1?}): {detail}", start.elapsed()),
            Err(detail) => {
                failed += 1;
                println!("FAIL {label} ({:.1?}): {detail}", start.elapsed());
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
