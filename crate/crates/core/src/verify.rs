//! End-to-end gradient verification of the full model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ModelConfig;
use crate::corpus::{random_embeddings, SuffixTagger, Vocabulary};
use crate::error::{Error, Result};
use crate::model::CsaModel;
use crate::synthetic::lexical_overlap_dataset;
use crate::tensor::{check_gradients, GradCheckOptions, GradReport, Graph, Mode, Tensor};

const JITTER: f64 = 0.5;
const HEAD_SCALE: f64 = 0.01;
const KINK_MARGIN: f64 = 1e-3;
const MAX_DRAWS: usize = 2000;

fn is_output_layer(name: &str) -> bool {
    name == "head.w" || name.ends_with(".fc2_w") || name.ends_with(".fc2_b")
}

/// Step used for the full-model check; see [`model_gradcheck`].
pub const MODEL_EPS: f64 = 1e-4;

/// Checks every trainable parameter of a model against central
/// differences, on one synthetic three-candidate instance with dropout off.
///
/// The probe point is the seeded initialization with every trainable
/// parameter jittered by uniform(±0.5) and the final scoring layer then
/// scaled by 0.01. Jitter is redrawn until every relu input, clamp input and max-pool
/// runner-up is at least 1e-3 from its kink, so a step of `opts.eps` (use
/// [`MODEL_EPS`]) cannot cross one.
///
/// The checked scalar is the cross-entropy loss linearized at the probe
/// point, `Σ_i (p_i − y_i)·s_i` with `p` frozen, whose gradient there equals
/// the loss gradient. Small scores keep the roundoff in its finite
/// differences well below the 1e-8 floor of the relative error.
pub fn model_gradcheck(config: &ModelConfig, seed: u64, opts: GradCheckOptions) -> Result<GradReport> {
    let config = ModelConfig {
        dropout: 0.0,
        ..config.clone()
    };
    let inst = lexical_overlap_dataset(1, 3, seed).remove(0);
    let vocab = Vocabulary::build([&inst]);
    let table = random_embeddings(&vocab, config.word_dim, seed);
    let mut model = CsaModel::<f64>::new(config, vocab, table, seed)?;
    let enc = model.encode(&inst, &SuffixTagger, None, None)?;
    let targets: Vec<_> = model.params.trainable_ids().collect();
    let base: Vec<_> = targets.iter().map(|&id| model.params.get(id).clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
    let mut draws = 0;
    loop {
        for (&id, t) in targets.iter().zip(&base) {
            let k = if is_output_layer(model.params.name(id)) { HEAD_SCALE } else { 1.0 };
            let data = t.data().iter().map(|v| k * (v + rng.gen_range(-JITTER..JITTER))).collect();
            model.params.set(id, Tensor::new(t.shape().to_vec(), data)?)?;
        }
        let mut g = Graph::new(&model.params, Mode::Eval);
        model.net.forward(&mut g, &model.config, &enc)?;
        if g.kink_margin() >= KINK_MARGIN {
            break;
        }
        draws += 1;
        if draws == MAX_DRAWS {
            return Err(Error::Contract(format!(
                "no probe point within {KINK_MARGIN} of a kink after {MAX_DRAWS} draws"
            )));
        }
    }
    log::debug!("gradcheck probe found after {} redraws", draws);
    let mut residual = model.predict(&enc)?;
    residual[enc.answer] -= 1.0;
    let residual = Tensor::vector(residual);
    let CsaModel { config, params, net, .. } = &mut model;
    check_gradients(
        params,
        &targets,
        |g: &mut Graph<'_, f64>| {
            let out = net.forward(g, config, &enc)?;
            let parts: Vec<_> = out
                .scores
                .iter()
                .map(|&s| g.reshape(s, &[1]))
                .collect::<Result<_>>()?;
            let scores = g.concat(&parts, 0)?;
            let c = g.constant(residual.clone());
            g.dot(scores, c)
        },
        opts,
    )
}

/// Gradient of the cross-entropy loss at the probe point used by
/// [`model_gradcheck`], for comparison with its linearized form.
#[cfg(test)]
fn loss_and_linearized_grads(seed: u64) -> (crate::tensor::ParamGrads<f64>, crate::tensor::ParamGrads<f64>) {
    let inst = lexical_overlap_dataset(1, 3, seed).remove(0);
    let vocab = Vocabulary::build([&inst]);
    let config = ModelConfig::micro();
    let table = random_embeddings(&vocab, config.word_dim, seed);
    let model = CsaModel::<f64>::new(config, vocab, table, seed).unwrap();
    let enc = model.encode(&inst, &SuffixTagger, None, None).unwrap();
    let mut g = Graph::new(&model.params, Mode::Eval);
    let out = model.net.forward(&mut g, &model.config, &enc).unwrap();
    let loss = crate::trainer::nll(&mut g, out.probs, enc.answer).unwrap();
    let full = g.backward(loss).unwrap().into_param_grads();
    let mut residual = g.value(out.probs).data().to_vec();
    residual[enc.answer] -= 1.0;
    let mut g = Graph::new(&model.params, Mode::Eval);
    let out = model.net.forward(&mut g, &model.config, &enc).unwrap();
    let parts: Vec<_> = out.scores.iter().map(|&s| g.reshape(s, &[1]).unwrap()).collect();
    let scores = g.concat(&parts, 0).unwrap();
    let c = g.constant(Tensor::vector(residual));
    let f = g.dot(scores, c).unwrap();
    (full, g.backward(f).unwrap().into_param_grads())
}
