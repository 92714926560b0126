//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rayon::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Graph, Mode, ParamId, ParamStore, Var};
use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub eps: f64,
    pub tol: f64,
    /// Tensors with more scalars than this are checked on a seeded sample
    /// of this many entries.
    pub max_samples_per_param: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            eps: 1e-6,
            tol: 1e-4,
            max_samples_per_param: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    /// Flat index of the worst entry, with its analytic and numeric values.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradReport {
    pub params: Vec<ParamCheck>,
    pub max_rel_error: f64,
    pub pass: bool,
}

impl GradReport {
    pub fn failing(&self) -> impl Iterator<Item = &ParamCheck> {
        self.params.iter().filter(|p| !p.pass)
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compares reverse-mode gradients of the scalar built by `f` against central
/// differences `(f(θ+ε) − f(θ−ε)) / 2ε`, parameter by parameter.
///
/// `f` is evaluated in [`Mode::Eval`] and must be deterministic. Tensors are
/// checked in parallel, each on its own copy of the store.
pub fn check_gradients<F>(
    params: &ParamStore<f64>,
    targets: &[ParamId],
    f: F,
    opts: GradCheckOptions,
) -> Result<GradReport>
where
    F: for<'a> Fn(&mut Graph<'a, f64>) -> Result<Var> + Sync,
{
    let analytic = {
        let mut g = Graph::new(params, Mode::Eval);
        let loss = f(&mut g)?;
        g.backward(loss)?.into_param_grads()
    };
    let eval = |params: &ParamStore<f64>| -> Result<f64> {
        let mut g = Graph::new(params, Mode::Eval);
        let loss = f(&mut g)?;
        Ok(g.value(loss).data()[0])
    };

    let checks = targets
        .par_iter()
        .map(|&id| -> Result<ParamCheck> {
            let mut params = params.clone();
            let n = params.get(id).numel();
            let indices: Vec<usize> = if n <= opts.max_samples_per_param {
                (0..n).collect()
            } else {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(opts.seed ^ (id.index() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let mut idx = sample(&mut rng, n, opts.max_samples_per_param).into_vec();
                idx.sort_unstable();
                idx
            };
            let mut worst = (0.0f64, 0usize, 0.0f64, 0.0f64);
            for &i in &indices {
                let orig = params.get(id).data()[i];
                params.get_mut(id).data_mut()[i] = orig + opts.eps;
                let plus = eval(&params)?;
                params.get_mut(id).data_mut()[i] = orig - opts.eps;
                let minus = eval(&params)?;
                params.get_mut(id).data_mut()[i] = orig;
                let numeric = (plus - minus) / (2.0 * opts.eps);
                let a = analytic.get(id).map_or(0.0, |g| g.data()[i]);
                let rel = relative_error(a, numeric);
                if rel > worst.0 || rel.is_nan() {
                    worst = (rel, i, a, numeric);
                }
            }
            Ok(ParamCheck {
                name: params.name(id).to_string(),
                checked: indices.len(),
                max_rel_error: worst.0,
                worst_index: worst.1,
                analytic: worst.2,
                numeric: worst.3,
                pass: worst.0 < opts.tol,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_rel_error = checks.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    let pass = checks.iter().all(|c| c.pass);
    Ok(GradReport {
        params: checks,
        max_rel_error,
        pass,
    })
}
