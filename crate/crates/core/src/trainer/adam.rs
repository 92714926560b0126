use crate::error::{Error, Result};
use crate::tensor::{ParamGrads, ParamStore, Real, Tensor};

/// Bias-corrected Adam with per-parameter moment buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub(crate) m: Vec<Option<Tensor<T>>>,
    pub(crate) v: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Adam<T> {
    pub fn new(lr: f64, num_params: usize) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![None; num_params],
            v: vec![None; num_params],
        }
    }

    /// Applies one update to every trainable parameter. Missing gradients
    /// count as zero; frozen parameters are left untouched.
    ///
    /// A non-finite gradient aborts the whole step before anything changes.
    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &ParamGrads<T>) -> Result<()> {
        for (id, g) in grads.iter() {
            if params.is_trainable(id) && !g.all_finite() {
                return Err(Error::NonFiniteGradient(params.name(id).to_string()));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let (one_b1, one_b2) = (T::lit(1.0 - self.beta1), T::lit(1.0 - self.beta2));
        let (lr, eps) = (T::lit(self.lr), T::lit(self.eps));
        let (c1, c2) = (T::lit(c1), T::lit(c2));
        let ids: Vec<_> = params.trainable_ids().collect();
        for id in ids {
            let shape = params.get(id).shape().to_vec();
            let i = id.index();
            let m = self.m[i].get_or_insert_with(|| Tensor::zeros(&shape));
            let v = self.v[i].get_or_insert_with(|| Tensor::zeros(&shape));
            let g = grads.get(id);
            let p = params.get_mut(id).data_mut();
            for k in 0..p.len() {
                let gk = g.map_or(T::zero(), |g| g.data()[k]);
                let mk = b1 * m.data()[k] + one_b1 * gk;
                let vk = b2 * v.data()[k] + one_b2 * gk * gk;
                m.data_mut()[k] = mk;
                v.data_mut()[k] = vk;
                p[k] = p[k] - lr * (mk / c1) / ((vk / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}
