//! The enriched-representation operator g(X1, X2) and its four usage sites.

use rand_chacha::ChaCha8Rng;

use crate::encoder::BiLstm;
use crate::error::{Error, Result};
use crate::init;
use crate::tensor::{Graph, ParamId, ParamStore, Real, Tensor, Var};

/// Parameters of one g(X1, X2) site.
#[derive(Debug, Clone)]
pub struct AttentionSite {
    pub w1: ParamId,
    pub w2: ParamId,
    /// Diagonal of D, length h_att.
    pub d: ParamId,
    /// Element-wise weight sized `[L1max×L2max]`; absent under the
    /// `no_attention_weight` ablation.
    pub w_elem: Option<ParamId>,
    pub fusion: BiLstm,
    max_rows: usize,
    max_cols: usize,
}

/// Result of one application of g.
#[derive(Debug, Clone, Copy)]
pub struct Enriched {
    /// `[L1×h]`.
    pub output: Var,
    /// The row-normalized attention `[L1×L2]`.
    pub attention: Var,
}

impl AttentionSite {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        prefix: &str,
        hidden: usize,
        att_hidden: usize,
        max_rows: usize,
        max_cols: usize,
        element_weight: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let w1 = store.add(format!("{prefix}.w1"), init::fan_in(rng, &[hidden, att_hidden], hidden), true);
        let w2 = store.add(format!("{prefix}.w2"), init::fan_in(rng, &[hidden, att_hidden], hidden), true);
        let d = store.add(format!("{prefix}.d"), Tensor::ones(&[att_hidden]), true);
        let w_elem = element_weight
            .then(|| store.add(format!("{prefix}.w_elem"), Tensor::ones(&[max_rows, max_cols]), true));
        let fusion = BiLstm::new(store, &format!("{prefix}.fusion"), 2 * hidden, hidden, rng)?;
        Ok(AttentionSite {
            w1,
            w2,
            d,
            w_elem,
            fusion,
            max_rows,
            max_cols,
        })
    }

    /// Scalars in the element-wise weight (0 when ablated).
    pub fn element_weight_len(&self) -> usize {
        if self.w_elem.is_some() {
            self.max_rows * self.max_cols
        } else {
            0
        }
    }

    /// Applies g: bilinear attention from each X1 row over the real X2 rows,
    /// gathers `Y' = M_att · X2`, and fuses `[X1; Y']` with the site's Bi-LSTM.
    pub fn enrich<T: Real>(
        &self,
        g: &mut Graph<'_, T>,
        x1: Var,
        mask1: &[bool],
        x2: Var,
        mask2: &[bool],
        dropout: f64,
    ) -> Result<Enriched> {
        let (s1, s2) = (g.shape(x1).to_vec(), g.shape(x2).to_vec());
        if s1.len() != 2 || s2.len() != 2 || s1[1] != s2[1] {
            return Err(Error::dim("enrich", &s1, &s2));
        }
        let (l1, l2) = (s1[0], s2[0]);
        if mask2.len() != l2 || mask1.len() != l1 {
            return Err(Error::dim("enrich mask", &[mask1.len(), mask2.len()], &[l1, l2]));
        }
        if !mask2.iter().any(|m| *m) {
            return Err(Error::DegenerateAttention);
        }
        let (w1, w2, d) = (g.param(self.w1), g.param(self.w2), g.param(self.d));
        let a = g.matmul(x1, w1)?;
        let a = g.relu(a);
        let a = g.mul(a, d)?;
        let b = g.matmul(x2, w2)?;
        let b = g.relu(b);
        let bt = g.transpose(b)?;
        let mut m = g.matmul(a, bt)?;
        if let Some(w) = self.w_elem {
            let w = self.cropped_weight(g, w, l1, l2)?;
            m = g.mul(m, w)?;
        }
        let masked = g.mask_last_axis(m, mask2)?;
        let attention = g.softmax(masked, 1)?;
        let gathered = g.matmul(attention, x2)?;
        let fused_in = g.concat(&[x1, gathered], 1)?;
        let output = self.fusion.forward(g, fused_in, mask1, dropout)?;
        Ok(Enriched { output, attention })
    }

    fn cropped_weight<T: Real>(&self, g: &mut Graph<'_, T>, w: ParamId, l1: usize, l2: usize) -> Result<Var> {
        if l1 > self.max_rows || l2 > self.max_cols {
            return Err(Error::dim("attention weight", &[l1, l2], &[self.max_rows, self.max_cols]));
        }
        let mut w = g.param(w);
        if l1 < self.max_rows {
            let rows: Vec<_> = (0..l1).map(Some).collect();
            w = g.gather_rows(w, &rows)?;
        }
        if l2 < self.max_cols {
            let cols: Vec<_> = (0..l2).map(Some).collect();
            let wt = g.transpose(w)?;
            let wt = g.gather_rows(wt, &cols)?;
            w = g.transpose(wt)?;
        }
        Ok(w)
    }
}
