//! Gated recurrent unit over tape tensors. Parameters live in a named store
//! under a caller-chosen prefix, so several GRUs can share one checkpoint.

use rand::Rng;

use crate::autodiff::{glorot_uniform, Array, BoundParams, Params, Tape, Tensor};
use crate::error::Result;

#[derive(Clone, Copy, Debug)]
pub struct GruSpec {
    pub input: usize,
    pub hidden: usize,
}

impl GruSpec {
    /// Insert freshly initialized gate parameters under `prefix`.
    pub fn init<R: Rng>(&self, params: &mut Params, prefix: &str, rng: &mut R) {
        let cat = self.input + self.hidden;
        for gate in ["z", "r", "n"] {
            params.insert(
                format!("{prefix}.w{gate}"),
                glorot_uniform(cat, self.hidden, rng),
            );
            params.insert(format!("{prefix}.b{gate}"), Array::zeros(&[1, self.hidden]));
        }
    }

    /// One step: update/reset gates from [x, h], candidate from [x, r*h],
    /// new hidden = (1-z)*n + z*h.
    pub fn cell(
        &self,
        bound: &BoundParams,
        prefix: &str,
        x: &Tensor,
        h: &Tensor,
    ) -> Result<Tensor> {
        let cat = Tensor::concat(&[x, h], 1)?;
        let z = cat
            .matmul(bound.get(&format!("{prefix}.wz")))?
            .add(bound.get(&format!("{prefix}.bz")))?
            .sigmoid();
        let r = cat
            .matmul(bound.get(&format!("{prefix}.wr")))?
            .add(bound.get(&format!("{prefix}.br")))?
            .sigmoid();
        let gated = r.mul(h)?;
        let cat_n = Tensor::concat(&[x, &gated], 1)?;
        let n = cat_n
            .matmul(bound.get(&format!("{prefix}.wn")))?
            .add(bound.get(&format!("{prefix}.bn")))?
            .tanh();
        // (1-z)*n + z*h rewritten as n + z*(h-n)
        n.add(&z.mul(&h.sub(&n)?)?)
    }

    /// Left-to-right scan over the rows of `sequence` (`[P, input]`,
    /// usually a constant), starting from a zero hidden state. Returns the
    /// final hidden state `[1, hidden]`.
    pub fn scan(
        &self,
        tape: &Tape,
        bound: &BoundParams,
        prefix: &str,
        sequence: &Tensor,
    ) -> Result<Tensor> {
        let frames = sequence.shape()[0];
        let mut h = tape.constant(Array::zeros(&[1, self.hidden]));
        for f in 0..frames {
            let x = sequence.slice(0, f, 1)?;
            h = self.cell(bound, prefix, &x, &h)?;
        }
        Ok(h)
    }
}
