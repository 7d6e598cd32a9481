//! Fully connected stack with tanh between layers and a linear final layer.

use rand::Rng;

use crate::autodiff::{glorot_uniform, Array, BoundParams, Params, Tensor};
use crate::error::Result;

#[derive(Clone, Debug)]
pub struct MlpSpec {
    /// Consecutive layer widths, e.g. [in, h, h, out].
    pub widths: Vec<usize>,
}

impl MlpSpec {
    /// `depth` weight layers of width `hidden` between `input` and `output`.
    pub fn with_depth(input: usize, hidden: usize, output: usize, depth: usize) -> MlpSpec {
        assert!(depth >= 1);
        let mut widths = Vec::with_capacity(depth + 1);
        widths.push(input);
        for _ in 0..depth - 1 {
            widths.push(hidden);
        }
        widths.push(output);
        MlpSpec { widths }
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn init<R: Rng>(&self, params: &mut Params, prefix: &str, rng: &mut R) {
        for l in 0..self.num_layers() {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            params.insert(
                format!("{prefix}.l{l}.w"),
                glorot_uniform(fan_in, fan_out, rng),
            );
            params.insert(format!("{prefix}.l{l}.b"), Array::zeros(&[1, fan_out]));
        }
    }

    pub fn forward(&self, bound: &BoundParams, prefix: &str, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for l in 0..self.num_layers() {
            h = h
                .matmul(bound.get(&format!("{prefix}.l{l}.w")))?
                .add(bound.get(&format!("{prefix}.l{l}.b")))?;
            if l + 1 < self.num_layers() {
                h = h.tanh();
            }
        }
        Ok(h)
    }
}
