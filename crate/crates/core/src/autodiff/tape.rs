//! Reverse-mode automatic differentiation over dense arrays.
//!
//! A [`Tape`] records every operation during a forward pass; calling
//! [`Tensor::backward`] on a scalar result sweeps the recorded nodes in
//! reverse, accumulating adjoints. Tapes are rebuilt per forward pass, so
//! recurrent nets unroll naturally.

use std::cell::RefCell;
use std::rc::Rc;

use super::array::Array;
use crate::error::{Error, Result};

#[derive(Clone)]
pub struct Tape {
    inner: Rc<RefCell<TapeInner>>,
}

struct TapeInner {
    nodes: Vec<Node>,
}

struct Node {
    value: Array,
    op: Op,
    requires_grad: bool,
    grad: Option<Array>,
}

enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Matmul(usize, usize),
    Concat { inputs: Vec<usize>, axis: usize },
    Slice { input: usize, axis: usize, start: usize, len: usize },
    Reshape(usize),
    Permute { input: usize, perm: Vec<usize> },
    Sum { input: usize, axis: Option<usize> },
    Mean { input: usize, axis: Option<usize> },
    Exp(usize),
    Tanh(usize),
    Sigmoid(usize),
    Square(usize),
    Sqrt(usize),
    Sin(usize),
    Cos(usize),
    Neg(usize),
    Scale { input: usize, factor: f64 },
    GatherRows { input: usize, indices: Rc<Vec<usize>> },
    ScatterMean { input: usize, voxel_of_point: Rc<Vec<usize>>, counts: Rc<Vec<f64>> },
    Conv3d { grid: usize, weight: usize, resolution: usize },
}

impl Op {
    fn parents(&self) -> Vec<usize> {
        match self {
            Op::Leaf => vec![],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) | Op::Matmul(a, b) => {
                vec![*a, *b]
            }
            Op::Concat { inputs, .. } => inputs.clone(),
            Op::Slice { input, .. }
            | Op::Reshape(input)
            | Op::Permute { input, .. }
            | Op::Sum { input, .. }
            | Op::Mean { input, .. }
            | Op::Exp(input)
            | Op::Tanh(input)
            | Op::Sigmoid(input)
            | Op::Square(input)
            | Op::Sqrt(input)
            | Op::Sin(input)
            | Op::Cos(input)
            | Op::Neg(input)
            | Op::Scale { input, .. }
            | Op::GatherRows { input, .. }
            | Op::ScatterMean { input, .. } => vec![*input],
            Op::Conv3d { grid, weight, .. } => vec![*grid, *weight],
        }
    }
}

/// Handle to one tape node.
#[derive(Clone)]
pub struct Tensor {
    tape: Tape,
    id: usize,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Tape {
        Tape {
            inner: Rc::new(RefCell::new(TapeInner { nodes: Vec::new() })),
        }
    }

    /// Constant input: no gradient is tracked through it.
    pub fn constant(&self, value: Array) -> Tensor {
        self.push(value, Op::Leaf, false)
    }

    /// Differentiable leaf.
    pub fn var(&self, value: Array) -> Tensor {
        self.push(value, Op::Leaf, true)
    }

    pub fn num_nodes(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    fn push(&self, value: Array, op: Op, requires_grad: bool) -> Tensor {
        let mut inner = self.inner.borrow_mut();
        let id = inner.nodes.len();
        inner.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Tensor {
            tape: self.clone(),
            id,
        }
    }

    fn push_from(&self, value: Array, op: Op) -> Tensor {
        let requires_grad = {
            let inner = self.inner.borrow();
            op.parents().iter().any(|&p| inner.nodes[p].requires_grad)
        };
        self.push(value, op, requires_grad)
    }

    fn same_tape(&self, other: &Tape) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }
}

impl Tensor {
    pub fn value(&self) -> Array {
        self.tape.inner.borrow().nodes[self.id].value.clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.inner.borrow().nodes[self.id].value.shape().to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.inner.borrow().nodes[self.id].requires_grad
    }

    /// Gradient accumulated by the latest `backward`; zeros if the node was
    /// never reached.
    pub fn grad(&self) -> Array {
        let inner = self.tape.inner.borrow();
        let node = &inner.nodes[self.id];
        node.grad
            .clone()
            .unwrap_or_else(|| Array::zeros(node.value.shape()))
    }

    fn with_value<T>(&self, f: impl FnOnce(&Array) -> T) -> T {
        f(&self.tape.inner.borrow().nodes[self.id].value)
    }

    fn binary(&self, other: &Tensor, op_name: &'static str) -> Result<()> {
        if !self.tape.same_tape(&other.tape) {
            return Err(Error::InvalidInput(format!(
                "{op_name}: operands recorded on different tapes"
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "add")?;
        let v = self.with_value(|a| other.with_value(|b| a.add(b)))?;
        Ok(self.tape.push_from(v, Op::Add(self.id, other.id)))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "sub")?;
        let v = self.with_value(|a| other.with_value(|b| a.sub(b)))?;
        Ok(self.tape.push_from(v, Op::Sub(self.id, other.id)))
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "mul")?;
        let v = self.with_value(|a| other.with_value(|b| a.mul(b)))?;
        Ok(self.tape.push_from(v, Op::Mul(self.id, other.id)))
    }

    pub fn div(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "div")?;
        let v = self.with_value(|a| other.with_value(|b| a.zip_map(b, |x, y| x / y)))?;
        Ok(self.tape.push_from(v, Op::Div(self.id, other.id)))
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "matmul")?;
        let v = self.with_value(|a| other.with_value(|b| a.matmul(b)))?;
        Ok(self.tape.push_from(v, Op::Matmul(self.id, other.id)))
    }

    pub fn concat(parts: &[&Tensor], axis: usize) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidInput("concat of zero tensors".into()))?;
        for p in parts {
            first.binary(p, "concat")?;
        }
        let values: Vec<Array> = parts.iter().map(|p| p.value()).collect();
        let refs: Vec<&Array> = values.iter().collect();
        let v = Array::concat(&refs, axis)?;
        let ids = parts.iter().map(|p| p.id).collect();
        Ok(first.tape.push_from(v, Op::Concat { inputs: ids, axis }))
    }

    pub fn slice(&self, axis: usize, start: usize, len: usize) -> Result<Tensor> {
        let v = self.with_value(|a| a.slice(axis, start, len))?;
        Ok(self.tape.push_from(
            v,
            Op::Slice {
                input: self.id,
                axis,
                start,
                len,
            },
        ))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        let v = self.with_value(|a| a.reshape(shape))?;
        Ok(self.tape.push_from(v, Op::Reshape(self.id)))
    }

    pub fn permute(&self, perm: &[usize]) -> Result<Tensor> {
        let v = self.with_value(|a| a.permute(perm))?;
        Ok(self.tape.push_from(
            v,
            Op::Permute {
                input: self.id,
                perm: perm.to_vec(),
            },
        ))
    }

    pub fn transpose(&self) -> Result<Tensor> {
        self.permute(&[1, 0])
    }

    pub fn sum_all(&self) -> Tensor {
        let v = Array::scalar(self.with_value(|a| a.sum()));
        self.tape.push_from(
            v,
            Op::Sum {
                input: self.id,
                axis: None,
            },
        )
    }

    pub fn sum_axis(&self, axis: usize) -> Result<Tensor> {
        let v = self.with_value(|a| a.sum_axis(axis))?;
        Ok(self.tape.push_from(
            v,
            Op::Sum {
                input: self.id,
                axis: Some(axis),
            },
        ))
    }

    pub fn mean_all(&self) -> Tensor {
        let v = Array::scalar(self.with_value(|a| a.mean()));
        self.tape.push_from(
            v,
            Op::Mean {
                input: self.id,
                axis: None,
            },
        )
    }

    pub fn mean_axis(&self, axis: usize) -> Result<Tensor> {
        let (v, _n) = self.with_value(|a| {
            let n = a.shape()[axis.min(a.rank().saturating_sub(1))] as f64;
            (a.sum_axis(axis).map(|s| s.scale(1.0 / n)), n)
        });
        Ok(self.tape.push_from(
            v?,
            Op::Mean {
                input: self.id,
                axis: Some(axis),
            },
        ))
    }

    pub fn exp(&self) -> Tensor {
        let v = self.with_value(|a| a.map(f64::exp));
        self.tape.push_from(v, Op::Exp(self.id))
    }

    pub fn tanh(&self) -> Tensor {
        let v = self.with_value(|a| a.map(f64::tanh));
        self.tape.push_from(v, Op::Tanh(self.id))
    }

    pub fn sigmoid(&self) -> Tensor {
        let v = self.with_value(|a| a.map(|x| 1.0 / (1.0 + (-x).exp())));
        self.tape.push_from(v, Op::Sigmoid(self.id))
    }

    pub fn square(&self) -> Tensor {
        let v = self.with_value(|a| a.map(|x| x * x));
        self.tape.push_from(v, Op::Square(self.id))
    }

    pub fn sqrt(&self) -> Tensor {
        let v = self.with_value(|a| a.map(f64::sqrt));
        self.tape.push_from(v, Op::Sqrt(self.id))
    }

    pub fn sin(&self) -> Tensor {
        let v = self.with_value(|a| a.map(f64::sin));
        self.tape.push_from(v, Op::Sin(self.id))
    }

    pub fn cos(&self) -> Tensor {
        let v = self.with_value(|a| a.map(f64::cos));
        self.tape.push_from(v, Op::Cos(self.id))
    }

    pub fn neg(&self) -> Tensor {
        let v = self.with_value(|a| a.scale(-1.0));
        self.tape.push_from(v, Op::Neg(self.id))
    }

    pub fn scale(&self, factor: f64) -> Tensor {
        let v = self.with_value(|a| a.scale(factor));
        self.tape.push_from(
            v,
            Op::Scale {
                input: self.id,
                factor,
            },
        )
    }

    /// Select rows of a 2-D tensor (with repetition allowed).
    pub fn gather_rows(&self, indices: &[usize]) -> Result<Tensor> {
        let v = self.with_value(|a| {
            if a.rank() != 2 {
                return Err(Error::InvalidInput(format!(
                    "gather_rows expects a 2-D tensor, got shape {:?}",
                    a.shape()
                )));
            }
            let cols = a.shape()[1];
            let rows = a.shape()[0];
            let mut data = Vec::with_capacity(indices.len() * cols);
            for &i in indices {
                if i >= rows {
                    return Err(Error::InvalidParameter(format!(
                        "gather_rows index {} out of range (rows = {})",
                        i, rows
                    )));
                }
                data.extend_from_slice(&a.data()[i * cols..(i + 1) * cols]);
            }
            Array::from_vec(&[indices.len(), cols], data)
        })?;
        Ok(self.tape.push_from(
            v,
            Op::GatherRows {
                input: self.id,
                indices: Rc::new(indices.to_vec()),
            },
        ))
    }

    /// Average rows of an (N, C) tensor into `num_voxels` buckets given a
    /// per-row bucket assignment. Empty buckets stay zero.
    pub fn scatter_mean(&self, voxel_of_point: &[usize], num_voxels: usize) -> Result<Tensor> {
        let v = self.with_value(|a| {
            if a.rank() != 2 || a.shape()[0] != voxel_of_point.len() {
                return Err(Error::InvalidInput(format!(
                    "scatter_mean: tensor shape {:?} does not match {} assignments",
                    a.shape(),
                    voxel_of_point.len()
                )));
            }
            let cols = a.shape()[1];
            let mut counts = vec![0.0f64; num_voxels];
            for &vx in voxel_of_point {
                if vx >= num_voxels {
                    return Err(Error::InvalidParameter(format!(
                        "scatter_mean voxel index {} out of range ({})",
                        vx, num_voxels
                    )));
                }
                counts[vx] += 1.0;
            }
            let mut out = Array::zeros(&[num_voxels, cols]);
            for (p, &vx) in voxel_of_point.iter().enumerate() {
                let src = &a.data()[p * cols..(p + 1) * cols];
                let dst = &mut out.data_mut()[vx * cols..(vx + 1) * cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
            for vx in 0..num_voxels {
                if counts[vx] > 0.0 {
                    let inv = 1.0 / counts[vx];
                    for d in &mut out.data_mut()[vx * cols..(vx + 1) * cols] {
                        *d *= inv;
                    }
                }
            }
            Ok((out, counts))
        });
        let (out, counts) = v?;
        Ok(self.tape.push_from(
            out,
            Op::ScatterMean {
                input: self.id,
                voxel_of_point: Rc::new(voxel_of_point.to_vec()),
                counts: Rc::new(counts),

            },
        ))
    }

    /// Dense 3-D convolution over an `R^3 x C_in` voxel grid (rows ordered
    /// x-major, then y, then z), kernel 3x3x3, stride 1, zero padding.
    /// `weight` is `(27 * C_in) x C_out`, kernel-offset-major.
    pub fn conv3d(&self, weight: &Tensor, resolution: usize) -> Result<Tensor> {
        self.binary(weight, "conv3d")?;
        let v = self.with_value(|grid| {
            weight.with_value(|w| conv3d_forward(grid, w, resolution))
        })?;
        Ok(self.tape.push_from(
            v,
            Op::Conv3d {
                grid: self.id,
                weight: weight.id,
                resolution,
            },
        ))
    }

    /// Reverse sweep from this (single-element) tensor, accumulating adjoints
    /// into every node that requires a gradient.
    pub fn backward(&self) -> Result<()> {
        let mut inner = self.tape.inner.borrow_mut();
        if inner.nodes[self.id].value.len() != 1 {
            return Err(Error::InvalidInput(format!(
                "backward requires a scalar, got shape {:?}",
                inner.nodes[self.id].value.shape()
            )));
        }
        for node in &mut inner.nodes {
            node.grad = None;
        }
        let seed_shape = inner.nodes[self.id].value.shape().to_vec();
        inner.nodes[self.id].grad = Some(Array::full(&seed_shape, 1.0));

        for id in (0..=self.id).rev() {
            let grad = match inner.nodes[id].grad.clone() {
                Some(g) => g,
                None => continue,
            };
            if !inner.nodes[id].requires_grad {
                continue;
            }
            inner.propagate(id, &grad)?;
        }
        Ok(())
    }
}

impl TapeInner {
    fn accumulate(&mut self, id: usize, delta: Array) -> Result<()> {
        if !self.nodes[id].requires_grad {
            return Ok(());
        }
        let delta = delta.reduce_to_shape(self.nodes[id].value.shape())?;
        match &mut self.nodes[id].grad {
            Some(g) => *g = g.add(&delta)?,
            slot @ None => *slot = Some(delta),
        }
        Ok(())
    }

    fn propagate(&mut self, id: usize, grad: &Array) -> Result<()> {
        // ops read parent/self values before mutating grads
        enum Deltas {
            Two(usize, Array, usize, Array),
            One(usize, Array),
            Many(Vec<(usize, Array)>),
            None,
        }
        let deltas = match &self.nodes[id].op {
            Op::Leaf => Deltas::None,
            Op::Add(a, b) => Deltas::Two(*a, grad.clone(), *b, grad.clone()),
            Op::Sub(a, b) => Deltas::Two(*a, grad.clone(), *b, grad.scale(-1.0)),
            Op::Mul(a, b) => {
                let va = &self.nodes[*a].value;
                let vb = &self.nodes[*b].value;
                Deltas::Two(*a, grad.mul(vb)?, *b, grad.mul(va)?)
            }
            Op::Div(a, b) => {
                let va = &self.nodes[*a].value;
                let vb = &self.nodes[*b].value;
                let da = grad.zip_map(vb, |g, y| g / y)?;
                // d(a/b)/db = -a / b^2
                let db = grad.mul(va)?.zip_map(vb, |g, y| -g / (y * y))?;
                Deltas::Two(*a, da, *b, db)
            }
            Op::Matmul(a, b) => {
                let va = &self.nodes[*a].value;
                let vb = &self.nodes[*b].value;
                let da = grad.matmul(&vb.transpose()?)?;
                let db = va.transpose()?.matmul(grad)?;
                Deltas::Two(*a, da, *b, db)
            }
            Op::Concat { inputs, axis } => {
                let axis = *axis;
                let mut out = Vec::with_capacity(inputs.len());
                let mut start = 0;
                for &i in inputs {
                    let len = self.nodes[i].value.shape()[axis];
                    out.push((i, grad.slice(axis, start, len)?));
                    start += len;
                }
                Deltas::Many(out)
            }
            Op::Slice {
                input,
                axis,
                start,
                len,
            } => {
                let in_shape = self.nodes[*input].value.shape().to_vec();
                let mut acc = Array::zeros(&in_shape);
                let outer: usize = in_shape[..*axis].iter().product();
                let inner_len: usize = in_shape[*axis + 1..].iter().product();
                let axis_len = in_shape[*axis];
                for o in 0..outer {
                    let src = &grad.data()[o * *len * inner_len..(o + 1) * *len * inner_len];
                    let dst_base = (o * axis_len + *start) * inner_len;
                    acc.data_mut()[dst_base..dst_base + *len * inner_len].copy_from_slice(src);
                }
                Deltas::One(*input, acc)
            }
            Op::Reshape(input) => {
                let in_shape = self.nodes[*input].value.shape().to_vec();
                Deltas::One(*input, grad.reshape(&in_shape)?)
            }
            Op::Permute { input, perm } => {
                let mut inverse = vec![0usize; perm.len()];
                for (d, &p) in perm.iter().enumerate() {
                    inverse[p] = d;
                }
                Deltas::One(*input, grad.permute(&inverse)?)
            }
            Op::Sum { input, axis } => {
                let in_shape = self.nodes[*input].value.shape().to_vec();
                let d = match axis {
                    None => Array::full(&in_shape, grad.item()),
                    Some(ax) => expand_along_axis(grad, &in_shape, *ax, 1.0),
                };
                Deltas::One(*input, d)
            }
            Op::Mean { input, axis } => {
                let in_shape = self.nodes[*input].value.shape().to_vec();
                let d = match axis {
                    None => {
                        let n: usize = in_shape.iter().product();
                        Array::full(&in_shape, grad.item() / n as f64)
                    }
                    Some(ax) => {
                        let n = in_shape[*ax] as f64;
                        expand_along_axis(grad, &in_shape, *ax, 1.0 / n)
                    }
                };
                Deltas::One(*input, d)
            }
            Op::Exp(input) => {
                let out = &self.nodes[id].value;
                Deltas::One(*input, grad.mul(out)?)
            }
            Op::Tanh(input) => {
                let out = &self.nodes[id].value;
                Deltas::One(*input, grad.zip_map(out, |g, y| g * (1.0 - y * y))?)
            }
            Op::Sigmoid(input) => {
                let out = &self.nodes[id].value;
                Deltas::One(*input, grad.zip_map(out, |g, y| g * y * (1.0 - y))?)
            }
            Op::Square(input) => {
                let vin = &self.nodes[*input].value;
                Deltas::One(*input, grad.zip_map(vin, |g, x| g * 2.0 * x)?)
            }
            Op::Sqrt(input) => {
                let out = &self.nodes[id].value;
                Deltas::One(*input, grad.zip_map(out, |g, y| g / (2.0 * y))?)
            }
            Op::Sin(input) => {
                let vin = &self.nodes[*input].value;
                Deltas::One(*input, grad.zip_map(vin, |g, x| g * x.cos())?)
            }
            Op::Cos(input) => {
                let vin = &self.nodes[*input].value;
                Deltas::One(*input, grad.zip_map(vin, |g, x| -g * x.sin())?)
            }
            Op::Neg(input) => Deltas::One(*input, grad.scale(-1.0)),
            Op::Scale { input, factor } => Deltas::One(*input, grad.scale(*factor)),
            Op::GatherRows { input, indices } => {
                let in_shape = self.nodes[*input].value.shape().to_vec();
                let cols = in_shape[1];
                let mut acc = Array::zeros(&in_shape);
                for (m, &i) in indices.iter().enumerate() {
                    let src = &grad.data()[m * cols..(m + 1) * cols];
                    let dst = &mut acc.data_mut()[i * cols..(i + 1) * cols];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += s;
                    }
                }
                Deltas::One(*input, acc)
            }
            Op::ScatterMean {
                input,
                voxel_of_point,
                counts,
                ..
            } => {
                let in_shape = self.nodes[*input].value.shape().to_vec();
                let cols = in_shape[1];
                let mut acc = Array::zeros(&in_shape);
                for (p, &vx) in voxel_of_point.iter().enumerate() {
                    let inv = 1.0 / counts[vx];
                    let src = &grad.data()[vx * cols..(vx + 1) * cols];
                    let dst = &mut acc.data_mut()[p * cols..(p + 1) * cols];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += s * inv;
                    }
                }
                Deltas::One(*input, acc)
            }
            Op::Conv3d {
                grid,
                weight,
                resolution,
            } => {
                let vg = &self.nodes[*grid].value;
                let vw = &self.nodes[*weight].value;
                let (dg, dw) = conv3d_backward(vg, vw, grad, *resolution)?;
                Deltas::Two(*grid, dg, *weight, dw)
            }
        };
        match deltas {
            Deltas::None => {}
            Deltas::One(i, d) => self.accumulate(i, d)?,
            Deltas::Two(a, da, b, db) => {
                self.accumulate(a, da)?;
                self.accumulate(b, db)?;
            }
            Deltas::Many(list) => {
                for (i, d) in list {
                    self.accumulate(i, d)?;
                }
            }
        }
        Ok(())
    }
}

/// Spread a reduced gradient back along `axis` of `in_shape`, scaling each
/// copy by `factor`.
fn expand_along_axis(grad: &Array, in_shape: &[usize], axis: usize, factor: f64) -> Array {
    let mut out = Array::zeros(in_shape);
    let axis_len = in_shape[axis];
    let outer: usize = in_shape[..axis].iter().product();
    let inner: usize = in_shape[axis + 1..].iter().product();
    for o in 0..outer {
        for a in 0..axis_len {
            let dst_base = (o * axis_len + a) * inner;
            let src_base = o * inner;
            for i in 0..inner {
                out.data_mut()[dst_base + i] = grad.data()[src_base + i] * factor;
            }
        }
    }
    out
}

fn voxel_coords(v: usize, r: usize) -> (usize, usize, usize) {
    (v / (r * r), (v / r) % r, v % r)
}

fn conv3d_check(grid: &Array, weight: &Array, r: usize) -> Result<(usize, usize, usize)> {
    let v = r * r * r;
    if grid.rank() != 2 || grid.shape()[0] != v {
        return Err(Error::InvalidInput(format!(
            "conv3d: grid shape {:?} does not match resolution {} (expected {} rows)",
            grid.shape(),
            r,
            v
        )));
    }
    let c_in = grid.shape()[1];
    if weight.rank() != 2 || weight.shape()[0] != 27 * c_in {
        return Err(Error::shape("conv3d", grid.shape(), weight.shape()));
    }
    Ok((v, c_in, weight.shape()[1]))
}

fn conv3d_forward(grid: &Array, weight: &Array, r: usize) -> Result<Array> {
    let (v, c_in, c_out) = conv3d_check(grid, weight, r)?;
    let mut out = Array::zeros(&[v, c_out]);
    let gd = grid.data();
    let wd = weight.data();
    for k in 0..27usize {
        let (dx, dy, dz) = (
            k as isize / 9 - 1,
            (k as isize / 3) % 3 - 1,
            k as isize % 3 - 1,
        );
        let wbase = k * c_in * c_out;
        for vx in 0..v {
            let (x, y, z) = voxel_coords(vx, r);
            let (nx, ny, nz) = (x as isize + dx, y as isize + dy, z as isize + dz);
            if nx < 0 || ny < 0 || nz < 0 {
                continue;
            }
            let (nx, ny, nz) = (nx as usize, ny as usize, nz as usize);
            if nx >= r || ny >= r || nz >= r {
                continue;
            }
            let nb = (nx * r + ny) * r + nz;
            let row = &gd[nb * c_in..(nb + 1) * c_in];
            let out_row = &mut out.data_mut()[vx * c_out..(vx + 1) * c_out];
            for (ci, &a) in row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let wrow = &wd[wbase + ci * c_out..wbase + (ci + 1) * c_out];
                for (o, &w) in out_row.iter_mut().zip(wrow) {
                    *o += a * w;
                }
            }
        }
    }
    Ok(out)
}

fn conv3d_backward(grid: &Array, weight: &Array, grad: &Array, r: usize) -> Result<(Array, Array)> {
    let (v, c_in, c_out) = conv3d_check(grid, weight, r)?;
    let mut dgrid = Array::zeros(&[v, c_in]);
    let mut dweight = Array::zeros(&[27 * c_in, c_out]);
    let gd = grid.data();
    let wd = weight.data();
    let od = grad.data();
    for k in 0..27usize {
        let (dx, dy, dz) = (
            k as isize / 9 - 1,
            (k as isize / 3) % 3 - 1,
            k as isize % 3 - 1,
        );
        let wbase = k * c_in * c_out;
        for vx in 0..v {
            let (x, y, z) = voxel_coords(vx, r);
            let (nx, ny, nz) = (x as isize + dx, y as isize + dy, z as isize + dz);
            if nx < 0 || ny < 0 || nz < 0 {
                continue;
            }
            let (nx, ny, nz) = (nx as usize, ny as usize, nz as usize);
            if nx >= r || ny >= r || nz >= r {
                continue;
            }
            let nb = (nx * r + ny) * r + nz;
            let grow = &gd[nb * c_in..(nb + 1) * c_in];
            let orow = &od[vx * c_out..(vx + 1) * c_out];
            // dW_k[ci] += grid[nb][ci] * grad_out[vx]
            // dgrid[nb][ci] += dot(W_k[ci], grad_out[vx])
            for ci in 0..c_in {
                let a = grow[ci];
                let wrow = &wd[wbase + ci * c_out..wbase + (ci + 1) * c_out];
                let dwrow = &mut dweight.data_mut()[wbase + ci * c_out..wbase + (ci + 1) * c_out];
                let mut acc = 0.0;
                for co in 0..c_out {
                    dwrow[co] += a * orow[co];
                    acc += wrow[co] * orow[co];
                }
                dgrid.data_mut()[nb * c_in + ci] += acc;
            }
        }
    }
    Ok((dgrid, dweight))
}
