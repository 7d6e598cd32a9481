//! Dense row-major n-dimensional array of f64, the value type carried by
//! every tape node and by plain (non-differentiated) numeric code.

use crate::error::{Error, Result};
use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct Array {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Array {
    pub fn zeros(shape: &[usize]) -> Array {
        Array {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn full(shape: &[usize], value: f64) -> Array {
        Array {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    /// Rank-0 array holding one value.
    pub fn scalar(value: f64) -> Array {
        Array {
            shape: vec![],
            data: vec![value],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Array> {
        let expect: usize = shape.iter().product();
        if data.len() != expect {
            return Err(Error::InvalidInput(format!(
                "array data length {} does not match shape {:?} (= {} elements)",
                data.len(),
                shape,
                expect
            )));
        }
        Ok(Array {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Uniform samples in [lo, hi).
    pub fn uniform<R: Rng>(shape: &[usize], lo: f64, hi: f64, rng: &mut R) -> Array {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(lo..hi)).collect();
        Array {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Value of a rank-anything single-element array.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1, "item() on non-singleton array");
        self.data[0]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.shape)
    }

    pub fn at(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let off = self.offset(index);
        self.data[off] = value;
    }

    fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut off = 0;
        for (d, (&i, &s)) in index.iter().zip(&self.shape).enumerate() {
            debug_assert!(i < s, "index {} out of bounds for dim {} (size {})", i, d, s);
            off = off * s + i;
        }
        off
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Array> {
        let expect: usize = shape.iter().product();
        if expect != self.data.len() {
            return Err(Error::shape("reshape", &self.shape, shape));
        }
        Ok(Array {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Array {
        Array {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Array, f: impl Fn(f64, f64) -> f64) -> Result<Array> {
        broadcast_binary(self, other, f)
    }

    pub fn add(&self, other: &Array) -> Result<Array> {
        broadcast_binary(self, other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Array) -> Result<Array> {
        broadcast_binary(self, other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Array) -> Result<Array> {
        broadcast_binary(self, other, |a, b| a * b)
    }

    pub fn scale(&self, factor: f64) -> Array {
        self.map(|v| v * factor)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.sum() / self.data.len() as f64
        }
    }

    /// 2-D matrix product.
    pub fn matmul(&self, other: &Array) -> Result<Array> {
        if self.rank() != 2 || other.rank() != 2 || self.shape[1] != other.shape[0] {
            return Err(Error::shape("matmul", &self.shape, &other.shape));
        }
        let (m, k) = (self.shape[0], self.shape[1]);
        let n = other.shape[1];
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &self.data[i * k..(i + 1) * k];
            let out_row = &mut out[i * n..(i + 1) * n];
            for (kk, &a) in row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[kk * n..(kk + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(Array {
            shape: vec![m, n],
            data: out,
        })
    }

    /// 2-D transpose.
    pub fn transpose(&self) -> Result<Array> {
        self.permute(&[1, 0])
    }

    /// Generalized axis permutation.
    pub fn permute(&self, perm: &[usize]) -> Result<Array> {
        if perm.len() != self.rank() {
            return Err(Error::shape("permute", &self.shape, perm));
        }
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            if p >= perm.len() || seen[p] {
                return Err(Error::InvalidParameter(format!(
                    "permute axes {:?} is not a permutation of 0..{}",
                    perm,
                    self.rank()
                )));
            }
            seen[p] = true;
        }
        let out_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let in_strides = self.strides();
        let mut out = Array::zeros(&out_shape);
        let out_strides = out.strides();
        // walk the output in order; compute the matching input offset
        let mut idx = vec![0usize; out_shape.len()];
        for o in 0..out.data.len() {
            let mut rem = o;
            let mut in_off = 0;
            for d in 0..out_shape.len() {
                idx[d] = rem / out_strides[d];
                rem %= out_strides[d];
                in_off += idx[d] * in_strides[perm[d]];
            }
            out.data[o] = self.data[in_off];
        }
        Ok(out)
    }

    /// Sum along one axis, removing it.
    pub fn sum_axis(&self, axis: usize) -> Result<Array> {
        if axis >= self.rank() {
            return Err(Error::InvalidParameter(format!(
                "sum axis {} out of range for shape {:?}",
                axis, self.shape
            )));
        }
        let mut out_shape = self.shape.clone();
        let axis_len = out_shape.remove(axis);
        let mut out = Array::zeros(&out_shape);
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        for o in 0..outer {
            for a in 0..axis_len {
                let base = (o * axis_len + a) * inner;
                let obase = o * inner;
                for i in 0..inner {
                    out.data[obase + i] += self.data[base + i];
                }
            }
        }
        Ok(out)
    }

    /// Extract `len` entries starting at `start` along `axis`.
    pub fn slice(&self, axis: usize, start: usize, len: usize) -> Result<Array> {
        if axis >= self.rank() || start + len > self.shape[axis] {
            return Err(Error::InvalidParameter(format!(
                "slice [{}, {}) on axis {} out of range for shape {:?}",
                start,
                start + len,
                axis,
                self.shape
            )));
        }
        let mut out_shape = self.shape.clone();
        out_shape[axis] = len;
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * self.shape[axis] + start) * inner;
            data.extend_from_slice(&self.data[base..base + len * inner]);
        }
        Ok(Array {
            shape: out_shape,
            data,
        })
    }

    /// Concatenate along an existing axis.
    pub fn concat(parts: &[&Array], axis: usize) -> Result<Array> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidInput("concat of zero arrays".into()))?;
        if axis >= first.rank() {
            return Err(Error::InvalidParameter(format!(
                "concat axis {} out of range for shape {:?}",
                axis,
                first.shape()
            )));
        }
        let mut axis_total = 0;
        for p in parts {
            if p.rank() != first.rank() {
                return Err(Error::shape("concat", first.shape(), p.shape()));
            }
            for d in 0..first.rank() {
                if d != axis && p.shape[d] != first.shape[d] {
                    return Err(Error::shape("concat", first.shape(), p.shape()));
                }
            }
            axis_total += p.shape[axis];
        }
        let mut out_shape = first.shape.clone();
        out_shape[axis] = axis_total;
        let outer: usize = first.shape[..axis].iter().product();
        let mut data = Vec::with_capacity(out_shape.iter().product());
        for o in 0..outer {
            for p in parts {
                let inner: usize = p.shape[axis..].iter().product();
                data.extend_from_slice(&p.data[o * inner..(o + 1) * inner]);
            }
        }
        Ok(Array {
            shape: out_shape,
            data,
        })
    }

    /// Sum-reduce a (possibly broadcast) array back to `target` shape.
    /// Inverse of broadcasting for gradient accumulation.
    pub fn reduce_to_shape(&self, target: &[usize]) -> Result<Array> {
        if self.shape == target {
            return Ok(self.clone());
        }
        let mut cur = self.clone();
        // collapse leading extra dims
        while cur.rank() > target.len() {
            cur = cur.sum_axis(0)?;
        }
        for d in 0..target.len() {
            if cur.shape[d] != target[d] {
                if target[d] != 1 {
                    return Err(Error::shape("reduce_to_shape", &self.shape, target));
                }
                let summed = cur.sum_axis(d)?;
                // re-insert the unit dim
                let mut s = summed.shape.clone();
                s.insert(d, 1);
                cur = summed.reshape(&s)?;
            }
        }
        Ok(cur)
    }

    pub fn max_abs_diff(&self, other: &Array) -> f64 {
        debug_assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for d in (0..shape.len().saturating_sub(1)).rev() {
        strides[d] = strides[d + 1] * shape[d + 1];
    }
    strides
}

/// NumPy-style broadcast of two shapes: align trailing dims, each pair must
/// be equal or contain a 1.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0usize; rank];
    for d in 0..rank {
        let da = if d < rank - a.len() { 1 } else { a[d - (rank - a.len())] };
        let db = if d < rank - b.len() { 1 } else { b[d - (rank - b.len())] };
        if da == db || da == 1 || db == 1 {
            out[d] = da.max(db);
        } else {
            return None;
        }
    }
    Some(out)
}

fn broadcast_binary(a: &Array, b: &Array, f: impl Fn(f64, f64) -> f64) -> Result<Array> {
    if a.shape == b.shape {
        // fast path
        let data = a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect();
        return Ok(Array {
            shape: a.shape.clone(),
            data,
        });
    }
    let out_shape = broadcast_shape(&a.shape, &b.shape)
        .ok_or_else(|| Error::shape("broadcast", &a.shape, &b.shape))?;
    let rank = out_shape.len();
    let stride_for = |arr: &Array| -> Vec<usize> {
        let own = arr.strides();
        let mut s = vec![0usize; rank];
        let off = rank - arr.rank();
        for d in 0..arr.rank() {
            s[off + d] = if arr.shape[d] == 1 { 0 } else { own[d] };
        }
        s
    };
    let sa = stride_for(a);
    let sb = stride_for(b);
    let mut out = Array::zeros(&out_shape);
    let out_strides = out.strides();
    for o in 0..out.data.len() {
        let mut rem = o;
        let mut oa = 0;
        let mut ob = 0;
        for d in 0..rank {
            let i = rem / out_strides[d];
            rem %= out_strides[d];
            oa += i * sa[d];
            ob += i * sb[d];
        }
        out.data[o] = f(a.data[oa], b.data[ob]);
    }
    Ok(out)
}
