//! Continuous 6-D rotation representation: two 3-vectors mapped to a proper
//! rotation matrix by Gram-Schmidt.

use crate::autodiff::{Array, Tape, Tensor};
use crate::error::{Error, Result};

const DEGENERATE_NORM: f64 = 1e-12;

/// Gram-Schmidt: a1 = normalize(r[0:3]), a2 = normalize(r[3:6] - (a1.r[3:6]) a1),
/// a3 = a1 x a2. Returns the matrix with columns (a1, a2, a3).
pub fn rot6d_to_matrix(r: &[f64; 6]) -> Result<[[f64; 3]; 3]> {
    let a = [r[0], r[1], r[2]];
    let b = [r[3], r[4], r[5]];
    let na = norm(&a);
    if na < DEGENERATE_NORM {
        return Err(Error::DegenerateRotation(format!(
            "first column has near-zero norm {na}"
        )));
    }
    let a1 = [a[0] / na, a[1] / na, a[2] / na];
    let dot = a1[0] * b[0] + a1[1] * b[1] + a1[2] * b[2];
    let b2 = [b[0] - dot * a1[0], b[1] - dot * a1[1], b[2] - dot * a1[2]];
    let nb = norm(&b2);
    if nb < DEGENERATE_NORM {
        return Err(Error::DegenerateRotation(format!(
            "columns are parallel (residual norm {nb})"
        )));
    }
    let a2 = [b2[0] / nb, b2[1] / nb, b2[2] / nb];
    let a3 = cross(&a1, &a2);
    Ok([
        [a1[0], a2[0], a3[0]],
        [a1[1], a2[1], a3[1]],
        [a1[2], a2[2], a3[2]],
    ])
}

fn norm(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Tape version, returning the TRANSPOSE (rows a1, a2, a3) since posed
/// vertices are computed as row-vectors times the transposed rotation.
/// A denormal-level guard under the square roots keeps zero inputs from
/// producing NaN gradients without measurably changing finite results.
pub fn rot6d_transposed_tape(tape: &Tape, r: &Tensor) -> Result<Tensor> {
    if r.shape() != [1, 6] {
        return Err(Error::InvalidInput(format!(
            "rot6d expects a [1, 6] tensor, got {:?}",
            r.shape()
        )));
    }
    let tiny = tape.constant(Array::scalar(1e-300));
    let a = r.slice(1, 0, 3)?;
    let b = r.slice(1, 3, 3)?;
    let na = a.square().sum_all().add(&tiny)?.sqrt();
    let a1 = a.div(&na)?;
    let dot = a1.mul(&b)?.sum_all();
    let b2 = b.sub(&a1.mul(&dot)?)?;
    let nb = b2.square().sum_all().add(&tiny)?.sqrt();
    let a2 = b2.div(&nb)?;
    let a3 = cross_tape(&a1, &a2)?;
    Tensor::concat(&[&a1, &a2, &a3], 0)
}

fn component(v: &Tensor, i: usize) -> Result<Tensor> {
    v.slice(1, i, 1)
}

fn cross_tape(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (ax, ay, az) = (component(a, 0)?, component(a, 1)?, component(a, 2)?);
    let (bx, by, bz) = (component(b, 0)?, component(b, 1)?, component(b, 2)?);
    let cx = ay.mul(&bz)?.sub(&az.mul(&by)?)?;
    let cy = az.mul(&bx)?.sub(&ax.mul(&bz)?)?;
    let cz = ax.mul(&by)?.sub(&ay.mul(&bx)?)?;
    Tensor::concat(&[&cx, &cy, &cz], 1)
}
