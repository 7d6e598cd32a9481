//! Truncated Discrete Cosine Transform codec for temporal sequences of
//! scalar channels, with replicate-last-frame padding.
//!
//! The transform is materialized as an F x F orthonormal basis matrix,
//! cached per sequence length. Sequences are stored frames-major:
//! an `[F, channels]` array transforms to `[L, channels]` coefficients.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::autodiff::Array;
use crate::error::{Error, Result};

/// 1 iff i = j.
pub fn kronecker(i: usize, j: usize) -> u8 {
    u8::from(i == j)
}

/// Truncated DCT coefficients of a sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct DctCoeffs {
    /// `[L, channels]`, low frequencies first.
    pub coeffs: Array,
    /// Length of the sequence the coefficients describe.
    pub original_length: usize,
}

impl DctCoeffs {
    pub fn num_kept(&self) -> usize {
        self.coeffs.shape()[0]
    }
}

fn basis_cache() -> &'static Mutex<HashMap<usize, Arc<Array>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Array>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// The F x F orthonormal DCT basis. Row l (0-based) holds the l-th basis
/// vector sampled at frames p = 1..F:
/// `B[l][p] = sqrt(2/F) / sqrt(1 + kronecker(l, 0)) * cos(pi (2p+1) l / (2F))`.
pub fn basis_matrix(f: usize) -> Arc<Array> {
    debug_assert!(f >= 1);
    let mut cache = basis_cache().lock().unwrap();
    if let Some(b) = cache.get(&f) {
        return Arc::clone(b);
    }
    let scale = (2.0 / f as f64).sqrt();
    let mut data = Vec::with_capacity(f * f);
    for l in 0..f {
        let norm = 1.0 / (1.0 + f64::from(kronecker(l, 0))).sqrt();
        for p in 0..f {
            let angle = std::f64::consts::PI / (2.0 * f as f64) * ((2 * p + 1) * l) as f64;
            data.push(scale * norm * angle.cos());
        }
    }
    let arr = Arc::new(Array::from_vec(&[f, f], data).expect("basis shape"));
    cache.insert(f, Arc::clone(&arr));
    arr
}

/// First `l` rows of the basis, as an owned `[l, f]` array.
pub fn truncated_basis(f: usize, l: usize) -> Result<Array> {
    if l < 1 || l > f {
        return Err(Error::InvalidParameter(format!(
            "coefficient count {l} outside 1..={f}"
        )));
    }
    basis_matrix(f).slice(0, 0, l)
}

/// Forward transform of an `[F, channels]` sequence, keeping the first `l`
/// coefficients per channel.
pub fn dct_forward(sequence: &Array, l: usize) -> Result<DctCoeffs> {
    if sequence.rank() != 2 {
        return Err(Error::InvalidInput(format!(
            "dct_forward expects [frames, channels], got {:?}",
            sequence.shape()
        )));
    }
    let f = sequence.shape()[0];
    let basis = truncated_basis(f, l)?;
    Ok(DctCoeffs {
        coeffs: basis.matmul(sequence)?,
        original_length: f,
    })
}

/// Inverse transform back to an `[F, channels]` sequence.
pub fn idct(coeffs: &DctCoeffs, f: usize) -> Result<Array> {
    if f != coeffs.original_length {
        return Err(Error::InvalidInput(format!(
            "idct length {} does not match coefficients for length {}",
            f, coeffs.original_length
        )));
    }
    let basis = truncated_basis(f, coeffs.num_kept())?;
    basis.transpose()?.matmul(&coeffs.coeffs)
}

/// Extend a `[P, channels]` sequence to `[P+T, channels]` by repeating the
/// last frame `t` times.
pub fn pad_replicate_last(sequence: &Array, t: usize) -> Result<Array> {
    if sequence.rank() != 2 || sequence.shape()[0] < 1 {
        return Err(Error::InvalidInput(format!(
            "pad_replicate_last expects a non-empty [frames, channels] array, got {:?}",
            sequence.shape()
        )));
    }
    if t == 0 {
        return Ok(sequence.clone());
    }
    let p = sequence.shape()[0];
    let last = sequence.slice(0, p - 1, 1)?;
    let mut parts: Vec<&Array> = vec![sequence];
    let repeats: Vec<Array> = (0..t).map(|_| last.clone()).collect();
    parts.extend(repeats.iter());
    Array::concat(&parts, 0)
}

/// Replicate-pad a `[P, channels]` history by `t` frames, then keep the
/// first `l` DCT coefficients of the padded sequence.
pub fn encode_padded(sequence: &Array, t: usize, l: usize) -> Result<DctCoeffs> {
    dct_forward(&pad_replicate_last(sequence, t)?, l)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct summation of the transform definition, used as the oracle.
    fn dct_direct(seq: &[f64], l: usize) -> Vec<f64> {
        let f = seq.len();
        let mut out = Vec::with_capacity(l);
        for li in 1..=l {
            let mut h = 0.0;
            for (p, &c) in seq.iter().enumerate() {
                let p = p + 1;
                let norm = 1.0 / (1.0 + f64::from(kronecker(li, 1))).sqrt();
                h += c * norm
                    * (std::f64::consts::PI / (2.0 * f as f64) * ((2 * p - 1) * (li - 1)) as f64)
                        .cos();
            }
            out.push((2.0 / f as f64).sqrt() * h);
        }
        out
    }

    fn col(seq: &[f64]) -> Array {
        Array::from_vec(&[seq.len(), 1], seq.to_vec()).unwrap()
    }

    #[test]
    fn constant_sequence_concentrates_in_first_coefficient() {
        let c = dct_forward(&col(&[1.0, 1.0, 1.0, 1.0]), 4).unwrap();
        let got = c.coeffs.data();
        assert!((got[0] - 2.0).abs() < 1e-12, "h1 = {}", got[0]);
        for &h in &got[1..] {
            assert!(h.abs() < 1e-12);
        }
    }

    #[test]
    fn zero_sequence_gives_zero_coefficients() {
        let c = dct_forward(&col(&[0.0; 7]), 5).unwrap();
        assert!(c.coeffs.data().iter().all(|&h| h == 0.0));
    }

    #[test]
    fn matches_direct_summation_oracle() {
        let seq = [0.3, -1.2, 2.5, 0.0, 0.7, -0.4, 1.1, 0.9];
        let c = dct_forward(&col(&seq), 8).unwrap();
        let oracle = dct_direct(&seq, 8);
        for (a, b) in c.coeffs.data().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn lossless_roundtrip_at_full_length() {
        let seq = [0.5, 1.5, -2.0, 3.25, 0.0, -1.0];
        let c = dct_forward(&col(&seq), 6).unwrap();
        let back = idct(&c, 6).unwrap();
        for (a, b) in back.data().iter().zip(&seq) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn inverse_of_constant_coefficients() {
        let c = DctCoeffs {
            coeffs: Array::from_vec(&[4, 1], vec![2.0, 0.0, 0.0, 0.0]).unwrap(),
            original_length: 4,
        };
        let back = idct(&c, 4).unwrap();
        for &v in back.data() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_second_coefficient_is_sampled_cosine() {
        let c = DctCoeffs {
            coeffs: Array::from_vec(&[2, 1], vec![0.0, 1.0]).unwrap(),
            original_length: 4,
        };
        let back = idct(&c, 4).unwrap();
        let f = 4.0f64;
        for (p, &v) in back.data().iter().enumerate() {
            let expect = (2.0 / f).sqrt()
                * (std::f64::consts::PI / (2.0 * f) * (2.0 * (p as f64 + 1.0) - 1.0)).cos();
            assert!((v - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn kronecker_basics() {
        assert_eq!(kronecker(1, 1), 1);
        assert_eq!(kronecker(1, 2), 0);
        assert_eq!(kronecker(5, 5), 1);
    }

    #[test]
    fn pad_replicates_last_frame() {
        let s = Array::from_vec(&[2, 1], vec![10.0, 20.0]).unwrap();
        let padded = pad_replicate_last(&s, 2).unwrap();
        assert_eq!(padded.data(), &[10.0, 20.0, 20.0, 20.0]);
        let same = pad_replicate_last(&s, 0).unwrap();
        assert_eq!(same, s);
    }

    #[test]
    fn encode_padded_shapes_and_roundtrip() {
        let s = Array::from_vec(&[3, 2], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        // constant per-channel tail: only checking shape and losslessness
        let c = encode_padded(&s, 2, 5).unwrap();
        assert_eq!(c.coeffs.shape(), &[5, 2]);
        assert_eq!(c.original_length, 5);
        let back = idct(&c, 5).unwrap();
        let padded = pad_replicate_last(&s, 2).unwrap();
        assert!(back.max_abs_diff(&padded) < 1e-9);
    }

    #[test]
    fn encode_padded_constant_sequence_single_coefficient() {
        let s = Array::from_vec(&[4, 1], vec![3.0; 4]).unwrap();
        let c = encode_padded(&s, 4, 8).unwrap();
        assert!(c.coeffs.data()[1..].iter().all(|&h| h.abs() < 1e-12));
        let oracle = dct_direct(&[3.0; 8], 1);
        assert!((c.coeffs.data()[0] - oracle[0]).abs() < 1e-12);
    }

    #[test]
    fn l_out_of_range_rejected() {
        let s = col(&[1.0, 2.0, 3.0]);
        assert!(dct_forward(&s, 0).is_err());
        assert!(dct_forward(&s, 4).is_err());
    }

    #[test]
    fn basis_is_orthonormal() {
        for f in [1, 2, 5, 30, 90] {
            let b = basis_matrix(f);
            let prod = b.matmul(&b.transpose().unwrap()).unwrap();
            for i in 0..f {
                for j in 0..f {
                    let expect = f64::from(kronecker(i, j));
                    assert!(
                        (prod.at(&[i, j]) - expect).abs() < 1e-9,
                        "F={f} ({i},{j}) = {}",
                        prod.at(&[i, j])
                    );
                }
            }
        }
    }
}
