//! Named parameter store and its binary checkpoint format.
//!
//! Checkpoint layout: magic `CAMF`, format version (u32 LE), tensor count
//! (u32 LE), then per tensor: name (u16 LE length + UTF-8 bytes), rank (u8),
//! dims (u32 LE each), row-major f64 LE payload. Entries are written in
//! name order, so identical stores serialize to identical bytes.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::array::Array;
use super::tape::{Tape, Tensor};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CAMF";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params {
    entries: BTreeMap<String, Array>,
}

impl Params {
    pub fn new() -> Params {
        Params::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array) {
        self.entries.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> &Array {
        self.entries
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name:?}"))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Array {
        self.entries
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {name:?}"))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Array)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    /// Total scalar count across all parameters.
    pub fn num_scalars(&self) -> usize {
        self.entries.values().map(Array::len).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, arr) in &self.entries {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(arr.rank() as u8);
            for &d in arr.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in arr.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Params> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(4)?;
        if magic != MAGIC {
            return Err(Error::parse("offset 0", "bad magic, expected CAMF"));
        }
        let version = cur.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::parse(
                "offset 4",
                format!("unsupported checkpoint version {version}"),
            ));
        }
        let count = cur.u32()?;
        let mut params = Params::new();
        for _ in 0..count {
            let name_len = cur.u16()? as usize;
            let name_bytes = cur.take(name_len)?;
            let name = std::str::from_utf8(name_bytes)
                .map_err(|_| Error::parse(format!("offset {}", cur.pos), "non-UTF-8 name"))?
                .to_string();
            let rank = cur.u8()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(cur.u32()? as usize);
            }
            let n: usize = shape.iter().product();
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                data.push(f64::from_le_bytes(cur.take(8)?.try_into().unwrap()));
            }
            params.insert(name, Array::from_vec(&shape, data)?);
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Params> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Params::from_bytes(&bytes).map_err(|e| match e {
            Error::Parse { location, message } => Error::Parse {
                location: format!("{}: {}", path.display(), location),
                message,
            },
            other => other,
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::parse(
                format!("offset {}", self.pos),
                "unexpected end of data",
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// All parameters of a store bound onto one tape as differentiable leaves.
pub struct BoundParams {
    tensors: BTreeMap<String, Tensor>,
}

impl BoundParams {
    pub fn bind(tape: &Tape, params: &Params) -> BoundParams {
        let tensors = params
            .iter()
            .map(|(name, arr)| (name.to_string(), tape.var(arr.clone())))
            .collect();
        BoundParams { tensors }
    }

    /// Bind as constants: same forward math, no gradient bookkeeping.
    pub fn bind_const(tape: &Tape, params: &Params) -> BoundParams {
        let tensors = params
            .iter()
            .map(|(name, arr)| (name.to_string(), tape.constant(arr.clone())))
            .collect();
        BoundParams { tensors }
    }

    pub fn get(&self, name: &str) -> &Tensor {
        self.tensors
            .get(name)
            .unwrap_or_else(|| panic!("unknown bound parameter {name:?}"))
    }

    /// Gradients by name after a backward pass.
    pub fn grads(&self) -> BTreeMap<String, Array> {
        self.tensors
            .iter()
            .map(|(name, t)| (name.clone(), t.grad()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_roundtrip_bit_exact() {
        let mut p = Params::new();
        p.insert("b.weight", Array::from_vec(&[2, 2], vec![1.5, -2.25, 0.0, 3.5]).unwrap());
        p.insert("a.bias", Array::from_vec(&[3], vec![0.1, 0.2, 0.3]).unwrap());
        p.insert("scalar", Array::scalar(42.0));
        let bytes = p.to_bytes();
        let q = Params::from_bytes(&bytes).unwrap();
        assert_eq!(p, q);
        assert_eq!(bytes, q.to_bytes());
    }

    #[test]
    fn truncated_checkpoint_is_error() {
        let mut p = Params::new();
        p.insert("w", Array::from_vec(&[4], vec![1., 2., 3., 4.]).unwrap());
        let bytes = p.to_bytes();
        for cut in [0, 3, 7, 11, bytes.len() - 1] {
            assert!(Params::from_bytes(&bytes[..cut]).is_err());
        }
    }

    #[test]
    fn bad_magic_rejected() {
        assert!(Params::from_bytes(b"XXXX\x01\x00\x00\x00\x00\x00\x00\x00").is_err());
    }
}
