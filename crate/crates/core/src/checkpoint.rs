//! Binary parameter container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      4 bytes  "MSJE"
//! version    u32      currently 1
//! n_meta     u32
//!   key_len u32, key utf-8, val_len u32, val utf-8      (n_meta times)
//! n_tensors  u32
//!   name_len u32, name utf-8, rows u64, cols u64,
//!   rows*cols f64 values, row-major                     (n_tensors times)
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{Params, Tensor2};

pub const MAGIC: &[u8; 4] = b"MSJE";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub meta: BTreeMap<String, String>,
    pub tensors: BTreeMap<String, Tensor2>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor2) {
        self.tensors.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor2> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.meta.insert(key.into(), value.into());
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Checkpoint(format!("missing metadata `{key}`")))
    }

    /// Inserts every tensor of `params` as `prefix.name` (just `name` when
    /// the prefix is empty).
    pub fn store<P: Params>(&mut self, prefix: &str, params: &P) {
        for (name, t) in params.tensors() {
            self.insert(qualified(prefix, &name), t.clone());
        }
    }

    /// Copies tensors `prefix.*` into `params`, which must already have the
    /// right shapes.
    pub fn restore<P: Params>(&self, prefix: &str, params: &mut P) -> Result<()> {
        for (name, t) in params.tensors_mut() {
            let key = qualified(prefix, &name);
            let src = self.get(&key)?;
            if src.shape() != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{key}` has shape {:?}, expected {:?}",
                    src.shape(),
                    t.shape()
                )));
            }
            t.data_mut().copy_from_slice(src.data());
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.meta.len() as u32).to_le_bytes());
        for (k, v) in &self.meta {
            write_str(&mut out, k);
            write_str(&mut out, v);
        }
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            write_str(&mut out, name);
            out.extend_from_slice(&(t.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(t.cols() as u64).to_le_bytes());
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic bytes".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let mut ck = Checkpoint::new();
        for _ in 0..r.u32()? {
            let k = r.string()?;
            let v = r.string()?;
            ck.meta.insert(k, v);
        }
        for _ in 0..r.u32()? {
            let name = r.string()?;
            let rows = r.u64()? as usize;
            let cols = r.u64()? as usize;
            let n = rows
                .checked_mul(cols)
                .ok_or_else(|| Error::Checkpoint(format!("tensor `{name}` too large")))?;
            let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("overflow".into()))?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            ck.tensors.insert(name, Tensor2::from_vec(rows, cols, data)?);
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// SHA-256 of the serialized form, hex, first 16 characters.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_bytes());
        hex::encode(&digest[..8])
    }
}

fn qualified(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

fn write_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Checkpoint("unexpected end of data".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|e| Error::Checkpoint(format!("invalid utf-8 name: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{seeded_rng, Linear};

    #[test]
    fn header_layout_is_stable() {
        let mut ck = Checkpoint::new();
        ck.insert("a", Tensor2::from_vec(1, 2, vec![1.0, -2.0]).unwrap());
        let bytes = ck.to_bytes();
        assert_eq!(&bytes[..4], b"MSJE");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        // no metadata, one tensor named "a"
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 0);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 1);
        assert_eq!(bytes.len(), 16 + 4 + 1 + 16 + 16);
        assert_eq!(f64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap()), -2.0);
    }

    #[test]
    fn params_round_trip() {
        let mut rng = seeded_rng(9);
        let layer = Linear::new(3, 2, &mut rng);
        let mut ck = Checkpoint::new();
        ck.store("rec.fusion", &layer);
        ck.set_meta("joint_dim", "2");
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(back, ck);
        let mut restored = Linear::zeros(3, 2);
        back.restore("rec.fusion", &mut restored).unwrap();
        assert_eq!(restored, layer);
        assert_eq!(back.fingerprint(), ck.fingerprint());
    }

    #[test]
    fn corrupt_input_is_rejected() {
        assert!(Checkpoint::from_bytes(b"NOPE\x01\0\0\0").is_err());
        let mut bytes = Checkpoint::new().to_bytes();
        bytes.push(0);
        assert!(Checkpoint::from_bytes(&bytes).is_err());
        let mut ck = Checkpoint::new();
        ck.insert("x", Tensor2::zeros(2, 2));
        let bytes = ck.to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn restore_checks_shapes() {
        let mut ck = Checkpoint::new();
        ck.store("l", &Linear::zeros(3, 2));
        let mut wrong = Linear::zeros(2, 2);
        assert!(ck.restore("l", &mut wrong).is_err());
        assert!(ck.restore("missing", &mut Linear::zeros(3, 2)).is_err());
    }
}
