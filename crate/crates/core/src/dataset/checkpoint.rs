//! Binary checkpoint format.
//!
//! ```text
//! "VFCK"                      magic
//! u32  version                (currently 1)
//! u64  total file length in bytes
//! u32  metadata entry count
//!      u32 key length, key bytes (UTF-8), u32 value length, value bytes
//! u32  tensor count
//!      u32 name length, name bytes (UTF-8)
//!      u32 rank, rank × u64 extents
//!      product(extents) × f32
//! ```
//! All integers and scalars are little-endian.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::atomic::write_atomic;
use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"VFCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<u64>,
    pub data: Vec<f32>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub metadata: BTreeMap<String, String>,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.insert(key.into(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.metadata.get(key).map(String::as_str)
    }

    /// Parse a metadata value, reporting the key when absent or malformed.
    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get(key).ok_or_else(|| Error::Format {
            offset: 0,
            message: format!("checkpoint lacks metadata key `{key}`"),
        })?;
        raw.parse().map_err(|_| Error::Format {
            offset: 0,
            message: format!("checkpoint metadata `{key}` has malformed value `{raw}`"),
        })
    }

    pub fn push(&mut self, name: impl Into<String>, shape: &[usize], data: Vec<f32>) {
        self.tensors.push(NamedTensor {
            name: name.into(),
            shape: shape.iter().map(|&d| d as u64).collect(),
            data,
        });
    }

    pub fn tensor(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Append every tensor of `store` under its own name.
    pub fn push_store<S: Scalar>(&mut self, store: &ParamStore<S>) {
        for (_, name, t) in store.iter() {
            self.push(name, t.shape(), t.data().iter().map(|v| v.to_f64c() as f32).collect());
        }
    }

    /// Overwrite every tensor of `store` from the entry with the same name.
    pub fn restore_store<S: Scalar>(&self, store: &mut ParamStore<S>) -> Result<()> {
        let index: BTreeMap<&str, &NamedTensor> =
            self.tensors.iter().map(|t| (t.name.as_str(), t)).collect();
        for (_, name, t) in store.iter_mut() {
            let saved = index.get(name).ok_or_else(|| Error::Format {
                offset: 0,
                message: format!("checkpoint lacks tensor `{name}`"),
            })?;
            let shape: Vec<usize> = saved.shape.iter().map(|&d| d as usize).collect();
            if shape != t.shape() {
                return Err(Error::dim(format!(
                    "tensor `{name}`: checkpoint shape {shape:?} vs model shape {:?}",
                    t.shape()
                )));
            }
            for (dst, &src) in t.data_mut().iter_mut().zip(&saved.data) {
                *dst = S::of(src as f64);
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&0u64.to_le_bytes());
        out.extend_from_slice(&(self.metadata.len() as u32).to_le_bytes());
        for (k, v) in &self.metadata {
            put_str(&mut out, k);
            put_str(&mut out, v);
        }
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            put_str(&mut out, &t.name);
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for d in &t.shape {
                out.extend_from_slice(&d.to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let total = out.len() as u64;
        out[8..16].copy_from_slice(&total.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::Format {
                offset: 0,
                message: format!("bad magic {magic:?}"),
            });
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let total = r.u64()?;
        if total != bytes.len() as u64 {
            return Err(Error::Format {
                offset: bytes.len().min(total as usize) as u64,
                message: format!("file is {} bytes but header declares {total}", bytes.len()),
            });
        }
        let mut ck = Checkpoint::new();
        for _ in 0..r.u32()? {
            let k = r.string()?;
            let v = r.string()?;
            ck.metadata.insert(k, v);
        }
        for _ in 0..r.u32()? {
            let name = r.string()?;
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank.min(16));
            for _ in 0..rank {
                shape.push(r.u64()?);
            }
            let numel = shape
                .iter()
                .try_fold(1u64, |acc, &d| acc.checked_mul(d))
                .filter(|&n| n <= (bytes.len() as u64) / 4)
                .ok_or_else(|| r.error(format!("tensor `{name}` extents {shape:?} exceed the file")))?;
            let raw = r.take(numel as usize * 4)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            ck.tensors.push(NamedTensor { name, shape, data });
        }
        if r.pos != bytes.len() {
            return Err(r.error(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(ck)
    }

    /// Write through a temporary file and rename into place.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn error(&self, message: String) -> Error {
        Error::Format {
            offset: self.pos as u64,
            message,
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.error(format!(
                "truncated: need {n} bytes, {} remain",
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let start = self.pos;
        let b = self.take(n)?;
        String::from_utf8(b.to_vec()).map_err(|_| Error::Format {
            offset: start as u64,
            message: "invalid UTF-8 in name".into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut c = Checkpoint::new();
        c.set("iteration", 42);
        c.set("train.lr", 0.0002);
        c.push("w", &[2, 3], vec![1.0, -2.5, 3.25, f32::MIN_POSITIVE, 0.0, -0.0]);
        c.push("s", &[], vec![7.0]);
        c
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        let back = Checkpoint::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.tensors[0].data[5].to_bits(), (-0.0f32).to_bits());
    }

    #[test]
    fn truncation_reports_an_offset() {
        let bytes = sample().to_bytes();
        for cut in [3, 10, 20, bytes.len() - 1] {
            match Checkpoint::from_bytes(&bytes[..cut]) {
                Err(Error::Format { .. }) => {}
                other => panic!("cut {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn version_and_magic_are_checked() {
        let mut bytes = sample().to_bytes();
        bytes[4] = 9;
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(Error::Version { found: 9, .. })
        ));
        let mut bytes = sample().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/model.vfck");
        sample().save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), sample());
        assert!(!dir.path().join("nested/model.vfck.tmp").exists());
    }
}
