//! Single-file container of named `f32` arrays.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       8     magic  b"PLKCKPT\0"
//! 8       4     format version (u32) = 1
//! 12      8     header length H in bytes (u64)
//! 20      H     header, UTF-8 JSON:
//!                 { "meta": <any JSON>,
//!                   "data_sha256": "<hex of the data section>",
//!                   "tensors": [ { "name": str, "shape": [u64..],
//!                                  "offset": u64, "len": u64 }, .. ] }
//! 20+H    ...   data section: every tensor's elements as IEEE-754 f32,
//!               row-major, at byte `offset` relative to the data section
//! ```
//!
//! Tensors are written back to back in header order; `len` is the element
//! count and equals the product of `shape`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PLKCKPT\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub meta: serde_json::Value,
    pub tensors: Vec<NamedArray>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: serde_json::Value,
    data_sha256: String,
    tensors: Vec<Entry>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
    len: u64,
}

impl Checkpoint {
    pub fn new(meta: serde_json::Value) -> Self {
        Self {
            meta,
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, shape: &[usize], data: Vec<f32>) -> Result<()> {
        let name = name.into();
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::Checkpoint(format!(
                "{name}: shape {shape:?} does not hold {} elements",
                data.len()
            )));
        }
        if self.get(&name).is_some() {
            return Err(Error::Checkpoint(format!("duplicate tensor {name}")));
        }
        self.tensors.push(NamedArray {
            name,
            shape: shape.to_vec(),
            data,
        });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&NamedArray> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut data = Vec::new();
        let mut entries = Vec::with_capacity(self.tensors.len());
        for t in &self.tensors {
            entries.push(Entry {
                name: t.name.clone(),
                shape: t.shape.clone(),
                offset: data.len() as u64,
                len: t.data.len() as u64,
            });
            for v in &t.data {
                data.extend_from_slice(&v.to_le_bytes());
            }
        }
        let header = serde_json::to_vec(&Header {
            meta: self.meta.clone(),
            data_sha256: hex::encode(Sha256::digest(&data)),
            tensors: entries,
        })?;
        let mut out = Vec::with_capacity(20 + header.len() + data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&data);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad("missing magic"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let data_start = 20usize
            .checked_add(hlen)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(&bytes[20..data_start])?;
        let data = &bytes[data_start..];
        let digest = hex::encode(Sha256::digest(data));
        if digest != header.data_sha256 {
            return Err(Error::Checksum {
                what: "checkpoint data".into(),
                expected: header.data_sha256,
                found: digest,
            });
        }
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for e in header.tensors {
            let start = e.offset as usize;
            let end = start + 4 * e.len as usize;
            if end > data.len() || e.shape.iter().product::<usize>() as u64 != e.len {
                return Err(Error::Checkpoint(format!("bad extent for {}", e.name)));
            }
            let values = data[start..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.push(NamedArray {
                name: e.name,
                shape: e.shape,
                data: values,
            });
        }
        Ok(Self {
            meta: header.meta,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut c = Checkpoint::new(serde_json::json!({"variant": "vae"}));
        c.push("enc.0.weight", &[2, 3], vec![1.0, -2.5, 3.0, f32::MIN_POSITIVE, 0.0, -0.0])
            .unwrap();
        c.push("enc.0.bias", &[2], vec![0.5, 0.25]).unwrap();
        c
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = sample();
        let back = Checkpoint::from_bytes(&c.to_bytes().unwrap()).unwrap();
        assert_eq!(back.meta, c.meta);
        for (a, b) in c.tensors.iter().zip(&back.tensors) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.shape, b.shape);
            let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.data), bits(&b.data));
        }
    }

    #[test]
    fn layout_prefix_is_pinned() {
        let bytes = sample().to_bytes().unwrap();
        assert_eq!(&bytes[..8], b"PLKCKPT\0");
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        // 8 + 2 floats after the header
        assert_eq!(bytes.len(), 20 + hlen + 4 * 8);
        let first = f32::from_le_bytes(bytes[20 + hlen..24 + hlen].try_into().unwrap());
        assert_eq!(first, 1.0);
    }

    #[test]
    fn corruption_is_detected() {
        let mut bytes = sample().to_bytes().unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0x40;
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Checksum { .. })));
        assert!(Checkpoint::from_bytes(b"nonsense").is_err());
    }

    #[test]
    fn shape_and_duplicate_checks() {
        let mut c = sample();
        assert!(c.push("x", &[3], vec![1.0]).is_err());
        assert!(c.push("enc.0.bias", &[1], vec![1.0]).is_err());
    }
}
