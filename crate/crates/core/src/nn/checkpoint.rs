//! Versioned binary parameter container.
//!
//! Layout (little-endian): magic `DIDXCKPT`, format version `u32`, spec
//! hash `u64`, manifest length `u64` and UTF-8 JSON manifest, tensor count
//! `u32`, then per tensor: name length `u32`, name, dtype tag `u8`, rank
//! `u32`, dims as `u64`, payload.

use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"DIDXCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U32(Vec<u32>),
    U8(Vec<u8>),
}

impl TensorData {
    fn tag(&self) -> u8 {
        match self {
            TensorData::F32(_) => 0,
            TensorData::F64(_) => 1,
            TensorData::U32(_) => 2,
            TensorData::U8(_) => 3,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
            TensorData::U32(v) => v.len(),
            TensorData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn byte_len(&self) -> usize {
        match self {
            TensorData::F32(v) => 4 * v.len(),
            TensorData::F64(v) => 8 * v.len(),
            TensorData::U32(v) => 4 * v.len(),
            TensorData::U8(v) => v.len(),
        }
    }

    /// Widened copy of float or integer payloads.
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::F64(v) => v.clone(),
            TensorData::U32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::U8(v) => v.iter().map(|&x| x as f64).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: TensorData,
}

impl Tensor {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, data: TensorData) -> Self {
        Tensor { name: name.into(), dims, data }
    }

    /// Stores 64-bit values at 32-bit width.
    pub fn f32_from(name: impl Into<String>, dims: Vec<usize>, values: &[f64]) -> Self {
        Tensor::new(name, dims, TensorData::F32(values.iter().map(|&x| x as f32).collect()))
    }

    pub fn f64(name: impl Into<String>, dims: Vec<usize>, values: Vec<f64>) -> Self {
        Tensor::new(name, dims, TensorData::F64(values))
    }

    pub fn u32_from(name: impl Into<String>, values: &[usize]) -> Self {
        Tensor::new(name, vec![values.len()], TensorData::U32(values.iter().map(|&x| x as u32).collect()))
    }

    pub fn usize_values(&self) -> Result<Vec<usize>> {
        match &self.data {
            TensorData::U32(v) => Ok(v.iter().map(|&x| x as usize).collect()),
            _ => Err(Error::Checkpoint(format!("tensor {} is not u32", self.name))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub spec_hash: u64,
    pub manifest: serde_json::Value,
    pub tensors: Vec<Tensor>,
}

/// First eight bytes of SHA-256, little-endian.
pub fn hash64(bytes: &[u8]) -> u64 {
    let d = Sha256::digest(bytes);
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

impl Checkpoint {
    pub fn new(manifest: serde_json::Value, tensors: Vec<Tensor>) -> Self {
        let spec_hash = hash64(manifest.to_string().as_bytes());
        Checkpoint { spec_hash, manifest, tensors }
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))
    }

    pub fn payload_bytes(&self) -> usize {
        self.tensors.iter().map(|t| t.data.byte_len()).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.payload_bytes() + 256);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.spec_hash.to_le_bytes());
        let manifest = self.manifest.to_string();
        out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
        out.extend_from_slice(manifest.as_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.push(t.data.tag());
            out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
            for &d in &t.dims {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            match &t.data {
                TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
                TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
                TensorData::U32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
                TensorData::U8(v) => out.extend_from_slice(v),
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let spec_hash = r.u64()?;
        let mlen = r.u64()? as usize;
        let raw = r.take(mlen)?;
        if hash64(raw) != spec_hash {
            return Err(Error::Checkpoint("manifest does not match spec hash".into()));
        }
        let manifest: serde_json::Value = serde_json::from_slice(raw)?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let nlen = r.u32()? as usize;
            let name = String::from_utf8(r.take(nlen)?.to_vec())
                .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
            let tag = r.take(1)?[0];
            let rank = r.u32()? as usize;
            let dims = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let len: usize = dims.iter().product();
            let data = match tag {
                0 => TensorData::F32(r.take(4 * len)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()),
                1 => TensorData::F64(r.take(8 * len)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()),
                2 => TensorData::U32(r.take(4 * len)?.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect()),
                3 => TensorData::U8(r.take(len)?.to_vec()),
                t => return Err(Error::Checkpoint(format!("unknown dtype tag {t} for {name}"))),
            };
            tensors.push(Tensor { name, dims, data });
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Checkpoint { spec_hash, manifest, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Checkpoint::from_bytes(&buf)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Checkpoint("truncated checkpoint".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_corruption() {
        let ck = Checkpoint::new(
            serde_json::json!({"model": "x", "n": 3}),
            vec![
                Tensor::f32_from("embedding", vec![3, 2], &[0.5, 1.0, -1.0, 2.0, 3.0, 4.0]),
                Tensor::f64("bias", vec![1], vec![0.25]),
                Tensor::u32_from("ids", &[4, 5]),
                Tensor::new("bins", vec![2], TensorData::U8(vec![1, 255])),
            ],
        );
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.get("ids").unwrap().usize_values().unwrap(), vec![4, 5]);
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
        assert_eq!(ck.payload_bytes(), 6 * 4 + 8 + 2 * 4 + 2);
    }
}
