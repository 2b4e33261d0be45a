//! Binary checkpoint container: an ordered set of named blocks (f64 arrays
//! with dims, u64 arrays, raw bytes) with a checksum trailer. Floats are
//! stored as little-endian bit patterns, so a round trip is bit-exact and a
//! resumed run can continue from identical state.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"EMCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    F64 { dims: Vec<usize>, data: Vec<f64> },
    U64(Vec<u64>),
    Bytes(Vec<u8>),
}

#[derive(Debug, Default)]
pub struct Checkpoint {
    order: Vec<String>,
    blocks: HashMap<String, Block>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

impl Checkpoint {
    pub fn new() -> Checkpoint {
        Checkpoint::default()
    }

    fn insert(&mut self, name: &str, block: Block) -> Result<()> {
        if self.blocks.contains_key(name) {
            return Err(Error::Checkpoint(format!("duplicate block `{name}`")));
        }
        self.order.push(name.to_string());
        self.blocks.insert(name.to_string(), block);
        Ok(())
    }

    pub fn put_f64(&mut self, name: &str, dims: &[usize], data: Vec<f64>) -> Result<()> {
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::Checkpoint(format!(
                "`{name}`: dims {:?} do not match {} values",
                dims,
                data.len()
            )));
        }
        self.insert(name, Block::F64 { dims: dims.to_vec(), data })
    }

    pub fn put_tensor(&mut self, name: &str, t: &Tensor) -> Result<()> {
        self.put_f64(name, t.shape(), t.data().to_vec())
    }

    pub fn put_scalar(&mut self, name: &str, v: f64) -> Result<()> {
        self.put_f64(name, &[1], vec![v])
    }

    pub fn put_u64(&mut self, name: &str, data: Vec<u64>) -> Result<()> {
        self.insert(name, Block::U64(data))
    }

    pub fn put_bytes(&mut self, name: &str, data: Vec<u8>) -> Result<()> {
        self.insert(name, Block::Bytes(data))
    }

    fn get(&self, name: &str) -> Result<&Block> {
        self.blocks
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing block `{name}`")))
    }

    pub fn f64s(&self, name: &str) -> Result<(&[usize], &[f64])> {
        match self.get(name)? {
            Block::F64 { dims, data } => Ok((dims, data)),
            _ => Err(Error::Checkpoint(format!("`{name}` is not an f64 block"))),
        }
    }

    pub fn tensor(&self, name: &str) -> Result<Tensor> {
        let (dims, data) = self.f64s(name)?;
        Tensor::from_vec(dims, data.to_vec())
    }

    pub fn scalar(&self, name: &str) -> Result<f64> {
        let (_, data) = self.f64s(name)?;
        if data.len() != 1 {
            return Err(Error::Checkpoint(format!("`{name}` is not a scalar")));
        }
        Ok(data[0])
    }

    pub fn u64s(&self, name: &str) -> Result<&[u64]> {
        match self.get(name)? {
            Block::U64(data) => Ok(data),
            _ => Err(Error::Checkpoint(format!("`{name}` is not a u64 block"))),
        }
    }

    pub fn bytes(&self, name: &str) -> Result<&[u8]> {
        match self.get(name)? {
            Block::Bytes(data) => Ok(data),
            _ => Err(Error::Checkpoint(format!("`{name}` is not a bytes block"))),
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.blocks.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(|s| s.as_str())
    }

    pub fn to_vec(&self) -> Vec<u8> {
        let mut body = Vec::new();
        body.extend_from_slice(&(self.order.len() as u64).to_le_bytes());
        for name in &self.order {
            let block = &self.blocks[name];
            body.extend_from_slice(&(name.len() as u32).to_le_bytes());
            body.extend_from_slice(name.as_bytes());
            match block {
                Block::F64 { dims, data } => {
                    body.push(0);
                    body.push(dims.len() as u8);
                    for &d in dims {
                        body.extend_from_slice(&(d as u64).to_le_bytes());
                    }
                    for &v in data {
                        body.extend_from_slice(&v.to_le_bytes());
                    }
                }
                Block::U64(data) => {
                    body.push(1);
                    body.push(1);
                    body.extend_from_slice(&(data.len() as u64).to_le_bytes());
                    for &v in data {
                        body.extend_from_slice(&v.to_le_bytes());
                    }
                }
                Block::Bytes(data) => {
                    body.push(2);
                    body.push(1);
                    body.extend_from_slice(&(data.len() as u64).to_le_bytes());
                    body.extend_from_slice(data);
                }
            }
        }
        let mut out = Vec::with_capacity(body.len() + 16);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&body);
        out.extend_from_slice(&fnv1a(&body).to_le_bytes());
        out
    }

    pub fn from_slice(raw: &[u8]) -> Result<Checkpoint> {
        if raw.len() < 20 {
            return Err(Error::Checkpoint("file too short".to_string()));
        }
        if &raw[0..4] != MAGIC {
            return Err(Error::Checkpoint("bad magic bytes".to_string()));
        }
        let version = u32::from_le_bytes(raw[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let body = &raw[8..raw.len() - 8];
        let stored = u64::from_le_bytes(raw[raw.len() - 8..].try_into().unwrap());
        if fnv1a(body) != stored {
            return Err(Error::Checkpoint("checksum mismatch".to_string()));
        }
        let mut cur = Cursor { buf: body, pos: 0 };
        let count = cur.u64()? as usize;
        let mut ck = Checkpoint::new();
        for _ in 0..count {
            let name_len = cur.u32()? as usize;
            let name = String::from_utf8(cur.take(name_len)?.to_vec())
                .map_err(|_| Error::Checkpoint("block name is not utf-8".to_string()))?;
            let dtype = cur.u8()?;
            let ndim = cur.u8()? as usize;
            let mut dims = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                dims.push(cur.u64()? as usize);
            }
            let n: usize = dims.iter().product();
            let block = match dtype {
                0 => {
                    let payload = cur.take(n * 8)?;
                    let data = payload
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                        .collect();
                    Block::F64 { dims, data }
                }
                1 => {
                    let payload = cur.take(n * 8)?;
                    Block::U64(
                        payload
                            .chunks_exact(8)
                            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                            .collect(),
                    )
                }
                2 => Block::Bytes(cur.take(n)?.to_vec()),
                other => {
                    return Err(Error::Checkpoint(format!(
                        "`{name}`: unknown block type {other}"
                    )))
                }
            };
            ck.insert(&name, block)?;
        }
        if cur.pos != body.len() {
            return Err(Error::Checkpoint("trailing bytes after last block".to_string()));
        }
        Ok(ck)
    }

    /// Writes via a temp file in the same directory, then renames, so an
    /// interrupted save never leaves a half-written checkpoint behind.
    pub fn save(&self, path: &Path) -> Result<()> {
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        let tmp = dir.join(format!(
            ".{}.tmp",
            path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
        ));
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(&self.to_vec())?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let raw = std::fs::read(path)?;
        Checkpoint::from_slice(&raw)
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint("unexpected end of file".to_string()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
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

    fn sample() -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.put_f64("weights", &[2, 3], vec![0.1, -0.0, 1e-300, f64::MAX, 5e-324, -7.25])
            .unwrap();
        ck.put_scalar("step", 42.0).unwrap();
        ck.put_u64("counters", vec![0, u64::MAX, 7]).unwrap();
        ck.put_bytes("blob", vec![0, 255, 128, 1]).unwrap();
        ck
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample();
        let back = Checkpoint::from_slice(&ck.to_vec()).unwrap();
        let (dims, data) = back.f64s("weights").unwrap();
        assert_eq!(dims, &[2, 3]);
        let (_, orig) = ck.f64s("weights").unwrap();
        for (a, b) in orig.iter().zip(data) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.scalar("step").unwrap(), 42.0);
        assert_eq!(back.u64s("counters").unwrap(), &[0, u64::MAX, 7]);
        assert_eq!(back.bytes("blob").unwrap(), &[0, 255, 128, 1]);
        assert_eq!(back.names().collect::<Vec<_>>(), vec!["weights", "step", "counters", "blob"]);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.bin");
        sample().save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.u64s("counters").unwrap(), &[0, u64::MAX, 7]);
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let mut ck = Checkpoint::new();
        ck.put_scalar("x", 1.0).unwrap();
        assert!(ck.put_scalar("x", 2.0).is_err());
    }

    #[test]
    fn missing_block_error_names_it() {
        let err = sample().scalar("nope").unwrap_err();
        assert!(err.to_string().contains("nope"), "{err}");
    }

    #[test]
    fn corruption_is_detected() {
        let mut raw = sample().to_vec();
        let mid = raw.len() / 2;
        raw[mid] ^= 0x40;
        assert!(Checkpoint::from_slice(&raw).is_err());
    }

    #[test]
    fn truncation_is_detected() {
        let raw = sample().to_vec();
        assert!(Checkpoint::from_slice(&raw[..raw.len() - 3]).is_err());
        assert!(Checkpoint::from_slice(&raw[..10]).is_err());
    }

    #[test]
    fn foreign_headers_are_rejected() {
        let mut raw = sample().to_vec();
        raw[0] = b'X';
        assert!(Checkpoint::from_slice(&raw).is_err());
        let mut raw2 = sample().to_vec();
        raw2[4] = 9; // version
        assert!(Checkpoint::from_slice(&raw2).is_err());
    }

    #[test]
    fn dim_mismatch_is_rejected() {
        let mut ck = Checkpoint::new();
        assert!(ck.put_f64("w", &[2, 2], vec![1.0, 2.0, 3.0]).is_err());
    }
}
