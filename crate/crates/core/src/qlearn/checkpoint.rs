//! Binary checkpoint container.
//!
//! All integers and floats are little-endian.
//!
//! | offset | size      | field                                   |
//! |--------|-----------|-----------------------------------------|
//! | 0      | 8         | magic `MOLFORGE`                        |
//! | 8      | 4 (u32)   | format version (1)                      |
//! | 12     | 4 (u32)   | number of layer dims `n`                |
//! | 16     | 4n (u32)  | layer dims, input first, heads last     |
//! |        | 4 (u32)   | heads                                   |
//! |        | 8 (u64)   | parameter count `P`                     |
//! |        | 8 (u64)   | Adam step counter                       |
//! |        | 8 (u64)   | FNV-1a 64 checksum of the payload bytes |
//! |        | 24P (f64) | payload: parameters, Adam m, Adam v     |
//!
//! Parameters are in network declaration order: per layer, the weight
//! matrix input-major (`[in][out]`) followed by the bias vector.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::network::param_count;
use super::{Adam, QError, ValueNetwork};

pub const MAGIC: &[u8; 8] = b"MOLFORGE";
pub const FORMAT_VERSION: u32 = 1;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325_u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn write_checkpoint(net: &ValueNetwork, adam: &Adam) -> Vec<u8> {
    let p = net.param_count();
    assert_eq!(adam.m.len(), p, "optimizer sized for a different network");
    let mut payload = Vec::with_capacity(24 * p);
    for x in net.params().iter().chain(&adam.m).chain(&adam.v) {
        payload.extend_from_slice(&x.to_le_bytes());
    }
    let mut out = Vec::with_capacity(64 + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(net.dims().len() as u32).to_le_bytes());
    for &d in net.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&(net.heads() as u32).to_le_bytes());
    out.extend_from_slice(&(p as u64).to_le_bytes());
    out.extend_from_slice(&adam.step.to_le_bytes());
    out.extend_from_slice(&fnv1a(&payload).to_le_bytes());
    out.extend_from_slice(&payload);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], QError> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| QError::CorruptCheckpoint(format!("truncated at byte {}", self.at)))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, QError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, QError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<(ValueNetwork, Adam), QError> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(8)? != MAGIC {
        return Err(QError::CorruptCheckpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(QError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let n = r.u32()? as usize;
    if !(2..=64).contains(&n) {
        return Err(QError::CorruptCheckpoint(format!("implausible layer count {n}")));
    }
    let dims = (0..n).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
    if dims.contains(&0) {
        return Err(QError::CorruptCheckpoint("zero-width layer".into()));
    }
    let heads = r.u32()? as usize;
    let p = r.u64()? as usize;
    if heads != dims[n - 1] || p != param_count(&dims) {
        return Err(QError::CorruptCheckpoint("header fields disagree".into()));
    }
    let step = r.u64()?;
    let checksum = r.u64()?;
    let payload = r.take(p.checked_mul(24).ok_or_else(|| QError::CorruptCheckpoint("size overflow".into()))?)?;
    if r.at != bytes.len() {
        return Err(QError::CorruptCheckpoint("trailing bytes".into()));
    }
    if fnv1a(payload) != checksum {
        return Err(QError::CorruptCheckpoint("checksum mismatch".into()));
    }
    let mut floats = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let params: Vec<f64> = floats.by_ref().take(p).collect();
    let mut adam = Adam::new(p, 1e-4);
    adam.m = floats.by_ref().take(p).collect();
    adam.v = floats.collect();
    adam.step = step;
    Ok((ValueNetwork::from_params(&dims, params)?, adam))
}

/// Writes via a temporary file and rename so readers never see a partial file.
pub fn save_checkpoint(net: &ValueNetwork, adam: &Adam, path: &Path) -> Result<(), QError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&write_checkpoint(net, adam))?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(ValueNetwork, Adam), QError> {
    read_checkpoint(&fs::read(path)?)
}
