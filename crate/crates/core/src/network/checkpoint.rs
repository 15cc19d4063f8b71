//! Binary parameter checkpoints.
//!
//! Every integer is a little-endian `u32` unless noted:
//!
//! ```text
//! magic        8 bytes   b"SOSNETCK"
//! version      u32       currently 1
//! in_channels  u32
//! height       u32
//! width        u32
//! n_blocks     u32
//! channels     u32 x n_blocks
//! embed_dim    u32
//! head         u8        0 = classifier (2 logits), 1 = regressor (1 output)
//! n_groups     u32
//! per group:   ndim u32, then ndim x u32 dimensions
//! values       f64 LE, every group in layout order
//! ```
//!
//! Group order and shapes are those of [`ArchConfig::layout`]; a file whose
//! shapes disagree with the layout implied by its header is rejected.

use std::path::Path;

use super::{ArchConfig, HeadKind, NetParams};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SOSNETCK";
pub const VERSION: u32 = 1;

fn put_u32(buf: &mut Vec<u8>, v: usize) {
    buf.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode(params: &NetParams) -> Vec<u8> {
    let arch = params.arch();
    let mut buf = Vec::with_capacity(64 + params.len() * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    put_u32(&mut buf, arch.in_channels);
    put_u32(&mut buf, arch.height);
    put_u32(&mut buf, arch.width);
    put_u32(&mut buf, arch.conv_channels.len());
    for &c in &arch.conv_channels {
        put_u32(&mut buf, c);
    }
    put_u32(&mut buf, arch.embed_dim);
    buf.push(match arch.head {
        HeadKind::Classifier => 0,
        HeadKind::Regressor => 1,
    });
    put_u32(&mut buf, params.groups().len());
    for g in params.groups() {
        put_u32(&mut buf, g.shape.len());
        for &d in &g.shape {
            put_u32(&mut buf, d);
        }
    }
    for v in params.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(format!("truncated at byte {}", self.pos)),
        }
    }

    fn u32(&mut self) -> std::result::Result<usize, String> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }
}

fn decode_inner(bytes: &[u8]) -> std::result::Result<NetParams, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u32()? as u32;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let in_channels = r.u32()?;
    let height = r.u32()?;
    let width = r.u32()?;
    let n_blocks = r.u32()?;
    if n_blocks > 64 {
        return Err(format!("implausible block count {n_blocks}"));
    }
    let conv_channels = (0..n_blocks).map(|_| r.u32()).collect::<std::result::Result<Vec<_>, _>>()?;
    let embed_dim = r.u32()?;
    let head = match r.take(1)?[0] {
        0 => HeadKind::Classifier,
        1 => HeadKind::Regressor,
        other => return Err(format!("unknown head kind {other}")),
    };
    let arch = ArchConfig {
        in_channels,
        height,
        width,
        conv_channels,
        embed_dim,
        head,
    };
    arch.validate().map_err(|e| e.to_string())?;
    let layout = arch.layout();
    let n_groups = r.u32()?;
    if n_groups != layout.len() {
        return Err(format!("expected {} groups, found {n_groups}", layout.len()));
    }
    for g in &layout {
        let ndim = r.u32()?;
        let shape = (0..ndim).map(|_| r.u32()).collect::<std::result::Result<Vec<_>, _>>()?;
        if shape != g.shape {
            return Err(format!("group {} has shape {:?}, expected {:?}", g.name, shape, g.shape));
        }
    }
    let n: usize = layout.iter().map(|g| g.len).sum();
    let raw = r.take(n * 8)?;
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    NetParams::from_values(&arch, values).map_err(|e| e.to_string())
}

pub fn decode(bytes: &[u8]) -> Result<NetParams> {
    decode_inner(bytes).map_err(|reason| Error::Checkpoint {
        path: "<memory>".into(),
        reason,
    })
}

pub fn save(path: &Path, params: &NetParams) -> Result<()> {
    std::fs::write(path, encode(params)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<NetParams> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_inner(&bytes).map_err(|reason| Error::Checkpoint {
        path: path.to_path_buf(),
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_params, Init};

    #[test]
    fn round_trip_is_bit_exact() {
        let mut arch = ArchConfig::with_input(16, 16);
        arch.head = HeadKind::Regressor;
        let p = init_params(&arch, Init::FanIn, 3).unwrap();
        let bytes = encode(&p);
        assert_eq!(&bytes[..8], MAGIC);
        let q = decode(&bytes).unwrap();
        assert_eq!(p, q);
        assert_eq!(encode(&q), bytes);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let p = init_params(&ArchConfig::with_input(16, 16), Init::FanIn, 3).unwrap();
        let bytes = encode(&p);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode(&extra).is_err());
        let mut version = bytes;
        version[8] = 9;
        assert!(decode(&version).is_err());
    }
}
