//! Binary checkpoint format.
//!
//! Layout, all little-endian: the 4 magic bytes `TTSL`, then `u64` version,
//! `d`, `d` mode sizes, `d + 1` ranks, then every kernel's entries as `f64` in
//! storage order (mode index fastest).

use std::io::{Read, Write};

use super::kernel::Kernel;
use super::tensor::TTTensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TTSL";
pub const SNAPSHOT_VERSION: u64 = 1;

pub fn write_snapshot(t: &TTTensor, mut w: impl Write) -> Result<()> {
    w.write_all(MAGIC)?;
    let mut header = vec![SNAPSHOT_VERSION, t.dims() as u64];
    header.extend(t.mode_sizes().iter().map(|&n| n as u64));
    header.extend(t.ranks().iter().map(|&r| r as u64));
    for h in header {
        w.write_all(&h.to_le_bytes())?;
    }
    for k in t.kernels() {
        for x in k.data() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_snapshot(mut r: impl Read) -> Result<TTTensor> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Snapshot("bad magic bytes".into()));
    }
    let version = read_u64(&mut r)?;
    if version != SNAPSHOT_VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let d = read_u64(&mut r)? as usize;
    if d == 0 || d > 64 {
        return Err(Error::Snapshot(format!("implausible dimension count {d}")));
    }
    let sizes = (0..d).map(|_| read_u64(&mut r).map(|x| x as usize)).collect::<Result<Vec<_>>>()?;
    let ranks = (0..=d).map(|_| read_u64(&mut r).map(|x| x as usize)).collect::<Result<Vec<_>>>()?;
    let mut kernels = Vec::with_capacity(d);
    for k in 0..d {
        let len = ranks[k]
            .checked_mul(sizes[k])
            .and_then(|x| x.checked_mul(ranks[k + 1]))
            .ok_or_else(|| Error::Snapshot("kernel size overflows".into()))?;
        let mut bytes = vec![0u8; len * 8];
        r.read_exact(&mut bytes)?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        kernels.push(Kernel::new(ranks[k], sizes[k], ranks[k + 1], data));
    }
    TTTensor::new(kernels).map_err(|e| Error::Snapshot(e.to_string()))
}
