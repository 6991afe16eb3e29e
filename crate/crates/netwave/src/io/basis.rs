//! Binary archive for a computed multiscale basis: sparse basis columns plus
//! the projected coarse operators, with a versioned header and trailing
//! CRC32.

use std::io::Write;
use std::path::Path;

use super::netfmt::Cursor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"LODB";
const VERSION: u32 = 1;

/// Plain data form of a multiscale basis for persistence.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisData {
    /// Fine space dimension (free DOFs).
    pub n_fine: usize,
    pub components: usize,
    /// Mesh level (H = 2^-level).
    pub level: u32,
    /// Localization parameter.
    pub k: usize,
    /// Sparse basis columns over fine DOFs.
    pub columns: Vec<Vec<(usize, f64)>>,
    /// Row-major dense projected stiffness, dim = columns.len().
    pub k_ms: Vec<f64>,
    /// Row-major dense projected mass.
    pub m_ms: Vec<f64>,
}

pub fn save_basis(data: &BasisData, path: &Path) -> Result<()> {
    let m = data.columns.len();
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for v in [
        data.n_fine as u64,
        data.components as u64,
        data.level as u64,
        data.k as u64,
        m as u64,
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for col in &data.columns {
        buf.extend_from_slice(&(col.len() as u64).to_le_bytes());
        for (idx, val) in col {
            buf.extend_from_slice(&(*idx as u64).to_le_bytes());
            buf.extend_from_slice(&val.to_le_bytes());
        }
    }
    for v in data.k_ms.iter().chain(&data.m_ms) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn load_basis(bytes: &[u8]) -> Result<BasisData> {
    let path = "<basis>";
    if bytes.len() < 8 {
        return Err(Error::parse(path, "truncated file"));
    }
    let payload_len = bytes.len() - 4;
    let crc_stored = u32::from_le_bytes(bytes[payload_len..].try_into().unwrap());
    if crc32fast::hash(&bytes[..payload_len]) != crc_stored {
        return Err(Error::Checksum(path.into()));
    }
    let mut cursor = Cursor::new(&bytes[..payload_len], path);
    if cursor.take(4)? != MAGIC {
        return Err(Error::parse(path, "missing LODB magic"));
    }
    let version = cursor.u32()?;
    if version != VERSION {
        return Err(Error::parse(path, format!("unsupported version {version}")));
    }
    let n_fine = cursor.u64()? as usize;
    let components = cursor.u64()? as usize;
    let level = cursor.u64()? as u32;
    let k = cursor.u64()? as usize;
    let m = cursor.u64()? as usize;
    if m > (1 << 24) || n_fine > (1 << 30) || !(components == 1 || components == 3) {
        return Err(Error::parse(path, "header counts out of range"));
    }
    let mut columns = Vec::with_capacity(m);
    for _ in 0..m {
        let len = cursor.u64()? as usize;
        if len > n_fine {
            return Err(Error::parse(path, "column longer than fine dimension"));
        }
        let mut col = Vec::with_capacity(len);
        for _ in 0..len {
            let idx = cursor.u64()? as usize;
            if idx >= n_fine {
                return Err(Error::parse(path, "column index out of range"));
            }
            col.push((idx, cursor.f64()?));
        }
        columns.push(col);
    }
    let mut k_ms = Vec::with_capacity(m * m);
    for _ in 0..m * m {
        k_ms.push(cursor.f64()?);
    }
    let mut m_ms = Vec::with_capacity(m * m);
    for _ in 0..m * m {
        m_ms.push(cursor.f64()?);
    }
    if cursor.remaining() != 0 {
        return Err(Error::parse(path, "trailing bytes"));
    }
    Ok(BasisData {
        n_fine,
        components,
        level,
        k,
        columns,
        k_ms,
        m_ms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let data = BasisData {
            n_fine: 5,
            components: 1,
            level: 2,
            k: 2,
            columns: vec![vec![(0, 1.0), (3, -0.5)], vec![(2, 2.0)]],
            k_ms: vec![1.0, 0.1, 0.1, 2.0],
            m_ms: vec![0.5, 0.0, 0.0, 0.25],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("basis.bin");
        save_basis(&data, &path).unwrap();
        let loaded = load_basis(&std::fs::read(&path).unwrap()).unwrap();
        assert_eq!(data, loaded);
    }

    #[test]
    fn corruption_detected() {
        let data = BasisData {
            n_fine: 3,
            components: 1,
            level: 1,
            k: 1,
            columns: vec![vec![(1, 1.0)]],
            k_ms: vec![1.0],
            m_ms: vec![1.0],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("basis.bin");
        save_basis(&data, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[10] ^= 1;
        assert!(load_basis(&bytes).is_err());
    }
}
