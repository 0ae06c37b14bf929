//! Binary cache format for covariance matrices.
//!
//! Layout (little endian): magic `FWCM`, `u32` version, `u64` dimension,
//! `dim²` row-major `f64` entries, `u64` metadata length, metadata as JSON.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use super::{CovarianceMatrix, ModelMeta};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"FWCM";
pub const DUMP_VERSION: u32 = 1;

impl CovarianceMatrix {
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        let dim = self.dim();
        w.write_all(MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        w.write_all(&(dim as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(dim * dim * 8);
        for i in 0..dim {
            for j in 0..dim {
                buf.extend_from_slice(&self.get(i, j).to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        let meta = serde_json::to_vec(self.meta())?;
        w.write_all(&(meta.len() as u64).to_le_bytes())?;
        w.write_all(&meta)?;
        Ok(())
    }

    pub fn read_dump<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a covariance dump (bad magic)".into()));
        }
        let version = u32::from_le_bytes(read_array(&mut r)?);
        if version != DUMP_VERSION {
            return Err(Error::Format(format!("unsupported dump version {version}")));
        }
        let dim = u64::from_le_bytes(read_array(&mut r)?) as usize;
        let bytes = dim
            .checked_mul(dim)
            .and_then(|d| d.checked_mul(8))
            .ok_or_else(|| Error::Format("dimension overflow".into()))?;
        let mut buf = vec![0u8; bytes];
        r.read_exact(&mut buf)?;
        let values: Vec<f64> = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let meta_len = u64::from_le_bytes(read_array(&mut r)?) as usize;
        let mut meta = vec![0u8; meta_len];
        r.read_exact(&mut meta)?;
        let meta: ModelMeta = serde_json::from_slice(&meta)?;
        CovarianceMatrix::from_matrix(DMatrix::from_row_slice(dim, dim, &values), meta)
    }
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}
