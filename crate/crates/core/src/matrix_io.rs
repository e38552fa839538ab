//! Binary dense-matrix files.
//!
//! Layout: the 4-byte magic `NRM1`, the row and column counts as
//! little-endian `u64`, then `rows * cols` little-endian `f64` values in
//! row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"NRM1";

pub fn write_matrix<W: Write>(mut w: W, a: &DMatrix<f64>) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(a.nrows() as u64).to_le_bytes())?;
    w.write_all(&(a.ncols() as u64).to_le_bytes())?;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            w.write_all(&a[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> std::result::Result<DMatrix<f64>, String> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| e.to_string())?;
    if &magic != MAGIC {
        return Err(format!("bad magic {magic:?}"));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word).map_err(|e| e.to_string())?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word).map_err(|e| e.to_string())?;
    let cols = u64::from_le_bytes(word) as usize;
    let len = rows.checked_mul(cols).ok_or_else(|| "dimension overflow".to_string())?;
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        r.read_exact(&mut word)
            .map_err(|_| format!("truncated payload: expected {len} values"))?;
        data.push(f64::from_le_bytes(word));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| e.to_string())? != 0 {
        return Err("trailing bytes after payload".into());
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn save(path: impl AsRef<Path>, a: &DMatrix<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    write_matrix(&mut w, a)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let r = BufReader::new(File::open(path)?);
    read_matrix(r).map_err(|reason| Error::Format {
        path: path.to_path_buf(),
        reason,
    })
}
