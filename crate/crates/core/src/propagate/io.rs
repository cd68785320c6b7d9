//! Binary field files.
//!
//! Layout, all little-endian: `u64` dimension `d`; `d` × `u64` points per
//! axis; `d` × `f64` half-widths; `u64` component count `k`; then the samples
//! in row-major node order (last axis fastest) with the `k` components of a
//! node stored consecutively, each as `(re, im)` `f64` pairs.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, SpinorField};

pub fn write_field<W: Write>(mut w: W, field: &SpinorField) -> Result<()> {
    let g = &field.grid;
    w.write_all(&(g.dim() as u64).to_le_bytes())?;
    for &n in &g.points {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for &l in &g.extents {
        w.write_all(&l.to_le_bytes())?;
    }
    w.write_all(&(field.components as u64).to_le_bytes())?;
    let n = field.n_points();
    let mut buf = Vec::with_capacity(n * field.components * 16);
    for p in 0..n {
        for s in 0..field.components {
            let z = field.data[s * n + p];
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

/// Reads a field; every axis is marked periodic.
pub fn read_field<R: Read>(mut r: R) -> Result<SpinorField> {
    let d = read_u64(&mut r)? as usize;
    if d == 0 || d > 8 {
        return Err(Error::Format(format!("implausible dimension {d}")));
    }
    let points = (0..d).map(|_| read_u64(&mut r).map(|n| n as usize)).collect::<Result<Vec<_>>>()?;
    let extents = (0..d).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
    let k = read_u64(&mut r)? as usize;
    if k == 0 || k > 64 {
        return Err(Error::Format(format!("implausible component count {k}")));
    }
    let grid = GridSpec::new(extents, points, vec![true; d]).map_err(|e| Error::Format(e.to_string()))?;
    let n = grid.len();
    let mut bytes = vec![0u8; n * k * 16];
    r.read_exact(&mut bytes).map_err(|e| Error::Format(format!("truncated data: {e}")))?;
    let mut field = SpinorField::zeros(grid, k);
    for p in 0..n {
        for s in 0..k {
            let o = (p * k + s) * 16;
            let re = f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(bytes[o + 8..o + 16].try_into().expect("8 bytes"));
            field.data[s * n + p] = Complex64::new(re, im);
        }
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Format("trailing bytes after field data".into()));
    }
    Ok(field)
}

pub fn save_field(path: &Path, field: &SpinorField) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_field(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<SpinorField> {
    read_field(std::io::BufReader::new(std::fs::File::open(path)?))
}
