//! On-disk formats.
//!
//! `LRST` binary dense tensors: magic `LRST`, version byte `1`, order byte
//! `m`, `m` little-endian `u64` dims, then `d*` little-endian `f64` values in
//! row-major order.
//!
//! Sparse tensors are CSV lines `i1,...,im,value` with 1-based indices and no
//! header.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{DenseTensor, Shape, SparseTensor};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"LRST";
const VERSION: u8 = 1;

pub fn write_lrst<W: Write>(t: &DenseTensor, mut w: W) -> Result<()> {
    let order = u8::try_from(t.shape().order()).map_err(|_| Error::Format("order exceeds 255".into()))?;
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION, order])?;
    for &d in t.dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_lrst<R: Read>(mut r: R) -> Result<DenseTensor> {
    let mut header = [0u8; 6];
    r.read_exact(&mut header)?;
    if &header[..4] != MAGIC {
        return Err(Error::Format("missing LRST magic".into()));
    }
    if header[4] != VERSION {
        return Err(Error::Format(format!("unsupported LRST version {}", header[4])));
    }
    let order = header[5] as usize;
    let mut dims = Vec::with_capacity(order);
    let mut word = [0u8; 8];
    for _ in 0..order {
        r.read_exact(&mut word)?;
        let d = usize::try_from(u64::from_le_bytes(word)).map_err(|_| Error::Format("dimension overflows usize".into()))?;
        dims.push(d);
    }
    let shape = Shape::new(dims)?;
    let mut bytes = vec![0u8; shape.numel() * 8];
    r.read_exact(&mut bytes)?;
    if r.read(&mut word)? != 0 {
        return Err(Error::Format("trailing bytes after LRST payload".into()));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    DenseTensor::new(shape, data)
}

/// Shortest round-trip text for `x`, switching to exponent form for very
/// small or very large magnitudes.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

pub fn write_sparse_csv<W: Write>(s: &SparseTensor, w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    for (idx, v) in s.entries() {
        for i in idx {
            write!(w, "{},", i + 1)?;
        }
        writeln!(w, "{}", fmt_f64(v))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a sparse CSV for a known shape. Blank lines are skipped.
pub fn read_sparse_csv<R: Read>(r: R, shape: &Shape) -> Result<SparseTensor> {
    let m = shape.order();
    let mut entries = Vec::new();
    for (lineno, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != m + 1 {
            return Err(Error::Format(format!(
                "line {}: expected {} fields, found {}",
                lineno + 1,
                m + 1,
                fields.len()
            )));
        }
        let mut idx = Vec::with_capacity(m);
        for f in &fields[..m] {
            let i: usize = f
                .parse()
                .map_err(|_| Error::Format(format!("line {}: bad index `{f}`", lineno + 1)))?;
            if i == 0 {
                return Err(Error::Format(format!("line {}: indices are 1-based", lineno + 1)));
            }
            idx.push(i - 1);
        }
        let v: f64 = fields[m]
            .parse()
            .map_err(|_| Error::Format(format!("line {}: bad value `{}`", lineno + 1, fields[m])))?;
        entries.push((idx, v));
    }
    SparseTensor::new(shape.clone(), entries)
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut fs::File) -> Result<()>) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Format(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        write(&mut f)?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn save_lrst(t: &DenseTensor, path: &Path) -> Result<()> {
    write_atomic(path, |f| write_lrst(t, BufWriter::new(f)))
}

pub fn load_lrst(path: &Path) -> Result<DenseTensor> {
    read_lrst(BufReader::new(fs::File::open(path)?))
}

pub fn save_sparse_csv(s: &SparseTensor, path: &Path) -> Result<()> {
    write_atomic(path, |f| write_sparse_csv(s, f))
}

pub fn load_sparse_csv(path: &Path, shape: &Shape) -> Result<SparseTensor> {
    read_sparse_csv(fs::File::open(path)?, shape)
}
