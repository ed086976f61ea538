//! Matrix files.
//!
//! Text files start with a `# rows cols` header followed by one
//! comma-separated row per line, written with 17 significant digits so
//! values survive a round trip. Binary files start with the magic bytes
//! `DMAP1`, then little-endian `u64` rows and cols and row-major `f64` data.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use faer::Mat;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"DMAP1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Binary,
}

pub fn write_matrix(path: &Path, m: &Mat<f64>, format: Format) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        Format::Csv => write_csv(&mut w, m)?,
        Format::Binary => write_binary(&mut w, m)?,
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv<W: Write>(w: &mut W, m: &Mat<f64>) -> Result<()> {
    writeln!(w, "# {} {}", m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_binary<W: Write>(w: &mut W, m: &Mat<f64>) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads either format, chosen by the leading bytes.
pub fn read_matrix(path: &Path) -> Result<Mat<f64>> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.starts_with(MAGIC) {
        read_binary(&bytes)
    } else {
        read_csv(BufReader::new(bytes.as_slice()))
    }
}

pub fn read_binary(bytes: &[u8]) -> Result<Mat<f64>> {
    let body = bytes
        .strip_prefix(MAGIC.as_slice())
        .ok_or_else(|| Error::Format("missing DMAP1 magic".into()))?;
    if body.len() < 16 {
        return Err(Error::Format("truncated header".into()));
    }
    let rows = u64::from_le_bytes(body[0..8].try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(body[8..16].try_into().expect("8 bytes")) as usize;
    let data = &body[16..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| Error::Format("matrix dimensions overflow".into()))?;
    if data.len() != expected {
        return Err(Error::Format(format!(
            "{rows}x{cols} matrix needs {expected} data bytes, found {}",
            data.len()
        )));
    }
    let value = |k: usize| f64::from_le_bytes(data[8 * k..8 * k + 8].try_into().expect("8 bytes"));
    Ok(Mat::from_fn(rows, cols, |i, j| value(i * cols + j)))
}

pub fn read_csv<R: BufRead>(r: R) -> Result<Mat<f64>> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty file".into()))??;
    let dims: Vec<usize> = header
        .strip_prefix('#')
        .ok_or_else(|| Error::Format("first line must be '# rows cols'".into()))?
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|e| Error::Format(format!("bad header '{header}': {e}"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Format(format!("bad header '{header}'")));
    };
    let mut values = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("line {}: '{}': {e}", lineno + 2, t.trim())))
            })
            .collect::<Result<_>>()?;
        if row.len() != cols {
            return Err(Error::Format(format!(
                "line {} has {} values, expected {cols}",
                lineno + 2,
                row.len()
            )));
        }
        values.extend(row);
        seen += 1;
    }
    if seen != rows {
        return Err(Error::Format(format!("found {seen} rows, header says {rows}")));
    }
    Ok(Mat::from_fn(rows, cols, |i, j| values[i * cols + j]))
}

pub fn column(values: &[f64]) -> Mat<f64> {
    Mat::from_fn(values.len(), 1, |i, _| values[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Mat<f64> {
        Mat::from_fn(3, 2, |i, j| (i as f64 + 0.1) / (j as f64 + 3.0) - 1e-300 * j as f64)
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m = sample();
        let mut buf = Vec::new();
        write_csv(&mut buf, &m).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# 3 2\n"));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let m = sample();
        let mut buf = Vec::new();
        write_binary(&mut buf, &m).unwrap();
        assert_eq!(buf.len(), 5 + 16 + 48);
        assert_eq!(read_binary(&buf).unwrap(), m);
        assert!(read_binary(&buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn file_format_is_detected() {
        let dir = std::env::temp_dir().join(format!("dynamap-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let m = sample();
        for (name, format) in [("m.csv", Format::Csv), ("m.bin", Format::Binary)] {
            let p = dir.join(name);
            write_matrix(&p, &m, format).unwrap();
            assert_eq!(read_matrix(&p).unwrap(), m);
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn malformed_csv() {
        for bad in ["", "3 2\n1,2\n", "# 2 2\n1,2\n", "# 1 2\n1,x\n", "# 1 2\n1,2,3\n"] {
            assert!(matches!(read_csv(bad.as_bytes()), Err(Error::Format(_))), "{bad:?}");
        }
    }
}
