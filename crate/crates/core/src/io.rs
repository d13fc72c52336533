//! Plain numeric CSV for matrices: one row per line, no header.
//!
//! Values are written with Rust's shortest round-trip float formatting
//! (scientific notation for very large or small magnitudes), so a written
//! matrix reads back bit-identical.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_matrix<W: Write>(m: &DenseMatrix, mut out: W) -> std::io::Result<()> {
    let mut line = String::new();
    for i in 0..m.rows() {
        line.clear();
        for (j, v) in m.row(i).iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&fmt_f64(*v));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn save_matrix(m: &DenseMatrix, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_matrix(m, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_matrix<R: BufRead>(input: R, origin: &Path) -> Result<DenseMatrix> {
    let mut cols = None;
    let mut data = Vec::new();
    let mut rows = 0;
    for (idx, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = data.len();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                path: origin.to_path_buf(),
                line: idx + 1,
                msg: format!("not a number: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: idx + 1,
                    msg: format!("non-finite value {field:?}"),
                });
            }
            data.push(v);
        }
        let width = data.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: idx + 1,
                    msg: format!("expected {c} fields, found {width}"),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Parse {
        path: origin.to_path_buf(),
        line: 0,
        msg: "empty matrix file".into(),
    })?;
    DenseMatrix::new(rows, cols, data)
}

pub fn load_matrix(path: &Path) -> Result<DenseMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_matrix(BufReader::new(file), path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert_eq, proptest, Just, Strategy};

    #[test]
    fn parse_errors() {
        let p = Path::new("mem");
        assert!(read_matrix("1,2\n3\n".as_bytes(), p).is_err());
        assert!(read_matrix("1,x\n".as_bytes(), p).is_err());
        assert!(read_matrix("".as_bytes(), p).is_err());
        assert!(read_matrix("1,NaN\n".as_bytes(), p).is_err());
        let m = read_matrix("1, 2.5\n-3,4e-3\n\n".as_bytes(), p).unwrap();
        assert_eq!(m.shape(), (2, 2));
        assert_eq!(m[(1, 1)], 4e-3);
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            (r, c, data) in (1usize..5, 1usize..5).prop_flat_map(|(r, c)| {
                (Just(r), Just(c), proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, r * c))
            })
        ) {
            let m = DenseMatrix::new(r, c, data).unwrap();
            let mut buf = Vec::new();
            write_matrix(&m, &mut buf).unwrap();
            let back = read_matrix(buf.as_slice(), Path::new("mem")).unwrap();
            prop_assert_eq!(
                back.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }
}
