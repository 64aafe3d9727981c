//! Matrix Market coordinate format (complex general).

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::sparse::{CsrMatrix, TripletBuilder};
use crate::{Error, Result, C64};

pub fn write_matrix_market<W: Write>(a: &CsrMatrix, mut out: W) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "%%MatrixMarket matrix coordinate complex general");
    let _ = writeln!(s, "{} {} {}", a.nrows(), a.ncols(), a.nnz());
    for (i, j, v) in a.triplets() {
        let _ = writeln!(s, "{} {} {:.17e} {:.17e}", i + 1, j + 1, v.re, v.im);
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

/// Reads `coordinate complex general` or `coordinate real general` data.
pub fn read_matrix_market<R: BufRead>(input: R) -> Result<CsrMatrix> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty Matrix Market input".into()))??;
    let fields: Vec<String> = header.split_whitespace().map(str::to_lowercase).collect();
    if fields.len() != 5
        || fields[0] != "%%matrixmarket"
        || fields[1] != "matrix"
        || fields[2] != "coordinate"
    {
        return Err(Error::Parse(format!("unsupported header: {header}")));
    }
    let complex = match fields[3].as_str() {
        "complex" => true,
        "real" => false,
        other => return Err(Error::Parse(format!("unsupported field type {other}"))),
    };
    if fields[4] != "general" {
        return Err(Error::Parse(format!("unsupported symmetry {}", fields[4])));
    }
    let mut data = lines.filter(|l| match l {
        Ok(l) => !l.trim().is_empty() && !l.starts_with('%'),
        Err(_) => true,
    });
    let size = data
        .next()
        .ok_or_else(|| Error::Parse("missing size line".into()))??;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Parse(format!("bad size line: {size}")))
        })
        .collect::<Result<_>>()?;
    if dims.len() != 3 {
        return Err(Error::Parse(format!("bad size line: {size}")));
    }
    let (nr, nc, nnz) = (dims[0], dims[1], dims[2]);
    let mut t = TripletBuilder::with_capacity(nr, nc, nnz);
    let mut count = 0;
    for line in data {
        let line = line?;
        let tok: Vec<&str> = line.split_whitespace().collect();
        let want = if complex { 4 } else { 3 };
        if tok.len() != want {
            return Err(Error::Parse(format!("bad entry line: {line}")));
        }
        let idx = |s: &str, n: usize| -> Result<usize> {
            let v: usize = s
                .parse()
                .map_err(|_| Error::Parse(format!("bad index {s}")))?;
            if v == 0 || v > n {
                return Err(Error::Parse(format!("index {v} out of range")));
            }
            Ok(v - 1)
        };
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Parse(format!("bad value {s}")))
        };
        let (i, j) = (idx(tok[0], nr)?, idx(tok[1], nc)?);
        let v = if complex {
            C64::new(num(tok[2])?, num(tok[3])?)
        } else {
            C64::new(num(tok[2])?, 0.0)
        };
        t.push(i, j, v);
        count += 1;
    }
    if count != nnz {
        return Err(Error::Parse(format!(
            "expected {nnz} entries, found {count}"
        )));
    }
    Ok(t.build())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut t = TripletBuilder::new(3, 2);
        t.push(0, 1, C64::new(1.5, -2.25));
        t.push(2, 0, C64::new(1.0 / 3.0, 1e-300));
        let a = t.build();
        let mut buf = Vec::new();
        write_matrix_market(&a, &mut buf).unwrap();
        let b = read_matrix_market(buf.as_slice()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_malformed() {
        let bad = "%%MatrixMarket matrix coordinate complex symmetric\n1 1 0\n";
        assert!(read_matrix_market(bad.as_bytes()).is_err());
        let bad = "%%MatrixMarket matrix coordinate complex general\n1 1 1\n2 1 0 0\n";
        assert!(read_matrix_market(bad.as_bytes()).is_err());
    }
}
