//! MatrixMarket coordinate format (`real general`, 1-based indices).

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::{CsrMatrix, LinalgError};

const HEADER: &str = "%%MatrixMarket matrix coordinate real general";

pub fn write_matrix_market<W: Write>(a: &CsrMatrix, out: &mut W) -> std::io::Result<()> {
    let mut buf = String::with_capacity(32 * (a.nnz() + 2));
    writeln!(buf, "{HEADER}").unwrap();
    writeln!(buf, "{} {} {}", a.nrows(), a.ncols(), a.nnz()).unwrap();
    for (i, j, v) in a.triplets() {
        writeln!(buf, "{} {} {:e}", i + 1, j + 1, v).unwrap();
    }
    out.write_all(buf.as_bytes())
}

pub fn read_matrix_market<R: BufRead>(input: R) -> Result<CsrMatrix, LinalgError> {
    let parse_err = |line: usize, msg: &str| LinalgError::Parse(format!("line {line}: {msg}"));
    let mut lines = input.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let header = header.map_err(|e| LinalgError::Parse(e.to_string()))?;
    let lower = header.to_ascii_lowercase();
    if !lower.starts_with("%%matrixmarket matrix coordinate real") {
        return Err(parse_err(1, "unsupported MatrixMarket header"));
    }
    let symmetric = lower.contains("symmetric");

    let mut dims: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (no, line) in lines {
        let line = line.map_err(|e| LinalgError::Parse(e.to_string()))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        match dims {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(no + 1, "expected `rows cols nnz`"));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|_| parse_err(no + 1, "bad size"));
                dims = Some((p(fields[0])?, p(fields[1])?, p(fields[2])?));
            }
            Some((m, n, _)) => {
                if fields.len() != 3 {
                    return Err(parse_err(no + 1, "expected `i j value`"));
                }
                let i: usize = fields[0].parse().map_err(|_| parse_err(no + 1, "bad row"))?;
                let j: usize = fields[1].parse().map_err(|_| parse_err(no + 1, "bad column"))?;
                let v: f64 = fields[2].parse().map_err(|_| parse_err(no + 1, "bad value"))?;
                if i == 0 || j == 0 || i > m || j > n {
                    return Err(parse_err(no + 1, "index out of range"));
                }
                triplets.push((i - 1, j - 1, v));
                if symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (m, n, nnz) = dims.ok_or_else(|| LinalgError::Parse("missing size line".into()))?;
    let stored = if symmetric {
        triplets.iter().filter(|t| t.0 >= t.1).count()
    } else {
        triplets.len()
    };
    if stored != nnz {
        return Err(LinalgError::Parse(format!("expected {nnz} entries, found {stored}")));
    }
    CsrMatrix::from_triplets(m, n, &triplets)
}
