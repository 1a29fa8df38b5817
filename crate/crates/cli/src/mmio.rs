//! Matrix Market array format, `real general` and `real symmetric`.
//!
//! Entries are written with 17 significant digits, which round-trips every
//! finite `f64` exactly.

use std::fmt::Write as _;
use std::path::Path;

use quasilin_core::Mat;

use crate::{atomic_write, CliError};

/// Column-major `real general` array text.
pub fn to_string(m: &Mat) -> String {
    let mut s = String::with_capacity(32 * m.rows() * m.cols() + 64);
    s.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(s, "{} {}", m.rows(), m.cols());
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            let _ = writeln!(s, "{:.16e}", m[(i, j)]);
        }
    }
    s
}

/// Lower triangle, column by column, of a symmetric matrix.
pub fn to_string_symmetric(m: &Mat) -> Result<String, CliError> {
    if !m.is_square() || m.as_dmatrix() != &m.as_dmatrix().transpose() {
        return Err(CliError::Input("symmetric output needs an exactly symmetric matrix".into()));
    }
    let n = m.rows();
    let mut s = String::new();
    s.push_str("%%MatrixMarket matrix array real symmetric\n");
    let _ = writeln!(s, "{n} {n}");
    for j in 0..n {
        for i in j..n {
            let _ = writeln!(s, "{:.16e}", m[(i, j)]);
        }
    }
    Ok(s)
}

pub fn parse(text: &str) -> Result<Mat, CliError> {
    let bad = |msg: &str| CliError::Input(format!("Matrix Market: {msg}"));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty input"))?;
    let words: Vec<String> = header.split_whitespace().map(|w| w.to_ascii_lowercase()).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(bad("missing %%MatrixMarket matrix header"));
    }
    if words[2] != "array" {
        return Err(bad("only the array format is supported"));
    }
    if words[3] != "real" && words[3] != "integer" {
        return Err(bad("only real entries are supported"));
    }
    let symmetric = match words[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(bad(&format!("unsupported symmetry '{other}'"))),
    };
    let mut tokens = lines
        .filter(|l| !l.trim_start().starts_with('%'))
        .flat_map(|l| l.split_whitespace());
    let mut dim = || -> Result<usize, CliError> {
        tokens
            .next()
            .ok_or_else(|| bad("missing size line"))?
            .parse()
            .map_err(|_| bad("bad size line"))
    };
    let (rows, cols) = (dim()?, dim()?);
    if symmetric && rows != cols {
        return Err(bad("symmetric matrix must be square"));
    }
    let count = if symmetric { rows * (rows + 1) / 2 } else { rows * cols };
    let mut values = Vec::with_capacity(count);
    for t in tokens.by_ref() {
        let v: f64 = t.parse().map_err(|_| bad(&format!("bad entry '{t}'")))?;
        values.push(v);
    }
    if values.len() != count {
        return Err(bad(&format!("expected {count} entries, found {}", values.len())));
    }
    let dense = if symmetric {
        let mut d = vec![0.0; rows * rows];
        let mut it = values.into_iter();
        for j in 0..rows {
            for i in j..rows {
                let v = it.next().unwrap_or(0.0);
                d[i + j * rows] = v;
                d[j + i * rows] = v;
            }
        }
        d
    } else {
        values
    };
    Ok(Mat::from_column_major(rows, cols, &dense)?)
}

pub fn read(path: &Path) -> Result<Mat, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn write(path: &Path, m: &Mat) -> Result<(), CliError> {
    atomic_write(path, to_string(m).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let v = [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE, -0.0, 2f64.sqrt()];
        let m = Mat::from_column_major(7, 1, &v).unwrap();
        let back = parse(&to_string(&m)).unwrap();
        for (a, b) in m.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn symmetric_storage() {
        let m = Mat::from_row_major(2, 2, vec![1.0, 2.0, 2.0, 3.0]).unwrap();
        let text = to_string_symmetric(&m).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert_eq!(parse(&text).unwrap(), m);
    }

    #[test]
    fn comments_and_errors() {
        let m = parse("%%MatrixMarket matrix array real general\n% note\n2 1\n1\n2\n").unwrap();
        assert_eq!(m.to_row_major(), vec![1.0, 2.0]);
        assert!(parse("%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 1\n").is_err());
        assert!(parse("%%MatrixMarket matrix array real general\n2 2\n1\n").is_err());
        assert!(parse("%%MatrixMarket matrix array real general\n1 1\nnan\n").is_err());
    }
}
