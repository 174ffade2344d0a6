//! Plain-text matrix interchange.
//!
//! ```text
//! rows cols
//! a11 a12 ... a1c
//! ...
//! ```
//!
//! Entries are written with 17 significant digits so values survive a round
//! trip bit-exactly. Vectors are matrices with a single column.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::dense::{Matrix, Vector};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub fn format_matrix<T: Real>(m: &Matrix<T>) -> String {
    let mut out = String::with_capacity(m.rows() * m.cols() * 24 + 16);
    let _ = writeln!(out, "{} {}", m.rows(), m.cols());
    for i in 0..m.rows() {
        for (j, x) in m.row(i).iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{:.16e}", x.as_f64());
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix<T: Real>(m: &Matrix<T>, mut w: impl Write) -> Result<()> {
    w.write_all(format_matrix(m).as_bytes())?;
    Ok(())
}

pub fn write_vector<T: Real>(v: &Vector<T>, w: impl Write) -> Result<()> {
    write_matrix(&v.to_matrix(), w)
}

pub fn parse_matrix<T: Real>(text: &str) -> Result<Matrix<T>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("missing header".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad dimension `{t}`"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse(format!("header must be `rows cols`, got `{header}`")));
    };
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("expected {rows} rows, found {i}")))?;
        let before = data.len();
        for tok in line.split_whitespace() {
            let x: f64 = tok.parse().map_err(|_| Error::Parse(format!("bad number `{tok}`")))?;
            data.push(T::of(x));
        }
        if data.len() - before != cols {
            return Err(Error::Parse(format!(
                "row {i} has {} entries, expected {cols}",
                data.len() - before
            )));
        }
    }
    if lines.next().is_some() {
        return Err(Error::Parse("trailing rows after matrix body".into()));
    }
    Matrix::new(rows, cols, data)
}

pub fn read_matrix<T: Real>(mut r: impl BufRead) -> Result<Matrix<T>> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    parse_matrix(&text)
}

pub fn read_vector<T: Real>(r: impl BufRead) -> Result<Vector<T>> {
    let m = read_matrix::<T>(r)?;
    if m.cols() != 1 {
        return Err(Error::Parse(format!("vector file has {} columns", m.cols())));
    }
    Ok(Vector::from(m))
}
