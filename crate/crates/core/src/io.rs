//! Plain-text matrix and vector files.
//!
//! Matrix files: first line `M,N`, then `M` lines of `N` comma-separated
//! values. Vector files: one value per line. Values are written with 17
//! significant digits, which round-trips every `f64` exactly.

use nalgebra::{DMatrix, DVector};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

fn parse_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_value(path: &Path, line: usize, tok: &str) -> Result<f64> {
    let v: f64 = tok.trim().parse().map_err(|_| {
        parse_err(
            path,
            format!("line {line}: cannot parse {:?} as a number", tok.trim()),
        )
    })?;
    if !v.is_finite() {
        return Err(parse_err(path, format!("line {line}: non-finite value")));
    }
    Ok(v)
}

pub fn format_matrix(a: &DMatrix<f64>) -> String {
    let mut out = format!("{},{}\n", a.nrows(), a.ncols());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{:.16e}", a[(i, j)]);
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix(path: &Path, text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(path, "empty matrix file"))?;
    let dims: Vec<&str> = header.split(',').collect();
    let bad_header = || parse_err(path, format!("header must be \"M,N\" (got {header:?})"));
    if dims.len() != 2 {
        return Err(bad_header());
    }
    let m: usize = dims[0].trim().parse().map_err(|_| bad_header())?;
    let n: usize = dims[1].trim().parse().map_err(|_| bad_header())?;
    if m == 0 || n == 0 {
        return Err(bad_header());
    }
    let mut a = DMatrix::zeros(m, n);
    let mut rows = 0;
    for (lineno, line) in lines {
        if rows == m {
            return Err(parse_err(path, format!("more than {m} rows")));
        }
        let toks: Vec<&str> = line.split(',').collect();
        if toks.len() != n {
            return Err(parse_err(
                path,
                format!("line {}: expected {n} values, found {}", lineno + 1, toks.len()),
            ));
        }
        for (j, tok) in toks.iter().enumerate() {
            a[(rows, j)] = parse_value(path, lineno + 1, tok)?;
        }
        rows += 1;
    }
    if rows != m {
        return Err(parse_err(path, format!("expected {m} rows, found {rows}")));
    }
    Ok(a)
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix(path, &read(path)?)
}

pub fn write_matrix(path: &Path, a: &DMatrix<f64>) -> Result<()> {
    write(path, &format_matrix(a))
}

pub fn format_vector(x: &DVector<f64>) -> String {
    let mut out = String::new();
    for v in x.iter() {
        let _ = writeln!(out, "{v:.16e}");
    }
    out
}

pub fn parse_vector(path: &Path, text: &str) -> Result<DVector<f64>> {
    let values = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_value(path, i + 1, l))
        .collect::<Result<Vec<f64>>>()?;
    if values.is_empty() {
        return Err(parse_err(path, "empty vector file"));
    }
    Ok(DVector::from_vec(values))
}

pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    parse_vector(path, &read(path)?)
}

pub fn write_vector(path: &Path, x: &DVector<f64>) -> Result<()> {
    write(path, &format_vector(x))
}
