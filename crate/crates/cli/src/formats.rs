//! Plain-text matrix and vector files.
//!
//! A matrix file holds the dimension `m` on the first line followed by `m`
//! rows of `m` space-separated values; a vector file holds `m` followed by
//! one value per line. Values are written with 17 significant digits, which
//! round-trips every `f64`.

use std::fmt::Write as _;
use std::path::Path;

use pfa_core::matlin::Matrix;
use serde::Serialize;

use crate::{CliError, CliResult};

fn push_value(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").expect("writing to a String");
}

pub fn matrix_to_string(a: &Matrix) -> String {
    let mut out = format!("{}\n", a.rows());
    for r in 0..a.rows() {
        for (c, &v) in a.row(r).iter().enumerate() {
            if c > 0 {
                out.push(' ');
            }
            push_value(&mut out, v);
        }
        out.push('\n');
    }
    out
}

pub fn vector_to_string(v: &[f64]) -> String {
    let mut out = format!("{}\n", v.len());
    for &x in v {
        push_value(&mut out, x);
        out.push('\n');
    }
    out
}

fn parse_dimension(line: Option<&str>) -> CliResult<usize> {
    let line = line.ok_or_else(|| CliError::Input("empty file".into()))?;
    line.trim()
        .parse()
        .map_err(|_| CliError::Input(format!("bad dimension header {line:?}")))
}

fn parse_value(token: &str, line: usize) -> CliResult<f64> {
    let v: f64 = token
        .parse()
        .map_err(|_| CliError::Input(format!("line {line}: cannot parse {token:?}")))?;
    if !v.is_finite() {
        return Err(CliError::Input(format!("line {line}: non-finite value")));
    }
    Ok(v)
}

pub fn parse_matrix(text: &str) -> CliResult<Matrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let m = parse_dimension(lines.next())?;
    if m == 0 {
        return Err(CliError::Input("dimension must be positive".into()));
    }
    let mut data = Vec::with_capacity(m * m);
    for r in 0..m {
        let line = lines
            .next()
            .ok_or_else(|| CliError::Input(format!("expected {m} rows, found {r}")))?;
        let before = data.len();
        for token in line.split_whitespace() {
            data.push(parse_value(token, r + 2)?);
        }
        if data.len() - before != m {
            return Err(CliError::Input(format!(
                "row {} has {} values, expected {m}",
                r + 1,
                data.len() - before
            )));
        }
    }
    if lines.next().is_some() {
        return Err(CliError::Input(format!("trailing data after {m} rows")));
    }
    Ok(Matrix::from_row_major(m, m, data)?)
}

pub fn parse_vector(text: &str) -> CliResult<Vec<f64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let m = parse_dimension(lines.next())?;
    let values = lines
        .enumerate()
        .map(|(i, l)| parse_value(l.trim(), i + 2))
        .collect::<CliResult<Vec<f64>>>()?;
    if values.len() != m {
        return Err(CliError::Input(format!("expected {m} values, found {}", values.len())));
    }
    Ok(values)
}

pub fn read_matrix(path: &Path) -> CliResult<Matrix> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_matrix(&text)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Input(format!("cannot serialize report: {e}")))?;
    text.push('\n');
    write_text(path, &text)
}

/// Two-column `m`, `V_m` table for plotting.
pub fn decay_table(curve: &[(usize, f64)]) -> String {
    let mut out = String::from("m\tV_m\n");
    for &(m, v) in curve {
        write!(out, "{m}\t").expect("writing to a String");
        push_value(&mut out, v);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trips_bit_for_bit() {
        let a = Matrix::from_fn(3, 3, |i, j| (i as f64 + 0.1) / (j as f64 + 3.0) - 1e-300 * j as f64);
        let back = parse_matrix(&matrix_to_string(&a)).unwrap();
        assert_eq!(back.as_slice(), a.as_slice());
        let v = vec![0.1, -2.5e-17, 1.0 / 3.0];
        assert_eq!(parse_vector(&vector_to_string(&v)).unwrap(), v);
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(parse_matrix("").is_err());
        assert!(parse_matrix("2\n1 0\n0\n").is_err());
        assert!(parse_matrix("2\n1 0\n0 x\n").is_err());
        assert!(parse_matrix("1\n1\n2\n").is_err());
        assert!(parse_matrix("1\nNaN\n").is_err());
        assert!(parse_vector("3\n1\n2\n").is_err());
    }
}
