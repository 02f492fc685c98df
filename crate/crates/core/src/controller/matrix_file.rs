//! Text form of `Φ`: four bracketed block headers, each followed by its rows
//! as whitespace-separated decimals. Blank lines and `#` comments are ignored.
//!
//! ```text
//! [A_c]
//! 0 0 0 0 0
//! -50 0 0 0 0
//! ...
//! [B_c]
//! ...
//! ```

use std::fmt::Write as _;

use thiserror::Error;

use super::{ControllerMatrix, EXO_DIM, INPUT_DIM, OUTPUT_DIM, STATE_DIM};

#[derive(Debug, Error, PartialEq)]
pub enum MatrixFileError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("block [{block}] has {got} rows, expected {expected}")]
    RowCount { block: &'static str, got: usize, expected: usize },
    #[error("missing block [{0}]")]
    MissingBlock(&'static str),
}

/// (name, rows, first output row, first input column, columns)
const BLOCKS: [(&str, usize, usize, usize, usize); 4] = [
    ("A_c", STATE_DIM, 0, 0, STATE_DIM),
    ("B_c", STATE_DIM, 0, STATE_DIM, EXO_DIM),
    ("C_c", 3, STATE_DIM, 0, STATE_DIM),
    ("D_c", 3, STATE_DIM, STATE_DIM, EXO_DIM),
];

pub fn format_matrix_file(phi: &ControllerMatrix) -> String {
    let mut out = String::new();
    for (name, rows, r0, c0, cols) in BLOCKS {
        let _ = writeln!(out, "[{name}]");
        for i in 0..rows {
            let line: Vec<String> = (0..cols).map(|j| format!("{}", phi.get(r0 + i, c0 + j))).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
    }
    out
}

pub fn parse_matrix_file(text: &str) -> Result<ControllerMatrix, MatrixFileError> {
    let mut rows = [[0.0; INPUT_DIM]; OUTPUT_DIM];
    let mut seen = [0usize; 4];
    let mut present = [false; 4];
    let mut current: Option<usize> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let syntax = |msg: String| MatrixFileError::Syntax { line, msg };
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let b =
                BLOCKS.iter().position(|blk| blk.0 == name).ok_or_else(|| syntax(format!("unknown block [{name}]")))?;
            if present[b] {
                return Err(syntax(format!("block [{name}] appears twice")));
            }
            present[b] = true;
            current = Some(b);
            continue;
        }
        let b = current.ok_or_else(|| syntax("values before any block header".into()))?;
        let (name, nrows, r0, c0, cols) = BLOCKS[b];
        if seen[b] == nrows {
            return Err(syntax(format!("too many rows in [{name}]")));
        }
        let values: Vec<f64> = content
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| syntax(format!("not a finite decimal: {tok:?}")))
            })
            .collect::<Result<_, _>>()?;
        if values.len() != cols {
            return Err(syntax(format!("[{name}] rows need {cols} values, got {}", values.len())));
        }
        rows[r0 + seen[b]][c0..c0 + cols].copy_from_slice(&values);
        seen[b] += 1;
    }

    for (b, &(name, nrows, ..)) in BLOCKS.iter().enumerate() {
        if !present[b] {
            return Err(MatrixFileError::MissingBlock(name));
        }
        if seen[b] != nrows {
            return Err(MatrixFileError::RowCount { block: name, got: seen[b], expected: nrows });
        }
    }
    Ok(ControllerMatrix::from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::default_phi;

    #[test]
    fn round_trip_is_exact() {
        let phi = default_phi();
        let text = format_matrix_file(&phi);
        assert!(text.starts_with("[A_c]\n0 0 0 0 0\n-50 0 0 0 0\n"));
        assert_eq!(parse_matrix_file(&text).unwrap(), phi);
    }

    #[test]
    fn printed_b_c_is_rejected() {
        // only four B_c rows, as printed
        let text = format_matrix_file(&default_phi());
        let mut lines: Vec<&str> = text.lines().collect();
        let b_start = lines.iter().position(|l| *l == "[B_c]").unwrap();
        lines.remove(b_start + 5);
        let short = lines.join("\n");
        assert_eq!(parse_matrix_file(&short), Err(MatrixFileError::RowCount { block: "B_c", got: 4, expected: 5 }));
    }

    #[test]
    fn malformed() {
        assert!(matches!(parse_matrix_file("1 2 3"), Err(MatrixFileError::Syntax { line: 1, .. })));
        assert!(matches!(parse_matrix_file("[X]"), Err(MatrixFileError::Syntax { line: 1, .. })));
        assert!(matches!(parse_matrix_file("[A_c]\n0 0 0 0"), Err(MatrixFileError::Syntax { line: 2, .. })));
        assert!(matches!(parse_matrix_file("[A_c]\n0 0 nan 0 0"), Err(MatrixFileError::Syntax { line: 2, .. })));
        assert_eq!(parse_matrix_file(""), Err(MatrixFileError::MissingBlock("A_c")));
    }
}
