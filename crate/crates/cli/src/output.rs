//! CSV emission: header row, comma separated, LF line endings, floats with
//! 17 significant digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Float(v) => write!(f, "{v:.16e}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

/// Writes a rectangular table; every row must match the header width.
pub fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<Cell>>) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for (r, row) in rows.enumerate() {
        if row.len() != header.len() {
            return Err(CliError::Io(format!(
                "{}: row {r} has {} cells, header has {}",
                path.display(),
                row.len(),
                header.len()
            )));
        }
        let line: Vec<String> = row.iter().map(Cell::to_string).collect();
        writeln!(out, "{}", line.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = Cell::Float(v).to_string();
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(Cell::Float(1.5).to_string(), "1.5000000000000000e0");
    }

    #[test]
    fn writes_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let header = vec!["t".to_string(), "E".to_string()];
        write_csv(&path, &header, vec![vec![Cell::Float(0.0), Cell::Int(3)]].into_iter()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "t,E\n0.0000000000000000e0,3\n");
        let bad = write_csv(&path, &header, vec![vec![Cell::Int(1)]].into_iter());
        assert!(bad.is_err());
    }
}
