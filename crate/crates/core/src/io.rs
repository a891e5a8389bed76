//! CSV helpers shared by the export functions.

use std::io::Write;

use crate::error::{Error, Result};

/// Shortest round-trippable scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a header row and equal-length numeric columns.
pub fn write_columns<W: Write>(mut w: W, headers: &[&str], columns: &[&[f64]]) -> Result<()> {
    let len = columns.first().map_or(0, |c| c.len());
    if headers.len() != columns.len() || columns.iter().any(|c| c.len() != len) {
        return Err(Error::LengthMismatch("csv columns".into()));
    }
    writeln!(w, "{}", headers.join(","))?;
    let mut line = String::new();
    for i in 0..len {
        line.clear();
        for (j, c) in columns.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&fmt_f64(c[i]));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Reads numeric comma-separated rows, skipping a header and `#` comments.
pub fn read_rows(text: &str, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.len() == width => rows.push(v),
            Err(_) if rows.is_empty() => continue,
            _ => {
                return Err(Error::LengthMismatch(format!(
                    "line {}: expected {width} numeric fields",
                    lineno + 1
                )))
            }
        }
    }
    Ok(rows)
}
