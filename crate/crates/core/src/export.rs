//! CSV and JSON output helpers shared by the trajectory, scan and audit writers.
//!
//! CSV files are comma-separated with a header row and LF line endings. Floats
//! are written in scientific notation with 13 significant digits, which is
//! enough to reproduce any value to well below the tolerances used elsewhere.

use std::io::Write;

use crate::error::Result;

/// Significant digits after the leading one in CSV floats.
pub const CSV_FRACTION_DIGITS: usize = 12;

pub fn fmt_float(x: f64) -> String {
    format!("{:.*e}", CSV_FRACTION_DIGITS, x)
}

/// Writes a header row and then one row per item.
pub fn write_csv<W, I>(mut w: W, header: &[&str], rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = Vec<f64>>,
{
    w.write_all(header.join(",").as_bytes())?;
    w.write_all(b"\n")?;
    for row in rows {
        let line: Vec<String> = row.into_iter().map(fmt_float).collect();
        w.write_all(line.join(",").as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline; struct fields keep declaration order.
pub fn write_json<W: Write, T: serde::Serialize>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_csv(
            &mut buf,
            &["a", "b"],
            vec![vec![0.5, -2.0], vec![1.0 / 3.0, 1e-20]],
        )
        .unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.split('\n').collect();
        assert_eq!(lines[0], "a,b");
        assert_eq!(lines.len(), 4);
        assert!(!s.contains('\r'));
        let back: f64 = lines[2].split(',').next().unwrap().parse().unwrap();
        assert!((back - 1.0 / 3.0).abs() < 1e-12);
    }
}
