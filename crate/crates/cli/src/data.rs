//! Reading observations and choosing the shift.

use std::path::Path;

use crate::error::{CliError, CliResult};

/// Parses column `column` of a comma-separated file after skipping
/// `header_rows` lines. Every value must be a positive finite decimal.
pub fn ingest_csv(path: &Path, column: usize, header_rows: usize) -> CliResult<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        if k < header_rows {
            continue;
        }
        let line = rec.position().map_or(k as u64 + 1, |p| p.line());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let field = rec
            .get(column)
            .ok_or_else(|| CliError::data(format!("line {line}: no column {column} (found {} fields)", rec.len())))?;
        let v: f64 = field
            .parse()
            .map_err(|_| CliError::data(format!("line {line}: '{field}' is not a number")))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(CliError::data(format!("line {line}: value {field} is not positive and finite")));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(CliError::data(format!("{} holds no data", path.display())));
    }
    Ok(out)
}

/// Largest multiple of 0.1 strictly below `min(values)`, floored at 0.
/// `values` are data on the base scale before shifting, e.g. log-data.
pub fn auto_shift(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::INFINITY, f64::min);
    if !m.is_finite() {
        return 0.0;
    }
    let mut s = (m * 10.0).floor() / 10.0;
    if s >= m {
        s = ((m * 10.0).floor() - 1.0) / 10.0;
    }
    s.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn single_column() {
        let f = file("1.0\n2.0\n");
        assert_eq!(ingest_csv(f.path(), 0, 0).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn header_and_second_column() {
        let f = file("id,claim\n1,3.5\n2,4.25\n");
        assert_eq!(ingest_csv(f.path(), 1, 1).unwrap(), vec![3.5, 4.25]);
    }

    #[test]
    fn negative_entry_names_line() {
        let f = file("1.0\n-3\n");
        let e = ingest_csv(f.path(), 0, 0).unwrap_err();
        assert!(e.message.contains("line 2"), "{e}");
    }

    #[test]
    fn text_entry_names_line() {
        let f = file("1.0\n2.0\nabc\n");
        let e = ingest_csv(f.path(), 0, 0).unwrap_err();
        assert!(e.message.contains("line 3"), "{e}");
    }

    #[test]
    fn empty_file() {
        let f = file("");
        assert!(ingest_csv(f.path(), 0, 0).is_err());
    }

    #[test]
    fn shift_examples() {
        assert_eq!(auto_shift(&[9.1, 8.53, 12.0]), 8.5);
        assert_eq!(auto_shift(&[0.04, 1.0]), 0.0);
        assert_eq!(auto_shift(&[8.5, 9.0]), 8.4);
        assert_eq!(auto_shift(&[0.3]), 0.2);
    }
}
