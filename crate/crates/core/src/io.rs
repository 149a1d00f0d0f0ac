//! Reading observation series and writing reports.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Reads a series from CSV. A header row is optional; with a header the
/// `value` column is used if present, otherwise the last column. Errors name
/// the offending line.
pub fn read_series<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut column: Option<usize> = None;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| Error::Data(format!("line {line}: {e}")))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if out.is_empty() && column.is_none() && rec.iter().any(|f| f.parse::<f64>().is_err()) {
            // header row
            column = Some(rec.iter().position(|f| f.eq_ignore_ascii_case("value")).unwrap_or(rec.len() - 1));
            continue;
        }
        let col = *column.get_or_insert(rec.len() - 1);
        let field = rec.get(col).ok_or_else(|| Error::Data(format!("line {line}: missing column {}", col + 1)))?;
        let v: f64 = field.parse().map_err(|_| Error::Data(format!("line {line}: cannot parse {field:?} as a number")))?;
        if !v.is_finite() {
            return Err(Error::Data(format!("line {line}: non-finite value")));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::Data("no observations found".into()));
    }
    Ok(out)
}

pub fn read_series_file(path: &Path) -> Result<Vec<f64>> {
    read_series(File::open(path)?)
}

/// Pretty-printed JSON report.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// CSV with a header from serialisable rows.
pub fn write_csv_rows<T: Serialize, W: Write>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers_and_columns() {
        assert_eq!(read_series("1.5\n2\n".as_bytes()).unwrap(), vec![1.5, 2.0]);
        let s = "index,time,value\n0,0,3.0\n1,0.1,4.0\n";
        assert_eq!(read_series(s.as_bytes()).unwrap(), vec![3.0, 4.0]);
    }

    #[test]
    fn bad_row_names_line() {
        let err = read_series("value\n1.0\nabc\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }
}
