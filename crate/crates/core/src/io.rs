//! Plain-text formats shared by the library and the CLI.

use std::io::{Read, Write};

use faer::{Mat, MatRef};

use crate::error::{Error, Result};

/// 17 significant digits; round-trips every finite `f64` exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Reads comma-separated numeric rows, skipping blank lines and `#` comments.
pub fn read_numeric_rows<R: Read>(input: R) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("record {}: bad number {f:?}", line + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn rows_to_mat(rows: &[Vec<f64>]) -> Result<Mat<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(Error::Parse("empty matrix".into()));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(Error::Parse(format!(
            "row {} has {} columns, expected {ncols}",
            bad + 1,
            rows[bad].len()
        )));
    }
    Ok(Mat::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn read_matrix_csv<R: Read>(input: R) -> Result<Mat<f64>> {
    rows_to_mat(&read_numeric_rows(input)?)
}

/// Dense row-major CSV, no header.
pub fn write_matrix_csv<W: Write>(m: MatRef<'_, f64>, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for i in 0..m.nrows() {
        w.write_record((0..m.ncols()).map(|j| fmt_f64(m[(i, j)])))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `header` followed by one record per row.
pub fn write_table<W, I, R>(out: W, header: &[&str], rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}
