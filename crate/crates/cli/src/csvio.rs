//! Matrix CSV reading and writing.
//!
//! Rows are observations, columns are variables. A first row containing any
//! cell that does not parse as a number is treated as a header.

use std::io::{Read, Write};
use std::path::Path;

use sarcca_core::Mat;

use crate::error::{CliError, CliResult};

/// Seventeen significant digits: re-reading the text recovers the value
/// bit for bit.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn read_matrix(path: &Path) -> CliResult<Mat> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::input(format!("cannot open {}: {e}", path.display())))?;
    parse_matrix(file, &path.display().to_string())
}

pub fn parse_matrix<R: Read>(source: R, label: &str) -> CliResult<Mat> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::input(format!("{label}: {e}")))?;
        let line = record.position().map_or(index as u64 + 1, |p| p.line());
        if let Some(w) = width {
            if record.len() != w {
                return Err(CliError::input(format!(
                    "{label}: row {line} has {} columns, expected {w}",
                    record.len()
                )));
            }
        }
        let parsed: Vec<Option<f64>> = record.iter().map(|c| c.parse::<f64>().ok()).collect();
        if index == 0 && parsed.iter().any(Option::is_none) {
            width = Some(record.len());
            continue;
        }
        width = Some(record.len());
        for (col, (cell, value)) in record.iter().zip(parsed).enumerate() {
            match value {
                Some(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(CliError::input(format!(
                        "{label}: row {line}, column {}: '{cell}' is not a finite number",
                        col + 1
                    )))
                }
            }
        }
        rows += 1;
    }
    let cols = width.unwrap_or(0);
    if rows == 0 || cols == 0 {
        return Err(CliError::input(format!("{label}: no numeric rows")));
    }
    Mat::from_shape_vec((rows, cols), values).map_err(|e| CliError::input(format!("{label}: {e}")))
}

pub fn write_matrix<W: Write>(sink: W, m: &Mat) -> CliResult<()> {
    let mut writer = csv::Writer::from_writer(sink);
    for row in m.rows() {
        writer
            .write_record(row.iter().map(|v| format_value(*v)))
            .map_err(|e| CliError::input(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_matrix_file(path: &Path, m: &Mat) -> CliResult<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", path.display())))?;
    write_matrix(std::io::BufWriter::new(file), m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn parse(text: &str) -> CliResult<Mat> {
        parse_matrix(text.as_bytes(), "test")
    }

    #[test]
    fn header_is_detected() {
        let m = parse("a,b\n1,2\n3,4\n").unwrap();
        assert_eq!(m, array![[1.0, 2.0], [3.0, 4.0]]);
        let m = parse("1,2\n3,4\n").unwrap();
        assert_eq!(m.nrows(), 2);
    }

    #[test]
    fn ragged_rows_are_reported() {
        let err = parse("1,2\n3\n").unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains("row 2"), "{}", err.message);
    }

    #[test]
    fn bad_cells_are_reported() {
        let err = parse("1,2\n3,x\n").unwrap_err();
        assert!(err.message.contains("row 2, column 2"), "{}", err.message);
        assert_eq!(parse("1,NaN\n").unwrap_err().code, 2);
        assert_eq!(parse("a,b\n").unwrap_err().code, 2);
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_identical(
            rows in 1usize..5,
            cols in 1usize..5,
            seed in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 25),
        ) {
            let m = Mat::from_shape_fn((rows, cols), |(i, j)| seed[i * 5 + j]);
            let mut buf = Vec::new();
            write_matrix(&mut buf, &m).unwrap();
            let back = parse_matrix(buf.as_slice(), "buf").unwrap();
            prop_assert_eq!(back.dim(), m.dim());
            for (a, b) in m.iter().zip(back.iter()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
