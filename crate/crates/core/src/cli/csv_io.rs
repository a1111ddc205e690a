//! CSV ingestion and emission.
//!
//! Input is comma-separated UTF-8 with a header row. Selected columns must
//! parse as decimal reals; empty fields and the tokens `NA`, `NaN`, `nan`,
//! `null` count as missing and drop the row.

use std::io::{Read, Write};

use crate::data::{Column, Dataset};
use crate::error::{Error, Result};

const MISSING_TOKENS: [&str; 6] = ["", "NA", "na", "NaN", "nan", "null"];

/// Selected columns of a CSV file after listwise deletion.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub dataset: Dataset,
    pub rows_read: usize,
    pub rows_dropped: usize,
}

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

/// Reads the named columns (in that order) from CSV text.
pub fn read_table<R: Read>(reader: R, selected: &[&str]) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| schema(format!("cannot read header row: {e}")))?
        .clone();
    if headers.is_empty() {
        return Err(schema("header row is empty"));
    }
    let mut positions = Vec::with_capacity(selected.len());
    for name in selected {
        let found: Vec<usize> = headers
            .iter()
            .enumerate()
            .filter(|(_, h)| h.trim() == *name)
            .map(|(i, _)| i)
            .collect();
        match found.as_slice() {
            [i] => positions.push(*i),
            [] => return Err(schema(format!("column `{name}` not found in header"))),
            _ => return Err(schema(format!("column `{name}` appears more than once in header"))),
        }
    }

    let mut values: Vec<Vec<f64>> = vec![Vec::new(); selected.len()];
    let mut rows_read = 0;
    let mut rows_dropped = 0;
    let mut row = Vec::with_capacity(selected.len());
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| schema(format!("row {}: {e}", r + 1)))?;
        rows_read += 1;
        row.clear();
        let mut missing = false;
        for (k, &pos) in positions.iter().enumerate() {
            let field = record.get(pos).unwrap_or("").trim();
            if MISSING_TOKENS.contains(&field) {
                missing = true;
                continue;
            }
            let v: f64 = field.parse().map_err(|_| {
                schema(format!(
                    "row {} column `{}`: cannot parse `{field}` as a number",
                    r + 1,
                    selected[k]
                ))
            })?;
            if !v.is_finite() {
                return Err(schema(format!(
                    "row {} column `{}`: non-finite value `{field}`",
                    r + 1,
                    selected[k]
                )));
            }
            row.push(v);
        }
        if missing {
            rows_dropped += 1;
            continue;
        }
        for (col, v) in values.iter_mut().zip(&row) {
            col.push(*v);
        }
    }
    let columns = selected
        .iter()
        .zip(values)
        .map(|(name, v)| Column::continuous(*name, v))
        .collect();
    Ok(Table {
        dataset: Dataset::new(columns).map_err(|e| schema(e.to_string()))?,
        rows_read,
        rows_dropped,
    })
}

/// Writes every column of `data` with a header row.
pub fn write_dataset<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(data.columns().iter().map(|c| c.name()))
        .map_err(to_io)?;
    for i in 0..data.n_rows() {
        w.write_record(data.columns().iter().map(|c| c.values()[i].to_string()))
            .map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_selected_columns_in_order() {
        let text = "a,b,c\n1,2,x\n3,4,y\n";
        let t = read_table(text.as_bytes(), &["b", "a"]).unwrap();
        assert_eq!(t.dataset.columns()[0].name(), "b");
        assert_eq!(t.dataset.require("b").unwrap().values(), &[2.0, 4.0]);
        assert_eq!(t.dataset.require("a").unwrap().values(), &[1.0, 3.0]);
        assert_eq!((t.rows_read, t.rows_dropped), (2, 0));
    }

    #[test]
    fn drops_rows_with_missing_values() {
        let text = "a,b\n1,2\n,4\n5,NA\n7,8\n9,\n";
        let t = read_table(text.as_bytes(), &["a", "b"]).unwrap();
        assert_eq!(t.dataset.n_rows(), 2);
        assert_eq!((t.rows_read, t.rows_dropped), (5, 3));
        // missing values outside the selection do not matter
        let t = read_table(text.as_bytes(), &["a"]).unwrap();
        assert_eq!(t.rows_dropped, 1);
    }

    #[test]
    fn unparseable_field_names_row_and_column() {
        let err = read_table("a,b\n1,2\n3,abc\n".as_bytes(), &["a", "b"]).unwrap_err();
        match err {
            Error::Schema(m) => assert!(m.contains("row 2") && m.contains("`b`"), "{m}"),
            other => panic!("{other:?}"),
        }
        assert!(read_table("a\ninf\n".as_bytes(), &["a"]).is_err());
    }

    #[test]
    fn header_problems() {
        assert!(matches!(read_table("a,b\n1,2\n".as_bytes(), &["z"]), Err(Error::Schema(_))));
        assert!(read_table("a,a\n1,2\n".as_bytes(), &["a"]).is_err());
        assert!(read_table("".as_bytes(), &["a"]).is_err());
        assert!(read_table("a,b\n1,2,3\n".as_bytes(), &["a"]).is_err());
    }

    #[test]
    fn write_then_read() {
        let d = Dataset::new(vec![
            Column::continuous("y", vec![0.1, -2.5e-7, 3.0]),
            Column::continuous("x", vec![1.0, 2.0, 1e300]),
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &d).unwrap();
        let t = read_table(buf.as_slice(), &["y", "x"]).unwrap();
        assert_eq!(t.dataset, d);
    }
}
