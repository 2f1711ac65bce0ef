// SPDX-License-Identifier: MIT OR Apache-2.0

//! CSV panel ingestion and atomic artifact writes.

use std::io::{Read, Write};
use std::path::Path;

use corrshift::SeriesPanel;
use ndarray::Array2;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Rows are nodes and columns are time points.
    pub transpose: bool,
    /// Column holding time labels (node labels when transposed).
    pub time_col: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}, column {col}: cannot parse {cell:?} as a number")]
    ParseError { line: u64, col: usize, cell: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRows { line: u64, expected: usize, found: usize },
    #[error("line {line}, column {col}: non-finite value {cell:?}")]
    NonFiniteValue { line: u64, col: usize, cell: String },
    #[error("time column {0:?} not found in header")]
    MissingColumn(String),
    #[error("malformed CSV: {0}")]
    Malformed(String),
    #[error(transparent)]
    Panel(#[from] corrshift::Error),
}

pub fn load_csv(path: &Path, options: &LoadOptions) -> Result<SeriesPanel, LoadError> {
    let file = std::fs::File::open(path).map_err(|e| LoadError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    read_panel(file, options)
}

/// Parses a panel from any reader. Line numbers in errors are 1-based and
/// count the header; columns are 1-based.
pub fn read_panel<R: Read>(reader: R, options: &LoadOptions) -> Result<SeriesPanel, LoadError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| LoadError::Malformed(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let label_col = match &options.time_col {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| LoadError::MissingColumn(name.clone()))?,
        ),
        None => None,
    };

    let mut row_labels = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| LoadError::Malformed(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(LoadError::RaggedRows {
                line,
                expected: header.len(),
                found: record.len(),
            });
        }
        let mut values = Vec::with_capacity(header.len());
        for (c, cell) in record.iter().enumerate() {
            if Some(c) == label_col {
                row_labels.push(cell.to_owned());
                continue;
            }
            let x: f64 = cell.parse().map_err(|_| LoadError::ParseError {
                line,
                col: c + 1,
                cell: cell.to_owned(),
            })?;
            if !x.is_finite() {
                return Err(LoadError::NonFiniteValue {
                    line,
                    col: c + 1,
                    cell: cell.to_owned(),
                });
            }
            values.push(x);
        }
        rows.push(values);
    }
    let col_labels: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(c, _)| Some(*c) != label_col)
        .map(|(_, h)| h.clone())
        .collect();

    let (n_rows, n_cols) = (rows.len(), col_labels.len());
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let grid = Array2::from_shape_vec((n_rows, n_cols), flat).map_err(|e| LoadError::Malformed(e.to_string()))?;
    if options.transpose {
        let labels = if label_col.is_some() {
            row_labels
        } else {
            (1..=n_rows).map(|i| format!("V{i}")).collect()
        };
        Ok(SeriesPanel::new(grid, labels)?.with_time_labels(col_labels)?)
    } else {
        let panel = SeriesPanel::new(grid.reversed_axes().as_standard_layout().to_owned(), col_labels)?;
        Ok(match label_col {
            Some(_) => panel.with_time_labels(row_labels)?,
            None => panel,
        })
    }
}

/// Writes `contents` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> std::io::Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(dir.join(name)).map_err(|e| e.error)?;
    Ok(())
}

/// Serializes a panel in the default layout: one row per time point, a
/// header of node labels, and a leading time column when labels exist.
pub fn panel_to_csv(panel: &SeriesPanel, time_header: &str) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let labels = panel.time_labels();
    let mut header: Vec<&str> = Vec::new();
    if labels.is_some() {
        header.push(time_header);
    }
    header.extend(panel.node_labels().iter().map(String::as_str));
    wtr.write_record(&header).expect("in-memory write");
    for t in 0..panel.n_times() {
        let mut record: Vec<String> = Vec::with_capacity(header.len());
        if let Some(l) = labels {
            record.push(l[t].clone());
        }
        record.extend(panel.values().column(t).iter().map(|x| x.to_string()));
        wtr.write_record(&record).expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("ascii output")
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "a,b,c\n1,2,3\n4,5,6\n7,8,9.5\n1,0,1\n2,2,0\n";

    #[test]
    fn default_layout() {
        let p = read_panel(SAMPLE.as_bytes(), &LoadOptions::default()).unwrap();
        assert_eq!((p.n_nodes(), p.n_times()), (3, 5));
        assert_eq!(p.node_labels(), &["a", "b", "c"]);
        assert_eq!(p.row(2).to_vec(), vec![3.0, 6.0, 9.5, 1.0, 0.0]);
        assert!(!p.is_standardized());
    }

    #[test]
    fn transposed_layout() {
        let src = "a,b,c,d\n1,2,3,0\n4,5,6,1\n";
        let opts = LoadOptions { transpose: true, time_col: None };
        let p = read_panel(src.as_bytes(), &opts).unwrap();
        assert_eq!((p.n_nodes(), p.n_times()), (2, 4));
        assert_eq!(p.row(1).to_vec(), vec![4.0, 5.0, 6.0, 1.0]);
        assert_eq!(p.node_labels(), &["V1", "V2"]);
        assert_eq!(p.time_labels().unwrap(), &["a", "b", "c", "d"]);
    }

    #[test]
    fn time_column_becomes_labels() {
        let src = "date,x,y\nd1,1,2\nd2,3,1\nd3,0,0\nd4,5,5\n";
        let opts = LoadOptions { transpose: false, time_col: Some("date".into()) };
        let p = read_panel(src.as_bytes(), &opts).unwrap();
        assert_eq!((p.n_nodes(), p.n_times()), (2, 4));
        assert_eq!(p.time_labels().unwrap(), &["d1", "d2", "d3", "d4"]);
        let opts = LoadOptions { transpose: false, time_col: Some("when".into()) };
        assert!(matches!(read_panel(src.as_bytes(), &opts), Err(LoadError::MissingColumn(_))));
    }

    #[test]
    fn cell_errors_are_located() {
        let bad = "a,b\n1,2\n3,NaN\n1,1\n2,2\n";
        match read_panel(bad.as_bytes(), &LoadOptions::default()) {
            Err(LoadError::NonFiniteValue { line, col, cell }) => {
                assert_eq!((line, col, cell.as_str()), (3, 2, "NaN"));
            }
            other => panic!("{other:?}"),
        }
        let bad = "a,b\n1,2\n3,4\nx1,1\n2,2\n";
        match read_panel(bad.as_bytes(), &LoadOptions::default()) {
            Err(LoadError::ParseError { line, col, .. }) => assert_eq!((line, col), (4, 1)),
            other => panic!("{other:?}"),
        }
        let bad = "a,b\n1,2\n3\n1,1\n2,2\n";
        assert!(matches!(
            read_panel(bad.as_bytes(), &LoadOptions::default()),
            Err(LoadError::RaggedRows { line: 3, expected: 2, found: 1 })
        ));
    }

    #[test]
    fn panel_csv_round_trip() {
        let src = "date,x,y\nd1,1.5,2\nd2,3,-1\nd3,0,0.25\nd4,5,5\n";
        let opts = LoadOptions { transpose: false, time_col: Some("date".into()) };
        let p = read_panel(src.as_bytes(), &opts).unwrap();
        let out = panel_to_csv(&p, "date");
        assert_eq!(read_panel(out.as_bytes(), &opts).unwrap(), p);
    }
}
