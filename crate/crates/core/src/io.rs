//! Delimited-text ingestion and the bundled phone-calls dataset.

use std::fs::File;
use std::io::{Read, Write};
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Path(PathBuf),
    Inline(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResponseColumn {
    Name(String),
    /// Zero-based column index.
    Index(usize),
    Last,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularSource {
    pub source: Source,
    pub delimiter: u8,
    pub has_header: bool,
    pub response: ResponseColumn,
    /// Prepend a column of ones.
    pub intercept: bool,
}

impl TabularSource {
    pub fn path(path: impl Into<PathBuf>) -> Self {
        Self::new(Source::Path(path.into()))
    }

    pub fn inline(bytes: impl Into<Vec<u8>>) -> Self {
        Self::new(Source::Inline(bytes.into()))
    }

    fn new(source: Source) -> Self {
        Self { source, delimiter: b',', has_header: true, response: ResponseColumn::Last, intercept: true }
    }
}

fn open(source: &Source) -> Result<Box<dyn Read>> {
    match source {
        Source::Path(p) => File::open(p)
            .map(|f| Box::new(f) as Box<dyn Read>)
            .map_err(|e| Error::Io { path: p.display().to_string(), source: e }),
        Source::Inline(bytes) => Ok(Box::new(std::io::Cursor::new(bytes.clone()))),
    }
}

/// Reads a numeric table. Rows reported in errors are 1-based line numbers
/// of the input, so the first data row under a header is row 2.
pub fn read_dataset(src: &TabularSource) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(src.delimiter)
        .has_headers(src.has_header)
        .trim(csv::Trim::All)
        .from_reader(open(&src.source)?);

    let mut names: Vec<String> = if src.has_header {
        reader.headers()?.iter().map(str::to_owned).collect()
    } else {
        Vec::new()
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if names.is_empty() {
            names = (0..record.len()).map(|j| format!("c{j}")).collect();
        }
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        let values = record
            .iter()
            .zip(&names)
            .map(|(cell, column)| {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row,
                    column: column.clone(),
                    value: cell.to_owned(),
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFiniteValue { row, column: column.clone() })
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::EmptySource);
    }

    let width = names.len();
    let response = match &src.response {
        ResponseColumn::Last => width - 1,
        ResponseColumn::Index(i) if *i < width => *i,
        ResponseColumn::Index(i) => {
            return Err(Error::InvalidInput(format!("response column {i} out of range (have {width})")));
        }
        ResponseColumn::Name(name) => names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::InvalidInput(format!("no column named {name:?}")))?,
    };
    if width < 2 {
        return Err(Error::InvalidInput("need a response and at least one predictor column".into()));
    }

    let n = rows.len();
    let predictors: Vec<usize> = (0..width).filter(|j| *j != response).collect();
    let x = DMatrix::from_fn(n, predictors.len(), |i, j| rows[i][predictors[j]]);
    let y = DVector::from_fn(n, |i, _| rows[i][response]);
    let names = predictors.iter().map(|j| names[*j].clone()).collect();
    let data = Dataset::with_names(x, y, names)?;
    if src.intercept {
        data.with_intercept()
    } else {
        Ok(data)
    }
}

/// Writes predictors then the response column `y`. Values use the shortest
/// decimal form that parses back to the same double.
pub fn write_dataset<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = data.names().iter().map(String::as_str).collect();
    header.push("y");
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut row: Vec<String> = data.x().row(i).iter().map(|v| v.to_string()).collect();
        row.push(data.y()[i].to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::Io { path: "<output>".into(), source: e })?;
    Ok(())
}

/// International phone calls from Belgium (tens of millions), 1950–1973.
pub const BELGIUM_CALLS: [(f64, f64); 24] = [
    (50.0, 0.44),
    (51.0, 0.47),
    (52.0, 0.47),
    (53.0, 0.59),
    (54.0, 0.66),
    (55.0, 0.73),
    (56.0, 0.81),
    (57.0, 0.88),
    (58.0, 1.06),
    (59.0, 1.2),
    (60.0, 1.35),
    (61.0, 1.49),
    (62.0, 1.61),
    (63.0, 2.12),
    (64.0, 11.9),
    (65.0, 12.4),
    (66.0, 14.2),
    (67.0, 15.9),
    (68.0, 18.2),
    (69.0, 21.2),
    (70.0, 4.3),
    (71.0, 2.4),
    (72.0, 2.7),
    (73.0, 2.9),
];

/// The phone-calls data with an intercept column; columns are
/// `intercept`, `year` (two digits) and the response is calls.
pub fn belgium_dataset() -> Dataset {
    let n = BELGIUM_CALLS.len();
    let x = DMatrix::from_fn(n, 1, |i, _| BELGIUM_CALLS[i].0);
    let y = DVector::from_fn(n, |i, _| BELGIUM_CALLS[i].1);
    Dataset::with_names(x, y, vec!["year".into()])
        .and_then(Dataset::with_intercept)
        .expect("bundled dataset is valid")
}

/// The bundled dataset as CSV text with columns `year,calls`.
pub fn belgium_csv() -> String {
    let mut s = String::from("year,calls\n");
    for (year, calls) in BELGIUM_CALLS {
        s.push_str(&format!("{year},{calls}\n"));
    }
    s
}
