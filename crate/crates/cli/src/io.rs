//! CSV ingestion and emission. Numbers are written with 17 significant
//! digits so a write/read cycle reproduces every value bit for bit.

use std::fs;
use std::path::Path;

use egreg_core::matrix::Dataset;
use egreg_core::sim::format_sig17;
use nalgebra::DMatrix;

use crate::error::{CliError, Result};

/// A numeric CSV file with a header row.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub values: DMatrix<f64>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Usage(format!("no column named '{name}'")))
    }

    pub fn columns(&self, names: &[String]) -> Result<DMatrix<f64>> {
        let idx = names
            .iter()
            .map(|n| self.column_index(n))
            .collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_fn(self.values.nrows(), idx.len(), |i, j| self.values[(i, idx[j])]))
    }
}

pub fn parse_table(text: &str, origin: &str) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{origin}: line 1: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers.is_empty() || headers.iter().any(String::is_empty) {
        return Err(CliError::Data(format!("{origin}: line 1: empty column name")));
    }
    let mut data = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Data(format!("{origin}: line {line}: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::Data(format!(
                    "{origin}: line {line}, column '{}': cannot parse '{field}' as a number",
                    headers[j]
                ))
            })?;
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(CliError::Data(format!("{origin}: no data rows")));
    }
    Ok(Table {
        values: DMatrix::from_row_slice(rows, headers.len(), &data),
        headers,
    })
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_table(&text, &path.display().to_string())
}

/// Dataset with its column names.
#[derive(Clone, Debug)]
pub struct LabeledData {
    pub data: Dataset,
    pub predictors: Vec<String>,
    pub responses: Vec<String>,
}

/// Splits a table into responses (named) and predictors (the named ones,
/// or every remaining column).
pub fn labeled(table: &Table, responses: &[String], predictors: Option<&[String]>) -> Result<LabeledData> {
    if responses.is_empty() {
        return Err(CliError::Usage("at least one --response column is required".into()));
    }
    let predictors: Vec<String> = match predictors {
        Some(p) if !p.is_empty() => p.to_vec(),
        _ => table
            .headers
            .iter()
            .filter(|h| !responses.contains(h))
            .cloned()
            .collect(),
    };
    if predictors.is_empty() {
        return Err(CliError::Usage("no predictor columns left".into()));
    }
    let data = Dataset::new(table.columns(&predictors)?, table.columns(responses)?)?;
    Ok(LabeledData {
        data,
        predictors,
        responses: responses.to_vec(),
    })
}

pub fn read_dataset(path: &Path, responses: &[String], predictors: Option<&[String]>) -> Result<LabeledData> {
    labeled(&read_table(path)?, responses, predictors)
}

pub fn table_to_csv(headers: &[String], values: &DMatrix<f64>) -> String {
    let mut out = headers.join(",");
    out.push('\n');
    for row in values.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format_sig17(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Writes `x` and `y` side by side under the given names.
pub fn dataset_to_csv(data: &LabeledData) -> String {
    let (x, y) = (data.data.x(), data.data.y());
    let both = DMatrix::from_fn(x.nrows(), x.ncols() + y.ncols(), |i, j| {
        if j < x.ncols() {
            x[(i, j)]
        } else {
            y[(i, j - x.ncols())]
        }
    });
    let headers: Vec<String> = data.predictors.iter().chain(&data.responses).cloned().collect();
    table_to_csv(&headers, &both)
}
