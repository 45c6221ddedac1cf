//! Trial datasets as CSV: header `Y,A,W1,...,Wk`, one observation per row.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ancova_core::TrialDataset;

use crate::error::{Error, Result};

pub fn load_csv(path: impl AsRef<Path>) -> Result<TrialDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, path)
}

/// Parses a dataset from `reader`; `source` names it in error messages.
pub fn read_csv<R: Read>(reader: R, source: impl AsRef<Path>) -> Result<TrialDataset> {
    let source = source.as_ref();
    let format = |reason: String| Error::Format {
        path: source.to_path_buf(),
        reason,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| format(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    for (i, name) in header.iter().enumerate() {
        if name.is_empty() {
            return Err(format(format!("column {} has an empty name", i + 1)));
        }
        if header[..i].contains(name) {
            return Err(format(format!("column `{name}` appears twice")));
        }
    }
    let find = |column: &str| {
        header
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| Error::MissingColumn {
                path: source.to_path_buf(),
                column: column.to_owned(),
            })
    };
    let (y_col, a_col) = (find("Y")?, find("A")?);
    let w_cols: Vec<usize> = (0..header.len()).filter(|&j| j != y_col && j != a_col).collect();

    let mut outcomes = Vec::new();
    let mut arms = Vec::new();
    let mut covariates = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| format(format!("row {row}: {e}")))?;
        let cell = |col: usize, reason: &str| Error::Cell {
            path: source.to_path_buf(),
            row,
            column: header[col].clone(),
            reason: reason.replace("{}", &record[col]),
        };
        let number = |col: usize| -> Result<f64> {
            let v: f64 = record[col]
                .parse()
                .map_err(|_| cell(col, "`{}` is not a number"))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(cell(col, "non-finite value `{}`"))
            }
        };
        outcomes.push(number(y_col)?);
        arms.push(match &record[a_col] {
            "0" => 0,
            "1" => 1,
            _ => return Err(cell(a_col, "arm indicator not in {0,1} (got `{}`)")),
        });
        for &j in &w_cols {
            covariates.push(number(j)?);
        }
    }
    if outcomes.len() < 2 {
        return Err(format(format!(
            "{} data rows; at least 2 are required",
            outcomes.len()
        )));
    }
    let names = w_cols.iter().map(|&j| header[j].clone()).collect();
    Ok(TrialDataset::new(outcomes, arms, covariates, names)?)
}

pub fn write_csv(path: impl AsRef<Path>, data: &TrialDataset) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(file, data).map_err(|e| Error::io(path, e))
}

/// Writes `data` with shortest round-trip number formatting.
pub fn write_csv_to<W: Write>(writer: W, data: &TrialDataset) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["Y".to_owned(), "A".to_owned()];
    header.extend(data.covariate_names().iter().cloned());
    wtr.write_record(&header)?;
    for i in 0..data.n() {
        let mut row = vec![format!("{:?}", data.outcomes()[i]), data.arms()[i].to_string()];
        row.extend(data.covariate_row(i).iter().map(|v| format!("{v:?}")));
        wtr.write_record(&row)?;
    }
    wtr.flush()
}
