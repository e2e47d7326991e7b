//! CSV ingestion and export for datasets and prediction files.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::domain::{Column, ColumnKind, Dataset, FeatureRow, Schema, Value};
use crate::error::{Error, Result};

/// Header of a prediction file.
pub const PREDICTION_HEADER: &str = "prediction";

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn parse_label(cell: &str, line: usize) -> Result<u8> {
    match cell.trim().parse::<f64>() {
        Ok(0.0) => Ok(0),
        Ok(1.0) => Ok(1),
        _ => Err(Error::Data(format!("line {line}: label `{cell}` is not binary"))),
    }
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Reads a CSV with a header row. Column kinds are inferred: numeric when every
/// cell parses as a finite number, categorical otherwise. Row order follows the file.
pub fn read_dataset(reader: impl Read, label_column: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(Error::Data("missing header row".into()));
    }
    let label_pos = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::Data(format!("label column `{label_column}` not found")))?;
    let records: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
    if records.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }

    let feature_pos: Vec<usize> = (0..header.len()).filter(|&i| i != label_pos).collect();
    let columns: Vec<Column> = feature_pos
        .iter()
        .map(|&i| {
            let numeric = records.iter().all(|r| r.get(i).and_then(parse_number).is_some());
            if numeric {
                Column::numeric(header[i].clone())
            } else {
                let vocab: BTreeSet<String> = records.iter().filter_map(|r| r.get(i)).map(|c| c.trim().to_string()).collect();
                Column::categorical(header[i].clone(), vocab)
            }
        })
        .collect();
    let schema = Schema::new(columns, label_column)?.with_label_position(label_pos);
    build_rows(&records, Arc::new(schema), &feature_pos, label_pos)
}

fn build_rows(records: &[csv::StringRecord], schema: Arc<Schema>, feature_pos: &[usize], label_pos: usize) -> Result<Dataset> {
    let mut rows = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    for (k, rec) in records.iter().enumerate() {
        let line = k + 2;
        let cell = |i: usize| rec.get(i).ok_or_else(|| Error::Data(format!("line {line}: too few fields")));
        labels.push(parse_label(cell(label_pos)?, line)?);
        let values = feature_pos
            .iter()
            .zip(&schema.columns)
            .map(|(&i, col)| {
                let raw = cell(i)?;
                match col.kind {
                    ColumnKind::Numeric => parse_number(raw)
                        .map(Value::Num)
                        .ok_or_else(|| Error::Data(format!("line {line}: `{raw}` in `{}` is not a number", col.name))),
                    ColumnKind::Categorical { .. } => Ok(Value::Cat(raw.trim().to_string())),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(FeatureRow::new(values));
    }
    Dataset::new(schema, rows, labels)
}

pub fn load_dataset(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    read_dataset(open(path)?, label_column).map_err(|e| e.context(path.display().to_string()))
}

/// Reads a CSV against an existing schema (used for evaluation files that must line
/// up with a training schema).
pub fn load_dataset_with_schema(path: impl AsRef<Path>, schema: &Arc<Schema>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(open(path)?);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let pos = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| Error::Data(format!("{}: missing column `{name}`", path.display())))
    };
    let label_pos = pos(&schema.label)?;
    let feature_pos = schema.columns.iter().map(|c| pos(&c.name)).collect::<Result<Vec<_>>>()?;
    let records: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
    build_rows(&records, Arc::clone(schema), &feature_pos, label_pos)
}

/// Writes the dataset with the original column order (label in its header position).
pub fn write_dataset(d: &Dataset, writer: impl Write) -> Result<()> {
    let schema = d.schema();
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
    header.insert(schema.label_position, &schema.label);
    w.write_record(&header)?;
    for (row, y) in d.iter() {
        let mut cells: Vec<String> = row.values.iter().map(|v| v.to_string()).collect();
        cells.insert(schema.label_position, y.to_string());
        w.write_record(&cells)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn save_dataset(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(d, f)
}

/// Reads a single-column `prediction` CSV; every value must lie in `[0, 1]`.
pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(open(path)?);
    let header = rdr.headers()?.clone();
    if header.len() != 1 || header.get(0).map(str::trim) != Some(PREDICTION_HEADER) {
        return Err(Error::Data(format!("{}: expected a single `{PREDICTION_HEADER}` column", path.display())));
    }
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let raw = rec.get(0).unwrap_or("");
        let x = parse_number(raw)
            .ok_or_else(|| Error::Data(format!("{} line {}: `{raw}` is not a number", path.display(), k + 2)))?;
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Data(format!("{} line {}: prediction {x} outside [0, 1]", path.display(), k + 2)));
        }
        out.push(x);
    }
    Ok(out)
}

pub fn write_predictions(preds: &[f64], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([PREDICTION_HEADER])?;
    for p in preds {
        w.write_record([p.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn save_predictions(preds: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_predictions(preds, f)
}
