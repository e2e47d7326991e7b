use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Separator used by the canonical row serialization.
pub const KEY_SEPARATOR: char = '\x1f';

/// A single cell value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Cat(String),
}

impl Value {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            Value::Cat(_) => None,
        }
    }

    pub fn as_cat(&self) -> Option<&str> {
        match self {
            Value::Cat(s) => Some(s),
            Value::Num(_) => None,
        }
    }

    /// Canonical text form: numbers with 17 significant digits, tokens verbatim.
    pub fn canonical(&self) -> String {
        match self {
            Value::Num(x) => format!("{x:.16e}"),
            Value::Cat(s) => s.clone(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x}"),
            Value::Cat(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    /// Declared vocabulary; tokens outside it are treated as "unseen".
    Categorical { vocabulary: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

impl Column {
    pub fn numeric(name: impl Into<String>) -> Self {
        Column { name: name.into(), kind: ColumnKind::Numeric }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, vocabulary: impl IntoIterator<Item = S>) -> Self {
        let mut vocabulary: Vec<String> = vocabulary.into_iter().map(Into::into).collect();
        vocabulary.sort();
        vocabulary.dedup();
        Column { name: name.into(), kind: ColumnKind::Categorical { vocabulary } }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, ColumnKind::Numeric)
    }
}

/// Feature columns plus the name and file position of the label column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<Column>,
    pub label: String,
    /// Position of the label column in the original header.
    pub label_position: usize,
}

impl Schema {
    pub fn new(columns: Vec<Column>, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        let mut seen = std::collections::HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) || c.name == label {
                return Err(Error::Schema(format!("duplicate column `{}`", c.name)));
            }
        }
        let label_position = columns.len();
        Ok(Schema { columns, label, label_position })
    }

    pub fn with_label_position(mut self, position: usize) -> Self {
        self.label_position = position.min(self.columns.len());
        self
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::Schema(format!("unknown column `{name}`")))
    }

    pub fn check_row(&self, row: &FeatureRow) -> Result<()> {
        if row.values.len() != self.columns.len() {
            return Err(Error::Schema(format!(
                "row has {} values, schema has {} columns",
                row.values.len(),
                self.columns.len()
            )));
        }
        for (v, c) in row.values.iter().zip(&self.columns) {
            let ok = match (&c.kind, v) {
                (ColumnKind::Numeric, Value::Num(x)) => x.is_finite(),
                (ColumnKind::Categorical { .. }, Value::Cat(_)) => true,
                _ => false,
            };
            if !ok {
                return Err(Error::Schema(format!("value `{v}` does not fit column `{}`", c.name)));
            }
        }
        Ok(())
    }

    /// Two schemas are compatible when their feature columns agree by name and kind
    /// (vocabularies may differ; unseen tokens are tolerated).
    pub fn compatible(&self, other: &Schema) -> bool {
        self.columns.len() == other.columns.len()
            && self
                .columns
                .iter()
                .zip(&other.columns)
                .all(|(a, b)| a.name == b.name && a.is_numeric() == b.is_numeric())
    }
}

/// A domain point: one value per schema column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub values: Vec<Value>,
}

impl FeatureRow {
    pub fn new(values: Vec<Value>) -> Self {
        FeatureRow { values }
    }

    /// Column-ordered, `\x1f`-joined canonical serialization used as row identity.
    pub fn canonical_key(&self) -> String {
        let mut key = String::new();
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                key.push(KEY_SEPARATOR);
            }
            key.push_str(&v.canonical());
        }
        key
    }
}

/// Labeled sample with multiset semantics: duplicate rows are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Arc<Schema>,
    rows: Vec<FeatureRow>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(schema: impl Into<Arc<Schema>>, rows: Vec<FeatureRow>, labels: Vec<u8>) -> Result<Self> {
        let schema = schema.into();
        if rows.len() != labels.len() {
            return Err(Error::Data(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::Data(format!("non-binary label {bad}")));
        }
        for row in &rows {
            schema.check_row(row)?;
        }
        Ok(Dataset { schema, rows, labels })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn schema_arc(&self) -> Arc<Schema> {
        Arc::clone(&self.schema)
    }

    pub fn rows(&self) -> &[FeatureRow] {
        &self.rows
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FeatureRow, u8)> {
        self.rows.iter().zip(self.labels.iter().copied())
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: Arc::clone(&self.schema),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Same rows, new labels.
    pub fn with_labels(&self, labels: Vec<u8>) -> Result<Dataset> {
        Dataset::new(Arc::clone(&self.schema), self.rows.clone(), labels)
    }

    /// Appends `other` after `self`. Schemas must be compatible.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if !self.schema.compatible(&other.schema) {
            return Err(Error::Schema("cannot concatenate datasets with different schemas".into()));
        }
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(Dataset { schema: Arc::clone(&self.schema), rows, labels })
    }

    /// Appends labeled rows that are assumed to conform to the schema.
    pub fn extended(&self, extra: impl IntoIterator<Item = (FeatureRow, u8)>) -> Result<Dataset> {
        let mut rows = self.rows.clone();
        let mut labels = self.labels.clone();
        for (row, y) in extra {
            self.schema.check_row(&row)?;
            rows.push(row);
            labels.push(y);
        }
        Dataset::new(Arc::clone(&self.schema), rows, labels)
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }
}
