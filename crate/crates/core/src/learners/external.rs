use std::collections::HashMap;
use std::path::Path;

use crate::domain::{Dataset, FeatureRow, Predictor};
use crate::error::{Error, Result};
use crate::io::load_predictions;
use crate::numeric::Scalar;

/// Predictions produced elsewhere, looked up by canonical row key.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalPredictions {
    table: HashMap<String, f64>,
}

impl ExternalPredictions {
    /// Builds the lookup from row-aligned `(dataset, predictions)` pairs.
    pub fn from_aligned<'a>(pairs: impl IntoIterator<Item = (&'a Dataset, &'a [f64])>) -> Result<Self> {
        let mut table = HashMap::new();
        for (d, preds) in pairs {
            if d.len() != preds.len() {
                return Err(Error::Data(format!(
                    "prediction file has {} rows but dataset has {}",
                    preds.len(),
                    d.len()
                )));
            }
            for (row, &p) in d.rows().iter().zip(preds) {
                if !(0.0..=1.0).contains(&p) || p.is_nan() {
                    return Err(Error::Data(format!("prediction {p} outside [0, 1]")));
                }
                let key = row.canonical_key();
                match table.get(&key) {
                    Some(&q) if q != p => {
                        return Err(Error::Data(format!(
                            "row `{}` has conflicting predictions {q} and {p}",
                            key.replace('\x1f', ",")
                        )))
                    }
                    _ => {
                        table.insert(key, p);
                    }
                }
            }
        }
        Ok(ExternalPredictions { table })
    }

    pub fn load(train_path: &Path, train: &Dataset, eval: Option<(&Path, &Dataset)>) -> Result<Self> {
        let train_preds = load_predictions(train_path)?;
        let mut pairs: Vec<(&Dataset, Vec<f64>)> = vec![(train, train_preds)];
        if let Some((path, d)) = eval {
            pairs.push((d, load_predictions(path)?));
        }
        ExternalPredictions::from_aligned(pairs.iter().map(|(d, p)| (*d, p.as_slice())))
    }

    pub fn lookup(&self, row: &FeatureRow) -> Result<f64> {
        let key = row.canonical_key();
        self.table.get(&key).copied().ok_or_else(|| Error::UnknownRow(key.replace('\x1f', ",")))
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl<T: Scalar> Predictor<T> for ExternalPredictions {
    fn predict_row(&self, row: &FeatureRow) -> Result<T> {
        self.lookup(row).map(T::lit)
    }
}
