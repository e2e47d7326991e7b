use crate::domain::{ColumnKind, Dataset, FeatureRow, Value};

#[derive(Debug, Clone, PartialEq)]
enum ColumnEncoding {
    /// `(x − min) / (max − min)`, or 0 for a constant column.
    MinMax { min: f64, max: f64 },
    /// One slot per vocabulary token plus a trailing "unseen" slot.
    OneHot { vocabulary: Vec<String> },
    Skip,
}

impl ColumnEncoding {
    fn width(&self) -> usize {
        match self {
            ColumnEncoding::MinMax { .. } => 1,
            ColumnEncoding::OneHot { vocabulary } => vocabulary.len() + 1,
            ColumnEncoding::Skip => 0,
        }
    }
}

/// One-hot + min-max feature encoding, fit on a training sample and reused
/// unchanged on every other split.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureEncoder {
    columns: Vec<ColumnEncoding>,
    width: usize,
}

impl FeatureEncoder {
    pub fn fit(d: &Dataset) -> Self {
        let all: Vec<usize> = (0..d.schema().len()).collect();
        Self::fit_subset(d, &all)
    }

    /// Encodes only the listed column positions; the rest are dropped.
    pub fn fit_subset(d: &Dataset, keep: &[usize]) -> Self {
        let columns: Vec<ColumnEncoding> = d
            .schema()
            .columns
            .iter()
            .enumerate()
            .map(|(j, col)| {
                if !keep.contains(&j) {
                    return ColumnEncoding::Skip;
                }
                match &col.kind {
                    ColumnKind::Numeric => {
                        let (min, max) = d
                            .rows()
                            .iter()
                            .filter_map(|r| r.values[j].as_num())
                            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
                        ColumnEncoding::MinMax { min, max }
                    }
                    ColumnKind::Categorical { vocabulary } => ColumnEncoding::OneHot { vocabulary: vocabulary.clone() },
                }
            })
            .collect();
        let width = columns.iter().map(ColumnEncoding::width).sum();
        FeatureEncoder { columns, width }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn encode_into(&self, row: &FeatureRow, out: &mut Vec<f64>) {
        for (enc, v) in self.columns.iter().zip(&row.values) {
            match (enc, v) {
                (ColumnEncoding::MinMax { min, max }, Value::Num(x)) => {
                    out.push(if max > min { (x - min) / (max - min) } else { 0.0 });
                }
                (ColumnEncoding::OneHot { vocabulary }, value) => {
                    let slot = value
                        .as_cat()
                        .and_then(|t| vocabulary.iter().position(|v| v == t))
                        .unwrap_or(vocabulary.len());
                    out.extend((0..=vocabulary.len()).map(|k| if k == slot { 1.0 } else { 0.0 }));
                }
                (ColumnEncoding::MinMax { .. }, Value::Cat(_)) => out.push(0.0),
                (ColumnEncoding::Skip, _) => {}
            }
        }
    }

    pub fn encode(&self, row: &FeatureRow) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width);
        self.encode_into(row, &mut out);
        out
    }

    pub fn encode_all(&self, rows: &[FeatureRow]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.encode(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Column, Schema};
    use std::sync::Arc;

    #[test]
    fn one_hot_and_min_max() {
        let schema = Arc::new(Schema::new(vec![Column::categorical("c", ["a", "b"]), Column::numeric("x")], "y").unwrap());
        let rows = vec![
            FeatureRow::new(vec![Value::Cat("a".into()), Value::Num(2.0)]),
            FeatureRow::new(vec![Value::Cat("b".into()), Value::Num(6.0)]),
        ];
        let d = Dataset::new(schema, rows, vec![0, 1]).unwrap();
        let enc = FeatureEncoder::fit(&d);
        assert_eq!(enc.width(), 4);
        assert_eq!(enc.encode(&d.rows()[0]), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(enc.encode(&d.rows()[1]), vec![0.0, 1.0, 0.0, 1.0]);
        let unseen = FeatureRow::new(vec![Value::Cat("zzz".into()), Value::Num(4.0)]);
        assert_eq!(enc.encode(&unseen), vec![0.0, 0.0, 1.0, 0.5]);
        let only_x = FeatureEncoder::fit_subset(&d, &[1]);
        assert_eq!(only_x.encode(&unseen), vec![0.5]);
    }
}
