use std::fmt;
use std::sync::Arc;

use crate::domain::dataset::FeatureRow;
use crate::domain::group::GroupPredicate;
use crate::error::Result;
use crate::numeric::Scalar;

/// A deterministic prediction function `row -> [0, 1]`.
pub trait Predictor<T: Scalar>: Send + Sync {
    fn predict_row(&self, row: &FeatureRow) -> Result<T>;

    fn predict_rows(&self, rows: &[FeatureRow]) -> Result<Vec<T>> {
        rows.iter().map(|r| self.predict_row(r)).collect()
    }
}

impl<T: Scalar, P: Predictor<T> + ?Sized> Predictor<T> for Arc<P> {
    fn predict_row(&self, row: &FeatureRow) -> Result<T> {
        (**self).predict_row(row)
    }

    fn predict_rows(&self, rows: &[FeatureRow]) -> Result<Vec<T>> {
        (**self).predict_rows(rows)
    }
}

impl<T: Scalar, P: Predictor<T> + ?Sized> Predictor<T> for Box<P> {
    fn predict_row(&self, row: &FeatureRow) -> Result<T> {
        (**self).predict_row(row)
    }

    fn predict_rows(&self, rows: &[FeatureRow]) -> Result<Vec<T>> {
        (**self).predict_rows(rows)
    }
}

/// Predicts the same value everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct Constant<T>(pub T);

impl<T: Scalar> Predictor<T> for Constant<T> {
    fn predict_row(&self, _row: &FeatureRow) -> Result<T> {
        Ok(self.0.clone())
    }
}

/// Wraps a closure as a predictor.
pub struct FnPredictor<F>(pub F);

impl<T: Scalar, F: Fn(&FeatureRow) -> T + Send + Sync> Predictor<T> for FnPredictor<F> {
    fn predict_row(&self, row: &FeatureRow) -> Result<T> {
        Ok((self.0)(row))
    }
}

/// One boosting update: rows in `group` have `delta` subtracted, then are clipped.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch<T> {
    pub group: GroupPredicate,
    pub delta: T,
}

/// A base predictor followed by an ordered list of group patches.
#[derive(Clone)]
pub struct PatchedPredictor<T: Scalar> {
    base: Arc<dyn Predictor<T>>,
    patches: Vec<Patch<T>>,
}

impl<T: Scalar> fmt::Debug for PatchedPredictor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PatchedPredictor").field("patches", &self.patches).finish_non_exhaustive()
    }
}

impl<T: Scalar> PatchedPredictor<T> {
    pub fn new(base: Arc<dyn Predictor<T>>) -> Self {
        PatchedPredictor { base, patches: Vec::new() }
    }

    pub fn from_base(base: impl Predictor<T> + 'static) -> Self {
        PatchedPredictor::new(Arc::new(base))
    }

    pub fn with_patches(base: Arc<dyn Predictor<T>>, patches: Vec<Patch<T>>) -> Self {
        PatchedPredictor { base, patches }
    }

    pub fn push(&mut self, group: GroupPredicate, delta: T) {
        self.patches.push(Patch { group, delta });
    }

    pub fn patches(&self) -> &[Patch<T>] {
        &self.patches
    }

    pub fn base(&self) -> &Arc<dyn Predictor<T>> {
        &self.base
    }

    /// Base output clipped to `[0, 1]`.
    pub fn base_predictions(&self, rows: &[FeatureRow]) -> Result<Vec<T>> {
        Ok(self.base.predict_rows(rows)?.into_iter().map(Scalar::clip01).collect())
    }

    /// Replays the patch list in order, clipping after every patch.
    pub fn predict(&self, rows: &[FeatureRow]) -> Result<Vec<T>> {
        let mut preds = self.base_predictions(rows)?;
        let mut masks: Vec<(&GroupPredicate, Vec<bool>)> = Vec::new();
        for patch in &self.patches {
            let slot = match masks.iter().position(|(g, _)| *g == &patch.group) {
                Some(i) => i,
                None => {
                    masks.push((&patch.group, patch.group.membership(rows)));
                    masks.len() - 1
                }
            };
            let mask = &masks[slot].1;
            for (p, &inside) in preds.iter_mut().zip(mask.iter()) {
                if inside {
                    *p = (p.clone() - patch.delta.clone()).clip01();
                }
            }
        }
        Ok(preds)
    }
}

impl<T: Scalar> Predictor<T> for PatchedPredictor<T> {
    fn predict_row(&self, row: &FeatureRow) -> Result<T> {
        let mut p = self.base.predict_row(row)?.clip01();
        for patch in &self.patches {
            if patch.group.contains(row) {
                p = (p - patch.delta.clone()).clip01();
            }
        }
        Ok(p)
    }

    fn predict_rows(&self, rows: &[FeatureRow]) -> Result<Vec<T>> {
        self.predict(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::dataset::{Column, Schema, Value};

    fn setup() -> (Schema, Vec<FeatureRow>) {
        let schema = Schema::new(vec![Column::categorical("g", ["A", "B"])], "y").unwrap();
        let rows = ["A", "A", "B"].iter().map(|t| FeatureRow::new(vec![Value::Cat(t.to_string())])).collect();
        (schema, rows)
    }

    #[test]
    fn empty_patch_list_returns_base() {
        let (_, rows) = setup();
        let p = PatchedPredictor::from_base(Constant(0.5f64));
        assert_eq!(p.predict(&rows).unwrap(), vec![0.5; 3]);
    }

    #[test]
    fn negative_delta_raises_prediction() {
        let (schema, rows) = setup();
        let a = GroupPredicate::parse("A: g==A", &schema).unwrap();
        let mut p = PatchedPredictor::from_base(Constant(0.5f64));
        p.push(a, -0.2);
        let out = p.predict(&rows).unwrap();
        assert!((out[0] - 0.7).abs() < 1e-15);
        assert_eq!(out[2], 0.5);
    }

    #[test]
    fn clips_after_each_patch() {
        let (_, rows) = setup();
        let mut p = PatchedPredictor::from_base(Constant(0.9f64));
        p.push(GroupPredicate::all(), -0.2);
        assert_eq!(p.predict(&rows).unwrap(), vec![1.0; 3]);
        // Order matters: clip at 1 then step down lands at 0.8, not 0.9.
        p.push(GroupPredicate::all(), 0.2);
        assert!((p.predict(&rows).unwrap()[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn row_and_batch_paths_agree() {
        let (schema, rows) = setup();
        let mut p = PatchedPredictor::from_base(Constant(0.3f64));
        p.push(GroupPredicate::parse("B: g==B", &schema).unwrap(), 0.5);
        p.push(GroupPredicate::all(), -0.1);
        let batch = p.predict(&rows).unwrap();
        for (r, b) in rows.iter().zip(batch) {
            assert_eq!(p.predict_row(r).unwrap(), b);
        }
    }
}
