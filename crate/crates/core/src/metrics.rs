//! Per-group evaluation: multiaccuracy error, thresholded accuracy, and both
//! sides of the multigroup-robustness inequalities.
//!
//! Sign convention: `ma_err` is `(1/n) Σ (p(x) − y) 1[x ∈ C]`, the negation of
//! the residual `E[(y − p(x)) 1[x ∈ C]]` used when stating multiaccuracy.
//! Anything that checks a multiaccuracy bound should use the absolute value.

use serde::{Deserialize, Serialize};

use crate::domain::{
    multiset_symmetric_difference, restricted_statistical_distance, Dataset, FeatureRow, GroupClass, GroupPredicate,
    LabeledDistribution, Predictor,
};
use crate::error::{Error, Result};
use crate::numeric::{pairwise_sum, pairwise_sum_by, Scalar};

fn label<T: Scalar>(y: u8) -> T {
    if y == 1 {
        T::one()
    } else {
        T::zero()
    }
}

/// `(1/normalizer) Σ_i (p_i − y_i) 1[mask_i]`.
pub fn ma_err_from_predictions<T: Scalar>(preds: &[T], labels: &[u8], mask: &[bool], normalizer: usize) -> Result<T> {
    if normalizer == 0 {
        return Err(Error::InvalidParameter("ma_err normalizer must be positive".into()));
    }
    let sum = pairwise_sum_by(preds.len(), &|i| {
        if mask[i] {
            preds[i].clone() - label::<T>(labels[i])
        } else {
            T::zero()
        }
    });
    Ok(sum / T::count(normalizer))
}

/// Multiaccuracy error of `p` on group `g`, normalized by `|d|`.
pub fn ma_err<T: Scalar>(p: &(impl Predictor<T> + ?Sized), d: &Dataset, g: &GroupPredicate) -> Result<T> {
    ma_err_normalized(p, d, g, d.len())
}

pub fn ma_err_normalized<T: Scalar>(
    p: &(impl Predictor<T> + ?Sized),
    d: &Dataset,
    g: &GroupPredicate,
    normalizer: usize,
) -> Result<T> {
    let preds = p.predict_rows(d.rows())?;
    ma_err_from_predictions(&preds, d.labels(), &g.membership(d.rows()), normalizer)
}

/// Diagnostic variant normalized by the group's own size.
pub fn ma_err_group_normalized<T: Scalar>(p: &(impl Predictor<T> + ?Sized), d: &Dataset, g: &GroupPredicate) -> Result<T> {
    let mask = g.membership(d.rows());
    let support = mask.iter().filter(|&&m| m).count();
    if support == 0 {
        return Err(Error::EmptyGroup(g.name.clone()));
    }
    let preds = p.predict_rows(d.rows())?;
    ma_err_from_predictions(&preds, d.labels(), &mask, support)
}

/// Fraction of group rows with `1[p > gamma] == y`.
pub fn accuracy_from_predictions<T: Scalar>(preds: &[T], labels: &[u8], mask: &[bool], gamma: &T, group: &str) -> Result<T> {
    let mut support = 0usize;
    let mut correct = 0usize;
    for i in 0..preds.len() {
        if mask[i] {
            support += 1;
            let predicted = u8::from(preds[i] > *gamma);
            if predicted == labels[i] {
                correct += 1;
            }
        }
    }
    if support == 0 {
        return Err(Error::EmptyGroup(group.to_string()));
    }
    Ok(T::count(correct) / T::count(support))
}

pub fn accuracy<T: Scalar>(p: &(impl Predictor<T> + ?Sized), d: &Dataset, g: &GroupPredicate, gamma: &T) -> Result<T> {
    let preds = p.predict_rows(d.rows())?;
    accuracy_from_predictions(&preds, d.labels(), &g.membership(d.rows()), gamma, &g.name)
}

/// `{0.00, 0.01, …, 1.00}`.
pub fn default_gamma_grid<T: Scalar>() -> Vec<T> {
    (0..=100).map(|i| T::count(i) / T::count(100)).collect()
}

/// Grid value maximizing overall accuracy; ties go to the smallest threshold.
pub fn optimize_gamma_from_predictions<T: Scalar>(preds: &[T], labels: &[u8], grid: &[T]) -> Result<T> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty gamma grid".into()));
    }
    if preds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mask = vec![true; preds.len()];
    let mut sorted: Vec<T> = grid.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("comparable grid"));
    let mut best: Option<(T, T)> = None;
    for gamma in sorted {
        let acc = accuracy_from_predictions(preds, labels, &mask, &gamma, "ALL")?;
        if best.as_ref().is_none_or(|(_, b)| acc > *b) {
            best = Some((gamma, acc));
        }
    }
    Ok(best.expect("non-empty grid").0)
}

pub fn optimize_gamma<T: Scalar>(p: &(impl Predictor<T> + ?Sized), validation: &Dataset, grid: &[T]) -> Result<T> {
    if validation.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let preds = p.predict_rows(validation.rows())?;
    optimize_gamma_from_predictions(&preds, validation.labels(), grid)
}

/// Accuracy and multiaccuracy error of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport<T = f64> {
    pub group: String,
    pub ma_err: T,
    pub abs_ma_err: T,
    /// `None` when the group is empty.
    pub accuracy: Option<T>,
    pub support: usize,
}

impl<T: Scalar> GroupReport<T> {
    pub fn is_empty(&self) -> bool {
        self.support == 0
    }
}

pub fn group_reports_from_predictions<T: Scalar>(
    preds: &[T],
    d: &Dataset,
    groups: &GroupClass,
    gamma: &T,
) -> Result<Vec<GroupReport<T>>> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    groups
        .iter()
        .map(|g| {
            let mask = g.membership(d.rows());
            let support = mask.iter().filter(|&&m| m).count();
            let ma = ma_err_from_predictions(preds, d.labels(), &mask, d.len())?;
            let accuracy = if support > 0 {
                Some(accuracy_from_predictions(preds, d.labels(), &mask, gamma, &g.name)?)
            } else {
                None
            };
            Ok(GroupReport { group: g.name.clone(), abs_ma_err: ma.abs(), ma_err: ma, accuracy, support })
        })
        .collect()
}

pub fn group_reports<T: Scalar>(
    p: &(impl Predictor<T> + ?Sized),
    d: &Dataset,
    groups: &GroupClass,
    gamma: &T,
) -> Result<Vec<GroupReport<T>>> {
    let preds = p.predict_rows(d.rows())?;
    group_reports_from_predictions(&preds, d, groups, gamma)
}

/// One group's multigroup-robustness inequality: `lhs ≤ label_term + sym_diff_term + epsilon_slack`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessCheck<T = f64> {
    pub group: String,
    pub lhs: T,
    pub label_term: T,
    pub sym_diff_term: T,
    pub epsilon_slack: T,
    pub satisfied: bool,
    /// Rows of the evaluation sample falling in the group.
    pub support: usize,
}

impl<T: Scalar> RobustnessCheck<T> {
    fn new(group: &str, lhs: T, label_term: T, sym_diff_term: T, epsilon_slack: T, support: usize) -> Self {
        let bound = label_term.clone() + sym_diff_term.clone() + epsilon_slack.clone();
        RobustnessCheck {
            group: group.to_string(),
            satisfied: lhs <= bound,
            lhs,
            label_term,
            sym_diff_term,
            epsilon_slack,
            support,
        }
    }

    pub fn bound(&self) -> T {
        self.label_term.clone() + self.sym_diff_term.clone() + self.epsilon_slack.clone()
    }
}

/// Label and symmetric-difference terms of the sample-corruption bound for one group,
/// both divided by `|s|`.
pub fn bound_terms<T: Scalar>(s: &Dataset, s2: &Dataset, g: &GroupPredicate) -> Result<(T, T)> {
    if s.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let positives = |d: &Dataset| d.iter().filter(|(r, y)| *y == 1 && g.contains(r)).count() as i64;
    let label_diff = (positives(s) - positives(s2)).unsigned_abs() as usize;
    let sym = multiset_symmetric_difference(s, s2, g)?;
    let n = T::count(s.len());
    Ok((T::count(label_diff) / n.clone(), T::count(sym) / n))
}

/// Checks the sample-corruption robustness inequality for every group, estimating the
/// left-hand side on `eval_rows` as a sample of the clean marginal.
#[allow(clippy::too_many_arguments)]
pub fn robustness_check<T: Scalar>(
    p: &(impl Predictor<T> + ?Sized),
    p2: &(impl Predictor<T> + ?Sized),
    s: &Dataset,
    s2: &Dataset,
    eval_rows: &[FeatureRow],
    groups: &GroupClass,
    eps: &T,
) -> Result<Vec<RobustnessCheck<T>>> {
    let preds = p.predict_rows(eval_rows)?;
    let preds2 = p2.predict_rows(eval_rows)?;
    robustness_check_from_predictions(&preds, &preds2, s, s2, eval_rows, groups, eps)
}

pub fn robustness_check_from_predictions<T: Scalar>(
    preds: &[T],
    preds2: &[T],
    s: &Dataset,
    s2: &Dataset,
    eval_rows: &[FeatureRow],
    groups: &GroupClass,
    eps: &T,
) -> Result<Vec<RobustnessCheck<T>>> {
    if s.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if eval_rows.is_empty() {
        return Err(Error::InvalidParameter("robustness check needs evaluation rows".into()));
    }
    let m = T::count(eval_rows.len());
    groups
        .iter()
        .map(|g| {
            let mask = g.membership(eval_rows);
            let support = mask.iter().filter(|&&b| b).count();
            let gap = pairwise_sum_by(eval_rows.len(), &|i| {
                if mask[i] {
                    preds[i].clone() - preds2[i].clone()
                } else {
                    T::zero()
                }
            });
            let lhs = (gap / m.clone()).abs();
            let (label_term, sym_diff_term) = bound_terms::<T>(s, s2, g)?;
            Ok(RobustnessCheck::new(&g.name, lhs, label_term, sym_diff_term, eps.clone(), support))
        })
        .collect()
}

/// Checks the distribution-shift robustness inequality with exact expectations over
/// the enumerated support of `d`. The `sym_diff_term` field holds the restricted
/// statistical distance between the two marginals.
pub fn distshift_check<T: Scalar>(
    p: &(impl Predictor<T> + ?Sized),
    p2: &(impl Predictor<T> + ?Sized),
    d: &LabeledDistribution<T>,
    d2: &LabeledDistribution<T>,
    groups: &GroupClass,
    eps: &T,
) -> Result<Vec<RobustnessCheck<T>>> {
    let rows: Vec<FeatureRow> = d.points().iter().map(|(r, _, _)| r.clone()).collect();
    let weights: Vec<T> = d.points().iter().map(|(_, _, w)| w.clone()).collect();
    let preds = p.predict_rows(&rows)?;
    let preds2 = p2.predict_rows(&rows)?;
    let (dx, d2x) = (d.marginal(), d2.marginal());
    groups
        .iter()
        .map(|g| {
            let mask = g.membership(&rows);
            let support = mask.iter().filter(|&&b| b).count();
            let terms: Vec<T> = (0..rows.len())
                .filter(|&i| mask[i])
                .map(|i| weights[i].clone() * (preds[i].clone() - preds2[i].clone()))
                .collect();
            let lhs = pairwise_sum(&terms).abs();
            let label_term = (d.label_mass(g) - d2.label_mass(g)).abs();
            let shift = restricted_statistical_distance(&dx, &d2x, g);
            Ok(RobustnessCheck::new(&g.name, lhs, label_term, shift, eps.clone(), support))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Column, Constant, FeatureRow, FnPredictor, Schema, Value};
    use std::sync::Arc;

    fn schema() -> Arc<Schema> {
        Arc::new(Schema::new(vec![Column::numeric("id"), Column::categorical("g", ["A", "B"])], "y").unwrap())
    }

    fn f1() -> (Dataset, GroupClass) {
        let schema = schema();
        let rows = (0..4)
            .map(|i| FeatureRow::new(vec![Value::Num(i as f64), Value::Cat(if i < 2 { "A" } else { "B" }.into())]))
            .collect();
        let d = Dataset::new(Arc::clone(&schema), rows, vec![1, 1, 0, 0]).unwrap();
        let groups = GroupClass::parse(&["A: g==A", "B: g==B"], &schema).unwrap();
        (d, groups)
    }

    fn by_id(values: Vec<f64>) -> FnPredictor<impl Fn(&FeatureRow) -> f64 + Send + Sync> {
        FnPredictor(move |r: &FeatureRow| values[r.values[0].as_num().unwrap() as usize])
    }

    #[test]
    fn ma_err_examples() {
        let (d, groups) = f1();
        let half = Constant(0.5);
        assert_eq!(ma_err(&half, &d, groups.require("A").unwrap()).unwrap(), -0.25);
        assert_eq!(ma_err(&half, &d, groups.require("ALL").unwrap()).unwrap(), 0.0);
        let exact = by_id(vec![1.0, 1.0, 0.0, 0.0]);
        for g in groups.iter() {
            assert_eq!(ma_err(&exact, &d, g).unwrap(), 0.0);
        }
        assert!(ma_err_normalized(&half, &d, groups.require("A").unwrap(), 0).is_err());
        assert_eq!(ma_err_group_normalized(&half, &d, groups.require("A").unwrap()).unwrap(), -0.5);
    }

    #[test]
    fn accuracy_examples() {
        let all = vec![true; 3];
        assert_eq!(accuracy_from_predictions(&[0.9, 0.2], &[1, 0], &all[..2], &0.5, "ALL").unwrap(), 1.0);
        assert_eq!(accuracy_from_predictions(&[0.9, 0.2], &[0, 1], &all[..2], &0.5, "ALL").unwrap(), 0.0);
        let acc = accuracy_from_predictions(&[0.6, 0.6, 0.4], &[1, 0, 0], &all, &0.5, "ALL").unwrap();
        assert_eq!(acc, 2.0 / 3.0);
        let err = accuracy_from_predictions(&[0.6], &[1], &[false], &0.5, "A").unwrap_err();
        assert!(matches!(err, Error::EmptyGroup(_)));
    }

    #[test]
    fn gamma_selection() {
        let grid: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        // Perfectly calibrated on two cells: p=0.2 with 20% positives, p=0.8 with 80% positives.
        let mut preds = Vec::new();
        let mut labels = Vec::new();
        for (p, pos) in [(0.2, 2), (0.8, 8)] {
            for k in 0..10 {
                preds.push(p);
                labels.push(u8::from(k < pos));
            }
        }
        let gamma = optimize_gamma_from_predictions(&preds, &labels, &grid).unwrap();
        // Every grid value in [0.2, 0.8) is a maximizer; the smallest wins.
        assert_eq!(gamma, 0.2);
        let ones = optimize_gamma_from_predictions(&[0.3, 0.6, 0.9], &[1, 1, 1], &grid).unwrap();
        assert_eq!(ones, 0.1);
        assert_eq!(optimize_gamma_from_predictions(&[0.3], &[1], &[0.5]).unwrap(), 0.5);
        assert!(optimize_gamma_from_predictions::<f64>(&[0.3], &[1], &[]).is_err());
        assert!(optimize_gamma_from_predictions::<f64>(&[], &[], &grid).is_err());
    }

    #[test]
    fn default_grid_has_101_points() {
        let g: Vec<f64> = default_gamma_grid();
        assert_eq!(g.len(), 101);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[100], 1.0);
    }

    #[test]
    fn robustness_identity_is_zero() {
        let (d, groups) = f1();
        let p = Constant(0.3);
        let checks = robustness_check(&p, &p, &d, &d, d.rows(), &groups, &0.01).unwrap();
        for c in checks {
            assert_eq!((c.lhs, c.label_term, c.sym_diff_term), (0.0, 0.0, 0.0));
            assert!(c.satisfied);
        }
    }

    #[test]
    fn robustness_label_flip_term() {
        let (d, groups) = f1();
        // flip row 2 (group B) from 0 to 1
        let d2 = d.with_labels(vec![1, 1, 1, 0]).unwrap();
        let p = Constant(0.5);
        let checks = robustness_check(&p, &p, &d, &d2, d.rows(), &groups, &0.0).unwrap();
        let b = checks.iter().find(|c| c.group == "B").unwrap();
        assert_eq!(b.label_term, 0.25);
        assert_eq!(b.sym_diff_term, 0.0);
        assert!(b.satisfied);
        let a = checks.iter().find(|c| c.group == "A").unwrap();
        assert_eq!(a.label_term, 0.0);
    }

    #[test]
    fn robustness_violation_detected() {
        let (d, groups) = f1();
        let checks = robustness_check(&Constant(0.0), &Constant(1.0), &d, &d, d.rows(), &groups, &0.01).unwrap();
        let all = checks.iter().find(|c| c.group == "ALL").unwrap();
        assert_eq!(all.lhs, 1.0);
        assert!(!all.satisfied);
        assert!(robustness_check(&Constant(0.0), &Constant(1.0), &d, &d, &[], &groups, &0.01).is_err());
    }

    #[test]
    fn distshift_terms() {
        let (d, groups) = f1();
        let dist = LabeledDistribution::<f64>::empirical(&d).unwrap();
        let p = Constant(0.4);
        let same = distshift_check(&p, &p, &dist, &dist, &groups, &0.05).unwrap();
        for c in &same {
            assert_eq!(c.bound(), 0.05);
            assert!(c.satisfied);
        }
        // Flip the label of row 2 (in B) with probability one.
        let mut pts = dist.points().to_vec();
        pts[2].1 = 1;
        let shifted = LabeledDistribution::new(pts).unwrap();
        let checks = distshift_check(&p, &p, &dist, &shifted, &groups, &0.0).unwrap();
        let b = checks.iter().find(|c| c.group == "B").unwrap();
        assert_eq!(b.label_term, 0.25);
        assert_eq!(b.sym_diff_term, 0.0);
    }

    #[test]
    fn distshift_covariate_term() {
        let schema = Arc::new(Schema::new(vec![Column::categorical("x", ["a", "b"])], "y").unwrap());
        let a = FeatureRow::new(vec![Value::Cat("a".into())]);
        let b = FeatureRow::new(vec![Value::Cat("b".into())]);
        let d = LabeledDistribution::new(vec![(a.clone(), 0, 0.5), (b, 0, 0.5)]).unwrap();
        let d2 = LabeledDistribution::new(vec![(a, 0, 1.0)]).unwrap();
        let groups = GroupClass::parse(&["a: x==a"], &schema).unwrap();
        let checks = distshift_check(&Constant(0.5), &Constant(0.5), &d, &d2, &groups, &0.0).unwrap();
        assert_eq!(checks[0].sym_diff_term, 0.5);
        assert_eq!(checks[1].sym_diff_term, 1.0);
    }
}
