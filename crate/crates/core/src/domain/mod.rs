//! Datasets, subgroup predicates, predictors and sample distances.

pub mod dataset;
pub mod distance;
pub mod group;
pub mod predictor;

pub use dataset::{Column, ColumnKind, Dataset, FeatureRow, Schema, Value};
pub use distance::{multiset_symmetric_difference, restricted_statistical_distance, DiscreteDistribution, LabeledDistribution};
pub use group::{Atom, Comparator, GroupClass, GroupPredicate, ALL};
pub use predictor::{Constant, FnPredictor, Patch, PatchedPredictor, Predictor};

/// Membership bit vector of `g` over `rows`.
pub fn group_membership(g: &GroupPredicate, rows: &[FeatureRow]) -> Vec<bool> {
    g.membership(rows)
}
