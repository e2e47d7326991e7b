//! Set-theoretic distances between samples and between distributions.

use std::collections::BTreeMap;

use crate::domain::dataset::{Dataset, FeatureRow};
use crate::domain::group::GroupPredicate;
use crate::error::{Error, Result};
use crate::numeric::{pairwise_sum, Scalar};

/// Allowed deviation of total probability mass from one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// `Σ_{x ∈ g} |μ_S(x) − μ_S2(x)|` where `μ` counts feature-row multiplicity.
/// Labels are ignored.
pub fn multiset_symmetric_difference(s: &Dataset, s2: &Dataset, g: &GroupPredicate) -> Result<usize> {
    if !s.schema().compatible(s2.schema()) {
        return Err(Error::Schema("datasets have different schemas".into()));
    }
    let mut counts: BTreeMap<String, (i64, i64)> = BTreeMap::new();
    for row in s.rows().iter().filter(|r| g.contains(r)) {
        counts.entry(row.canonical_key()).or_default().0 += 1;
    }
    for row in s2.rows().iter().filter(|r| g.contains(r)) {
        counts.entry(row.canonical_key()).or_default().1 += 1;
    }
    Ok(counts.values().map(|(a, b)| (a - b).unsigned_abs() as usize).sum())
}

/// A finitely supported distribution over feature rows.
#[derive(Debug, Clone)]
pub struct DiscreteDistribution<T> {
    points: Vec<(FeatureRow, T)>,
}

impl<T: Scalar> DiscreteDistribution<T> {
    pub fn new(points: Vec<(FeatureRow, T)>) -> Result<Self> {
        if points.iter().any(|(_, p)| *p < T::zero()) {
            return Err(Error::InvalidParameter("negative probability".into()));
        }
        let total = pairwise_sum(&points.iter().map(|(_, p)| p.clone()).collect::<Vec<_>>());
        if (total.as_f64() - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::NotNormalized(total.as_f64()));
        }
        Ok(DiscreteDistribution { points })
    }

    /// Uniform distribution over the rows (duplicates accumulate mass).
    pub fn uniform(rows: &[FeatureRow]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let w = T::one() / T::count(rows.len());
        DiscreteDistribution::new(rows.iter().map(|r| (r.clone(), w.clone())).collect())
    }

    pub fn points(&self) -> &[(FeatureRow, T)] {
        &self.points
    }

    /// Probability mass per canonical row key, merged over duplicate entries.
    pub fn mass_by_key(&self) -> BTreeMap<String, (FeatureRow, T)> {
        let mut out: BTreeMap<String, (FeatureRow, T)> = BTreeMap::new();
        for (row, p) in &self.points {
            let e = out.entry(row.canonical_key()).or_insert_with(|| (row.clone(), T::zero()));
            e.1 = e.1.clone() + p.clone();
        }
        out
    }
}

/// A finitely supported distribution over `(row, label)` pairs.
#[derive(Debug, Clone)]
pub struct LabeledDistribution<T> {
    points: Vec<(FeatureRow, u8, T)>,
}

impl<T: Scalar> LabeledDistribution<T> {
    pub fn new(points: Vec<(FeatureRow, u8, T)>) -> Result<Self> {
        if points.iter().any(|(_, y, _)| *y > 1) {
            return Err(Error::Data("non-binary label in distribution".into()));
        }
        if points.iter().any(|(_, _, p)| *p < T::zero()) {
            return Err(Error::InvalidParameter("negative probability".into()));
        }
        let total = pairwise_sum(&points.iter().map(|(_, _, p)| p.clone()).collect::<Vec<_>>());
        if (total.as_f64() - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::NotNormalized(total.as_f64()));
        }
        Ok(LabeledDistribution { points })
    }

    /// Empirical distribution `Uni(S)`.
    pub fn empirical(s: &Dataset) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let w = T::one() / T::count(s.len());
        LabeledDistribution::new(s.iter().map(|(r, y)| (r.clone(), y, w.clone())).collect())
    }

    pub fn points(&self) -> &[(FeatureRow, u8, T)] {
        &self.points
    }

    pub fn marginal(&self) -> DiscreteDistribution<T> {
        DiscreteDistribution { points: self.points.iter().map(|(r, _, p)| (r.clone(), p.clone())).collect() }
    }

    /// `E[y · 1[x ∈ g]]`.
    pub fn label_mass(&self, g: &GroupPredicate) -> T {
        let terms: Vec<T> = self
            .points
            .iter()
            .filter(|(r, y, _)| *y == 1 && g.contains(r))
            .map(|(_, _, p)| p.clone())
            .collect();
        pairwise_sum(&terms)
    }
}

/// `Σ_{x ∈ g} |Pr_D[x] − Pr_D2[x]|`, over the union of both supports.
pub fn restricted_statistical_distance<T: Scalar>(
    d: &DiscreteDistribution<T>,
    d2: &DiscreteDistribution<T>,
    g: &GroupPredicate,
) -> T {
    let a = d.mass_by_key();
    let b = d2.mass_by_key();
    let mut terms = Vec::new();
    for (key, (row, pa)) in &a {
        if g.contains(row) {
            let pb = b.get(key).map(|(_, p)| p.clone()).unwrap_or_else(T::zero);
            terms.push((pa.clone() - pb).abs());
        }
    }
    for (key, (row, pb)) in &b {
        if !a.contains_key(key) && g.contains(row) {
            terms.push(pb.abs());
        }
    }
    pairwise_sum(&terms)
}
