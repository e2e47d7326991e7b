use std::cmp::Ordering;

use rayon::prelude::*;

use crate::domain::{Dataset, FeatureRow};
use crate::learners::encoding::FeatureEncoder;

/// Fraction of positive labels among the `k` nearest training rows
/// (Euclidean on encoded features, distance ties broken by row index).
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    encoder: FeatureEncoder,
    points: Vec<Vec<f64>>,
    labels: Vec<u8>,
    k: usize,
}

impl KnnModel {
    pub fn fit(d: &Dataset, k: usize) -> Self {
        let encoder = FeatureEncoder::fit(d);
        let points = encoder.encode_all(d.rows());
        KnnModel { encoder, points, labels: d.labels().to_vec(), k: k.max(1) }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Returns `(positive neighbours, neighbours considered)`.
    pub fn vote(&self, row: &FeatureRow) -> (usize, usize) {
        let q = self.encoder.encode(row);
        let mut dist: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let k = self.k.min(dist.len());
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, order);
        }
        let positives = dist[..k].iter().filter(|(_, i)| self.labels[*i] == 1).count();
        (positives, k)
    }

    pub fn votes(&self, rows: &[FeatureRow]) -> Vec<(usize, usize)> {
        rows.par_iter().map(|r| self.vote(r)).collect()
    }
}
