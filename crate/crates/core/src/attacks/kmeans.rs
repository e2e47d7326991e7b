use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KMeans {
    pub assignments: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(p, center);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

fn assign(points: &[Vec<f64>], centers: &[Vec<f64>]) -> Vec<usize> {
    points.par_iter().map(|p| nearest(p, centers)).collect()
}

/// Sum of squared distances from each point to its assigned center.
pub fn distortion(points: &[Vec<f64>], assignments: &[usize], centers: &[Vec<f64>]) -> f64 {
    points.iter().zip(assignments).map(|(p, &c)| sq_dist(p, &centers[c])).sum()
}

fn farthest_point_init(points: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let mut centers = vec![points[0].clone()];
    let mut min_d: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[0])).collect();
    while centers.len() < k {
        let mut pick = 0;
        for (i, &d) in min_d.iter().enumerate() {
            if d > min_d[pick] {
                pick = i;
            }
        }
        let c = points[pick].clone();
        for (d, p) in min_d.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centers.push(c);
    }
    centers
}

/// Lloyd's algorithm from a farthest-point start: the first center is point 0
/// and each further center is the point farthest from the chosen ones (lowest
/// index on ties). Stops when assignments repeat or after 100 rounds. A cluster
/// that empties keeps its previous center.
pub fn kmeans(points: &[Vec<f64>], k: usize) -> Result<KMeans> {
    if k == 0 {
        return Err(Error::InvalidParameter("k-means needs k >= 1".into()));
    }
    let distinct: HashSet<Vec<u64>> = points.iter().map(|p| p.iter().map(|x| x.to_bits()).collect()).collect();
    if k > distinct.len() {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds the {} distinct points", distinct.len())));
    }
    let dim = points[0].len();
    let mut centers = farthest_point_init(points, k);
    let mut assignments = assign(points, &centers);
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignments) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(p) {
                *s += x;
            }
        }
        for ((center, sum), &count) in centers.iter_mut().zip(sums).zip(&counts) {
            if count > 0 {
                *center = sum.into_iter().map(|s| s / count as f64).collect();
            }
        }
        let next = assign(points, &centers);
        if next == assignments {
            break;
        }
        assignments = next;
    }
    Ok(KMeans { assignments, centers, iterations })
}
