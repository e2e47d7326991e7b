use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, FeatureRow};
use crate::learners::encoding::FeatureEncoder;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    /// 0 grows until leaves are pure or unsplittable.
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: 8, min_leaf: 5 }
    }
}

impl TreeParams {
    pub fn unbounded() -> Self {
        TreeParams { max_depth: 0, min_leaf: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    /// `(positives, count)`
    Leaf(usize, usize),
    Split { feature: usize, threshold: f64, left: Box<Node>, right: Box<Node> },
}

/// Greedy Gini tree; a leaf predicts the label mean of its training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    encoder: FeatureEncoder,
    root: Node,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [u8],
    params: TreeParams,
}

fn gini_weighted(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    n as f64 * 2.0 * p * (1.0 - p)
}

impl Builder<'_> {
    fn build(&self, idx: &mut [usize], depth: usize) -> Node {
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.y[i] == 1).count();
        let depth_ok = self.params.max_depth == 0 || depth < self.params.max_depth;
        if pos == 0 || pos == n || !depth_ok || n < 2 * self.params.min_leaf.max(1) {
            return Node::Leaf(pos, n);
        }
        match self.best_split(idx, pos) {
            None => Node::Leaf(pos, n),
            Some((feature, threshold)) => {
                let (mut left, mut right): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
                Node::Split {
                    feature,
                    threshold,
                    left: Box::new(self.build(&mut left, depth + 1)),
                    right: Box::new(self.build(&mut right, depth + 1)),
                }
            }
        }
    }

    /// Lowest weighted Gini over all features and midpoint thresholds; ties keep
    /// the first candidate in (feature, threshold) order.
    fn best_split(&self, idx: &mut [usize], total_pos: usize) -> Option<(usize, f64)> {
        let n = idx.len();
        let min_leaf = self.params.min_leaf.max(1);
        let width = self.x.first().map_or(0, Vec::len);
        let mut best: Option<(f64, usize, f64)> = None;
        for f in 0..width {
            idx.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let mut left_pos = 0;
            for k in 0..n - 1 {
                if self.y[idx[k]] == 1 {
                    left_pos += 1;
                }
                let (lo, hi) = (self.x[idx[k]][f], self.x[idx[k + 1]][f]);
                let left_n = k + 1;
                if lo == hi || left_n < min_leaf || n - left_n < min_leaf {
                    continue;
                }
                let score = gini_weighted(left_pos, left_n) + gini_weighted(total_pos - left_pos, n - left_n);
                if best.is_none_or(|(s, _, _)| score < s) {
                    best = Some((score, f, lo + (hi - lo) / 2.0));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

impl TreeModel {
    pub fn fit(d: &Dataset, params: &TreeParams) -> Self {
        let encoder = FeatureEncoder::fit(d);
        let x = encoder.encode_all(d.rows());
        let builder = Builder { x: &x, y: d.labels(), params: *params };
        let mut idx: Vec<usize> = (0..d.len()).collect();
        let root = builder.build(&mut idx, 0);
        TreeModel { encoder, root }
    }

    /// `(positives, count)` of the leaf reached by `row`.
    pub fn leaf(&self, row: &FeatureRow) -> (usize, usize) {
        let x = self.encoder.encode(row);
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf(p, n) => return (*p, *n),
                Node::Split { feature, threshold, left, right } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        fn count(n: &Node) -> usize {
            match n {
                Node::Leaf(..) => 1,
                Node::Split { left, right, .. } => count(left) + count(right),
            }
        }
        count(&self.root)
    }
}
