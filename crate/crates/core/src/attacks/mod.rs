//! Data-corruption generators producing a corrupted copy S' of a training sample S.

pub mod kmeans;

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, FeatureRow, GroupClass, GroupPredicate};
use crate::error::{Error, Result};
use crate::learners::FeatureEncoder;
use crate::rng;

pub use kmeans::{distortion, kmeans, KMeans};

/// Which labels an attack may flip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    #[serde(alias = "0")]
    Zero,
    #[serde(alias = "1")]
    One,
    #[serde(alias = "*")]
    Any,
}

impl Target {
    pub fn matches(self, y: u8) -> bool {
        match self {
            Target::Zero => y == 0,
            Target::One => y == 1,
            Target::Any => true,
        }
    }
}

fn default_zero_target() -> Target {
    Target::Zero
}

fn default_clusters() -> usize {
    10
}

fn default_cluster_threshold() -> usize {
    5
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {x}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelChangeSpec {
    pub target: Target,
    pub modify_group: String,
    pub noise_ratio: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Flips labels of `modify_group` rows whose label matches `target`, each with
/// probability `noise_ratio`. One uniform draw is consumed per row of S in order,
/// so for a fixed seed the flipped set grows monotonically with the ratio.
pub fn label_change(s: &Dataset, spec: &LabelChangeSpec, groups: &GroupClass) -> Result<Dataset> {
    check_unit("noise_ratio", spec.noise_ratio)?;
    let g = groups.require(&spec.modify_group)?;
    let mut r = rng::stream(spec.seed, "label_change");
    let labels = s
        .iter()
        .map(|(row, y)| {
            let z: f64 = r.random();
            if z < spec.noise_ratio && spec.target.matches(y) && g.contains(row) {
                1 - y
            } else {
                y
            }
        })
        .collect();
    s.with_labels(labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataAdditionSpec {
    pub modify_group: String,
    pub target_group: String,
    /// Copies appended per selected auxiliary point.
    pub noise_factor: usize,
    #[serde(default = "default_clusters")]
    pub num_clusters: usize,
    #[serde(default = "default_cluster_threshold")]
    pub cluster_threshold: usize,
    #[serde(default = "default_zero_target")]
    pub target: Target,
    /// Columns used for clustering; all columns when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_columns: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataAddition {
    pub dataset: Dataset,
    /// Number of appended rows, counting replicas.
    pub additions: usize,
    /// Clusters whose target-group count met the threshold.
    pub qualifying_clusters: Vec<usize>,
}

fn check_disjoint(g: &GroupPredicate, h: &GroupPredicate, samples: &[&Dataset]) -> Result<()> {
    for d in samples {
        if let Some(row) = d.rows().iter().find(|r| g.contains(r) && h.contains(r)) {
            return Err(Error::InvalidParameter(format!(
                "groups `{}` and `{}` overlap (row `{}`)",
                g.name,
                h.name,
                row.canonical_key().replace('\x1f', ",")
            )));
        }
    }
    Ok(())
}

/// Clusters `aux`, and for each cluster holding at least `cluster_threshold`
/// target-group rows, appends every modify-group row of that cluster whose label
/// matches `target`, label flipped, `noise_factor` times. Additions follow S in
/// cluster order, then aux order.
pub fn data_addition(s: &Dataset, aux: &Dataset, spec: &DataAdditionSpec, groups: &GroupClass) -> Result<DataAddition> {
    if spec.noise_factor == 0 {
        return Err(Error::InvalidParameter("noise_factor must be at least 1".into()));
    }
    if aux.is_empty() {
        return Err(Error::EmptyDataset.context("auxiliary sample for data addition"));
    }
    if !s.schema().compatible(aux.schema()) {
        return Err(Error::Schema("auxiliary sample schema differs from the training sample".into()));
    }
    let c_mod = groups.require(&spec.modify_group)?;
    let c_tgt = groups.require(&spec.target_group)?;
    check_disjoint(c_mod, c_tgt, &[s, aux])?;

    let encoder = match &spec.cluster_columns {
        None => FeatureEncoder::fit(aux),
        Some(names) => {
            let keep = names.iter().map(|n| aux.schema().index_of(n)).collect::<Result<Vec<_>>>()?;
            FeatureEncoder::fit_subset(aux, &keep)
        }
    };
    let points = encoder.encode_all(aux.rows());
    let km = kmeans(&points, spec.num_clusters)?;

    let mut tgt_counts = vec![0usize; spec.num_clusters];
    for (row, &c) in aux.rows().iter().zip(&km.assignments) {
        if c_tgt.contains(row) {
            tgt_counts[c] += 1;
        }
    }
    let qualifying: Vec<usize> = (0..spec.num_clusters).filter(|&c| tgt_counts[c] >= spec.cluster_threshold).collect();
    let mut extra: Vec<(FeatureRow, u8)> = Vec::new();
    for &c in &qualifying {
        for ((row, y), &a) in aux.iter().zip(&km.assignments) {
            if a == c && c_mod.contains(row) && spec.target.matches(y) {
                extra.extend(std::iter::repeat_n((row.clone(), 1 - y), spec.noise_factor));
            }
        }
    }
    let additions = extra.len();
    Ok(DataAddition { dataset: s.extended(extra)?, additions, qualifying_clusters: qualifying })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeletionSpec {
    pub group: String,
    pub fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Removes ⌊fraction·|group ∩ S|⌋ group rows chosen uniformly without
/// replacement. Surviving rows keep their order.
pub fn deletion(s: &Dataset, spec: &DeletionSpec, groups: &GroupClass) -> Result<Dataset> {
    check_unit("fraction", spec.fraction)?;
    let g = groups.require(&spec.group)?;
    let members = g.member_indices(s.rows());
    let amount = (spec.fraction * members.len() as f64).floor() as usize;
    let mut r = rng::stream(spec.seed, "deletion");
    let mut drop = vec![false; s.len()];
    for k in sample(&mut r, members.len(), amount) {
        drop[members[k]] = true;
    }
    let keep: Vec<usize> = (0..s.len()).filter(|&i| !drop[i]).collect();
    Ok(s.subset(&keep))
}

/// A fully parameterized corruption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackSpec {
    LabelChange(LabelChangeSpec),
    DataAddition(DataAdditionSpec),
    Deletion(DeletionSpec),
}

impl AttackSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            AttackSpec::LabelChange(_) => "label_change",
            AttackSpec::DataAddition(_) => "data_addition",
            AttackSpec::Deletion(_) => "deletion",
        }
    }

    /// Produces S'. `aux` is required for data addition only.
    pub fn apply(&self, s: &Dataset, aux: Option<&Dataset>, groups: &GroupClass) -> Result<Dataset> {
        match self {
            AttackSpec::LabelChange(spec) => label_change(s, spec, groups),
            AttackSpec::DataAddition(spec) => {
                let aux = aux.ok_or_else(|| Error::Config("data addition needs an auxiliary sample".into()))?;
                Ok(data_addition(s, aux, spec, groups)?.dataset)
            }
            AttackSpec::Deletion(spec) => deletion(s, spec, groups),
        }
    }
}
